#pragma once

#include "rsrg/colormodel.hpp"
#include "rsrg/error.hpp"
#include "rsrg/estimate.hpp"
#include "rsrg/grid.hpp"
#include "rsrg/io.hpp"
#include "rsrg/lbp.hpp"
#include "rsrg/pipeline.hpp"
#include "rsrg/rgflow.hpp"
#include "rsrg/synth.hpp"
