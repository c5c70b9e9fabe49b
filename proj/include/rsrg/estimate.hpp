#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rsrg/colormodel.hpp"
#include "rsrg/error.hpp"
#include "rsrg/grid.hpp"
#include "rsrg/lbp.hpp"

namespace rsrg {

inline constexpr double kAlphaMax = 10.0;

/// Neighbor agreement e^(alpha/2) / (e^(alpha/2) + q - 1) of the Potts prior at
/// its symmetric Bethe fixed point.
inline double prior_agreement(double alpha, int q) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  return 1.0 / (1.0 + (q - 1) * std::exp(-0.5 * alpha));
}

/// Unclamped inverse of prior_agreement: alpha = 2 ln((q - 1) A / (1 - A)).
inline double alpha_from_agreement(double agreement, int q) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  return 2.0 * (std::log(static_cast<double>(q - 1)) + std::log(agreement) - std::log1p(-agreement));
}

/// Moment-matching coupling update: agreement clamped into
/// (1/q + 1e-6, 1 - 1e-6), inverted through prior_agreement, result clamped to
/// [0, kAlphaMax].
inline double alpha_update(double agreement, int q) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  if (!(agreement > 0.0 && agreement < 1.0))
    throw UsageError("agreement must lie in (0, 1), got " + std::to_string(agreement));
  const double a = std::clamp(agreement, 1.0 / q + 1e-6, 1.0 - 1e-6);
  return std::clamp(alpha_from_agreement(a, q), 0.0, kAlphaMax);
}

struct EstimateOptions {
  LbpOptions lbp{};
  int max_em_iters = 100;
  double initial_alpha = 1.0;
  double alpha_tolerance = 1e-4;
  double mean_tolerance = 1e-4;
};

struct EmStep {
  double alpha;       // coupling after this iteration's update
  double mean_shift;  // largest per-label mean change (max norm)
  int lbp_iterations;
  bool lbp_converged;
};

struct EstimationResult {
  double alpha;  // alpha-hat on the lattice the image lives on
  GaussianLabelModel model;
  int iterations = 0;
  bool converged = false;
  std::vector<EmStep> trace;
};

inline double max_mean_shift(const GaussianLabelModel& a, const GaussianLabelModel& b) {
  double worst = 0.0;
  for (std::size_t xi = 0; xi < a.labels(); ++xi)
    worst = std::max(worst, (a.mean(xi) - b.mean(xi)).cwiseAbs().maxCoeff());
  return worst;
}

/// EM-style hyperparameter estimation on one lattice.
///
/// Each iteration runs LBP on the current posterior (E-step), refits the
/// Gaussians with the site beliefs as responsibilities (M-step) and moves
/// alpha to match the posterior's mean edge agreement. Converged once both
/// |delta alpha| and the largest mean shift fall below tolerance. Otherwise the
/// iterate with the smallest max(|delta alpha|, mean shift) is returned.
inline EstimationResult estimate_hyperparameters(const ColorImage& img, int q, std::uint64_t seed,
                                                 const EstimateOptions& opts = {}) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  if (opts.max_em_iters < 1) throw UsageError("max_em_iters must be >= 1");
  const SlotGraph graph = make_torus_graph(img.torus());
  LbpOptions lbp_opts = opts.lbp;
  lbp_opts.edge_beliefs = true;

  GaussianLabelModel model = init_model(img, q, seed);
  double alpha = std::clamp(opts.initial_alpha, 0.0, kAlphaMax);

  EstimationResult best{alpha, model, 0, false, {}};
  double best_step = std::numeric_limits<double>::infinity();
  std::vector<EmStep> trace;
  for (int it = 1; it <= opts.max_em_iters; ++it) {
    const BeliefSet beliefs = run_lbp(graph, log_unaries(img, model), alpha, lbp_opts);
    GaussianLabelModel refit = fit_weighted(img, beliefs.site, model);
    const double next_alpha = alpha_update(mean_agreement(beliefs), q);

    const double shift = max_mean_shift(refit, model);
    const double d_alpha = std::abs(next_alpha - alpha);
    trace.push_back({next_alpha, shift, beliefs.iterations, beliefs.converged});
    model = std::move(refit);
    alpha = next_alpha;

    const double step = std::max(d_alpha, shift);
    if (step < best_step) {
      best_step = step;
      best.alpha = alpha;
      best.model = model;
      best.iterations = it;
    }
    if (d_alpha < opts.alpha_tolerance && shift < opts.mean_tolerance) {
      return {alpha, std::move(model), it, true, std::move(trace)};
    }
  }
  best.trace = std::move(trace);
  return best;
}

}  // namespace rsrg
