#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsrg/colormodel.hpp"
#include "rsrg/estimate.hpp"
#include "rsrg/grid.hpp"
#include "rsrg/lbp.hpp"
#include "rsrg/rgflow.hpp"

namespace rsrg {

using Label = std::uint32_t;

class LabelField {
 public:
  LabelField(Torus torus, int q) : torus_(torus), q_(q), labels_(torus.num_sites(), 0) {
    if (q < 1) throw UsageError("label count must be positive");
  }
  LabelField(Torus torus, int q, std::vector<Label> labels)
      : torus_(torus), q_(q), labels_(std::move(labels)) {
    if (labels_.size() != torus_.num_sites()) throw UsageError("label count does not match torus");
    for (Label l : labels_)
      if (l >= static_cast<Label>(q_)) throw UsageError("label " + std::to_string(l) + " >= q");
  }

  const Torus& torus() const { return torus_; }
  int labels() const { return q_; }
  std::size_t size() const { return labels_.size(); }
  Label operator[](SiteIndex i) const { return labels_[i]; }
  void set(SiteIndex i, Label l) {
    if (l >= static_cast<Label>(q_)) throw UsageError("label " + std::to_string(l) + " >= q");
    labels_[i] = l;
  }
  const std::vector<Label>& values() const { return labels_; }

  friend bool operator==(const LabelField&, const LabelField&) = default;

 private:
  Torus torus_;
  int q_;
  std::vector<Label> labels_;
};

/// Wall-clock milliseconds per pipeline stage.
struct StageTimings {
  double coarsen = 0.0;
  double estimate = 0.0;
  double inverse_rg = 0.0;
  double final_lbp = 0.0;
  double decide = 0.0;
};

struct RunReport {
  int q = 0;
  unsigned rg_steps = 0;
  std::uint64_t seed = 0;
  std::size_t width = 0, height = 0;
  std::size_t coarse_width = 0, coarse_height = 0;
  double alpha_coarse = 0.0;
  CouplingFlow flow;
  double alpha_fine = 0.0;
  std::optional<GaussianLabelModel> model;
  int em_iterations = 0;
  bool em_converged = false;
  std::vector<EmStep> em_trace;
  int final_lbp_iterations = 0;
  bool final_lbp_converged = false;
  double final_lbp_residual = 0.0;
  StageTimings timings;
};

struct SegmentOptions {
  EstimateOptions estimate{};
  LbpOptions final_lbp{.tolerance = 1e-8, .max_iters = 1000, .damping = 0.5, .edge_beliefs = false};
};

struct Segmentation {
  LabelField labels;
  RunReport report;
};

/// Maximum posterior marginal decision; ties go to the smallest label.
inline LabelField mpm_decide(const Torus& torus, const BeliefSet& b) {
  if (b.site.sites() != torus.num_sites()) throw UsageError("beliefs do not match lattice");
  LabelField out(torus, static_cast<int>(b.q));
  for (std::size_t i = 0; i < b.site.sites(); ++i) {
    const auto row = b.site.row(i);
    out.set(i, static_cast<Label>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

/// Paints each site with its label's mean color, clamped to [0, 1].
inline ColorImage colorize(const LabelField& labels, const GaussianLabelModel& model) {
  if (static_cast<std::size_t>(labels.labels()) > model.labels())
    throw UsageError("label field uses more labels than the model has");
  ColorImage out(labels.torus());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Vec3& m = model.mean(labels[i]);
    out[i] = {std::clamp(m[0], 0.0, 1.0), std::clamp(m[1], 0.0, 1.0), std::clamp(m[2], 0.0, 1.0)};
  }
  return out;
}

namespace detail {

template <typename F>
auto timed(double& ms, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  auto result = f();
  ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace detail

/// Full segmentation: decimate by R renormalization steps, estimate
/// hyperparameters on the coarse lattice, carry alpha back to full resolution
/// with the inverse RG chain, run LBP on the full posterior with the coarse
/// Gaussian model unchanged and take the MPM labeling. R = 0 estimates
/// directly on the full image.
inline Segmentation segment(const ColorImage& img, int q, unsigned rg_steps, std::uint64_t seed,
                            const SegmentOptions& opts = {}) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  RunReport report;
  report.q = q;
  report.rg_steps = rg_steps;
  report.seed = seed;
  report.width = img.torus().width();
  report.height = img.torus().height();

  const ColorImage coarse = detail::timed(report.timings.coarsen, [&] {
    return extract_coarse_image(img, coarse_sites(img.torus(), rg_steps));
  });
  report.coarse_width = coarse.torus().width();
  report.coarse_height = coarse.torus().height();

  EstimationResult est = detail::timed(report.timings.estimate, [&] {
    return estimate_hyperparameters(coarse, q, seed, opts.estimate);
  });
  report.alpha_coarse = est.alpha;
  report.em_iterations = est.iterations;
  report.em_converged = est.converged;
  report.em_trace = est.trace;

  report.flow = detail::timed(report.timings.inverse_rg,
                              [&] { return inverse_chain(est.alpha, q, rg_steps); });
  report.alpha_fine = report.flow.fine();

  const BeliefSet beliefs = detail::timed(report.timings.final_lbp, [&] {
    return run_lbp(img.torus(), log_unaries(img, est.model), report.alpha_fine, opts.final_lbp);
  });
  report.final_lbp_iterations = beliefs.iterations;
  report.final_lbp_converged = beliefs.converged;
  report.final_lbp_residual = beliefs.residual;

  LabelField labels = detail::timed(report.timings.decide, [&] { return mpm_decide(img.torus(), beliefs); });
  report.model = std::move(est.model);
  return {std::move(labels), std::move(report)};
}

}  // namespace rsrg
