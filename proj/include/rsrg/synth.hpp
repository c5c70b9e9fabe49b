#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "rsrg/colormodel.hpp"
#include "rsrg/grid.hpp"
#include "rsrg/pipeline.hpp"

namespace rsrg {

/// Portable random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the standard library distributions are
/// not, so uniforms and normals are derived here:
///   uniform(): top 53 bits of one draw, times 2^-53, in [0, 1)
///   normal():  Box-Muller on two uniforms, the second value cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint32_t below(std::uint32_t n) {
    const auto k = static_cast<std::uint32_t>(uniform() * n);
    return k < n ? k : n - 1;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Single-site heat-bath sampler for the Potts prior on a torus.
/// P(a_i = xi | rest) is proportional to exp(alpha/2 * #{neighbor slots with label xi}).
class GibbsSampler {
 public:
  GibbsSampler(Torus torus, double alpha, int q, Rng& rng)
      : torus_(torus), half_alpha_(0.5 * alpha), q_(q), rng_(rng),
        labels_(torus.num_sites(), 0), weights_(static_cast<std::size_t>(q)) {
    if (q < 2) throw UsageError("label count q must be >= 2");
    if (!std::isfinite(alpha) || alpha < 0.0) throw UsageError("alpha must be finite and >= 0");
  }

  // i.i.d. uniform labels.
  void randomize() {
    for (Label& l : labels_) l = rng_.below(static_cast<std::uint32_t>(q_));
  }

  // One raster-order pass over all sites.
  void sweep() {
    std::array<int, kSlots> count_of{};
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      int best = 0;
      std::array<Label, kSlots> nb{};
      for (std::size_t s = 0; s < kSlots; ++s) nb[s] = labels_[torus_.neighbor(i, s)];
      for (std::size_t s = 0; s < kSlots; ++s) {
        count_of[s] = 0;
        for (std::size_t u = 0; u < kSlots; ++u) count_of[s] += nb[u] == nb[s];
        best = std::max(best, count_of[s]);
      }
      // Weights relative to the most popular label to stay in range.
      std::fill(weights_.begin(), weights_.end(), std::exp(-half_alpha_ * best));
      for (std::size_t s = 0; s < kSlots; ++s)
        weights_[nb[s]] = std::exp(half_alpha_ * (count_of[s] - best));
      double total = 0.0;
      for (double w : weights_) total += w;
      double u = rng_.uniform() * total;
      Label pick = static_cast<Label>(q_ - 1);
      for (std::size_t k = 0; k < weights_.size(); ++k) {
        if (u < weights_[k]) {
          pick = static_cast<Label>(k);
          break;
        }
        u -= weights_[k];
      }
      labels_[i] = pick;
    }
  }

  const std::vector<Label>& labels() const { return labels_; }
  LabelField field() const { return LabelField(torus_, q_, labels_); }

 private:
  Torus torus_;
  double half_alpha_;
  int q_;
  Rng& rng_;
  std::vector<Label> labels_;
  std::vector<double> weights_;
};

/// Draws a labeling from the Potts prior: uniform random start, then `sweeps`
/// raster Gibbs sweeps.
inline LabelField sample_potts(const Torus& torus, double alpha, int q, std::uint64_t seed,
                               int sweeps) {
  if (sweeps < 1) throw UsageError("sweeps must be >= 1");
  Rng rng(seed);
  GibbsSampler sampler(torus, alpha, q, rng);
  sampler.randomize();
  for (int s = 0; s < sweeps; ++s) sampler.sweep();
  return sampler.field();
}

/// d_i = m(a_i) + L(a_i) z with z standard normal, L the covariance factor.
inline ColorImage sample_image(const LabelField& labels, const GaussianLabelModel& model,
                               std::uint64_t seed) {
  if (static_cast<std::size_t>(labels.labels()) > model.labels())
    throw UsageError("label field uses more labels than the model has");
  Rng rng(seed);
  ColorImage out(labels.torus());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Vec3 z;
    for (int k = 0; k < 3; ++k) z[k] = rng.normal();
    const Label l = labels[i];
    out[i] = to_color(model.mean(l) + model.factor(l) * z);
  }
  return out;
}

/// Well-separated default colors. q == 2 gives grays 0.2 / 0.8; q <= 8 walks
/// the corners of the cube [0.2, 0.8]^3 starting with those two grays; larger
/// q falls back to evenly spaced grays in [0.1, 0.9].
inline std::vector<Vec3> default_palette(int q) {
  if (q < 2) throw UsageError("label count q must be >= 2");
  static constexpr std::array<std::array<int, 3>, 8> corners{
      {{0, 0, 0}, {1, 1, 1}, {1, 0, 0}, {0, 1, 1}, {0, 1, 0}, {1, 0, 1}, {0, 0, 1}, {1, 1, 0}}};
  std::vector<Vec3> out;
  if (q <= 8) {
    for (int k = 0; k < q; ++k) {
      const auto& c = corners[static_cast<std::size_t>(k)];
      out.emplace_back(0.2 + 0.6 * c[0], 0.2 + 0.6 * c[1], 0.2 + 0.6 * c[2]);
    }
  } else {
    for (int k = 0; k < q; ++k) {
      const double v = 0.1 + 0.8 * k / (q - 1);
      out.emplace_back(v, v, v);
    }
  }
  return out;
}

/// Isotropic model sigma^2 I around the given means.
inline GaussianLabelModel isotropic_model(std::vector<Vec3> means, double sigma) {
  std::vector<Mat3> covs(means.size(), sigma * sigma * Mat3::Identity());
  return GaussianLabelModel(std::move(means), std::move(covs));
}

}  // namespace rsrg
