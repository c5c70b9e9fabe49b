#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rsrg/error.hpp"
#include "rsrg/grid.hpp"

namespace rsrg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Regularization added to every fitted covariance (intensities in [0, 1]).
inline constexpr double kCovarianceFloor = 1e-6;

inline Vec3 to_vec(const Color& c) { return {c[0], c[1], c[2]}; }
inline Color to_color(const Vec3& v) { return {v[0], v[1], v[2]}; }

/// Row-major table of per-site probability vectors over q labels.
class SiteProbabilities {
 public:
  SiteProbabilities() = default;
  SiteProbabilities(std::size_t sites, std::size_t q) : q_(q), values_(sites * q, 0.0) {}

  std::size_t sites() const { return q_ == 0 ? 0 : values_.size() / q_; }
  std::size_t labels() const { return q_; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * q_, q_}; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * q_, q_}; }
  double operator()(std::size_t i, std::size_t xi) const { return values_[i * q_ + xi]; }
  double& operator()(std::size_t i, std::size_t xi) { return values_[i * q_ + xi]; }

  friend bool operator==(const SiteProbabilities&, const SiteProbabilities&) = default;

 private:
  std::size_t q_ = 0;
  std::vector<double> values_;
};

/// Per-label trivariate Gaussian color model g(d | xi).
///
/// Each covariance is validated at construction: it must be symmetric and
/// admit a Cholesky factorization. The factor and the log normalizer are
/// cached so that log_density never forms an explicit inverse.
class GaussianLabelModel {
 public:
  GaussianLabelModel(std::vector<Vec3> means, std::vector<Mat3> covariances)
      : means_(std::move(means)), covariances_(std::move(covariances)) {
    if (means_.size() != covariances_.size())
      throw UsageError("means and covariances must have the same length");
    if (means_.size() < 2) throw UsageError("model needs at least 2 labels");
    factors_.reserve(means_.size());
    log_norms_.reserve(means_.size());
    for (std::size_t xi = 0; xi < means_.size(); ++xi) {
      const Mat3& c = covariances_[xi];
      if (!means_[xi].allFinite() || !c.allFinite())
        throw ModelError("label " + std::to_string(xi) + ": non-finite parameters");
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + c.cwiseAbs().maxCoeff()))
        throw ModelError("label " + std::to_string(xi) + ": covariance is not symmetric");
      Eigen::LLT<Mat3> llt(c);
      if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
        throw ModelError("label " + std::to_string(xi) + ": covariance is not positive definite");
      const Mat3 lower = llt.matrixL();
      const double log_det = 2.0 * lower.diagonal().array().log().sum();
      factors_.push_back(lower);
      log_norms_.push_back(-0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det));
    }
  }

  std::size_t labels() const { return means_.size(); }
  const Vec3& mean(std::size_t xi) const { return means_.at(xi); }
  const Mat3& covariance(std::size_t xi) const { return covariances_.at(xi); }
  // Lower Cholesky factor L with L L^T = C(xi).
  const Mat3& factor(std::size_t xi) const { return factors_.at(xi); }

  /// ln g(d | xi) = -1/2 ln det(2 pi C) - 1/2 (d - m)^T C^-1 (d - m).
  double log_density(const Vec3& d, std::size_t xi) const {
    if (xi >= labels()) throw UsageError("label " + std::to_string(xi) + " out of range");
    const Vec3 y = factors_[xi].triangularView<Eigen::Lower>().solve(d - means_[xi]);
    return log_norms_[xi] - 0.5 * y.squaredNorm();
  }
  double log_density(const Color& d, std::size_t xi) const { return log_density(to_vec(d), xi); }

  const std::vector<Vec3>& means() const { return means_; }
  const std::vector<Mat3>& covariances() const { return covariances_; }

  friend bool operator==(const GaussianLabelModel& a, const GaussianLabelModel& b) {
    return a.means_ == b.means_ && a.covariances_ == b.covariances_;
  }

 private:
  std::vector<Vec3> means_;
  std::vector<Mat3> covariances_;
  std::vector<Mat3> factors_;
  std::vector<double> log_norms_;
};

/// Per-site, per-label log g(d_i | xi), the unary term of the posterior.
inline SiteProbabilities log_unaries(const ColorImage& img, const GaussianLabelModel& model) {
  SiteProbabilities out(img.size(), model.labels());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Vec3 d = to_vec(img[i]);
    for (std::size_t xi = 0; xi < model.labels(); ++xi) out(i, xi) = model.log_density(d, xi);
  }
  return out;
}

/// Weighted maximum-likelihood refit (the M-step).
///
/// Labels whose total weight falls below 1e-6 * |V| keep the parameters of
/// `previous`. Means are accumulated as offsets from the label's
/// highest-weight color, so a label whose members share one color gets that
/// color back exactly.
inline GaussianLabelModel fit_weighted(const ColorImage& img, const SiteProbabilities& resp,
                                       const GaussianLabelModel& previous,
                                       double epsilon = kCovarianceFloor) {
  const std::size_t q = previous.labels();
  if (resp.labels() != q || resp.sites() != img.size())
    throw UsageError("responsibility table shape does not match image and model");
  for (std::size_t i = 0; i < resp.sites(); ++i) {
    double s = 0.0;
    for (double p : resp.row(i)) s += p;
    if (!(std::abs(s - 1.0) <= 1e-9))
      throw UsageError("responsibilities at site " + std::to_string(i) + " sum to " +
                       std::to_string(s) + ", not 1");
  }

  std::vector<Vec3> means = previous.means();
  std::vector<Mat3> covs = previous.covariances();
  const double min_weight = 1e-6 * static_cast<double>(img.size());
  for (std::size_t xi = 0; xi < q; ++xi) {
    double total = 0.0;
    std::size_t ref_site = 0;
    double ref_weight = -1.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double w = resp(i, xi);
      total += w;
      if (w > ref_weight) {
        ref_weight = w;
        ref_site = i;
      }
    }
    if (total < min_weight) continue;

    const Vec3 ref = to_vec(img[ref_site]);
    Vec3 offset = Vec3::Zero();
    for (std::size_t i = 0; i < img.size(); ++i) offset += resp(i, xi) * (to_vec(img[i]) - ref);
    const Vec3 mean = ref + offset / total;

    Mat3 cov = Mat3::Zero();
    for (std::size_t i = 0; i < img.size(); ++i) {
      const Vec3 dev = to_vec(img[i]) - mean;
      cov.noalias() += resp(i, xi) * dev * dev.transpose();
    }
    cov /= total;
    cov = 0.5 * (cov + cov.transpose()).eval();
    cov += epsilon * Mat3::Identity();
    means[xi] = mean;
    covs[xi] = cov;
  }
  return GaussianLabelModel(std::move(means), std::move(covs));
}

/// Deterministic k-means initialization.
///
/// Seeding is farthest-point: the first center is the lexicographically
/// smallest color, each further center is the site farthest (squared
/// Euclidean) from all chosen centers, ties to the lowest site index. Then 20
/// Lloyd iterations with assignment ties going to the lower label. Empty
/// clusters keep their center and get covariance epsilon*I.
inline GaussianLabelModel init_model(const ColorImage& img, int q, std::uint64_t seed,
                                     double epsilon = kCovarianceFloor) {
  (void)seed;  // seeding is fully deterministic; kept for interface stability
  if (q < 2) throw UsageError("label count q must be >= 2");
  const std::size_t n = img.size();
  const auto labels = static_cast<std::size_t>(q);

  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (img[i] < img[first]) first = i;
  std::vector<Vec3> centers{to_vec(img[first])};

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = (to_vec(img[i]) - centers[0]).squaredNorm();
  while (centers.size() < labels) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (nearest[i] > nearest[far]) far = i;
    centers.push_back(to_vec(img[far]));
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], (to_vec(img[i]) - centers.back()).squaredNorm());
  }

  std::vector<std::size_t> assign(n, 0);
  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 d = to_vec(img[i]);
      std::size_t best = 0;
      double best_dist = (d - centers[0]).squaredNorm();
      for (std::size_t k = 1; k < labels; ++k) {
        const double dist = (d - centers[k]).squaredNorm();
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      assign[i] = best;
    }
  };

  for (int iter = 0; iter < 20; ++iter) {
    assign_all();
    std::vector<Vec3> offset(labels, Vec3::Zero());
    std::vector<std::size_t> count(labels, 0);
    std::vector<std::size_t> ref(labels, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = assign[i];
      if (ref[k] == n) ref[k] = i;
      offset[k] += to_vec(img[i]) - to_vec(img[ref[k]]);
      ++count[k];
    }
    for (std::size_t k = 0; k < labels; ++k)
      if (count[k] > 0) centers[k] = to_vec(img[ref[k]]) + offset[k] / static_cast<double>(count[k]);
  }
  assign_all();

  std::vector<Mat3> covs(labels, Mat3::Zero());
  std::vector<std::size_t> count(labels, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 dev = to_vec(img[i]) - centers[assign[i]];
    covs[assign[i]].noalias() += dev * dev.transpose();
    ++count[assign[i]];
  }
  for (std::size_t k = 0; k < labels; ++k) {
    if (count[k] > 0) covs[k] /= static_cast<double>(count[k]);
    covs[k] += epsilon * Mat3::Identity();
  }
  return GaussianLabelModel(std::move(centers), std::move(covs));
}

}  // namespace rsrg
