#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rsrg/error.hpp"

namespace rsrg {

// Renormalization-group flow of the Potts coupling alpha. The pair potential
// is exp(alpha/2 * delta(a_i, a_j)); one block-spin step sums out the two
// off-diagonal spins a2, a4 of a plaquette and leaves an effective coupling
// between the diagonal pair a1, a3.

namespace detail {

inline void check_labels(int q) {
  if (q < 2) throw UsageError("label count q must be >= 2, got " + std::to_string(q));
}

inline void check_coupling(double alpha, const char* name) {
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw UsageError(std::string(name) + " must be finite and non-negative, got " +
                     std::to_string(alpha));
}

}  // namespace detail

/// One forward RG step:
///   alpha' = 4 ln((q - 1 + e^alpha) / (q - 2 + 2 e^(alpha/2))).
/// Evaluated with e^alpha factored out, so it is finite for any finite alpha.
inline double forward_alpha(double alpha, int q) {
  detail::check_labels(q);
  detail::check_coupling(alpha, "alpha");
  const double qm = static_cast<double>(q);
  const double num = 1.0 + (qm - 1.0) * std::exp(-alpha);
  const double den = 2.0 + (qm - 2.0) * std::exp(-0.5 * alpha);
  return 4.0 * (0.5 * alpha + std::log(num / den));
}

/// Closed-form inverse of forward_alpha: with t = e^(alpha/4),
///   alpha_prev = 2 ln(t + sqrt((t + q - 1)(t - 1))).
inline double inverse_alpha(double alpha_next, int q) {
  detail::check_labels(q);
  detail::check_coupling(alpha_next, "alpha");
  const double qm = static_cast<double>(q);
  // u = 1/t; the radicand is t^2 (1 + (q-1) u)(1 - u).
  const double u = std::exp(-0.25 * alpha_next);
  const double one_minus_u = -std::expm1(-0.25 * alpha_next);
  const double root = std::sqrt((1.0 + (qm - 1.0) * u) * one_minus_u);
  return 2.0 * (0.25 * alpha_next + std::log1p(root));
}

/// alpha^(0), ..., alpha^(R) of a coupling under repeated RG steps.
struct CouplingFlow {
  int q = 2;
  std::vector<double> alphas;  // alphas[r] == alpha^(r)

  unsigned steps() const { return alphas.empty() ? 0u : static_cast<unsigned>(alphas.size() - 1); }
  double fine() const { return alphas.front(); }
  double coarse() const { return alphas.back(); }

  // Largest |forward_alpha(alpha^(r-1)) - alpha^(r)| over the trajectory.
  double consistency_error() const {
    double worst = 0.0;
    for (std::size_t r = 1; r < alphas.size(); ++r)
      worst = std::max(worst, std::abs(forward_alpha(alphas[r - 1], q) - alphas[r]));
    return worst;
  }
};

inline CouplingFlow forward_chain(double alpha0, int q, unsigned steps) {
  CouplingFlow flow{q, {alpha0}};
  detail::check_labels(q);
  detail::check_coupling(alpha0, "alpha");
  for (unsigned r = 0; r < steps; ++r) flow.alphas.push_back(forward_alpha(flow.alphas.back(), q));
  return flow;
}

/// Runs the inverse recursion r = R, ..., 1 starting from the coarse estimate.
inline CouplingFlow inverse_chain(double alpha_coarse, int q, unsigned steps) {
  detail::check_labels(q);
  detail::check_coupling(alpha_coarse, "alpha");
  std::vector<double> alphas(steps + 1);
  alphas[steps] = alpha_coarse;
  for (unsigned r = steps; r > 0; --r) alphas[r - 1] = inverse_alpha(alphas[r], q);
  return {q, std::move(alphas)};
}

/// Brute-force block-spin step: enumerates the two decimated plaquette spins
/// for a1 == a3 and for a1 != a3 and returns 2 ln(S_agree / S_diff).
/// Independent of forward_alpha; used to check it.
inline double plaquette_oracle(double alpha, int q) {
  detail::check_labels(q);
  detail::check_coupling(alpha, "alpha");
  if (q > 64) throw UsageError("plaquette_oracle enumerates q^2 states; q must be <= 64");
  auto plaquette_sum = [&](int a1, int a3) {
    double sum = 0.0;
    for (int a2 = 0; a2 < q; ++a2)
      for (int a4 = 0; a4 < q; ++a4) {
        const int matches = (a1 == a2) + (a2 == a3) + (a1 == a4) + (a4 == a3);
        // Scaled by e^(-2 alpha), the largest possible weight.
        sum += std::exp(0.5 * alpha * (matches - 4));
      }
    return sum;
  };
  return 2.0 * std::log(plaquette_sum(0, 0) / plaquette_sum(0, 1));
}

/// Nontrivial fixed point alpha* of forward_alpha, by bisection of
/// forward_alpha(a) - a on [1e-6, 50].
inline double find_fixed_point(int q) {
  detail::check_labels(q);
  auto f = [q](double a) { return forward_alpha(a, q) - a; };
  double lo = 1e-6;
  double hi = 50.0;
  double flo = f(lo);
  const double fhi = f(hi);
  if ((flo < 0.0) == (fhi < 0.0))
    throw NumericError("no nontrivial fixed point in [1e-6, 50] for q=" + std::to_string(q));
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double root = std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
  if (std::abs(f(root)) >= 1e-10)
    throw NumericError("fixed point bisection did not reach 1e-10 for q=" + std::to_string(q));
  return root;
}

}  // namespace rsrg
