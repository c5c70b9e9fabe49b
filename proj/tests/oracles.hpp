#pragma once

// Brute-force reference computations used only by tests. Nothing here calls
// into the message-passing code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace rsrg::oracle {

// Periodic lattice edges built directly from coordinates: (x,y)-(x+1,y) and
// (x,y)-(x,y+1), both with wrap. 2*W*H edges, parallel edges kept.
inline std::vector<std::pair<std::size_t, std::size_t>> torus_edges(std::size_t w, std::size_t h) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      e.emplace_back(y * w + x, y * w + (x + 1) % w);
      e.emplace_back(y * w + x, ((y + 1) % h) * w + x);
    }
  return e;
}

// Unnormalized log weight of every configuration, index = sum a_i q^i.
inline std::vector<double> log_weights(std::size_t n, std::size_t q,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                       const std::vector<std::vector<double>>& unary, double alpha) {
  std::size_t states = 1;
  for (std::size_t i = 0; i < n; ++i) states *= q;
  std::vector<double> out(states);
  std::vector<std::size_t> a(n);
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t rest = s;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rest % q;
      rest /= q;
    }
    double lw = 0.0;
    for (std::size_t i = 0; i < n; ++i) lw += unary.empty() ? 0.0 : unary[i][a[i]];
    for (auto [i, j] : edges) lw += a[i] == a[j] ? 0.5 * alpha : 0.0;
    out[s] = lw;
  }
  return out;
}

inline std::vector<double> probabilities(const std::vector<double>& lw) {
  const double m = *std::max_element(lw.begin(), lw.end());
  std::vector<double> p(lw.size());
  double z = 0.0;
  for (std::size_t s = 0; s < lw.size(); ++s) z += p[s] = std::exp(lw[s] - m);
  for (double& v : p) v /= z;
  return p;
}

// Exact site marginals by enumeration of all q^n states.
inline std::vector<std::vector<double>> exact_marginals(
    std::size_t n, std::size_t q, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
    const std::vector<std::vector<double>>& unary, double alpha) {
  const auto p = probabilities(log_weights(n, q, edges, unary, alpha));
  std::vector<std::vector<double>> marg(n, std::vector<double>(q, 0.0));
  for (std::size_t s = 0; s < p.size(); ++s) {
    std::size_t rest = s;
    for (std::size_t i = 0; i < n; ++i) {
      marg[i][rest % q] += p[s];
      rest /= q;
    }
  }
  return marg;
}

// Forward-backward on a path with Potts coupling, in linear space with
// per-step rescaling.
inline std::vector<std::vector<double>> chain_marginals(const std::vector<std::vector<double>>& unary,
                                                        double alpha) {
  const std::size_t n = unary.size(), q = unary[0].size();
  const double boost = std::exp(0.5 * alpha);
  std::vector<std::vector<double>> phi(n, std::vector<double>(q));
  for (std::size_t i = 0; i < n; ++i) {
    const double m = *std::max_element(unary[i].begin(), unary[i].end());
    for (std::size_t k = 0; k < q; ++k) phi[i][k] = std::exp(unary[i][k] - m);
  }
  auto pass = [&](std::vector<double> in, std::size_t i) {
    std::vector<double> out(q, 0.0);
    for (std::size_t b = 0; b < q; ++b)
      for (std::size_t a = 0; a < q; ++a) out[b] += in[a] * phi[i][a] * (a == b ? boost : 1.0);
    double s = 0.0;
    for (double v : out) s += v;
    for (double& v : out) v /= s;
    return out;
  };
  std::vector<std::vector<double>> fwd(n, std::vector<double>(q, 1.0)), bwd = fwd;
  for (std::size_t i = 1; i < n; ++i) fwd[i] = pass(fwd[i - 1], i - 1);
  for (std::size_t i = n - 1; i-- > 0;) bwd[i] = pass(bwd[i + 1], i + 1);
  std::vector<std::vector<double>> marg(n, std::vector<double>(q));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < q; ++k) s += marg[i][k] = fwd[i][k] * phi[i][k] * bwd[i][k];
    for (double& v : marg[i]) v /= s;
  }
  return marg;
}

}  // namespace rsrg::oracle
