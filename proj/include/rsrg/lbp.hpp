#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rsrg/colormodel.hpp"
#include "rsrg/error.hpp"
#include "rsrg/grid.hpp"

namespace rsrg {

/// Pairwise graph in slot form. Every neighboring pair of sites contributes
/// one slot at each endpoint; slot t belongs to site owner[t], points at
/// neighbor[t], and reverse[t] is the partner slot on the other endpoint.
/// Parallel lattice edges between the same pair share one slot whose
/// multiplicity counts them, so the pair factor is exp(multiplicity * alpha/2 * delta).
/// `edges` lists, for every lattice edge (parallel ones included), the slot
/// owned by its first endpoint.
struct SlotGraph {
  std::size_t sites = 0;
  std::vector<std::size_t> offsets;  // slots of site i: [offsets[i], offsets[i+1])
  std::vector<std::size_t> owner;
  std::vector<std::size_t> neighbor;
  std::vector<std::size_t> reverse;
  std::vector<int> multiplicity;
  std::vector<std::size_t> edges;

  std::size_t num_slots() const { return neighbor.size(); }
  std::size_t num_edges() const { return edges.size(); }
};

// Lattice edges are (i, E) and (i, S) for every site, 2*W*H in total. When
// W == 2 (or H == 2) the E and W neighbors coincide and the two edges merge
// into one slot of multiplicity 2.
inline SlotGraph make_torus_graph(const Torus& t) {
  SlotGraph g;
  g.sites = t.num_sites();
  const bool merge_x = t.width() == 2;
  const bool merge_y = t.height() == 2;
  // Per-site layout: slot position of each lattice direction.
  std::array<std::size_t, kSlots> pos{};
  std::size_t degree = 0;
  pos[kEast] = degree++;
  pos[kWest] = merge_x ? pos[kEast] : degree++;
  pos[kSouth] = degree++;
  pos[kNorth] = merge_y ? pos[kSouth] : degree++;

  g.offsets.resize(g.sites + 1);
  g.owner.resize(g.sites * degree);
  g.neighbor.resize(g.sites * degree);
  g.reverse.resize(g.sites * degree);
  g.multiplicity.assign(g.sites * degree, 0);
  for (std::size_t i = 0; i < g.sites; ++i) {
    g.offsets[i] = degree * i;
    for (std::size_t s = 0; s < kSlots; ++s) {
      const std::size_t j = t.neighbor(i, s);
      const std::size_t slot = degree * i + pos[s];
      g.owner[slot] = i;
      g.neighbor[slot] = j;
      g.reverse[slot] = degree * j + pos[opposite(s)];
      ++g.multiplicity[slot];
    }
    g.edges.push_back(degree * i + pos[kEast]);
    g.edges.push_back(degree * i + pos[kSouth]);
  }
  g.offsets[g.sites] = g.sites * degree;
  return g;
}

/// Path 0 - 1 - ... - (n-1). Tree-structured, so sum-product is exact on it.
inline SlotGraph make_chain_graph(std::size_t n) {
  if (n < 2) throw UsageError("chain needs at least 2 sites");
  SlotGraph g;
  g.sites = n;
  g.offsets.push_back(0);
  // Site i's slots: [left if i > 0], [right if i < n-1].
  auto left_slot = [](std::size_t i) { return 2 * i - 1; };
  auto right_slot = [](std::size_t i) { return i == 0 ? 0 : 2 * i; };
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      g.owner.push_back(i);
      g.neighbor.push_back(i - 1);
      g.reverse.push_back(right_slot(i - 1));
      g.multiplicity.push_back(1);
    }
    if (i + 1 < n) {
      g.owner.push_back(i);
      g.neighbor.push_back(i + 1);
      g.reverse.push_back(left_slot(i + 1));
      g.multiplicity.push_back(1);
      g.edges.push_back(g.owner.size() - 1);
    }
    g.offsets.push_back(g.owner.size());
  }
  return g;
}

struct LbpOptions {
  double tolerance = 1e-8;
  int max_iters = 1000;
  double damping = 0.5;
  bool edge_beliefs = true;
};

/// Output of loopy BP. Edge belief e is a row-major q x q table indexed
/// (label of owner, label of neighbor) of the graph's canonical slot e.
struct BeliefSet {
  std::size_t q = 0;
  SiteProbabilities site;
  std::vector<double> edge;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;

  std::size_t num_edges() const { return q == 0 ? 0 : edge.size() / (q * q); }
  double edge_belief(std::size_t e, std::size_t xi, std::size_t zeta) const {
    return edge[(e * q + xi) * q + zeta];
  }
};

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// out(zeta) = ln sum_xi exp(h(xi) + half_alpha * delta(xi, zeta)), shifted so
// max(out) == 0. For the Potts kernel this is ln(S + (e^half_alpha - 1) p(zeta)).
inline void potts_message(const double* h, std::size_t q, double half_alpha, double* out,
                          double* scratch) {
  double hmax = h[0];
  for (std::size_t k = 1; k < q; ++k) hmax = std::max(hmax, h[k]);
  double sum = 0.0;
  for (std::size_t k = 0; k < q; ++k) {
    scratch[k] = std::exp(h[k] - hmax);
    sum += scratch[k];
  }
  const double boost = std::expm1(half_alpha);
  double omax = -std::numeric_limits<double>::infinity();
  if (std::isfinite(boost)) {
    for (std::size_t k = 0; k < q; ++k) {
      out[k] = std::log(sum + boost * scratch[k]);
      omax = std::max(omax, out[k]);
    }
  } else {
    for (std::size_t k = 0; k < q; ++k) {
      const double rest = std::max(sum - scratch[k], 0.0);
      out[k] = log_add_exp(std::log(rest), half_alpha + std::log(scratch[k]));
      omax = std::max(omax, out[k]);
    }
  }
  for (std::size_t k = 0; k < q; ++k) out[k] -= omax;
}

inline void normalize_exp(double* values, std::size_t n) {
  double vmax = values[0];
  for (std::size_t k = 1; k < n; ++k) vmax = std::max(vmax, values[k]);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    values[k] = std::exp(values[k] - vmax);
    sum += values[k];
  }
  for (std::size_t k = 0; k < n; ++k) values[k] /= sum;
}

}  // namespace detail

/// Sum-product loopy BP with Potts pair potential exp(alpha/2 * delta) and
/// arbitrary log-unaries, in log space.
///
/// Flooding schedule: every message of sweep n+1 is computed from sweep n.
/// New log-messages are damped, m <- (1 - damping) m_new + damping m_old,
/// and shifted so their max entry is 0. Messages start at 0 (uniform). Stops
/// when the largest absolute message change is below tolerance, or after
/// max_iters sweeps with converged = false.
inline BeliefSet run_lbp(const SlotGraph& g, const SiteProbabilities& unaries, double alpha,
                         const LbpOptions& opts = {}) {
  const std::size_t q = unaries.labels();
  if (q < 2) throw UsageError("LBP needs at least 2 labels");
  if (unaries.sites() != g.sites) throw UsageError("unary table does not match graph size");
  if (!std::isfinite(alpha) || alpha < 0.0) throw UsageError("alpha must be finite and >= 0");
  if (!(opts.damping >= 0.0 && opts.damping < 1.0)) throw UsageError("damping must be in [0, 1)");
  if (!(opts.tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (opts.max_iters < 1) throw UsageError("max_iters must be >= 1");
  for (std::size_t i = 0; i < g.sites; ++i)
    for (double u : unaries.row(i))
      if (!std::isfinite(u)) throw UsageError("non-finite unary at site " + std::to_string(i));

  const double half_alpha = 0.5 * alpha;
  const std::size_t slots = g.num_slots();
  std::vector<double> msg(slots * q, 0.0);
  std::vector<double> next(slots * q, 0.0);
  std::vector<double> total(g.sites * q);
  std::vector<double> cavity(q), scratch(q), fresh(q);

  // total[i] = unary_i + sum of all messages into i.
  auto accumulate_totals = [&](const std::vector<double>& m) {
    for (std::size_t i = 0; i < g.sites; ++i) {
      double* ti = &total[i * q];
      const auto u = unaries.row(i);
      std::copy(u.begin(), u.end(), ti);
      for (std::size_t t = g.offsets[i]; t < g.offsets[i + 1]; ++t)
        for (std::size_t k = 0; k < q; ++k) ti[k] += m[t * q + k];
    }
  };

  BeliefSet out;
  out.q = q;
  int iter = 0;
  double residual = std::numeric_limits<double>::infinity();
  while (iter < opts.max_iters) {
    accumulate_totals(msg);
    residual = 0.0;
    for (std::size_t t = 0; t < slots; ++t) {
      // Message into owner[t] from neighbor[t]: the sender's cavity excludes
      // what it received over this same edge.
      const std::size_t j = g.neighbor[t];
      const std::size_t r = g.reverse[t];
      for (std::size_t k = 0; k < q; ++k) cavity[k] = total[j * q + k] - msg[r * q + k];
      detail::potts_message(cavity.data(), q, half_alpha * g.multiplicity[t], fresh.data(),
                            scratch.data());
      double* dst = &next[t * q];
      const double* old = &msg[t * q];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < q; ++k) {
        dst[k] = (1.0 - opts.damping) * fresh[k] + opts.damping * old[k];
        mx = std::max(mx, dst[k]);
      }
      for (std::size_t k = 0; k < q; ++k) {
        dst[k] -= mx;
        residual = std::max(residual, std::abs(dst[k] - old[k]));
      }
    }
    msg.swap(next);
    ++iter;
    if (residual < opts.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.iterations = iter;
  out.residual = residual;

  accumulate_totals(msg);
  out.site = SiteProbabilities(g.sites, q);
  for (std::size_t i = 0; i < g.sites; ++i) {
    auto row = out.site.row(i);
    std::copy(&total[i * q], &total[i * q] + q, row.begin());
    detail::normalize_exp(row.data(), q);
  }

  if (opts.edge_beliefs) {
    out.edge.resize(g.num_edges() * q * q);
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      const std::size_t t = g.edges[e];
      const std::size_t i = g.owner[t];
      const std::size_t j = g.neighbor[t];
      const std::size_t r = g.reverse[t];
      const double coupling = half_alpha * g.multiplicity[t];
      double* be = &out.edge[e * q * q];
      for (std::size_t a = 0; a < q; ++a) {
        const double hi = total[i * q + a] - msg[t * q + a];
        for (std::size_t b = 0; b < q; ++b)
          be[a * q + b] = hi + total[j * q + b] - msg[r * q + b] + (a == b ? coupling : 0.0);
      }
      detail::normalize_exp(be, q * q);
    }
  }
  return out;
}

inline BeliefSet run_lbp(const Torus& t, const SiteProbabilities& unaries, double alpha,
                         const LbpOptions& opts = {}) {
  return run_lbp(make_torus_graph(t), unaries, alpha, opts);
}

/// Average over edges of sum_xi b_ij(xi, xi).
inline double mean_agreement(const BeliefSet& b) {
  const std::size_t edges = b.num_edges();
  if (edges == 0) throw UsageError("mean_agreement needs edge beliefs");
  double sum = 0.0;
  for (std::size_t e = 0; e < edges; ++e)
    for (std::size_t xi = 0; xi < b.q; ++xi) sum += b.edge_belief(e, xi, xi);
  return sum / static_cast<double>(edges);
}

/// Largest deviation of any site or edge belief sum from 1.
inline double normalization_error(const BeliefSet& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.site.sites(); ++i) {
    double s = 0.0;
    for (double p : b.site.row(i)) s += p;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  const std::size_t qq = b.q * b.q;
  for (std::size_t e = 0; e < b.num_edges(); ++e) {
    double s = 0.0;
    for (std::size_t k = 0; k < qq; ++k) s += b.edge[e * qq + k];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

/// Largest |sum_zeta b_ij(xi, zeta) - b_i(xi)| and |sum_xi b_ij(xi, zeta) - b_j(zeta)|.
inline double edge_site_inconsistency(const SlotGraph& g, const BeliefSet& b) {
  double worst = 0.0;
  for (std::size_t e = 0; e < b.num_edges(); ++e) {
    const std::size_t i = g.owner[g.edges[e]];
    const std::size_t j = g.neighbor[g.edges[e]];
    for (std::size_t a = 0; a < b.q; ++a) {
      double row = 0.0, col = 0.0;
      for (std::size_t c = 0; c < b.q; ++c) {
        row += b.edge_belief(e, a, c);
        col += b.edge_belief(e, c, a);
      }
      worst = std::max({worst, std::abs(row - b.site(i, a)), std::abs(col - b.site(j, a))});
    }
  }
  return worst;
}

}  // namespace rsrg
