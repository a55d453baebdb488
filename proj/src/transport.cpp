#include "sgmm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgmm/error.hpp"

namespace sgmm {

namespace {

// Primal network simplex on the complete bipartite graph sources -> sinks plus
// an artificial root. Real arcs are uncapacitated with lower bound zero; the
// initial basis routes every supply and demand through the root on Big-M
// artificial arcs. Leaving arcs follow the strongly feasible tree rule, which
// rules out cycling on degenerate pivots.
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost)
      : n_(supply.size()), m_(demand.size()), cost_(cost), root_(n_ + m_), nodes_(n_ + m_ + 1) {
    real_arcs_ = n_ * m_;
    arcs_ = real_arcs_ + n_ + m_;
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, c);
    art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_);

    flow_.assign(arcs_, 0.0);
    in_tree_.assign(arcs_, 0);
    adj_.assign(nodes_, {});
    parent_.assign(nodes_, kNone);
    pred_.assign(nodes_, kNone);
    up_.assign(nodes_, 0);
    depth_.assign(nodes_, 0);
    pot_.assign(nodes_, 0.0);

    for (std::size_t x = 0; x < n_ + m_; ++x) {
      const std::size_t a = real_arcs_ + x;
      flow_[a] = x < n_ ? supply[x] : demand[x - n_];
      in_tree_[a] = 1;
      adj_[x].push_back(a);
      adj_[root_].push_back(a);
    }
    rebuild_tree();
    block_ = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(arcs_))));
  }

  TransportSolution run() {
    TransportSolution sol;
    const std::size_t max_pivots = 64 * arcs_ + 1000;
    std::size_t entering = kNone;
    while (find_entering(entering)) {
      pivot(entering);
      if (++sol.pivots > max_pivots) {
        throw Error(ErrorKind::DivergenceDetected, "transport simplex exceeded its pivot budget");
      }
    }
    for (std::size_t a = 0; a < real_arcs_; ++a) {
      if (flow_[a] > 0.0) {
        sol.plan.push_back({a / m_, a % m_, flow_[a]});
        sol.cost += flow_[a] * cost_[a];
      }
    }
    return sol;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t tail(std::size_t a) const {
    if (a < real_arcs_) return a / m_;
    const std::size_t x = a - real_arcs_;
    return x < n_ ? x : root_;
  }
  std::size_t head(std::size_t a) const {
    if (a < real_arcs_) return n_ + a % m_;
    const std::size_t x = a - real_arcs_;
    return x < n_ ? root_ : x;
  }
  double arc_cost(std::size_t a) const { return a < real_arcs_ ? cost_[a] : art_cost_; }

  // Block search pricing: scan blocks of arcs, take the most negative
  // reduced cost of the first block that has one.
  bool find_entering(std::size_t& entering) {
    double best = 0.0;
    std::size_t in_block = 0;
    for (std::size_t k = 0; k < arcs_; ++k) {
      const std::size_t a = next_arc_;
      next_arc_ = next_arc_ + 1 == arcs_ ? 0 : next_arc_ + 1;
      if (!in_tree_[a]) {
        const std::size_t s = tail(a), t = head(a);
        const double r = arc_cost(a) + pot_[s] - pot_[t];
        const double tol = kRelTol * (1.0 + std::abs(pot_[s]) + std::abs(pot_[t]) + arc_cost(a));
        if (r < -tol && r < best) {
          best = r;
          entering = a;
        }
      }
      if (++in_block == block_) {
        if (best < 0.0) return true;
        in_block = 0;
      }
    }
    return best < 0.0;
  }

  void pivot(std::size_t entering) {
    const std::size_t first = tail(entering), second = head(entering);
    std::size_t a = first, b = second;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        a = parent_[a];
      } else {
        b = parent_[b];
      }
    }
    const std::size_t join = a;

    // Cycle orientation: entering arc first -> second, then second up to
    // join, then join down to first. Among ties keep the last blocking arc
    // met when walking the cycle from the join.
    double delta = std::numeric_limits<double>::infinity();
    std::size_t out = kNone;
    for (std::size_t u = first; u != join; u = parent_[u]) {
      if (up_[u] && std::max(flow_[pred_[u]], 0.0) < delta) {
        delta = std::max(flow_[pred_[u]], 0.0);
        out = u;
      }
    }
    for (std::size_t u = second; u != join; u = parent_[u]) {
      if (!up_[u] && std::max(flow_[pred_[u]], 0.0) <= delta) {
        delta = std::max(flow_[pred_[u]], 0.0);
        out = u;
      }
    }
    if (out == kNone) throw Error(ErrorKind::DivergenceDetected, "transport problem is unbounded");

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (std::size_t u = first; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? -delta : delta;
      for (std::size_t u = second; u != join; u = parent_[u]) flow_[pred_[u]] += up_[u] ? delta : -delta;
    }
    const std::size_t leaving = pred_[out];
    flow_[leaving] = 0.0;
    in_tree_[leaving] = 0;
    in_tree_[entering] = 1;
    detach(tail(leaving), leaving);
    detach(head(leaving), leaving);
    adj_[first].push_back(entering);
    adj_[second].push_back(entering);
    rebuild_tree();
  }

  void detach(std::size_t node, std::size_t arc) {
    auto& list = adj_[node];
    auto it = std::find(list.begin(), list.end(), arc);
    *it = list.back();
    list.pop_back();
  }

  // Re-root the spanning tree at the artificial root and recompute potentials
  // so that every tree arc has zero reduced cost.
  void rebuild_tree() {
    queue_.clear();
    queue_.push_back(root_);
    parent_[root_] = kNone;
    pred_[root_] = kNone;
    depth_[root_] = 0;
    pot_[root_] = 0.0;
    for (std::size_t q = 0; q < queue_.size(); ++q) {
      const std::size_t x = queue_[q];
      for (std::size_t a : adj_[x]) {
        if (a == pred_[x]) continue;
        const std::size_t s = tail(a), t = head(a);
        const std::size_t y = s == x ? t : s;
        parent_[y] = x;
        pred_[y] = a;
        up_[y] = s == y;
        depth_[y] = depth_[x] + 1;
        pot_[y] = up_[y] ? pot_[x] - arc_cost(a) : pot_[x] + arc_cost(a);
        queue_.push_back(y);
      }
    }
  }

  static constexpr double kRelTol = 64.0 * std::numeric_limits<double>::epsilon();

  std::size_t n_, m_;
  std::span<const double> cost_;
  std::size_t root_, nodes_;
  std::size_t real_arcs_ = 0, arcs_ = 0;
  double art_cost_ = 0.0;
  std::size_t block_ = 0;
  std::size_t next_arc_ = 0;

  std::vector<double> flow_;
  std::vector<char> in_tree_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, pred_;
  std::vector<char> up_;
  std::vector<std::size_t> depth_;
  std::vector<double> pot_;
  std::vector<std::size_t> queue_;
};

}  // namespace

TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost) {
  if (supply.empty() || demand.empty()) throw Error(ErrorKind::InvalidArgument, "transport needs nonempty sides");
  if (cost.size() != supply.size() * demand.size()) {
    throw Error(ErrorKind::ShapeMismatch, "cost matrix must be supply x demand");
  }
  for (double x : supply) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, "supplies must be finite, >= 0");
  }
  for (double x : demand) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorKind::InvalidArgument, "demands must be finite, >= 0");
  }
  for (double c : cost) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "costs must be finite, >= 0");
  }
  // Zero-mass nodes would start as zero-flow arcs pointing at the root, which
  // breaks strong feasibility of the initial tree; they carry nothing anyway.
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < supply.size(); ++i) {
    if (supply[i] > 0.0) rows.push_back(i);
  }
  for (std::size_t j = 0; j < demand.size(); ++j) {
    if (demand[j] > 0.0) cols.push_back(j);
  }
  if (rows.empty() || cols.empty()) return {};
  std::vector<double> s(rows.size()), d(cols.size()), c(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) s[i] = supply[rows[i]];
  for (std::size_t j = 0; j < cols.size(); ++j) d[j] = demand[cols[j]];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) c[i * cols.size() + j] = cost[rows[i] * demand.size() + cols[j]];
  }
  TransportSolution sol = NetworkSimplex(s, d, c).run();
  for (auto& arc : sol.plan) {
    arc.source = rows[arc.source];
    arc.sink = cols[arc.sink];
  }
  return sol;
}

}  // namespace sgmm
