#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sgmm {

struct TransportArc {
  std::size_t source = 0;
  std::size_t sink = 0;
  double flow = 0.0;
};

struct TransportSolution {
  double cost = 0.0;
  std::vector<TransportArc> plan;  // nonzero flows only
  std::size_t pivots = 0;
};

// Exact minimum-cost transportation problem between nonnegative supplies and
// demands with a dense nonnegative cost matrix (row-major, supply x demand).
// Totals should agree; any rounding residue is left on artificial arcs and
// excluded from the cost. Solved by the primal network simplex method on a
// strongly feasible spanning tree.
TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  std::span<const double> cost);

}  // namespace sgmm
