#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pibound/types.hpp"

namespace pibound {

inline constexpr std::size_t kDefaultMaxEntries = 100'000'000;

/// Cost matrix of a balanced transport problem between two uniformly weighted
/// discrete measures (n source atoms of mass 1/n, m target atoms of mass 1/m).
/// Construction validates the matrix; the instance is immutable afterwards.
class DiscreteOtProblem {
 public:
  /// Throws NonFiniteCost for NaN/inf entries, DimensionMismatch for an empty
  /// matrix and SizeOverflow when n * m exceeds `max_entries`.
  explicit DiscreteOtProblem(RowMatrix cost, std::size_t max_entries = kDefaultMaxEntries);

  const RowMatrix& cost() const noexcept { return cost_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(cost_.rows()); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(cost_.cols()); }

 private:
  RowMatrix cost_;
};

struct PlanEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double mass = 0.0;
};

/// Sparse coupling with row sums 1/n and column sums 1/m.
struct TransportPlan {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<PlanEntry> entries;  // sorted by (i, j)
  double objective = 0.0;          // sum of mass * cost for the solved cost
  bool approximate = false;        // true for entropic solutions
  bool converged = true;
  double marginal_error = 0.0;     // L1 marginal violation before rounding (Sinkhorn only)
  std::size_t iterations = 0;      // simplex pivots or Sinkhorn sweeps

  std::size_t support_size() const;
  RowMatrix to_dense() const;
};

enum class PricingRule {
  BlockSearch,  // most negative reduced cost within a rotating block of arcs
  Dantzig,      // most negative reduced cost over all arcs
  Bland,        // lowest-index arc with negative reduced cost
};

struct ExactOptions {
  PricingRule pricing = PricingRule::BlockSearch;
  /// Switch to Bland's rule after this many pivots; 0 picks 50 * n * m.
  std::size_t bland_after = 0;
  std::size_t max_entries = kDefaultMaxEntries;
};

struct SinkhornOptions {
  double epsilon = 0.01;
  std::size_t max_iters = 10'000;
  double tol = 1e-9;
};

/// Network simplex on the complete bipartite graph. Supplies are scaled to
/// integers (m per source, n per target) so the returned vertex is exactly
/// feasible; masses are flows divided by n * m.
TransportPlan solve_exact(const DiscreteOtProblem& problem, const ExactOptions& options = {});

/// Log-domain Sinkhorn iterations followed by rounding onto the transport
/// polytope. `converged` is false when the marginal violation is still above
/// `tol` after `max_iters`; the best iterate is returned in that case.
TransportPlan solve_sinkhorn(const DiscreteOtProblem& problem, const SinkhornOptions& options);

/// Sum of mass(i, j) * values(i, j) over the plan support.
double evaluate_plan(const TransportPlan& plan, const RowMatrix& values);

/// Debug dump: header `i,j,mass`, one row per support entry.
void write_plan_csv(const TransportPlan& plan, std::ostream& out);

}  // namespace pibound
