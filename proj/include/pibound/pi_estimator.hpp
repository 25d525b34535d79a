#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pibound/cost_model.hpp"
#include "pibound/gaussian_oracle.hpp"
#include "pibound/ot_core.hpp"

namespace pibound {

/// Rows of (w, y, z): w[k] in {0, 1}, y.row(k) the outcome, z.row(k) the covariates.
struct ObservedSample {
  std::vector<int> w;
  RowMatrix y;
  RowMatrix z;

  std::size_t rows() const { return w.size(); }
  std::size_t n0() const;
  std::size_t n1() const;
  Eigen::Index dy() const { return y.cols(); }
  Eigen::Index dz() const { return z.cols(); }
  /// Consistent shapes, binary w, finite entries, dy and dz >= 1.
  void validate() const;
};

/// Control rows then treated rows, each in input order. Throws EmptyGroup.
std::pair<GroupData, GroupData> split_groups(const ObservedSample& sample);

enum class Side { Lower, Upper };

struct SolverChoice {
  enum class Kind { Exact, Sinkhorn } kind = Kind::Exact;
  ExactOptions exact;
  SinkhornOptions sinkhorn;
};

struct EstimatorOptions {
  SolverChoice solver;
  bool standardize_z = false;
};

struct BoundEstimate {
  double value = 0.0;    // sum of plan * h
  double penalty = 0.0;  // sum of plan * eta * ||z0 - z1||^2
  TransportPlan plan;
};

BoundEstimate estimate_bound(const ObservedSample& sample, const CostSpec& spec, double eta, Side side,
                             const EstimatorOptions& options = {});
BoundEstimate estimate_bound(const GroupData& group0, const GroupData& group1, const CostSpec& spec, double eta,
                             Side side, const SolverChoice& solver = {});

struct PIBound {
  double eta = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double lower_penalty = 0.0;
  double upper_penalty = 0.0;
  std::size_t plan_support_lower = 0;
  std::size_t plan_support_upper = 0;
};

enum class SideSelection { Lower, Upper, Both };

/// One record per grid point in grid order. A side that was not requested is
/// reported as NaN with zero support.
std::vector<PIBound> sweep(const ObservedSample& sample, const CostSpec& spec, const EtaGrid& grid,
                           const EstimatorOptions& options = {}, SideSelection sides = SideSelection::Both);
std::vector<PIBound> sweep(const GroupData& group0, const GroupData& group1, const CostSpec& spec,
                           const EtaGrid& grid, const SolverChoice& solver = {},
                           SideSelection sides = SideSelection::Both);

struct RatePoint {
  std::size_t n = 0;
  double mean_abs_error = 0.0;
  double std_error = 0.0;  // of the mean, across seeds
};

struct RateResult {
  double truth = 0.0;  // population V_ip(eta)
  std::vector<RatePoint> points;
  double slope = 0.0;  // least-squares slope of log(mean error) on log(N)
};

/// For every N draws `seeds` balanced samples (n = m = N) from the Gaussian
/// linear model and averages |V_ip,N,N(eta) - V_ip(eta)| for the lower bound.
RateResult rate_diagnostic(const GaussianLinearSpec& model, const CostSpec& spec, double eta,
                           const std::vector<std::size_t>& sizes, std::size_t seeds, std::uint64_t seed,
                           const SolverChoice& solver = {});

/// Seed of replicate `rep` at size n in rate_diagnostic.
std::uint64_t rate_replicate_seed(std::uint64_t seed, std::size_t n, std::size_t rep);

/// Ordinary least-squares slope of log(y) on log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pibound
