#include "pibound/pi_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "numeric.hpp"
#include "parallel.hpp"
#include "pibound/errors.hpp"
#include "pibound/random.hpp"
#include "pibound/synthetic.hpp"

namespace pibound {

std::size_t ObservedSample::n0() const { return static_cast<std::size_t>(std::count(w.begin(), w.end(), 0)); }
std::size_t ObservedSample::n1() const { return static_cast<std::size_t>(std::count(w.begin(), w.end(), 1)); }

void ObservedSample::validate() const {
  const auto rows_y = static_cast<std::size_t>(y.rows());
  const auto rows_z = static_cast<std::size_t>(z.rows());
  if (rows_y != w.size() || rows_z != w.size()) {
    throw Error(ErrorCode::DimensionMismatch, "w, y and z must have the same number of rows");
  }
  if (y.cols() < 1 || z.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "need at least one outcome and one covariate");
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] != 0 && w[k] != 1) {
      throw Error(ErrorCode::NonBinaryTreatment, "row " + std::to_string(k + 1) + " has w = " + std::to_string(w[k]));
    }
  }
  if (!y.allFinite() || !z.allFinite()) throw Error(ErrorCode::NonFiniteInput, "sample contains NaN or infinity");
}

std::pair<GroupData, GroupData> split_groups(const ObservedSample& sample) {
  sample.validate();
  const auto n = static_cast<Eigen::Index>(sample.n0());
  const auto m = static_cast<Eigen::Index>(sample.n1());
  if (n == 0 || m == 0) {
    throw Error(ErrorCode::EmptyGroup, std::string(n == 0 ? "control" : "treated") + " group has no rows");
  }
  GroupData g0{RowMatrix(n, sample.dy()), RowMatrix(n, sample.dz())};
  GroupData g1{RowMatrix(m, sample.dy()), RowMatrix(m, sample.dz())};
  Eigen::Index a = 0;
  Eigen::Index b = 0;
  for (std::size_t k = 0; k < sample.rows(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    GroupData& g = sample.w[k] == 0 ? g0 : g1;
    Eigen::Index& at = sample.w[k] == 0 ? a : b;
    g.y.row(at) = sample.y.row(row);
    g.z.row(at) = sample.z.row(row);
    ++at;
  }
  return {std::move(g0), std::move(g1)};
}

namespace {

void require_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::EtaNegative, "eta must be finite and >= 0");
}

TransportPlan solve(RowMatrix cost, const SolverChoice& solver) {
  const DiscreteOtProblem problem(std::move(cost), solver.exact.max_entries);
  return solver.kind == SolverChoice::Kind::Exact ? solve_exact(problem, solver.exact)
                                                  : solve_sinkhorn(problem, solver.sinkhorn);
}

// Solves with H = s * h + eta * P (s = +1 lower, -1 upper) and reads off the
// h-part and the penalty part under the optimal plan.
BoundEstimate solve_side(const RowMatrix& h, const RowMatrix& penalty, double eta, Side side,
                         const SolverChoice& solver) {
  const double s = side == Side::Lower ? 1.0 : -1.0;
  RowMatrix cost = s * h;
  if (eta != 0.0) cost.noalias() += eta * penalty;
  BoundEstimate out;
  out.plan = solve(std::move(cost), solver);
  out.value = evaluate_plan(out.plan, h);
  out.penalty = eta == 0.0 ? 0.0 : eta * evaluate_plan(out.plan, penalty);
  return out;
}

std::pair<GroupData, GroupData> prepared_groups(const ObservedSample& sample, bool standardize) {
  auto groups = split_groups(sample);
  if (standardize) standardize_covariates(groups.first, groups.second);
  return groups;
}

}  // namespace

BoundEstimate estimate_bound(const GroupData& group0, const GroupData& group1, const CostSpec& spec, double eta,
                             Side side, const SolverChoice& solver) {
  require_eta(eta);
  const RowMatrix h = build_cost_matrix(spec, group0, group1);
  const RowMatrix penalty = build_penalty_matrix(group0, group1);
  return solve_side(h, penalty, eta, side, solver);
}

BoundEstimate estimate_bound(const ObservedSample& sample, const CostSpec& spec, double eta, Side side,
                             const EstimatorOptions& options) {
  require_eta(eta);
  const auto [g0, g1] = prepared_groups(sample, options.standardize_z);
  return estimate_bound(g0, g1, spec, eta, side, options.solver);
}

std::vector<PIBound> sweep(const GroupData& group0, const GroupData& group1, const CostSpec& spec,
                           const EtaGrid& grid, const SolverChoice& solver, SideSelection sides) {
  const RowMatrix h = build_cost_matrix(spec, group0, group1);
  const RowMatrix penalty = build_penalty_matrix(group0, group1);

  std::vector<Side> wanted;
  if (sides != SideSelection::Upper) wanted.push_back(Side::Lower);
  if (sides != SideSelection::Lower) wanted.push_back(Side::Upper);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<PIBound> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out[k].eta = grid[k];
    out[k].lower = out[k].upper = out[k].lower_penalty = out[k].upper_penalty = nan;
  }
  detail::parallel_for(grid.size() * wanted.size(), [&](std::size_t task) {
    const std::size_t k = task / wanted.size();
    const Side side = wanted[task % wanted.size()];
    const BoundEstimate est = solve_side(h, penalty, grid[k], side, solver);
    PIBound& b = out[k];
    if (side == Side::Lower) {
      b.lower = est.value;
      b.lower_penalty = est.penalty;
      b.plan_support_lower = est.plan.support_size();
    } else {
      b.upper = est.value;
      b.upper_penalty = est.penalty;
      b.plan_support_upper = est.plan.support_size();
    }
  });
  return out;
}

std::vector<PIBound> sweep(const ObservedSample& sample, const CostSpec& spec, const EtaGrid& grid,
                           const EstimatorOptions& options, SideSelection sides) {
  const auto [g0, g1] = prepared_groups(sample, options.standardize_z);
  return sweep(g0, g1, spec, grid, options.solver, sides);
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidConfig, "slope needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw Error(ErrorCode::InvalidConfig, "log-log slope needs positive values");
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::InvalidConfig, "sizes must not all be equal");
  return sxy / sxx;
}

// Depends only on (seed, N, replicate), so any subset of the size grid
// reproduces the same draws.
std::uint64_t rate_replicate_seed(std::uint64_t seed, std::size_t n, std::size_t rep) {
  return CounterRng(seed, n).bits(rep);
}

RateResult rate_diagnostic(const GaussianLinearSpec& model, const CostSpec& spec, double eta,
                           const std::vector<std::size_t>& sizes, std::size_t seeds, std::uint64_t seed,
                           const SolverChoice& solver) {
  require_eta(eta);
  if (sizes.empty() || seeds == 0) throw Error(ErrorCode::InvalidConfig, "rate diagnostic needs sizes and seeds >= 1");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1 || (k > 0 && sizes[k] <= sizes[k - 1])) {
      throw Error(ErrorCode::InvalidConfig, "sizes must be positive and strictly increasing");
    }
  }
  RateResult result;
  result.truth = v_ip_gaussian(model, spec, eta);

  std::vector<double> errors(sizes.size() * seeds);
  // Largest problems first keeps the tail of a threaded run short.
  detail::parallel_for(errors.size(), [&](std::size_t task) {
    const std::size_t si = sizes.size() - 1 - task / seeds;
    const std::size_t rep = task % seeds;
    const std::size_t n = sizes[si];
    SynthConfig config{model, n, n, rate_replicate_seed(seed, n, rep)};
    const auto [g0, g1] = split_groups(generate(config));
    const double v = estimate_bound(g0, g1, spec, eta, Side::Lower, solver).value;
    errors[si * seeds + rep] = std::abs(v - result.truth);
  });

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    detail::CompensatedSum sum;
    for (std::size_t r = 0; r < seeds; ++r) sum.add(errors[si * seeds + r]);
    const double mean = sum.value() / static_cast<double>(seeds);
    double var = 0.0;
    for (std::size_t r = 0; r < seeds; ++r) var += (errors[si * seeds + r] - mean) * (errors[si * seeds + r] - mean);
    var = seeds > 1 ? var / static_cast<double>(seeds - 1) : 0.0;
    result.points.push_back({sizes[si], mean, std::sqrt(var / static_cast<double>(seeds))});
    xs.push_back(static_cast<double>(sizes[si]));
    ys.push_back(mean);
  }
  if (sizes.size() >= 2 && std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; })) {
    result.slope = log_log_slope(xs, ys);
  } else {
    result.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace pibound
