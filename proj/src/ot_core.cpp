#include "pibound/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "network_simplex.hpp"
#include "numeric.hpp"
#include "pibound/errors.hpp"

namespace pibound {

DiscreteOtProblem::DiscreteOtProblem(RowMatrix cost, std::size_t max_entries) : cost_(std::move(cost)) {
  if (cost_.rows() < 1 || cost_.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "cost matrix must have at least one row and one column");
  }
  const auto n = static_cast<std::size_t>(cost_.rows());
  const auto m = static_cast<std::size_t>(cost_.cols());
  if (n > max_entries / m) {
    throw Error(ErrorCode::SizeOverflow, std::to_string(n) + " x " + std::to_string(m) +
                                             " cost matrix exceeds the cap of " + std::to_string(max_entries) +
                                             " entries");
  }
  const double* data = cost_.data();
  for (std::size_t a = 0; a < n * m; ++a) {
    if (!std::isfinite(data[a])) {
      throw Error(ErrorCode::NonFiniteCost,
                  "entry (" + std::to_string(a / m) + ", " + std::to_string(a % m) + ") is not finite");
    }
  }
}

std::size_t TransportPlan::support_size() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const PlanEntry& e) { return e.mass > 0.0; }));
}

RowMatrix TransportPlan::to_dense() const {
  RowMatrix dense = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (const auto& e : entries) dense(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) += e.mass;
  return dense;
}

TransportPlan solve_exact(const DiscreteOtProblem& problem, const ExactOptions& options) {
  if (problem.n() > options.max_entries / problem.m()) {
    throw Error(ErrorCode::SizeOverflow, "problem exceeds the configured entry cap");
  }
  detail::NetworkSimplex simplex(problem.cost(), options);
  simplex.run();

  TransportPlan plan;
  plan.n = problem.n();
  plan.m = problem.m();
  plan.iterations = simplex.pivots();
  const double total = static_cast<double>(plan.n) * static_cast<double>(plan.m);
  const auto flows = simplex.flows();
  plan.entries.reserve(flows.size());
  for (const auto& f : flows) {
    plan.entries.push_back(
        {static_cast<std::size_t>(f.i), static_cast<std::size_t>(f.j), static_cast<double>(f.flow) / total});
  }
  plan.objective = evaluate_plan(plan, problem.cost());
  return plan;
}

namespace {

double log_sum_exp(const double* values, std::size_t count) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < count; ++k) hi = std::max(hi, values[k]);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) sum += std::exp(values[k] - hi);
  return hi + std::log(sum);
}

// Round an approximately feasible coupling onto the transport polytope by
// scaling down overfull rows and columns and spreading the missing mass as a
// rank-one correction.
void round_to_polytope(RowMatrix& plan, double row_mass, double col_mass) {
  Vector rows = plan.rowwise().sum();
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    if (rows(i) > row_mass) plan.row(i) *= row_mass / rows(i);
  }
  Vector cols = plan.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < plan.cols(); ++j) {
    if (cols(j) > col_mass) plan.col(j) *= col_mass / cols(j);
  }
  const Vector row_gap = (Vector::Constant(plan.rows(), row_mass) - plan.rowwise().sum()).cwiseMax(0.0);
  const Vector col_gap =
      (Vector::Constant(plan.cols(), col_mass) - plan.colwise().sum().transpose()).cwiseMax(0.0);
  const double gap = row_gap.sum();
  if (gap > 0.0) plan += row_gap * col_gap.transpose() / gap;
}

}  // namespace

TransportPlan solve_sinkhorn(const DiscreteOtProblem& problem, const SinkhornOptions& options) {
  if (!(options.epsilon > 0.0) || !std::isfinite(options.epsilon)) {
    throw Error(ErrorCode::InvalidConfig, "Sinkhorn epsilon must be positive and finite");
  }
  const auto n = static_cast<Eigen::Index>(problem.n());
  const auto m = static_cast<Eigen::Index>(problem.m());
  const RowMatrix& cost = problem.cost();
  const double eps = options.epsilon;
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));

  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  Vector best_f = f;
  Vector best_g = g;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> scratch(static_cast<std::size_t>(std::max(n, m)));

  std::size_t iter = 0;
  for (; iter < options.max_iters; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) scratch[j] = (g(j) - cost(i, j)) / eps;
      f(i) = eps * log_a - eps * log_sum_exp(scratch.data(), static_cast<std::size_t>(m));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) scratch[i] = (f(i) - cost(i, j)) / eps;
      g(j) = eps * log_b - eps * log_sum_exp(scratch.data(), static_cast<std::size_t>(n));
    }
    // Columns are exact after the g-update; measure the row violation.
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) row += std::exp((f(i) + g(j) - cost(i, j)) / eps);
      err += std::abs(row - std::exp(log_a));
    }
    if (err < best_err) {
      best_err = err;
      best_f = f;
      best_g = g;
    }
    if (err <= options.tol) {
      ++iter;
      break;
    }
  }

  RowMatrix dense(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) dense(i, j) = std::exp((best_f(i) + best_g(j) - cost(i, j)) / eps);
  }
  round_to_polytope(dense, 1.0 / static_cast<double>(n), 1.0 / static_cast<double>(m));

  TransportPlan plan;
  plan.n = problem.n();
  plan.m = problem.m();
  plan.approximate = true;
  plan.marginal_error = best_err;
  plan.converged = best_err <= options.tol;
  plan.iterations = iter;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (dense(i, j) > 0.0) {
        plan.entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dense(i, j)});
      }
    }
  }
  plan.objective = evaluate_plan(plan, cost);
  return plan;
}

double evaluate_plan(const TransportPlan& plan, const RowMatrix& values) {
  if (static_cast<std::size_t>(values.rows()) != plan.n || static_cast<std::size_t>(values.cols()) != plan.m) {
    throw Error(ErrorCode::DimensionMismatch, "plan is " + std::to_string(plan.n) + " x " +
                                                  std::to_string(plan.m) + " but the value matrix is " +
                                                  std::to_string(values.rows()) + " x " +
                                                  std::to_string(values.cols()));
  }
  detail::CompensatedSum sum;
  for (const auto& e : plan.entries) {
    sum.add(e.mass * values(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)));
  }
  return sum.value();
}

void write_plan_csv(const TransportPlan& plan, std::ostream& out) {
  out << "i,j,mass\n";
  for (const auto& e : plan.entries) {
    out << e.i << ',' << e.j << ',' << detail::format_shortest(e.mass) << '\n';
  }
}

}  // namespace pibound
