#include "pibound/applications.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "numeric.hpp"
#include "pibound/errors.hpp"

namespace pibound {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // denominator size - 1
};

Moments moments(const RowMatrix& y) {
  const double n = static_cast<double>(y.rows());
  Moments out;
  out.mean = y.col(0).sum() / n;
  out.var = (y.col(0).array() - out.mean).square().sum() / (n - 1.0);
  return out;
}

std::pair<GroupData, GroupData> scalar_groups(const ObservedSample& sample, bool standardize) {
  auto groups = split_groups(sample);
  if (sample.dy() != 1) {
    throw Error(ErrorCode::NonScalarOutcome, "this report needs a single outcome column, got " +
                                                 std::to_string(sample.dy()));
  }
  if (groups.first.size() < 2 || groups.second.size() < 2) {
    throw Error(ErrorCode::GroupTooSmall, "each arm needs at least two units (have " +
                                              std::to_string(groups.first.size()) + " control, " +
                                              std::to_string(groups.second.size()) + " treated)");
  }
  if (standardize) standardize_covariates(groups.first, groups.second);
  return groups;
}

EtaGrid with_zero(const EtaGrid& grid) {
  if (grid[0] == 0.0) return grid;
  std::vector<double> values{0.0};
  values.insert(values.end(), grid.begin(), grid.end());
  return EtaGrid(std::move(values));
}

}  // namespace

NeymanReport neyman_bound(const ObservedSample& sample, const EtaGrid& grid, const EstimatorOptions& options) {
  const auto [g0, g1] = scalar_groups(sample, options.standardize_z);
  const Moments m0 = moments(g0.y);
  const Moments m1 = moments(g1.y);

  NeymanReport report;
  report.n = static_cast<std::size_t>(g0.size());
  report.m = static_cast<std::size_t>(g1.size());
  report.s0_sq = m0.var;
  report.s1_sq = m1.var;
  report.tau_hat = m1.mean - m0.mean;

  const EtaGrid full = with_zero(grid);
  const bool added_zero = full.size() != grid.size();
  const auto bounds = sweep(g0, g1, CostSpec::sq_diff(), full, options.solver, SideSelection::Lower);
  const double total = static_cast<double>(report.n + report.m);
  const double conservative = report.s1_sq / static_cast<double>(report.m) + report.s0_sq / static_cast<double>(report.n);

  std::vector<NeymanRow> rows;
  for (const auto& b : bounds) {
    NeymanRow row;
    row.eta = b.eta;
    row.sq_effect_lower = b.lower;
    row.s_tau_lb = std::max(0.0, b.lower - report.tau_hat * report.tau_hat);
    row.v_estimate = conservative - row.s_tau_lb / total;
    rows.push_back(row);
  }
  report.v_baseline = rows.front().v_estimate;
  if (!(report.v_baseline > 0.0)) {
    throw Error(ErrorCode::DegenerateVariance, "variance bound at eta = 0 is not positive");
  }
  for (auto& row : rows) row.relative_sample_size = row.v_estimate / report.v_baseline;
  if (added_zero) rows.erase(rows.begin());
  report.rows = std::move(rows);
  return report;
}

CorrelationReport correlation_bound(const ObservedSample& sample, const EtaGrid& grid,
                                    const EstimatorOptions& options, bool clamp) {
  const auto [g0, g1] = scalar_groups(sample, options.standardize_z);
  const Moments m0 = moments(g0.y);
  const Moments m1 = moments(g1.y);
  if (!(m0.var > 0.0) || !(m1.var > 0.0)) {
    throw Error(ErrorCode::ZeroVariance, "an arm has zero outcome variance; the correlation is undefined");
  }
  CorrelationReport report;
  report.mean0 = m0.mean;
  report.mean1 = m1.mean;
  report.s0_sq = m0.var;
  report.s1_sq = m1.var;
  report.clamped = clamp;

  const double scale = std::sqrt(m0.var * m1.var);
  const double centre = m0.mean * m1.mean;
  for (const auto& b : sweep(g0, g1, CostSpec::product(), grid, options.solver, SideSelection::Both)) {
    CorrelationRow row;
    row.eta = b.eta;
    row.cross_lower = b.lower;
    row.cross_upper = b.upper;
    row.rho_lower = (b.lower - centre) / scale;
    row.rho_upper = (b.upper - centre) / scale;
    if (clamp) {
      row.rho_lower = std::clamp(row.rho_lower, -1.0, 1.0);
      row.rho_upper = std::clamp(row.rho_upper, -1.0, 1.0);
    }
    report.rows.push_back(row);
  }
  return report;
}

double json_number(double x) { return detail::round_significant(x, 12); }

std::string format_number(double x) { return detail::format_significant(x, 12); }

nlohmann::json to_json(const PIBound& b) {
  return {{"eta", json_number(b.eta)},
          {"lower", json_number(b.lower)},
          {"upper", json_number(b.upper)},
          {"lower_penalty", json_number(b.lower_penalty)},
          {"upper_penalty", json_number(b.upper_penalty)},
          {"plan_support_lower", b.plan_support_lower},
          {"plan_support_upper", b.plan_support_upper}};
}

nlohmann::json to_json(const NeymanReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"eta", json_number(row.eta)},
                    {"sq_effect_lower", json_number(row.sq_effect_lower)},
                    {"s_tau_lb", json_number(row.s_tau_lb)},
                    {"v_estimate", json_number(row.v_estimate)},
                    {"relative_sample_size", json_number(row.relative_sample_size)}});
  }
  return {{"n", r.n},
          {"m", r.m},
          {"s0_sq", json_number(r.s0_sq)},
          {"s1_sq", json_number(r.s1_sq)},
          {"tau_hat", json_number(r.tau_hat)},
          {"v_baseline", json_number(r.v_baseline)},
          {"rows", rows}};
}

nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"eta", json_number(row.eta)},
                    {"cross_lower", json_number(row.cross_lower)},
                    {"cross_upper", json_number(row.cross_upper)},
                    {"rho_lower", json_number(row.rho_lower)},
                    {"rho_upper", json_number(row.rho_upper)},
                    {"length", json_number(row.length())}});
  }
  return {{"mean0", json_number(r.mean0)},
          {"mean1", json_number(r.mean1)},
          {"s0_sq", json_number(r.s0_sq)},
          {"s1_sq", json_number(r.s1_sq)},
          {"clamped", r.clamped},
          {"rows", rows}};
}

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& cell = c < cells.size() ? cells[c] : std::string();
      if (c > 0) out << "  ";
      out << std::string(width[c] - cell.size(), ' ') << cell;
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

std::string to_table(const NeymanReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    rows.push_back({format_number(row.eta), format_number(row.s_tau_lb), format_number(row.v_estimate),
                    format_number(row.relative_sample_size)});
  }
  std::ostringstream out;
  out << "n = " << r.n << ", m = " << r.m << ", s0^2 = " << format_number(r.s0_sq)
      << ", s1^2 = " << format_number(r.s1_sq) << ", tau_hat = " << format_number(r.tau_hat) << "\n";
  out << format_table({"eta", "s_tau_lb", "v_estimate", "relative_sample_size"}, rows);
  return out.str();
}

std::string to_table(const CorrelationReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    rows.push_back({format_number(row.eta), format_number(row.rho_lower), format_number(row.rho_upper),
                    format_number(row.length())});
  }
  std::ostringstream out;
  out << "mean0 = " << format_number(r.mean0) << ", mean1 = " << format_number(r.mean1)
      << ", s0^2 = " << format_number(r.s0_sq) << ", s1^2 = " << format_number(r.s1_sq)
      << (r.clamped ? ", clamped to [-1, 1]" : "") << "\n";
  out << format_table({"eta", "rho_lower", "rho_upper", "length"}, rows);
  return out.str();
}

}  // namespace pibound
