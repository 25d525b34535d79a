#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pibound/pi_estimator.hpp"

namespace pibound {

struct NeymanRow {
  double eta = 0.0;
  double sq_effect_lower = 0.0;  // L(eta): lower bound of E[(Y(1) - Y(0))^2]
  double s_tau_lb = 0.0;         // max(0, L(eta) - tau_hat^2)
  double v_estimate = 0.0;       // s1^2/m + s0^2/n - s_tau_lb/N
  double relative_sample_size = 0.0;
};

struct NeymanReport {
  std::size_t n = 0;
  std::size_t m = 0;
  double s0_sq = 0.0;  // group sample variances, denominators n-1 and m-1
  double s1_sq = 0.0;
  double tau_hat = 0.0;
  double v_baseline = 0.0;  // v_estimate at eta = 0
  std::vector<NeymanRow> rows;
};

/// Variance bound for the difference in means with the S_tau^2 term bounded
/// below through the SqDiff lower bound. The eta = 0 baseline is always
/// computed, whether or not the grid contains 0.
NeymanReport neyman_bound(const ObservedSample& sample, const EtaGrid& grid, const EstimatorOptions& options = {});

struct CorrelationRow {
  double eta = 0.0;
  double cross_lower = 0.0;  // bounds on E[Y(0) Y(1)]
  double cross_upper = 0.0;
  double rho_lower = 0.0;
  double rho_upper = 0.0;

  double length() const { return rho_upper - rho_lower; }
};

struct CorrelationReport {
  double mean0 = 0.0;
  double mean1 = 0.0;
  double s0_sq = 0.0;
  double s1_sq = 0.0;
  bool clamped = false;
  std::vector<CorrelationRow> rows;
};

/// PI set for the correlation of the potential outcomes. Raw values may leave
/// [-1, 1]; `clamp` truncates them.
CorrelationReport correlation_bound(const ObservedSample& sample, const EtaGrid& grid,
                                    const EstimatorOptions& options = {}, bool clamp = false);

nlohmann::json to_json(const NeymanReport& report);
nlohmann::json to_json(const CorrelationReport& report);
nlohmann::json to_json(const PIBound& bound);

/// Right-aligned columns under a header row, two spaces apart.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
std::string to_table(const NeymanReport& report);
std::string to_table(const CorrelationReport& report);

/// Rounded to 12 significant digits, printed in shortest round-trip form.
std::string format_number(double x);
/// The same rounding applied to a JSON number.
double json_number(double x);

}  // namespace pibound
