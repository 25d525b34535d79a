#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pibound/types.hpp"

namespace pibound {

/// h(y0, y1) = y0' A11 y0 + 2 y0' A12 y1 + y1' A22 y1, i.e. [y0; y1]' A [y0; y1]
/// with A = [[A11, A12], [A12', A22]].
struct QuadraticCost {
  Matrix a11;
  Matrix a12;
  Matrix a22;

  /// Validates shapes (all d x d) and symmetry of A11 and A22 within 1e-12.
  static QuadraticCost make(Matrix a11, Matrix a12, Matrix a22);

  Eigen::Index dim() const { return a11.rows(); }
  double operator()(std::span<const double> y0, std::span<const double> y1) const;
};

/// Reads `{ "a11": [[...]], "a12": [[...]], "a22": [[...]] }` (row-major).
QuadraticCost quadratic_cost_from_json(std::string_view text);
QuadraticCost load_quadratic_cost(const std::string& path);

enum class CostKind { SqSum, SqDiff, Product, Quadratic, Function };

/// The estimand's cost h. Presets are dimension-free and expand to quadratic
/// blocks on demand; arbitrary functions are allowed but carry no blocks.
class CostSpec {
 public:
  using Function = std::function<double(std::span<const double>, std::span<const double>)>;

  static CostSpec sq_sum();   // ||y0 + y1||^2
  static CostSpec sq_diff();  // ||y0 - y1||^2
  static CostSpec product();  // y0 . y1
  static CostSpec quadratic(QuadraticCost q);
  static CostSpec function(Function f, std::string name = "function");

  /// "sq-sum", "sq-diff", "product", or "quadratic:<json path>".
  static CostSpec parse(std::string_view text);

  CostKind kind() const { return kind_; }
  /// +1 or -1 for presets and functions; quadratic specs fold the sign into their blocks.
  double sign() const { return sign_; }
  bool has_blocks() const { return kind_ != CostKind::Function; }
  /// Throws UnsupportedCost for opaque functions.
  QuadraticCost blocks(Eigen::Index dy) const;
  const QuadraticCost* quadratic_blocks() const { return kind_ == CostKind::Quadratic ? &quad_ : nullptr; }
  std::string name() const;

  double operator()(std::span<const double> y0, std::span<const double> y1) const;

  friend CostSpec negate(const CostSpec& spec);

 private:
  CostKind kind_ = CostKind::SqSum;
  double sign_ = 1.0;
  QuadraticCost quad_;
  Function fn_;
  std::string fn_name_;
};

double eval_cost(const CostSpec& spec, std::span<const double> y0, std::span<const double> y1);

/// Cost for -h.
CostSpec negate(const CostSpec& spec);

/// One treatment arm: row k of `y` and `z` belong to the same unit.
struct GroupData {
  RowMatrix y;
  RowMatrix z;

  Eigen::Index size() const { return y.rows(); }
  Eigen::Index dy() const { return y.cols(); }
  Eigen::Index dz() const { return z.cols(); }
  std::span<const double> y_row(Eigen::Index k) const {
    return {y.data() + k * y.cols(), static_cast<std::size_t>(y.cols())};
  }
  std::span<const double> z_row(Eigen::Index k) const {
    return {z.data() + k * z.cols(), static_cast<std::size_t>(z.cols())};
  }
};

/// h(y0_j, y1_k) for every pair.
RowMatrix build_cost_matrix(const CostSpec& spec, const GroupData& group0, const GroupData& group1);
/// ||z0_j - z1_k||^2 for every pair.
RowMatrix build_penalty_matrix(const GroupData& group0, const GroupData& group1);
/// H(j, k) = h(y0_j, y1_k) + eta * ||z0_j - z1_k||^2.
RowMatrix build_mirror_matrix(const CostSpec& spec, double eta, const GroupData& group0, const GroupData& group1);

/// Rescale every covariate coordinate to mean 0 and variance 1 over the pooled
/// sample. Constant coordinates are centred only.
void standardize_covariates(GroupData& group0, GroupData& group1);

/// Strictly increasing list of non-negative penalty weights.
class EtaGrid {
 public:
  explicit EtaGrid(std::vector<double> values);

  /// Comma list ("0,1,10") or log-spaced range "start:stop:count" with start > 0.
  static EtaGrid parse(std::string_view text);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

 private:
  std::vector<double> values_;
};

}  // namespace pibound
