#include "pibound/cost_model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pibound/errors.hpp"

namespace pibound {

namespace {

bool symmetric(const Matrix& a, double tol) {
  return a.rows() == a.cols() && (a - a.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void require_same_length(std::span<const double> y0, std::span<const double> y1) {
  if (y0.size() != y1.size()) {
    throw Error(ErrorCode::DimensionMismatch, "outcome vectors have lengths " + std::to_string(y0.size()) +
                                                  " and " + std::to_string(y1.size()));
  }
}

Matrix matrix_from_json(const nlohmann::json& node, const char* key) {
  if (!node.contains(key)) throw Error(ErrorCode::InvalidConfig, std::string("missing block \"") + key + "\"");
  const auto& rows = node.at(key);
  if (!rows.is_array() || rows.empty()) {
    throw Error(ErrorCode::InvalidConfig, std::string("block \"") + key + "\" must be a non-empty array of rows");
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Matrix out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw Error(ErrorCode::DimensionMismatch, std::string("block \"") + key + "\" has ragged rows");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, std::string("block \"") + key + "\" is not numeric");
      out(i, j) = v.get<double>();
    }
  }
  return out;
}

void require_finite(const RowMatrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or infinity");
}

}  // namespace

QuadraticCost QuadraticCost::make(Matrix a11, Matrix a12, Matrix a22) {
  const auto d = a11.rows();
  if (d < 1 || a11.cols() != d || a12.rows() != d || a12.cols() != d || a22.rows() != d || a22.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "quadratic cost blocks must all be d x d");
  }
  if (!a11.allFinite() || !a12.allFinite() || !a22.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "quadratic cost blocks must be finite");
  }
  if (!symmetric(a11, 1e-12) || !symmetric(a22, 1e-12)) {
    throw Error(ErrorCode::NotSymmetric, "A11 and A22 must be symmetric");
  }
  return QuadraticCost{std::move(a11), std::move(a12), std::move(a22)};
}

double QuadraticCost::operator()(std::span<const double> y0, std::span<const double> y1) const {
  require_same_length(y0, y1);
  if (static_cast<Eigen::Index>(y0.size()) != dim()) {
    throw Error(ErrorCode::DimensionMismatch, "outcome length " + std::to_string(y0.size()) +
                                                  " does not match quadratic cost dimension " +
                                                  std::to_string(dim()));
  }
  const Eigen::Map<const Vector> u(y0.data(), dim());
  const Eigen::Map<const Vector> v(y1.data(), dim());
  return u.dot(a11 * u) + 2.0 * u.dot(a12 * v) + v.dot(a22 * v);
}

QuadraticCost quadratic_cost_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("quadratic cost JSON: ") + e.what());
  }
  return QuadraticCost::make(matrix_from_json(doc, "a11"), matrix_from_json(doc, "a12"),
                             matrix_from_json(doc, "a22"));
}

QuadraticCost load_quadratic_cost(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return quadratic_cost_from_json(buf.str());
}

CostSpec CostSpec::sq_sum() {
  CostSpec s;
  s.kind_ = CostKind::SqSum;
  return s;
}

CostSpec CostSpec::sq_diff() {
  CostSpec s;
  s.kind_ = CostKind::SqDiff;
  return s;
}

CostSpec CostSpec::product() {
  CostSpec s;
  s.kind_ = CostKind::Product;
  return s;
}

CostSpec CostSpec::quadratic(QuadraticCost q) {
  CostSpec s;
  s.kind_ = CostKind::Quadratic;
  s.quad_ = std::move(q);
  return s;
}

CostSpec CostSpec::function(Function f, std::string name) {
  CostSpec s;
  s.kind_ = CostKind::Function;
  s.fn_ = std::move(f);
  s.fn_name_ = std::move(name);
  return s;
}

CostSpec CostSpec::parse(std::string_view text) {
  if (text == "sq-sum") return sq_sum();
  if (text == "sq-diff") return sq_diff();
  if (text == "product") return product();
  constexpr std::string_view prefix = "quadratic:";
  if (text.starts_with(prefix)) return quadratic(load_quadratic_cost(std::string(text.substr(prefix.size()))));
  throw Error(ErrorCode::InvalidConfig,
              "unknown cost \"" + std::string(text) + "\" (expected sq-sum, sq-diff, product or quadratic:<json>)");
}

QuadraticCost CostSpec::blocks(Eigen::Index dy) const {
  const Matrix eye = Matrix::Identity(dy, dy);
  const Matrix zero = Matrix::Zero(dy, dy);
  switch (kind_) {
    case CostKind::SqSum: return QuadraticCost{sign_ * eye, sign_ * eye, sign_ * eye};
    case CostKind::SqDiff: return QuadraticCost{sign_ * eye, -sign_ * eye, sign_ * eye};
    case CostKind::Product: return QuadraticCost{zero, 0.5 * sign_ * eye, zero};
    case CostKind::Quadratic:
      if (quad_.dim() != dy) throw Error(ErrorCode::DimensionMismatch, "quadratic cost dimension mismatch");
      return quad_;
    case CostKind::Function: break;
  }
  throw Error(ErrorCode::UnsupportedCost, "cost \"" + name() + "\" has no quadratic blocks");
}

std::string CostSpec::name() const {
  std::string base;
  switch (kind_) {
    case CostKind::SqSum: base = "sq-sum"; break;
    case CostKind::SqDiff: base = "sq-diff"; break;
    case CostKind::Product: base = "product"; break;
    case CostKind::Quadratic: return "quadratic";
    case CostKind::Function: base = fn_name_; break;
  }
  return sign_ < 0 ? "-" + base : base;
}

double CostSpec::operator()(std::span<const double> y0, std::span<const double> y1) const {
  require_same_length(y0, y1);
  switch (kind_) {
    case CostKind::SqSum: {
      double s = 0.0;
      for (std::size_t k = 0; k < y0.size(); ++k) s += (y0[k] + y1[k]) * (y0[k] + y1[k]);
      return sign_ * s;
    }
    case CostKind::SqDiff: {
      double s = 0.0;
      for (std::size_t k = 0; k < y0.size(); ++k) s += (y0[k] - y1[k]) * (y0[k] - y1[k]);
      return sign_ * s;
    }
    case CostKind::Product: return sign_ * dot(y0, y1);
    case CostKind::Quadratic: return quad_(y0, y1);
    case CostKind::Function: return sign_ * fn_(y0, y1);
  }
  return 0.0;
}

double eval_cost(const CostSpec& spec, std::span<const double> y0, std::span<const double> y1) {
  return spec(y0, y1);
}

CostSpec negate(const CostSpec& spec) {
  CostSpec out = spec;
  if (spec.kind_ == CostKind::Quadratic) {
    out.quad_ = QuadraticCost{-spec.quad_.a11, -spec.quad_.a12, -spec.quad_.a22};
  } else {
    out.sign_ = -spec.sign_;
  }
  return out;
}

RowMatrix build_cost_matrix(const CostSpec& spec, const GroupData& group0, const GroupData& group1) {
  if (group0.dy() != group1.dy()) throw Error(ErrorCode::DimensionMismatch, "groups have different outcome lengths");
  require_finite(group0.y, "group 0 outcomes");
  require_finite(group1.y, "group 1 outcomes");
  const auto n = group0.size();
  const auto m = group1.size();
  RowMatrix h(n, m);
  if (group0.dy() == 1 && spec.kind() != CostKind::Quadratic && spec.kind() != CostKind::Function) {
    const double s = spec.sign();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = group0.y(j, 0);
      double* row = h.data() + j * m;
      switch (spec.kind()) {
        case CostKind::SqSum:
          for (Eigen::Index k = 0; k < m; ++k) row[k] = s * ((a + group1.y(k, 0)) * (a + group1.y(k, 0)));
          break;
        case CostKind::SqDiff:
          for (Eigen::Index k = 0; k < m; ++k) row[k] = s * ((a - group1.y(k, 0)) * (a - group1.y(k, 0)));
          break;
        default:
          for (Eigen::Index k = 0; k < m; ++k) row[k] = s * (a * group1.y(k, 0));
          break;
      }
    }
    return h;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < m; ++k) h(j, k) = spec(group0.y_row(j), group1.y_row(k));
  }
  return h;
}

RowMatrix build_penalty_matrix(const GroupData& group0, const GroupData& group1) {
  if (group0.dz() != group1.dz()) {
    throw Error(ErrorCode::DimensionMismatch, "groups have different covariate lengths");
  }
  require_finite(group0.z, "group 0 covariates");
  require_finite(group1.z, "group 1 covariates");
  const auto n = group0.size();
  const auto m = group1.size();
  const auto dz = group0.dz();
  RowMatrix p(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* a = group0.z.data() + j * dz;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double* b = group1.z.data() + k * dz;
      double s = 0.0;
      for (Eigen::Index d = 0; d < dz; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
      p(j, k) = s;
    }
  }
  return p;
}

RowMatrix build_mirror_matrix(const CostSpec& spec, double eta, const GroupData& group0, const GroupData& group1) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::EtaNegative, "penalty weight must be finite and >= 0");
  }
  RowMatrix h = build_cost_matrix(spec, group0, group1);
  h.noalias() += eta * build_penalty_matrix(group0, group1);
  return h;
}

void standardize_covariates(GroupData& group0, GroupData& group1) {
  if (group0.dz() != group1.dz()) throw Error(ErrorCode::DimensionMismatch, "groups have different covariate lengths");
  const double total = static_cast<double>(group0.size() + group1.size());
  for (Eigen::Index d = 0; d < group0.dz(); ++d) {
    const double mean = (group0.z.col(d).sum() + group1.z.col(d).sum()) / total;
    const double var = ((group0.z.col(d).array() - mean).square().sum() +
                        (group1.z.col(d).array() - mean).square().sum()) /
                       total;
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    group0.z.col(d) = (group0.z.col(d).array() - mean) * scale;
    group1.z.col(d) = (group1.z.col(d).array() - mean) * scale;
  }
}

EtaGrid::EtaGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::InvalidGrid, "eta grid is empty");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double v = values_[k];
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidGrid, "eta values must be finite");
    if (v < 0.0) throw Error(ErrorCode::EtaNegative, "eta values must be >= 0");
    if (k > 0 && !(v > values_[k - 1])) throw Error(ErrorCode::InvalidGrid, "eta grid must be strictly increasing");
  }
}

namespace {

double parse_number(std::string_view token) {
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::InvalidGrid, "cannot parse \"" + std::string(token) + "\" as a number");
  }
  return v;
}

}  // namespace

EtaGrid EtaGrid::parse(std::string_view text) {
  if (text.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t pos; (pos = text.find(':', start)) != std::string_view::npos; start = pos + 1) {
      parts.push_back(text.substr(start, pos - start));
    }
    parts.push_back(text.substr(start));
    if (parts.size() != 3) throw Error(ErrorCode::InvalidGrid, "range must look like start:stop:count");
    const double lo = parse_number(parts[0]);
    const double hi = parse_number(parts[1]);
    const double count = parse_number(parts[2]);
    if (!(lo > 0.0)) throw Error(ErrorCode::InvalidGrid, "log-spaced range needs start > 0");
    if (count < 1 || count != std::floor(count)) throw Error(ErrorCode::InvalidGrid, "range count must be a positive integer");
    const auto k = static_cast<std::size_t>(count);
    std::vector<double> values(k);
    for (std::size_t t = 0; t < k; ++t) {
      values[t] = k == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(t) / static_cast<double>(k - 1));
    }
    if (k > 1) values.back() = hi;
    return EtaGrid(std::move(values));
  }
  std::vector<double> values;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(',', start);
    values.push_back(parse_number(text.substr(start, pos == std::string_view::npos ? text.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return EtaGrid(std::move(values));
}

}  // namespace pibound
