#include "pibound/gaussian_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "numeric.hpp"
#include "parallel.hpp"
#include "pibound/errors.hpp"
#include "pibound/random.hpp"

namespace pibound {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kClamp = 1e-10;

double scale_of(const Matrix& b) { return std::max(1.0, b.cwiseAbs().maxCoeff()); }

void require_square_symmetric(const Matrix& b, const char* what) {
  if (b.rows() != b.cols() || b.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be a non-empty square matrix");
  }
  if (!b.allFinite()) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " has non-finite entries");
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale_of(b)) {
    throw Error(ErrorCode::NotSymmetric, std::string(what) + " is not symmetric");
  }
}

Matrix symmetrized(const Matrix& b) { return (b + b.transpose()) / 2.0; }

Matrix sqrt_closed_2x2(const Matrix& b) {
  const double det = std::max(0.0, b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0));
  const double s = std::sqrt(det);
  const double t = b.trace() + 2.0 * s;
  if (t <= 0.0) return Matrix::Zero(2, 2);
  return (b + s * Matrix::Identity(2, 2)) / std::sqrt(t);
}

Matrix sqrt_eigen(const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrized(eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose());
}

void require_scalar(const GaussianLinearSpec& spec) {
  spec.validate();
  if (!spec.is_scalar()) {
    throw Error(ErrorCode::NonScalarSpec, "closed form is only available for scalar outcome and covariate");
  }
}

void require_eta(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::EtaNegative, "eta must be finite and >= 0");
}

void require_psd(const Matrix& s, const char* what) {
  require_square_symmetric(s, what);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(s), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kClamp * scale_of(s)) {
    throw Error(ErrorCode::IndefiniteInput, std::string(what) + " is not positive semidefinite");
  }
}

double v_ip_sq_sum(const GaussianLinearSpec& spec, double eta) {
  return spec.is_scalar() ? v_ip_closed(spec, eta) : v_ip_general(spec, eta);
}

}  // namespace

GaussianLinearSpec GaussianLinearSpec::scalar(double beta0, double beta1, double sd0, double sd1) {
  GaussianLinearSpec s;
  s.beta0 = Matrix::Constant(1, 1, beta0);
  s.beta1 = Matrix::Constant(1, 1, beta1);
  s.sigma0 = Matrix::Constant(1, 1, sd0 * sd0);
  s.sigma1 = Matrix::Constant(1, 1, sd1 * sd1);
  return s;
}

void GaussianLinearSpec::validate() const {
  if (beta0.size() == 0 || beta0.rows() != beta1.rows() || beta0.cols() != beta1.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "beta0 and beta1 must have the same non-empty shape");
  }
  if (!beta0.allFinite() || !beta1.allFinite()) throw Error(ErrorCode::NonFiniteInput, "beta has non-finite entries");
  for (const auto* s : {&sigma0, &sigma1}) {
    if (s->rows() != dy()) throw Error(ErrorCode::DimensionMismatch, "noise covariance must be dy x dy");
    require_square_symmetric(*s, "noise covariance");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(*s), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
      throw Error(ErrorCode::IndefiniteInput, "noise covariance must be positive definite");
    }
  }
}

Matrix sqrt_spd(const Matrix& b, SqrtMethod method) {
  require_square_symmetric(b, "matrix");
  const Matrix s = symmetrized(b);
  if (s.rows() == 1) {
    if (s(0, 0) < -kClamp * scale_of(b)) throw Error(ErrorCode::IndefiniteInput, "negative 1x1 input");
    return Matrix::Constant(1, 1, std::sqrt(std::max(0.0, s(0, 0))));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kClamp * scale_of(b)) {
    throw Error(ErrorCode::IndefiniteInput,
                "smallest eigenvalue " + detail::format_significant(eig.eigenvalues().minCoeff(), 6));
  }
  // Slightly negative eigenvalues are clamped, which only the eigen path does.
  const bool closed = method == SqrtMethod::ClosedForm2x2 ||
                      (method == SqrtMethod::Auto && s.rows() == 2 && eig.eigenvalues().minCoeff() >= 0.0);
  if (closed) {
    if (s.rows() != 2) throw Error(ErrorCode::DimensionMismatch, "closed-form square root needs a 2x2 input");
    return sqrt_closed_2x2(s);
  }
  return sqrt_eigen(s);
}

double bures_term(const Matrix& sigma0, const Matrix& sigma1) {
  require_square_symmetric(sigma0, "sigma0");
  require_square_symmetric(sigma1, "sigma1");
  if (sigma0.rows() != sigma1.rows()) throw Error(ErrorCode::DimensionMismatch, "covariances differ in size");
  const Matrix r = sqrt_spd(sigma0);
  const Matrix cross = sqrt_spd(symmetrized(r * sigma1 * r));
  return std::max(0.0, sigma0.trace() + sigma1.trace() - 2.0 * cross.trace());
}

Matrix gaussian_ot_map(const Matrix& sigma0, const Matrix& sigma1) {
  require_square_symmetric(sigma0, "sigma0");
  require_square_symmetric(sigma1, "sigma1");
  if (sigma0.rows() != sigma1.rows()) throw Error(ErrorCode::DimensionMismatch, "covariances differ in size");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(sigma0));
  if (eig.eigenvalues().minCoeff() < 1e-12) {
    throw Error(ErrorCode::SingularSigma0, "sigma0 is singular; the OT map is not defined");
  }
  const Matrix& v = eig.eigenvectors();
  const Matrix r = v * eig.eigenvalues().cwiseSqrt().asDiagonal() * v.transpose();
  const Matrix r_inv = v * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  const Matrix middle = sqrt_spd(symmetrized(r * sigma1 * r));
  return symmetrized(r_inv * middle * r_inv);
}

double v_u_closed(const GaussianLinearSpec& spec) {
  require_scalar(spec);
  const double a = std::sqrt(spec.beta0(0, 0) * spec.beta0(0, 0) + spec.sigma0(0, 0));
  const double b = std::sqrt(spec.beta1(0, 0) * spec.beta1(0, 0) + spec.sigma1(0, 0));
  return (a - b) * (a - b);
}

double v_c_closed(const GaussianLinearSpec& spec) {
  require_scalar(spec);
  const double b = spec.beta0(0, 0) + spec.beta1(0, 0);
  const double s = std::sqrt(spec.sigma0(0, 0)) - std::sqrt(spec.sigma1(0, 0));
  return b * b + s * s;
}

double v_ip_closed(const GaussianLinearSpec& spec, double eta) {
  require_scalar(spec);
  require_eta(eta);
  if (eta == 0.0) return v_u_closed(spec);  // same expression, without the rounding of p / sqrt(p)
  const double b0 = spec.beta0(0, 0);
  const double b1 = spec.beta1(0, 0);
  const double s0 = std::sqrt(spec.sigma0(0, 0));
  const double s1 = std::sqrt(spec.sigma1(0, 0));
  const double p = (b0 * b0 + s0 * s0) * (b1 * b1 + s1 * s1);
  const double num = p - eta * b0 * b1 + eta * s0 * s1;
  const double den = std::sqrt(p - 2.0 * eta * b0 * b1 + 2.0 * eta * s0 * s1 + eta * eta);
  return (b0 * b0 + b1 * b1 + s0 * s0 + s1 * s1) - 2.0 * num / den;
}

double v_u_general(const GaussianLinearSpec& spec) {
  spec.validate();
  return bures_term(spec.beta0 * spec.beta0.transpose() + spec.sigma0,
                    spec.beta1 * spec.beta1.transpose() + spec.sigma1);
}

double v_c_general(const GaussianLinearSpec& spec) {
  spec.validate();
  return (spec.beta0 + spec.beta1).squaredNorm() + bures_term(spec.sigma0, spec.sigma1);
}

double v_ip_general(const GaussianLinearSpec& spec, double eta) {
  spec.validate();
  require_eta(eta);
  // Sigma0(eta) is singular at eta = 0, where the problem is unconditional.
  if (eta == 0.0) return v_u_general(spec);
  const auto dy = spec.dy();
  const auto dz = spec.dz();
  const double root = std::sqrt(eta);
  Matrix s0(dy + dz, dy + dz);
  Matrix s1(dy + dz, dy + dz);
  const Matrix c0 = spec.beta0 * spec.beta0.transpose() + spec.sigma0;
  const Matrix c1 = spec.beta1 * spec.beta1.transpose() + spec.sigma1;
  const Matrix eye = eta * Matrix::Identity(dz, dz);
  s0 << c0, root * spec.beta0, root * spec.beta0.transpose(), eye;
  s1 << c1, -root * spec.beta1, -root * spec.beta1.transpose(), eye;
  // The optimal cross-covariance E[X0 X1'] is S0^1/2 Q S1^1/2 with Q the
  // orthogonal polar factor of (S1^1/2 S0^1/2)'. This equals the usual map
  // expression but never inverts S0^1/2, whose condition number grows with eta.
  const Matrix r0 = sqrt_spd(s0, SqrtMethod::Eigen);
  const Matrix r1 = sqrt_spd(s1, SqrtMethod::Eigen);
  Eigen::JacobiSVD<Matrix> svd(r1 * r0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix q = svd.matrixV() * svd.matrixU().transpose();
  const Matrix cross = r0.topRows(dy) * q * r1.leftCols(dy);
  return c0.trace() + c1.trace() - 2.0 * cross.trace();
}

namespace {

// Shared reduction for costs whose blocks are multiples of the identity.
// `sq_sum` evaluates the ||y0 + y1||^2 value of a spec given the eta scaling.
template <class SqSum>
double reduce_isotropic(const GaussianLinearSpec& spec, const CostSpec& cost, SqSum sq_sum) {
  const auto dy = spec.dy();
  const QuadraticCost q = cost.blocks(dy);
  const double alpha = q.a11(0, 0);
  const double delta = q.a22(0, 0);
  const double gamma = q.a12(0, 0);
  const Matrix eye = Matrix::Identity(dy, dy);
  if (!(q.a11 - alpha * eye).isZero(0.0) || !(q.a22 - delta * eye).isZero(0.0) ||
      !(q.a12 - gamma * eye).isZero(0.0)) {
    throw Error(ErrorCode::UnsupportedCost, "Gaussian oracle needs cost blocks that are multiples of the identity");
  }
  const double t0 = (spec.beta0 * spec.beta0.transpose() + spec.sigma0).trace();
  const double t1 = (spec.beta1 * spec.beta1.transpose() + spec.sigma1).trace();
  if (gamma == 0.0) return alpha * t0 + delta * t1;
  // The coupling only moves E[Y0 . Y1]; minimizing 2 gamma y0.y1 + eta |dz|^2
  // is the ||y0 + y1||^2 problem at eta / |gamma|, after flipping Y1 if gamma < 0.
  double cross;
  if (gamma > 0.0) {
    cross = (sq_sum(spec, gamma) - t0 - t1) / 2.0;
  } else {
    GaussianLinearSpec flipped = spec;
    flipped.beta1 = -spec.beta1;
    cross = -(sq_sum(flipped, -gamma) - t0 - t1) / 2.0;
  }
  return alpha * t0 + delta * t1 + 2.0 * gamma * cross;
}

}  // namespace

double v_ip_gaussian(const GaussianLinearSpec& spec, const CostSpec& cost, double eta) {
  spec.validate();
  require_eta(eta);
  return reduce_isotropic(spec, cost,
                          [eta](const GaussianLinearSpec& s, double scale) { return v_ip_sq_sum(s, eta / scale); });
}

double v_c_gaussian(const GaussianLinearSpec& spec, const CostSpec& cost) {
  spec.validate();
  return reduce_isotropic(spec, cost, [](const GaussianLinearSpec& s, double) { return v_c_general(s); });
}

Vector CovariateMap::operator()(const Vector& z) const {
  return intercept + linear * z + quadratic * z.cwiseProduct(z);
}

void LocationScaleSpec::validate() const {
  const auto d = dy();
  if (d == 0) throw Error(ErrorCode::DimensionMismatch, "covariate map has no outputs");
  for (const auto* f : {&f0, &f1}) {
    if (f->intercept.size() != d || f->linear.rows() != d || f->quadratic.rows() != d ||
        f->linear.cols() != dz() || f->quadratic.cols() != dz()) {
      throw Error(ErrorCode::DimensionMismatch, "covariate maps must share dy and dz");
    }
    if (!f->intercept.allFinite() || !f->linear.allFinite() || !f->quadratic.allFinite()) {
      throw Error(ErrorCode::NonFiniteInput, "covariate map has non-finite coefficients");
    }
  }
  if (dz() == 0) throw Error(ErrorCode::DimensionMismatch, "model needs at least one covariate");
  if (sigma0.rows() != d || sigma1.rows() != d) throw Error(ErrorCode::DimensionMismatch, "noise covariance must be dy x dy");
  require_psd(sigma0, "sigma0");
  require_psd(sigma1, "sigma1");
}

double conditional_bures(const LocationScaleSpec& spec, const Vector& z) {
  if (spec.kind == NoiseModel::Location) return bures_term(spec.sigma0, spec.sigma1);
  const Vector a = spec.f0(z);
  const Vector b = spec.f1(z);
  if (spec.dy() == 1) {
    const double d = std::abs(a(0)) * std::sqrt(spec.sigma0(0, 0)) - std::abs(b(0)) * std::sqrt(spec.sigma1(0, 0));
    return d * d;
  }
  return bures_term(a.asDiagonal() * spec.sigma0 * a.asDiagonal(), b.asDiagonal() * spec.sigma1 * b.asDiagonal());
}

OracleEstimate v_c_location_scale(const LocationScaleSpec& spec, std::size_t draws, std::uint64_t seed,
                                  ExpectationMode mode) {
  spec.validate();
  if (draws == 0) throw Error(ErrorCode::InvalidConfig, "Monte Carlo needs at least one draw");
  const bool location = spec.kind == NoiseModel::Location;
  if (location && mode == ExpectationMode::Auto && spec.f0.is_linear() && spec.f1.is_linear()) {
    // E||c + L Z||^2 = ||c||^2 + ||L||_F^2 for Z ~ N(0, I).
    const Vector c = spec.f0.intercept + spec.f1.intercept;
    const Matrix l = spec.f0.linear + spec.f1.linear;
    OracleEstimate out;
    out.value = c.squaredNorm() + l.squaredNorm() + bures_term(spec.sigma0, spec.sigma1);
    out.exact = true;
    return out;
  }

  const double noise_term = location ? bures_term(spec.sigma0, spec.sigma1) : 0.0;
  const CounterRng rng(seed, 0);
  const auto dz = spec.dz();
  constexpr std::size_t kChunk = 8192;
  const std::size_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<double> sums(chunks);
  std::vector<double> squares(chunks);
  detail::parallel_for(chunks, [&](std::size_t c) {
    detail::CompensatedSum s;
    detail::CompensatedSum sq;
    Vector z(dz);
    const std::size_t end = std::min(draws, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) {
      for (Eigen::Index d = 0; d < dz; ++d) z(d) = rng.normal(k * static_cast<std::size_t>(dz) + d);
      const double v = location ? (spec.f0(z) + spec.f1(z)).squaredNorm() : conditional_bures(spec, z);
      s.add(v);
      sq.add(v * v);
    }
    sums[c] = s.value();
    squares[c] = sq.value();
  });
  detail::CompensatedSum total;
  detail::CompensatedSum total_sq;
  for (std::size_t c = 0; c < chunks; ++c) {
    total.add(sums[c]);
    total_sq.add(squares[c]);
  }
  const double n = static_cast<double>(draws);
  const double mean = total.value() / n;
  const double var = draws > 1 ? std::max(0.0, (total_sq.value() - n * mean * mean) / (n - 1.0)) : 0.0;
  OracleEstimate out;
  out.value = mean + noise_term;
  out.std_error = std::sqrt(var / n);
  out.draws = draws;
  return out;
}

namespace {

using nlohmann::json;

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model JSON: ") + e.what());
  }
}

// A number becomes a 1x1 matrix, an array of rows a matrix, and a flat array a
// single row (or a column when flat_is_column is set).
Matrix json_matrix(const json& node, const std::string& key, bool flat_is_column = false) {
  if (node.is_number()) return Matrix::Constant(1, 1, node.get<double>());
  if (!node.is_array() || node.empty()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be a number or array");
  if (!node[0].is_array()) {
    Vector out(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].is_number()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" is not numeric");
      out(static_cast<Eigen::Index>(i)) = node[i].get<double>();
    }
    return flat_is_column ? Matrix(out) : Matrix(out.transpose());
  }
  const auto rows = node.size();
  const auto cols = node[0].size();
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!node[i].is_array() || node[i].size() != cols) {
      throw Error(ErrorCode::DimensionMismatch, "\"" + key + "\" has ragged rows");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!node[i][j].is_number()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" is not numeric");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = node[i][j].get<double>();
    }
  }
  return out;
}

Matrix noise_covariance(const json& doc, int w) {
  const std::string sd_key = "sigma" + std::to_string(w);
  const std::string cov_key = "cov" + std::to_string(w);
  const bool has_sd = doc.contains(sd_key);
  const bool has_cov = doc.contains(cov_key);
  if (has_sd == has_cov) throw Error(ErrorCode::InvalidConfig, "give exactly one of \"" + sd_key + "\" and \"" + cov_key + "\"");
  if (has_cov) return json_matrix(doc.at(cov_key), cov_key);
  if (!doc.at(sd_key).is_number()) throw Error(ErrorCode::InvalidConfig, "\"" + sd_key + "\" must be a number");
  const double sd = doc.at(sd_key).get<double>();
  return Matrix::Constant(1, 1, sd * sd);
}

const json& required(const json& doc, const std::string& key) {
  if (!doc.is_object() || !doc.contains(key)) throw Error(ErrorCode::InvalidConfig, "missing \"" + key + "\"");
  return doc.at(key);
}

CovariateMap covariate_map(const json& node, const std::string& key) {
  if (!node.is_object()) throw Error(ErrorCode::InvalidConfig, "\"" + key + "\" must be an object");
  CovariateMap f;
  f.linear = json_matrix(required(node, "linear"), key + ".linear");
  f.intercept = node.contains("intercept") ? Vector(json_matrix(node.at("intercept"), key + ".intercept", true))
                                           : Vector::Zero(f.linear.rows());
  f.quadratic = node.contains("quadratic") ? json_matrix(node.at("quadratic"), key + ".quadratic")
                                           : Matrix::Zero(f.linear.rows(), f.linear.cols());
  return f;
}

}  // namespace

GaussianLinearSpec gaussian_linear_spec_from_json(std::string_view text) {
  const json doc = parse_json(text);
  GaussianLinearSpec spec;
  spec.beta0 = json_matrix(required(doc, "beta0"), "beta0");
  spec.beta1 = json_matrix(required(doc, "beta1"), "beta1");
  spec.sigma0 = noise_covariance(doc, 0);
  spec.sigma1 = noise_covariance(doc, 1);
  spec.validate();
  return spec;
}

LocationScaleSpec location_scale_spec_from_json(std::string_view text) {
  const json doc = parse_json(text);
  LocationScaleSpec spec;
  const auto& kind = required(doc, "kind");
  if (kind == "location") {
    spec.kind = NoiseModel::Location;
  } else if (kind == "scale") {
    spec.kind = NoiseModel::Scale;
  } else {
    throw Error(ErrorCode::InvalidConfig, "\"kind\" must be \"location\" or \"scale\"");
  }
  spec.f0 = covariate_map(required(doc, "f0"), "f0");
  spec.f1 = covariate_map(required(doc, "f1"), "f1");
  spec.sigma0 = noise_covariance(doc, 0);
  spec.sigma1 = noise_covariance(doc, 1);
  spec.validate();
  return spec;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace pibound
