#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pibound/cost_model.hpp"
#include "pibound/types.hpp"

namespace pibound {

/// Y(w) = beta_w Z + noise_w with Z ~ N(0, I_dz) and noise_w ~ N(0, sigma_w),
/// all independent. beta_w is dy x dz; sigma_w is the dy x dy noise covariance
/// (so the scalar model stores sigma_w^2).
struct GaussianLinearSpec {
  Matrix beta0;
  Matrix beta1;
  Matrix sigma0;
  Matrix sigma1;

  /// Scalar model from standard deviations.
  static GaussianLinearSpec scalar(double beta0, double beta1, double sd0, double sd1);

  Eigen::Index dy() const { return beta0.rows(); }
  Eigen::Index dz() const { return beta0.cols(); }
  bool is_scalar() const { return dy() == 1 && dz() == 1; }
  /// Shapes, finiteness, symmetry and positive definiteness of both noise covariances.
  void validate() const;
};

enum class SqrtMethod { Auto, ClosedForm2x2, Eigen };

/// Principal square root of a symmetric PSD matrix. Auto uses the closed form
/// for 2x2 inputs and a symmetric eigendecomposition otherwise; eigenvalues in
/// [-1e-10, 0) are clamped to zero.
Matrix sqrt_spd(const Matrix& b, SqrtMethod method = SqrtMethod::Auto);

/// Tr(S0 + S1 - 2 (S0^1/2 S1 S0^1/2)^1/2): squared 2-Wasserstein distance
/// between N(0, S0) and N(0, S1).
double bures_term(const Matrix& sigma0, const Matrix& sigma1);

/// Symmetric A with A S0 A = S1 (the Brenier map between the centered laws).
Matrix gaussian_ot_map(const Matrix& sigma0, const Matrix& sigma1);

// Scalar closed forms for h = (y0 + y1)^2. Each throws NonScalarSpec unless
// dy = dz = 1.
double v_u_closed(const GaussianLinearSpec& spec);
double v_c_closed(const GaussianLinearSpec& spec);
double v_ip_closed(const GaussianLinearSpec& spec, double eta);

// Same three bounds for h = ||y0 + y1||^2 in any dimension, through the joint
// covariances of (Y, sqrt(eta) Z) and the Gaussian OT map.
double v_u_general(const GaussianLinearSpec& spec);
double v_c_general(const GaussianLinearSpec& spec);
double v_ip_general(const GaussianLinearSpec& spec, double eta);

/// V_ip(eta) for any cost whose blocks are multiples of the identity
/// (every preset and its negation), reduced to the ||y0 + y1||^2 case.
/// Uses the scalar closed form when the spec is scalar. Other costs throw
/// UnsupportedCost.
double v_ip_gaussian(const GaussianLinearSpec& spec, const CostSpec& cost, double eta);
/// The eta -> infinity limit of v_ip_gaussian.
double v_c_gaussian(const GaussianLinearSpec& spec, const CostSpec& cost);

/// f(z) = intercept + linear z + quadratic (z .* z).
struct CovariateMap {
  Vector intercept;  // dy
  Matrix linear;     // dy x dz
  Matrix quadratic;  // dy x dz

  Vector operator()(const Vector& z) const;
  bool is_linear() const { return quadratic.isZero(0.0); }
};

enum class NoiseModel { Location, Scale };

/// Location: Y(w) = f_w(Z) + noise_w. Scale: Y(w) = f_w(Z) .* noise_w.
/// Noise is N(0, sigma_w) and Z ~ N(0, I_dz).
struct LocationScaleSpec {
  NoiseModel kind = NoiseModel::Location;
  CovariateMap f0;
  CovariateMap f1;
  Matrix sigma0;
  Matrix sigma1;

  Eigen::Index dy() const { return f0.intercept.size(); }
  Eigen::Index dz() const { return f0.linear.cols(); }
  void validate() const;
};

enum class ExpectationMode { Auto, MonteCarlo };

struct OracleEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero when the expectation was evaluated exactly
  std::size_t draws = 0;
  bool exact = false;
};

/// V_c for h = ||y0 + y1||^2 under a location or scale model. The inner
/// conditional problem is solved in closed form; the outer expectation over Z
/// is exact for a location model with linear maps (in Auto mode) and Monte
/// Carlo otherwise, deterministic given the seed.
OracleEstimate v_c_location_scale(const LocationScaleSpec& spec, std::size_t draws, std::uint64_t seed,
                                  ExpectationMode mode = ExpectationMode::Auto);

/// Bures term of the conditional noise laws at one covariate value.
double conditional_bures(const LocationScaleSpec& spec, const Vector& z);

// JSON schemas (see README):
//   linear: {"beta0": x, "beta1": x, "sigma0": sd | "cov0": [[..]], "sigma1": sd | "cov1": [[..]]}
//           where x is a number or a dy x dz array of rows.
//   location/scale: {"kind": "location"|"scale",
//                    "f0": {"intercept": [..], "linear": [[..]], "quadratic": [[..]]}, "f1": {...},
//                    "sigma0": sd | "cov0": [[..]], "sigma1": sd | "cov1": [[..]]}
GaussianLinearSpec gaussian_linear_spec_from_json(std::string_view text);
LocationScaleSpec location_scale_spec_from_json(std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace pibound
