#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pibound/errors.hpp"
#include "pibound/gaussian_oracle.hpp"
#include "pibound/ot_core.hpp"

using namespace pibound;

namespace {

double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// Empirical 2-Wasserstein^2 between two centred samples via the exact solver.
double empirical_w2(const Matrix& x, const Matrix& y) {
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix yc = y.rowwise() - y.colwise().mean();
  RowMatrix cost(xc.rows(), yc.rows());
  for (Eigen::Index i = 0; i < xc.rows(); ++i)
    for (Eigen::Index j = 0; j < yc.rows(); ++j) cost(i, j) = (xc.row(i) - yc.row(j)).squaredNorm();
  return solve_exact(DiscreteOtProblem(cost)).objective;
}

Matrix gaussian_sample(const Matrix& cov, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const Matrix l = cov.llt().matrixL();
  Matrix out(count, cov.rows());
  for (int k = 0; k < count; ++k) {
    Vector e(cov.rows());
    for (Eigen::Index d = 0; d < cov.rows(); ++d) e(d) = normal(rng);
    out.row(k) = (l * e).transpose();
  }
  return out;
}

}  // namespace

TEST_CASE("square root examples") {
  CHECK(sqrt_spd(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 9;
  const Matrix s = sqrt_spd(d);
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(s(0, 1)) < 1e-15);
  CHECK(sqrt_spd(Matrix::Zero(2, 2)).isZero());
  CHECK(sqrt_spd(Matrix::Constant(1, 1, 6.25))(0, 0) == 2.5);
}

TEST_CASE("square root round trip and path agreement") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    const int dim = 1 + t % 6;
    const Matrix b = oracle::random_spd(dim, rng);
    const Matrix s = sqrt_spd(b);
    CHECK(rel_frobenius(s * s, b) < 1e-10);
    CHECK((s - s.transpose()).norm() == 0.0);
    if (dim == 2) {
      CHECK(rel_frobenius(sqrt_spd(b, SqrtMethod::ClosedForm2x2), sqrt_spd(b, SqrtMethod::Eigen)) < 1e-10);
    }
  }
  // Rank-deficient PSD input.
  Vector v(3);
  v << 1, -2, 0.5;
  const Matrix rank1 = v * v.transpose();
  const Matrix s = sqrt_spd(rank1);
  CHECK(rel_frobenius(s * s, rank1) < 1e-10);
}

TEST_CASE("square root errors") {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK(code_of([&] { sqrt_spd(asym); }) == ErrorCode::NotSymmetric);
  Matrix indef(2, 2);
  indef << 1, 2, 2, 1;
  CHECK(code_of([&] { sqrt_spd(indef); }) == ErrorCode::IndefiniteInput);
  CHECK(code_of([&] { sqrt_spd(Matrix::Identity(3, 3), SqrtMethod::ClosedForm2x2); }) == ErrorCode::DimensionMismatch);
  // Within the clamp tolerance counts as PSD.
  Matrix nearly = Matrix::Zero(2, 2);
  nearly(0, 0) = 1.0;
  nearly(1, 1) = -1e-12;
  CHECK(sqrt_spd(nearly)(1, 1) == 0.0);
}

TEST_CASE("bures term") {
  std::mt19937_64 rng(2);
  CHECK(bures_term(Matrix::Constant(1, 1, 4.0), Matrix::Constant(1, 1, 1.0)) == doctest::Approx(1.0));
  for (int t = 0; t < 100; ++t) {
    const int dim = 1 + t % 5;
    const Matrix a = oracle::random_spd(dim, rng);
    const Matrix b = oracle::random_spd(dim, rng);
    CHECK(bures_term(a, a) < 1e-9 * a.trace());
    const double ab = bures_term(a, b);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - bures_term(b, a)) < 1e-10 * std::max(1.0, a.trace() + b.trace()));
  }
  // Commuting (diagonal) pair: sum of squared differences of standard deviations.
  Matrix a = Matrix::Zero(3, 3);
  Matrix b = Matrix::Zero(3, 3);
  a.diagonal() << 1, 4, 9;
  b.diagonal() << 0.25, 16, 9;
  CHECK(bures_term(a, b) == doctest::Approx(0.25 + 4.0 + 0.0));
}

TEST_CASE("bures term against empirical transport") {
  std::mt19937_64 rng(3);
  Matrix a(2, 2);
  Matrix b(2, 2);
  a << 2.0, 0.6, 0.6, 0.5;
  b << 0.4, -0.3, -0.3, 3.0;
  const double want = bures_term(a, b);
  const double got = empirical_w2(gaussian_sample(a, 2000, rng), gaussian_sample(b, 2000, rng));
  CHECK(std::abs(got - want) <= 0.05 * want);
}

TEST_CASE("gaussian OT map") {
  std::mt19937_64 rng(4);
  CHECK(gaussian_ot_map(Matrix::Constant(1, 1, 4.0), Matrix::Constant(1, 1, 9.0))(0, 0) == doctest::Approx(1.5));
  for (int t = 0; t < 200; ++t) {
    const int dim = 1 + t % 6;
    const Matrix s0 = oracle::random_spd(dim, rng);
    const Matrix s1 = oracle::random_spd(dim, rng);
    CHECK(gaussian_ot_map(s0, s0).isApprox(Matrix::Identity(dim, dim), 1e-8));
    const Matrix map = gaussian_ot_map(s0, s1);
    CHECK((map - map.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(map).eigenvalues().minCoeff() > 0.0);
    CHECK(rel_frobenius(map * s0 * map, s1) < 1e-8);
  }
  Matrix singular = Matrix::Zero(2, 2);
  singular(0, 0) = 1.0;
  CHECK(code_of([&] { gaussian_ot_map(singular, Matrix::Identity(2, 2)); }) == ErrorCode::SingularSigma0);
}

TEST_CASE("scalar closed forms") {
  const auto fig = GaussianLinearSpec::scalar(0.8, 1.6, 1.0, 1.0);
  const double vu = std::pow(std::sqrt(1.64) - std::sqrt(3.56), 2);
  CHECK(v_u_closed(fig) == doctest::Approx(vu).epsilon(1e-14));
  CHECK(v_u_closed(fig) == doctest::Approx(0.36744).epsilon(1e-4));
  CHECK(v_c_closed(fig) == doctest::Approx(5.76).epsilon(1e-14));
  CHECK(v_u_closed(GaussianLinearSpec::scalar(0.7, 0.7, 1.3, 1.3)) == 0.0);
  CHECK(v_u_closed(GaussianLinearSpec::scalar(0, 0, 1, 2)) == doctest::Approx(1.0));
  CHECK(v_c_closed(GaussianLinearSpec::scalar(0.4, -0.4, 1.1, 1.1)) == doctest::Approx(0.0));
  CHECK(v_c_closed(GaussianLinearSpec::scalar(0, 0, 1.5, 0.5)) == doctest::Approx(1.0));
  CHECK(v_u_closed(GaussianLinearSpec::scalar(0, 0, 1.5, 0.5)) == doctest::Approx(1.0));

  CHECK(std::abs(v_ip_closed(fig, 0.0) - v_u_closed(fig)) <= 1e-12);
  CHECK(std::abs(v_ip_closed(fig, 1e6) - 5.76) <= 1e-4);
  const double gap = 1000.0 * (v_c_closed(fig) - v_ip_closed(fig, 1000.0));
  CHECK(std::abs(gap - 11.52) <= 0.05 * 11.52);
}

TEST_CASE("scalar closed forms agree with the trace route") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> beta(-2.0, 2.0);
  std::uniform_real_distribution<double> sd(0.1, 2.0);
  for (int t = 0; t < 200; ++t) {
    const auto spec = GaussianLinearSpec::scalar(beta(rng), beta(rng), sd(rng), sd(rng));
    const double scale = 1.0 + v_c_closed(spec);
    CHECK(std::abs(v_u_general(spec) - v_u_closed(spec)) < 1e-10 * scale);
    CHECK(std::abs(v_c_general(spec) - v_c_closed(spec)) < 1e-10 * scale);
    for (double eta : {0.01, 1.0, 10.0, 1000.0}) {
      CHECK(std::abs(v_ip_general(spec, eta) - v_ip_closed(spec, eta)) < 1e-8 * scale);
    }
  }
}

TEST_CASE("closed form is monotone and sandwiched") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> beta(-2.0, 2.0);
  std::uniform_real_distribution<double> sd(0.1, 2.0);
  for (int t = 0; t < 100; ++t) {
    const auto spec = GaussianLinearSpec::scalar(beta(rng), beta(rng), sd(rng), sd(rng));
    const double vu = v_u_closed(spec);
    const double vc = v_c_closed(spec);
    double prev = v_ip_closed(spec, 0.0);
    for (int k = 1; k <= 400; ++k) {
      const double eta = std::pow(10.0, -3.0 + 7.0 * k / 400.0);
      const double v = v_ip_closed(spec, eta);
      CHECK(v >= prev - 1e-12);
      CHECK(v >= vu - 1e-12);
      CHECK(v <= vc + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("trace route on a separable multivariate model") {
  // Diagonal beta and noise make every (Y_k, Z_k) pair an independent scalar
  // model, so the bound is the sum of scalar closed forms.
  GaussianLinearSpec spec;
  spec.beta0 = Eigen::Vector3d(0.8, -0.3, 1.2).asDiagonal();
  spec.beta1 = Eigen::Vector3d(1.6, 0.9, -0.5).asDiagonal();
  spec.sigma0 = Eigen::Vector3d(1.0, 0.25, 2.0).asDiagonal();
  spec.sigma1 = Eigen::Vector3d(1.0, 1.44, 0.3).asDiagonal();
  auto part = [&](int k) {
    return GaussianLinearSpec::scalar(spec.beta0(k, k), spec.beta1(k, k), std::sqrt(spec.sigma0(k, k)),
                                      std::sqrt(spec.sigma1(k, k)));
  };
  for (double eta : {0.0, 0.3, 5.0, 200.0}) {
    double want = 0.0;
    for (int k = 0; k < 3; ++k) want += v_ip_closed(part(k), eta);
    CHECK(v_ip_general(spec, eta) == doctest::Approx(want).epsilon(1e-9));
  }
  double vu = 0.0;
  double vc = 0.0;
  for (int k = 0; k < 3; ++k) {
    vu += v_u_closed(part(k));
    vc += v_c_closed(part(k));
  }
  CHECK(v_u_general(spec) == doctest::Approx(vu).epsilon(1e-12));
  CHECK(v_c_general(spec) == doctest::Approx(vc).epsilon(1e-12));
  CHECK(code_of([&] { v_u_closed(spec); }) == ErrorCode::NonScalarSpec);
}

TEST_CASE("trace route interpolates for coupled multivariate models") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 20; ++t) {
    GaussianLinearSpec spec;
    spec.beta0 = Matrix(2, 3);
    spec.beta1 = Matrix(2, 3);
    for (Eigen::Index i = 0; i < 6; ++i) {
      spec.beta0(i) = normal(rng);
      spec.beta1(i) = normal(rng);
    }
    spec.sigma0 = oracle::random_spd(2, rng);
    spec.sigma1 = oracle::random_spd(2, rng);
    const double vu = v_u_general(spec);
    const double vc = v_c_general(spec);
    double prev = vu;
    for (double eta : {0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
      const double v = v_ip_general(spec, eta);
      CHECK(v >= prev - 1e-9);
      CHECK(v <= vc + 1e-9);
      prev = v;
    }
    CHECK(std::abs(v_ip_general(spec, 1e7) - vc) < 1e-3);
  }
}

TEST_CASE("preset reductions") {
  const auto spec = GaussianLinearSpec::scalar(0.8, 1.6, 1.0, 1.0);
  for (double eta : {0.0, 1.0, 10.0}) {
    CHECK(v_ip_gaussian(spec, CostSpec::sq_sum(), eta) == doctest::Approx(v_ip_closed(spec, eta)).epsilon(1e-14));
    const auto flipped = GaussianLinearSpec::scalar(0.8, -1.6, 1.0, 1.0);
    CHECK(v_ip_gaussian(spec, CostSpec::sq_diff(), eta) == doctest::Approx(v_ip_closed(flipped, eta)));
  }
  // Constant-only cost: the coupling does not matter.
  const auto sq = CostSpec::quadratic(QuadraticCost::make(Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1),
                                                          Matrix::Constant(1, 1, -1.0)));
  CHECK(v_ip_gaussian(spec, sq, 3.0) == doctest::Approx(2.0 * 1.64 - 3.56));
  const auto opaque = CostSpec::function([](auto, auto) { return 0.0; });
  CHECK(code_of([&] { v_ip_gaussian(spec, opaque, 1.0); }) == ErrorCode::UnsupportedCost);
  CHECK(code_of([&] { v_c_gaussian(spec, opaque); }) == ErrorCode::UnsupportedCost);

  // V_c is the large-eta end of each reduced curve.
  CHECK(v_c_gaussian(spec, CostSpec::sq_sum()) == doctest::Approx(v_c_closed(spec)).epsilon(1e-14));
  for (const auto& cost : {CostSpec::sq_diff(), CostSpec::product(), negate(CostSpec::product())}) {
    CAPTURE(cost.name());
    CHECK(v_c_gaussian(spec, cost) == doctest::Approx(v_ip_gaussian(spec, cost, 1e9)).epsilon(1e-7));
  }
  CHECK(v_c_gaussian(spec, CostSpec::product()) == doctest::Approx(0.8 * 1.6 - 1.0));
}

TEST_CASE("product and negated presets against empirical transport") {
  // Large balanced samples solved exactly; the tolerance covers sampling noise.
  const auto spec = GaussianLinearSpec::scalar(0.8, 1.6, 1.0, 1.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  const int n = 1200;
  std::vector<double> y0(n), z0(n), y1(n), z1(n);
  for (int k = 0; k < n; ++k) {
    z0[k] = normal(rng);
    y0[k] = 0.8 * z0[k] + normal(rng);
    z1[k] = normal(rng);
    y1[k] = 1.6 * z1[k] + normal(rng);
  }
  const double eta = 2.0;
  for (const auto& cost : {CostSpec::product(), negate(CostSpec::sq_diff()), negate(CostSpec::product())}) {
    RowMatrix h(n, n);
    RowMatrix full(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a[] = {y0[i]};
        const double b[] = {y1[j]};
        h(i, j) = cost(a, b);
        full(i, j) = h(i, j) + eta * (z0[i] - z1[j]) * (z0[i] - z1[j]);
      }
    }
    const auto plan = solve_exact(DiscreteOtProblem(full));
    const double got = evaluate_plan(plan, h);
    const double want = v_ip_gaussian(spec, cost, eta);
    CAPTURE(cost.name());
    CHECK(std::abs(got - want) < 0.15);
  }
}

TEST_CASE("location and scale V_c") {
  LocationScaleSpec zero;
  zero.kind = NoiseModel::Location;
  zero.f0 = {Vector::Zero(1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  zero.f1 = zero.f0;
  zero.sigma0 = Matrix::Constant(1, 1, 4.0);
  zero.sigma1 = Matrix::Constant(1, 1, 1.0);
  const auto exact = v_c_location_scale(zero, 10, 1);
  CHECK(exact.exact);
  CHECK(exact.value == doctest::Approx(1.0));
  const auto mc_zero = v_c_location_scale(zero, 1000, 1, ExpectationMode::MonteCarlo);
  CHECK(mc_zero.value == doctest::Approx(1.0));
  CHECK(mc_zero.std_error == 0.0);

  LocationScaleSpec a = zero;
  a.f0.linear(0, 0) = 0.6;
  a.f1.linear(0, 0) = 1.6;
  a.sigma0(0, 0) = 1.0;
  const auto closed = v_c_location_scale(a, 1, 9);
  CHECK(closed.value == doctest::Approx(4.84).epsilon(1e-14));
  const auto mc = v_c_location_scale(a, 200000, 9, ExpectationMode::MonteCarlo);
  CHECK(!mc.exact);
  CHECK(mc.std_error > 0.0);
  CHECK(std::abs(mc.value - 4.84) < 4.0 * mc.std_error);
  const auto again = v_c_location_scale(a, 200000, 9, ExpectationMode::MonteCarlo);
  CHECK(again.value == mc.value);

  // Quadratic location map, E[(0.8 Z^2)^2] = 0.64 * 3.
  LocationScaleSpec b = a;
  b.f0.linear(0, 0) = 0.0;
  b.f1.linear(0, 0) = 0.0;
  b.f0.quadratic(0, 0) = 0.2;
  b.f1.quadratic(0, 0) = 0.6;
  const auto quad = v_c_location_scale(b, 400000, 4);
  CHECK(!quad.exact);
  CHECK(std::abs(quad.value - 1.92) < 4.0 * quad.std_error);

  LocationScaleSpec s = a;
  s.kind = NoiseModel::Scale;
  s.f1 = s.f0;
  CHECK(v_c_location_scale(s, 5000, 2).value == 0.0);

  // Scale model, scalar: E[(|f0| - |f1|)^2] with f0 = 0.5, f1 = 2 constant.
  LocationScaleSpec c = s;
  c.f0 = {Vector::Constant(1, 0.5), Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  c.f1 = {Vector::Constant(1, -2.0), Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  CHECK(v_c_location_scale(c, 100, 3).value == doctest::Approx(2.25));
}

TEST_CASE("model JSON") {
  const auto lin = gaussian_linear_spec_from_json(R"({"beta0": 0.8, "beta1": 1.6, "sigma0": 1, "sigma1": 2})");
  CHECK(lin.is_scalar());
  CHECK(lin.sigma1(0, 0) == 4.0);
  const auto multi = gaussian_linear_spec_from_json(
      R"({"beta0": [[1, 0], [0, 1]], "beta1": [[0.5, 0], [0, 2]], "cov0": [[1, 0], [0, 1]], "cov1": [[2, 0.1], [0.1, 1]]})");
  CHECK(multi.dy() == 2);
  CHECK(multi.dz() == 2);
  CHECK(code_of([] { gaussian_linear_spec_from_json(R"({"beta0": 1, "beta1": 1, "sigma0": 1})"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([] { gaussian_linear_spec_from_json(R"({"beta0": 1, "beta1": 1, "sigma0": 0, "sigma1": 1})"); }) ==
        ErrorCode::IndefiniteInput);

  const auto ls = location_scale_spec_from_json(
      R"({"kind": "scale", "f0": {"intercept": [-0.35], "linear": 0.5}, "f1": {"intercept": [0.35], "linear": [1.1]},
          "sigma0": 1, "sigma1": 1})");
  CHECK(ls.kind == NoiseModel::Scale);
  CHECK(ls.f0.intercept(0) == -0.35);
  CHECK(ls.f1.linear(0, 0) == 1.1);
  CHECK(ls.f1.quadratic(0, 0) == 0.0);
  CHECK(code_of([] { location_scale_spec_from_json(R"({"kind": "shift"})"); }) == ErrorCode::InvalidConfig);
}
