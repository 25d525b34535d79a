#include "pibound/synthetic.hpp"

#include <algorithm>
#include <numeric>

#include "pibound/errors.hpp"
#include "pibound/random.hpp"

namespace pibound {

namespace {

enum Stream : std::uint64_t { kCovariate = 0, kNoise0 = 1, kNoise1 = 2, kAssignment = 3 };

Matrix noise_factor(const Matrix& cov) { return sqrt_spd(cov, SqrtMethod::Eigen); }

CovariateMap scalar_map(double intercept, double linear, double quadratic) {
  return {Vector::Constant(1, intercept), Matrix::Constant(1, 1, linear), Matrix::Constant(1, 1, quadratic)};
}

LocationScaleSpec scalar_model(NoiseModel kind, CovariateMap f0, CovariateMap f1) {
  LocationScaleSpec s;
  s.kind = kind;
  s.f0 = std::move(f0);
  s.f1 = std::move(f1);
  s.sigma0 = Matrix::Identity(1, 1);
  s.sigma1 = Matrix::Identity(1, 1);
  return s;
}

}  // namespace

ObservedSample generate(const SynthConfig& config) {
  if (config.n < 1 || config.m < 1) throw Error(ErrorCode::InvalidConfig, "both group sizes must be at least 1");
  const std::size_t total = config.n + config.m;

  Eigen::Index dy = 0;
  Eigen::Index dz = 0;
  Matrix l0;
  Matrix l1;
  std::visit(
      [&](const auto& model) {
        model.validate();
        dy = model.dy();
        dz = model.dz();
        l0 = noise_factor(model.sigma0);
        l1 = noise_factor(model.sigma1);
      },
      config.model);

  const CounterRng z_rng(config.seed, kCovariate);
  const CounterRng e0_rng(config.seed, kNoise0);
  const CounterRng e1_rng(config.seed, kNoise1);
  const CounterRng w_rng(config.seed, kAssignment);

  // Completely randomized design: the m units with the smallest keys are treated.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint64_t> keys(total);
  for (std::size_t u = 0; u < total; ++u) keys[u] = w_rng.bits(u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });

  ObservedSample sample;
  sample.w.assign(total, 0);
  for (std::size_t k = 0; k < config.m; ++k) sample.w[order[k]] = 1;
  sample.y.resize(static_cast<Eigen::Index>(total), dy);
  sample.z.resize(static_cast<Eigen::Index>(total), dz);

  Vector z(dz);
  Vector e0(dy);
  Vector e1(dy);
  for (std::size_t u = 0; u < total; ++u) {
    const auto udz = u * static_cast<std::size_t>(dz);
    const auto udy = u * static_cast<std::size_t>(dy);
    for (Eigen::Index d = 0; d < dz; ++d) z(d) = z_rng.normal(udz + d);
    for (Eigen::Index d = 0; d < dy; ++d) {
      e0(d) = e0_rng.normal(udy + d);
      e1(d) = e1_rng.normal(udy + d);
    }
    // Both potential outcomes are drawn for every unit; only one is revealed.
    Vector y0;
    Vector y1;
    if (const auto* g = std::get_if<GaussianLinearSpec>(&config.model)) {
      y0 = g->beta0 * z + l0 * e0;
      y1 = g->beta1 * z + l1 * e1;
    } else {
      const auto& ls = std::get<LocationScaleSpec>(config.model);
      if (ls.kind == NoiseModel::Location) {
        y0 = ls.f0(z) + l0 * e0;
        y1 = ls.f1(z) + l1 * e1;
      } else {
        y0 = ls.f0(z).cwiseProduct(l0 * e0);
        y1 = ls.f1(z).cwiseProduct(l1 * e1);
      }
    }
    const auto row = static_cast<Eigen::Index>(u);
    sample.y.row(row) = (sample.w[u] == 1 ? y1 : y0).transpose();
    sample.z.row(row) = z.transpose();
  }
  return sample;
}

const std::vector<std::string>& synth_preset_names() {
  static const std::vector<std::string> names = {"linear-location", "quadratic-location", "scale", "gaussian-linear"};
  return names;
}

SynthModel synth_preset(std::string_view name) {
  if (name == "linear-location") {
    return scalar_model(NoiseModel::Location, scalar_map(0.0, 0.6, 0.0), scalar_map(0.0, 1.6, 0.0));
  }
  if (name == "quadratic-location") {
    return scalar_model(NoiseModel::Location, scalar_map(0.0, 0.0, 0.2), scalar_map(0.0, 0.0, 0.6));
  }
  if (name == "scale") {
    return scalar_model(NoiseModel::Scale, scalar_map(-0.35, 0.5, 0.0), scalar_map(0.35, 1.1, 0.0));
  }
  if (name == "gaussian-linear") return GaussianLinearSpec::scalar(0.8, 1.6, 1.0, 1.0);
  std::string known;
  for (const auto& n : synth_preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::InvalidConfig, "unknown preset \"" + std::string(name) + "\" (known: " + known + ")");
}

}  // namespace pibound
