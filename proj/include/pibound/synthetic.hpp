#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pibound/gaussian_oracle.hpp"
#include "pibound/pi_estimator.hpp"

namespace pibound {

using SynthModel = std::variant<LocationScaleSpec, GaussianLinearSpec>;

struct SynthConfig {
  SynthModel model;
  std::size_t n = 0;  // control units
  std::size_t m = 0;  // treated units
  std::uint64_t seed = 0;
};

/// Draws (Z, Y(0), Y(1)) for all n + m units, then reveals Y(0) for a random
/// set of n units and Y(1) for the remaining m. Rows come out in unit order.
/// Deterministic in the seed.
ObservedSample generate(const SynthConfig& config);

/// "linear-location", "quadratic-location", "scale" and "gaussian-linear".
const std::vector<std::string>& synth_preset_names();
SynthModel synth_preset(std::string_view name);

}  // namespace pibound
