#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pibound/pi_estimator.hpp"

namespace pibound {

/// Columns `w`, `y1..y<dY>`, `z1..z<dZ>` located by header name; other
/// columns are ignored. Row order is preserved.
ObservedSample parse_csv(std::istream& in, const std::string& source = "<input>");
ObservedSample parse_csv_file(const std::string& path);

/// Writes the same schema with shortest round-trip numbers.
void write_csv(const ObservedSample& sample, std::ostream& out);

enum class Command { Bounds, Sweep, Oracle, Synth, Rate, Neyman, Corr };
enum class OutputFormat { Json, Csv, Table };

Command parse_command(const std::string& text);
OutputFormat parse_format(const std::string& text);
SideSelection parse_side(const std::string& text);

struct RunConfig {
  Command command = Command::Sweep;

  // Data source: exactly one of input / preset for sample commands. Model
  // commands take a preset, a model JSON file, or the scalar beta/sigma flags.
  std::optional<std::string> input;
  std::optional<std::string> preset;
  std::optional<std::string> model_json;
  std::size_t n = 500;
  std::size_t m = 500;

  std::string cost = "sq-sum";
  std::string eta = "0";
  std::string side = "both";
  std::string solver = "exact";
  double epsilon = 0.01;
  std::size_t max_iters = 10000;
  double tol = 1e-9;
  bool standardize_z = false;
  std::uint64_t seed = 0;

  std::size_t seeds = 20;
  std::vector<std::size_t> sizes{100, 200, 400, 800};
  std::size_t draws = 1000000;
  double beta0 = 0.8;
  double beta1 = 1.6;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  bool clamp = false;
  std::optional<std::string> dump_plan;

  OutputFormat format = OutputFormat::Json;
  std::optional<std::string> output;  // stdout when unset

  /// Throws InvalidConfig (or a grid/cost error) when the config is unusable.
  void validate() const;
};

/// Runs one command and writes its result. Library errors are reported on
/// `err`; the return value is the process exit status. With an output path
/// the result goes to a temporary file that is renamed only on success.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace pibound
