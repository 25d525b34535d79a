#include "pibound/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "numeric.hpp"
#include "pibound/applications.hpp"
#include "pibound/errors.hpp"
#include "pibound/synthetic.hpp"

namespace pibound {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool blank(std::string_view line) { return line.find_first_not_of(" \t\r") == std::string_view::npos; }

// Index of column `prefix`1, `prefix`2, ... until the first gap. A later
// column past the gap is an error rather than silently dropped.
std::vector<std::size_t> numbered_columns(const std::map<std::string, std::size_t>& index, char prefix,
                                          const std::string& source) {
  std::vector<std::size_t> cols;
  while (true) {
    const auto it = index.find(prefix + std::to_string(cols.size() + 1));
    if (it == index.end()) break;
    cols.push_back(it->second);
  }
  if (cols.empty()) {
    throw Error(ErrorCode::MissingColumn, source + ": no column named '" + std::string(1, prefix) + "1'");
  }
  for (const auto& [name, col] : index) {
    if (name.size() < 2 || name[0] != prefix) continue;
    if (name.find_first_not_of("0123456789", 1) != std::string::npos) continue;
    if (std::stoul(name.substr(1)) > cols.size()) {
      throw Error(ErrorCode::MissingColumn, source + ": column '" + name + "' present but '" + std::string(1, prefix) +
                                                std::to_string(cols.size() + 1) + "' is missing");
    }
  }
  return cols;
}

}  // namespace

ObservedSample parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!blank(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error(ErrorCode::MissingColumn, source + ": empty file, expected a header row");

  std::vector<std::string> names;
  for (auto cell : split(line)) names.emplace_back(cell);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (!index.emplace(names[c], c).second) {
      throw Error(ErrorCode::MissingColumn, source + ": column '" + names[c] + "' appears twice");
    }
  }
  const auto w_it = index.find("w");
  if (w_it == index.end()) throw Error(ErrorCode::MissingColumn, source + ": no column named 'w'");
  const std::size_t w_col = w_it->second;
  const auto y_cols = numbered_columns(index, 'y', source);
  const auto z_cols = numbered_columns(index, 'z', source);

  std::vector<int> w;
  std::vector<double> y;
  std::vector<double> z;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    ++row;
    const auto cells = split(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != names.size()) {
      throw Error(ErrorCode::NonNumericCell, where + ": expected " + std::to_string(names.size()) + " cells, found " +
                                                 std::to_string(cells.size()));
    }
    auto number = [&](std::size_t col) {
      const std::string_view cell = cells[col];
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::NonNumericCell, where + " (row " + std::to_string(row) + "), column '" +
                                                   names[col] + "': '" + std::string(cell) +
                                                   "' is not a number");
      }
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteInput, where + " (row " + std::to_string(row) + "), column '" +
                                                   names[col] + "' is not finite");
      }
      return value;
    };
    const double wv = number(w_col);
    if (wv != 0.0 && wv != 1.0) {
      throw Error(ErrorCode::NonBinaryTreatment, where + " (row " + std::to_string(row) + "): w = " +
                                                     std::string(cells[w_col]) + ", expected 0 or 1");
    }
    w.push_back(static_cast<int>(wv));
    for (auto c : y_cols) y.push_back(number(c));
    for (auto c : z_cols) z.push_back(number(c));
  }

  ObservedSample sample;
  sample.w = std::move(w);
  const auto rows = static_cast<Eigen::Index>(sample.w.size());
  const auto dy = static_cast<Eigen::Index>(y_cols.size());
  const auto dz = static_cast<Eigen::Index>(z_cols.size());
  sample.y = Eigen::Map<const RowMatrix>(y.data(), rows, dy);
  sample.z = Eigen::Map<const RowMatrix>(z.data(), rows, dz);
  if (sample.n0() == 0 || sample.n1() == 0) {
    throw Error(ErrorCode::EmptyGroup, source + ": " + (sample.n0() == 0 ? "no control rows (w = 0)" : "no treated rows (w = 1)"));
  }
  return sample;
}

ObservedSample parse_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_csv(in, path);
}

void write_csv(const ObservedSample& sample, std::ostream& out) {
  out << "w";
  for (Eigen::Index c = 0; c < sample.dy(); ++c) out << ",y" << c + 1;
  for (Eigen::Index c = 0; c < sample.dz(); ++c) out << ",z" << c + 1;
  out << '\n';
  for (std::size_t k = 0; k < sample.rows(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out << sample.w[k];
    for (Eigen::Index c = 0; c < sample.dy(); ++c) out << ',' << detail::format_shortest(sample.y(r, c));
    for (Eigen::Index c = 0; c < sample.dz(); ++c) out << ',' << detail::format_shortest(sample.z(r, c));
    out << '\n';
  }
}

namespace {

constexpr std::pair<const char*, Command> kCommands[] = {
    {"bounds", Command::Bounds}, {"sweep", Command::Sweep}, {"oracle", Command::Oracle}, {"synth", Command::Synth},
    {"rate", Command::Rate},     {"neyman", Command::Neyman}, {"corr", Command::Corr}};

const char* command_name(Command c) {
  for (const auto& [name, value] : kCommands) {
    if (value == c) return name;
  }
  return "?";
}

bool uses_sample(Command c) {
  return c == Command::Bounds || c == Command::Sweep || c == Command::Neyman || c == Command::Corr;
}

}  // namespace

Command parse_command(const std::string& text) {
  for (const auto& [name, value] : kCommands) {
    if (text == name) return value;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown command '" + text + "'");
}

OutputFormat parse_format(const std::string& text) {
  if (text == "json") return OutputFormat::Json;
  if (text == "csv") return OutputFormat::Csv;
  if (text == "table") return OutputFormat::Table;
  throw Error(ErrorCode::InvalidConfig, "unknown format '" + text + "' (json, csv or table)");
}

SideSelection parse_side(const std::string& text) {
  if (text == "lower") return SideSelection::Lower;
  if (text == "upper") return SideSelection::Upper;
  if (text == "both") return SideSelection::Both;
  throw Error(ErrorCode::InvalidConfig, "unknown side '" + text + "' (lower, upper or both)");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (uses_sample(command)) {
    if (input.has_value() == preset.has_value()) fail("give exactly one of --input or --preset");
    if (model_json) fail("--model-json is not used by this command");
  } else {
    if (input) fail("--input is not used by this command");
    if (preset && model_json) fail("give at most one of --preset or --model-json");
  }
  if (preset && !input) synth_preset(*preset);
  if ((preset || command == Command::Synth || command == Command::Rate) && (n == 0 || m == 0)) {
    fail("--n and --m must be positive");
  }

  const EtaGrid grid = EtaGrid::parse(eta);
  if ((command == Command::Bounds || command == Command::Rate) && grid.size() != 1) {
    fail("this command takes a single eta value");
  }
  CostSpec::parse(cost);
  parse_side(side);
  if (solver != "exact" && solver != "sinkhorn") fail("unknown solver '" + solver + "' (exact or sinkhorn)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("--epsilon must be positive");
  if (!(tol > 0.0) || !std::isfinite(tol)) fail("--tol must be positive");
  if (max_iters == 0) fail("--max-iters must be positive");
  if (seeds == 0) fail("--seeds must be positive");
  if (draws == 0) fail("--draws must be positive");
  if (command == Command::Synth || command == Command::Rate) {
    if (sizes.empty()) fail("--sizes is empty");
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] == 0 || (k > 0 && sizes[k] <= sizes[k - 1])) fail("--sizes must be positive and increasing");
    }
  }
  if (dump_plan && command != Command::Bounds) fail("--dump-plan is only available for bounds");
  if (dump_plan && output && *dump_plan == *output) fail("--dump-plan and --output must differ");
}

namespace {

struct Emitted {
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> columns;
  nlohmann::json rows = nlohmann::json::array();
};

SolverChoice solver_choice(const RunConfig& c) {
  SolverChoice s;
  if (c.solver == "sinkhorn") {
    s.kind = SolverChoice::Kind::Sinkhorn;
    s.sinkhorn.epsilon = c.epsilon;
    s.sinkhorn.max_iters = c.max_iters;
    s.sinkhorn.tol = c.tol;
  }
  return s;
}

EstimatorOptions estimator_options(const RunConfig& c) { return {solver_choice(c), c.standardize_z}; }

ObservedSample load_sample(const RunConfig& c) {
  if (c.input) return parse_csv_file(*c.input);
  return generate({synth_preset(*c.preset), c.n, c.m, c.seed});
}

SynthModel load_model(const RunConfig& c) {
  if (c.preset) return synth_preset(*c.preset);
  if (c.model_json) {
    const std::string text = read_text_file(*c.model_json);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, *c.model_json + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("kind")) return location_scale_spec_from_json(text);
    return gaussian_linear_spec_from_json(text);
  }
  return GaussianLinearSpec::scalar(c.beta0, c.beta1, c.sigma0, c.sigma1);
}

std::string model_label(const RunConfig& c) {
  if (c.preset) return *c.preset;
  if (c.model_json) return std::filesystem::path(*c.model_json).filename().string();
  return "scalar-gaussian";
}

nlohmann::json num(double x) { return json_number(x); }

nlohmann::json bound_row(const PIBound& b) {
  return {{"eta", num(b.eta)},
          {"lower", num(b.lower)},
          {"upper", num(b.upper)},
          {"lower_penalty", num(b.lower_penalty)},
          {"upper_penalty", num(b.upper_penalty)}};
}

const std::vector<std::string> kBoundColumns{"eta", "lower", "upper", "lower_penalty", "upper_penalty"};

void write_atomically(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << text;
    out.close();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::Io, "failed writing " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::Io, "cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

Emitted run_bounds(const RunConfig& c, std::string* plan_text) {
  const ObservedSample sample = load_sample(c);
  const CostSpec cost = CostSpec::parse(c.cost);
  const EtaGrid grid = EtaGrid::parse(c.eta);
  const SideSelection sides = parse_side(c.side);
  Emitted e;
  e.columns = kBoundColumns;
  for (const auto& b : sweep(sample, cost, grid, estimator_options(c), sides)) e.rows.push_back(bound_row(b));
  if (plan_text) {
    const Side side = sides == SideSelection::Upper ? Side::Upper : Side::Lower;
    const auto est = estimate_bound(sample, cost, grid[0], side, estimator_options(c));
    std::ostringstream out;
    write_plan_csv(est.plan, out);
    *plan_text = out.str();
  }
  return e;
}

Emitted run_oracle(const RunConfig& c) {
  const CostSpec cost = CostSpec::parse(c.cost);
  const EtaGrid grid = EtaGrid::parse(c.eta);
  const SynthModel model = load_model(c);
  Emitted e;
  if (const auto* ls = std::get_if<LocationScaleSpec>(&model)) {
    if (cost.kind() != CostKind::SqSum || cost.sign() != 1.0) {
      throw Error(ErrorCode::UnsupportedCost, "the location/scale oracle is only available for sq-sum");
    }
    const auto v = v_c_location_scale(*ls, c.draws, c.seed);
    e.columns = {"v_c", "std_error", "draws", "exact"};
    e.rows.push_back({{"v_c", num(v.value)}, {"std_error", num(v.std_error)}, {"draws", v.draws}, {"exact", v.exact}});
    return e;
  }
  const auto& spec = std::get<GaussianLinearSpec>(model);
  const double vu = v_ip_gaussian(spec, cost, 0.0);
  const double vc = v_c_gaussian(spec, cost);
  e.summary = {{"v_u", num(vu)}, {"v_c", num(vc)}};
  e.columns = {"eta", "v_u", "v_c", "v_ip"};
  for (double eta : grid) {
    e.rows.push_back({{"eta", num(eta)}, {"v_u", num(vu)}, {"v_c", num(vc)}, {"v_ip", num(v_ip_gaussian(spec, cost, eta))}});
  }
  return e;
}

Emitted run_synth(const RunConfig& c) {
  const CostSpec cost = CostSpec::parse(c.cost);
  const EtaGrid grid = EtaGrid::parse(c.eta);
  const SynthModel model = load_model(c);
  const SolverChoice solver = solver_choice(c);

  // Gaussian linear models are compared with V_ip(eta); location/scale
  // models only have V_c in closed form, the target as eta grows.
  std::vector<double> truth;
  std::string target = "v_ip";
  if (const auto* ls = std::get_if<LocationScaleSpec>(&model)) {
    if (cost.kind() != CostKind::SqSum || cost.sign() != 1.0) {
      throw Error(ErrorCode::UnsupportedCost, "location/scale models are only compared for sq-sum");
    }
    truth.assign(grid.size(), v_c_location_scale(*ls, c.draws, c.seed).value);
    target = "v_c";
  } else {
    for (double eta : grid) truth.push_back(v_ip_gaussian(std::get<GaussianLinearSpec>(model), cost, eta));
  }

  Emitted e;
  e.summary = {{"model", model_label(c)}, {"target", target}};
  e.columns = {"model", "n", "eta", "target", "mean_abs_error", "std_error"};
  for (std::size_t n : c.sizes) {
    std::vector<std::vector<double>> errors(grid.size());
    for (std::size_t rep = 0; rep < c.seeds; ++rep) {
      const auto sample = generate({model, n, n, rate_replicate_seed(c.seed, n, rep)});
      const auto [g0, g1] = split_groups(sample);
      const auto bounds = sweep(g0, g1, cost, grid, solver, SideSelection::Lower);
      for (std::size_t k = 0; k < grid.size(); ++k) errors[k].push_back(std::abs(bounds[k].lower - truth[k]));
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      detail::CompensatedSum sum;
      for (double x : errors[k]) sum.add(x);
      const double mean = sum.value() / static_cast<double>(c.seeds);
      double var = 0.0;
      for (double x : errors[k]) var += (x - mean) * (x - mean);
      const double se = c.seeds > 1 ? std::sqrt(var / static_cast<double>(c.seeds - 1) / static_cast<double>(c.seeds)) : 0.0;
      e.rows.push_back({{"model", model_label(c)},
                        {"n", n},
                        {"eta", num(grid[k])},
                        {"target", num(truth[k])},
                        {"mean_abs_error", num(mean)},
                        {"std_error", num(se)}});
    }
  }
  return e;
}

Emitted run_rate(const RunConfig& c) {
  const SynthModel model = load_model(c);
  const auto* spec = std::get_if<GaussianLinearSpec>(&model);
  if (!spec) throw Error(ErrorCode::InvalidConfig, "the rate diagnostic needs a Gaussian linear model");
  const double eta = EtaGrid::parse(c.eta)[0];
  const auto r = rate_diagnostic(*spec, CostSpec::parse(c.cost), eta, c.sizes, c.seeds, c.seed, solver_choice(c));
  Emitted e;
  e.summary = {{"eta", num(eta)}, {"truth", num(r.truth)}, {"slope", num(r.slope)}};
  e.columns = {"n", "mean_abs_error", "std_error"};
  for (const auto& p : r.points) {
    e.rows.push_back({{"n", p.n}, {"mean_abs_error", num(p.mean_abs_error)}, {"std_error", num(p.std_error)}});
  }
  return e;
}

Emitted from_report(nlohmann::json report, std::vector<std::string> columns) {
  Emitted e;
  e.rows = std::move(report["rows"]);
  report.erase("rows");
  e.summary = std::move(report);
  e.columns = std::move(columns);
  return e;
}

nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = command_name(c.command);
  if (c.input) j["input"] = *c.input;
  if (c.preset) j["preset"] = *c.preset;
  if (c.model_json) j["model_json"] = *c.model_json;
  const bool generated = c.preset && uses_sample(c.command);
  if (generated) {
    j["n"] = c.n;
    j["m"] = c.m;
  }
  if (c.command != Command::Oracle && c.command != Command::Synth && c.command != Command::Rate) {
    j["standardize_z"] = c.standardize_z;
  }
  if (c.command == Command::Neyman) {
    j["cost"] = "sq-diff";
  } else if (c.command == Command::Corr) {
    j["cost"] = "product";
    j["clamp"] = c.clamp;
  } else {
    j["cost"] = c.cost;
  }
  nlohmann::ordered_json etas = nlohmann::ordered_json::array();
  for (double eta : EtaGrid::parse(c.eta)) etas.push_back(json_number(eta));
  j["eta"] = etas;
  if (c.command == Command::Bounds || c.command == Command::Sweep) j["side"] = c.side;
  if (c.command != Command::Oracle) {
    j["solver"] = c.solver;
    if (c.solver == "sinkhorn") {
      j["epsilon"] = num(c.epsilon);
      j["max_iters"] = c.max_iters;
      j["tol"] = num(c.tol);
    }
  }
  if (generated || c.command == Command::Synth || c.command == Command::Rate || c.command == Command::Oracle) {
    j["seed"] = c.seed;
  }
  if (c.command == Command::Synth || c.command == Command::Rate) {
    j["seeds"] = c.seeds;
    j["sizes"] = c.sizes;
  }
  if (!c.preset && !c.model_json && !uses_sample(c.command)) {
    j["beta0"] = num(c.beta0);
    j["beta1"] = num(c.beta1);
    j["sigma0"] = num(c.sigma0);
    j["sigma1"] = num(c.sigma1);
  }
  return j;
}

std::string cell_text(const nlohmann::json& v) {
  if (v.is_null()) return "nan";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  return format_number(v.get<double>());
}

std::string render(const RunConfig& c, const Emitted& e) {
  std::ostringstream out;
  switch (c.format) {
    case OutputFormat::Json: {
      nlohmann::ordered_json doc;
      doc["config"] = config_json(c);
      if (!e.summary.empty()) doc["summary"] = nlohmann::ordered_json::parse(e.summary.dump());
      auto& results = doc["results"] = nlohmann::ordered_json::array();
      for (const auto& row : e.rows) {
        auto& r = results.emplace_back(nlohmann::ordered_json::object());
        for (const auto& col : e.columns) r[col] = nlohmann::ordered_json::parse(row[col].dump());
      }
      out << doc.dump(2) << '\n';
      break;
    }
    case OutputFormat::Csv: {
      for (std::size_t k = 0; k < e.columns.size(); ++k) out << (k ? "," : "") << e.columns[k];
      out << '\n';
      for (const auto& row : e.rows) {
        for (std::size_t k = 0; k < e.columns.size(); ++k) out << (k ? "," : "") << cell_text(row[e.columns[k]]);
        out << '\n';
      }
      break;
    }
    case OutputFormat::Table: {
      for (const auto& [key, value] : e.summary.items()) out << key << " = " << cell_text(value) << '\n';
      std::vector<std::vector<std::string>> cells;
      for (const auto& row : e.rows) {
        auto& r = cells.emplace_back();
        for (const auto& col : e.columns) r.push_back(cell_text(row[col]));
      }
      out << format_table(e.columns, cells);
      break;
    }
  }
  return out.str();
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    std::string plan_text;
    Emitted e;
    switch (config.command) {
      case Command::Bounds:
      case Command::Sweep:
        e = run_bounds(config, config.dump_plan ? &plan_text : nullptr);
        break;
      case Command::Oracle:
        e = run_oracle(config);
        break;
      case Command::Synth:
        e = run_synth(config);
        break;
      case Command::Rate:
        e = run_rate(config);
        break;
      case Command::Neyman:
        e = from_report(to_json(neyman_bound(load_sample(config), EtaGrid::parse(config.eta), estimator_options(config))),
                        {"eta", "sq_effect_lower", "s_tau_lb", "v_estimate", "relative_sample_size"});
        break;
      case Command::Corr:
        e = from_report(to_json(correlation_bound(load_sample(config), EtaGrid::parse(config.eta),
                                                  estimator_options(config), config.clamp)),
                        {"eta", "cross_lower", "cross_upper", "rho_lower", "rho_upper", "length"});
        break;
    }
    const std::string text = render(config, e);
    if (config.dump_plan) write_atomically(*config.dump_plan, plan_text);
    if (config.output) {
      write_atomically(*config.output, text);
    } else {
      out << text;
      out.flush();
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace pibound
