#include <iostream>

#include <CLI11.hpp>

#include "pibound/cli.hpp"
#include "pibound/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Partial-identification bounds from mirror-penalized optimal transport"};
  pibound::RunConfig config;

  std::string command;
  std::string format = "json";
  std::string input, preset, model_json, output, dump_plan;

  app.add_option("command", command, "bounds | sweep | oracle | synth | rate | neyman | corr")
      ->required()
      ->check(CLI::IsMember({"bounds", "sweep", "oracle", "synth", "rate", "neyman", "corr"}));
  app.add_option("--input", input, "CSV file with columns w, y1.., z1..");
  app.add_option("--preset", preset, "synthetic model: linear-location, quadratic-location, scale, gaussian-linear");
  app.add_option("--model-json", model_json, "model definition for oracle, synth and rate");
  app.add_option("--n", config.n, "control units drawn from a preset")->capture_default_str();
  app.add_option("--m", config.m, "treated units drawn from a preset")->capture_default_str();
  app.add_option("--cost", config.cost, "sq-sum | sq-diff | product | quadratic:<json>")->capture_default_str();
  app.add_option("--eta", config.eta, "eta values: \"0,1,10\" or log range \"start:stop:count\"")
      ->capture_default_str();
  app.add_option("--side", config.side, "lower | upper | both")->capture_default_str();
  app.add_option("--solver", config.solver, "exact | sinkhorn")->capture_default_str();
  app.add_option("--epsilon", config.epsilon, "Sinkhorn regularization")->capture_default_str();
  app.add_option("--max-iters", config.max_iters, "Sinkhorn iteration cap")->capture_default_str();
  app.add_option("--tol", config.tol, "Sinkhorn marginal tolerance")->capture_default_str();
  app.add_flag("--standardize-z", config.standardize_z, "standardize covariates with pooled moments");
  app.add_option("--seed", config.seed, "random seed")->capture_default_str();
  app.add_option("--seeds", config.seeds, "replications per sample size (synth, rate)")->capture_default_str();
  app.add_option("--sizes", config.sizes, "sample sizes N, n = m = N (synth, rate)")->delimiter(',');
  app.add_option("--draws", config.draws, "Monte Carlo draws for location/scale V_c")->capture_default_str();
  app.add_option("--beta0", config.beta0)->capture_default_str();
  app.add_option("--beta1", config.beta1)->capture_default_str();
  app.add_option("--sigma0", config.sigma0, "noise standard deviation, control")->capture_default_str();
  app.add_option("--sigma1", config.sigma1, "noise standard deviation, treated")->capture_default_str();
  app.add_flag("--clamp", config.clamp, "clamp correlation bounds to [-1, 1]");
  app.add_option("--dump-plan", dump_plan, "write the transport plan of bounds as i,j,mass CSV");
  app.add_option("--format", format, "json | csv | table")->capture_default_str();
  app.add_option("--output", output, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    config.command = pibound::parse_command(command);
    config.format = pibound::parse_format(format);
  } catch (const pibound::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (!input.empty()) config.input = input;
  if (!preset.empty()) config.preset = preset;
  if (!model_json.empty()) config.model_json = model_json;
  if (!output.empty()) config.output = output;
  if (!dump_plan.empty()) config.dump_plan = dump_plan;
  return pibound::run(config, std::cout, std::cerr);
}
