// Command-line front end: sample | oracle | compare | validate.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stmala/stmala.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> replicates;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
  auto* opt = cmd->add_option("--config", args.config_path, "Path to the run configuration file");
  if (needs_config) opt->required();
  cmd->add_option("--seed", args.seed, "Override the master seed");
  cmd->add_option("--out", args.out, "Override the output directory");
  cmd->add_option("--replicates", args.replicates, "Override the replicate count");
  cmd->add_flag("--quiet", args.quiet, "Suppress console reporting");
}

stmala::ExperimentConfig load_config(const CommonArgs& args) {
  auto cfg = stmala::ExperimentConfig::from_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.out) cfg.output_dir = *args.out;
  if (args.replicates) {
    if (*args.replicates < 1) throw stmala::ConfigError("--replicates must be >= 1");
    cfg.replicates = *args.replicates;
  }
  return cfg;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void report_run(const stmala::ExperimentResult& res, bool quiet) {
  if (quiet) return;
  std::vector<double> rates, errors;
  for (const auto& r : res.replicates) {
    rates.push_back(r.acceptance_rate);
    if (!std::isnan(r.final_error)) errors.push_back(r.final_error);
  }
  std::printf("%s: %zu replicate(s), median acceptance rate %.4f\n",
              stmala::to_string(res.sampler).c_str(), res.replicates.size(), median(rates));
  if (!errors.empty())
    std::printf("%s: median activation error %.4f\n", stmala::to_string(res.sampler).c_str(),
                median(errors));
}

int cmd_sample(const CommonArgs& args) {
  const auto cfg = load_config(args);
  const auto res = stmala::run_experiment(cfg, cfg.sampler, cfg.output_dir, args.quiet);
  report_run(res, args.quiet);
  if (!args.quiet) std::printf("artifacts written to %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  namespace fs = std::filesystem;
  const auto cfg = load_config(args);
  const auto pr = stmala::make_problem(cfg);
  if (!stmala::oracle_applicable(cfg, pr))
    throw stmala::ConfigError("oracle requires an L21 model with T = 1 and P <= 20");
  const auto post = stmala::enumerate_posterior(
      pr.y, pr.g, cfg.tau, cfg.lambda, stmala::bernoulli_log_prior(cfg.omega, pr.g.cols()),
      cfg.mc_samples, stmala::Rng::derive_state(cfg.seed, stmala::kStreamOracle));
  const auto activation = stmala::activation_probs(post);

  fs::create_directories(cfg.output_dir);
  {
    stmala::TableWriter w((fs::path(cfg.output_dir) / "oracle.csv").string(),
                          {"mask", "log_weight", "prob"});
    for (std::uint64_t mask = 0; mask < post.probs.size(); ++mask)
      w.row({stmala::ModelMask::from_index(mask, post.p).to_string(),
             stmala::format_double(post.log_weights[mask]),
             stmala::format_double(post.probs[mask])});
  }
  {
    stmala::TableWriter w((fs::path(cfg.output_dir) / "activation_exact.csv").string(),
                          {"component", "prob"});
    for (stmala::Index i = 0; i < activation.size(); ++i)
      w.row({std::to_string(i), stmala::format_double(activation(i))});
  }
  if (!args.quiet) {
    std::printf("enumerated %zu models; activation probabilities:\n", post.probs.size());
    for (stmala::Index i = 0; i < activation.size(); ++i)
      std::printf("  component %ld: %.6f\n", static_cast<long>(i), activation(i));
  }
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  namespace fs = std::filesystem;
  auto cfg = load_config(args);
  if (cfg.sampler == stmala::SamplerKind::Rjmcmc)
    throw stmala::ConfigError("compare: sampler.kind must be an stmala variant (the RJMCMC side is implicit)");
  const auto res_st = stmala::run_experiment(cfg, cfg.sampler,
                                             (fs::path(cfg.output_dir) / "stmala").string(),
                                             args.quiet);
  const auto res_rj = stmala::run_experiment(cfg, stmala::SamplerKind::Rjmcmc,
                                             (fs::path(cfg.output_dir) / "rjmcmc").string(),
                                             args.quiet);
  report_run(res_st, args.quiet);
  report_run(res_rj, args.quiet);

  stmala::TableWriter w((fs::path(cfg.output_dir) / "comparison.csv").string(),
                        {"replicate", "stmala_error", "rjmcmc_error", "stmala_acceptance",
                         "rjmcmc_acceptance"});
  for (std::size_t i = 0; i < res_st.replicates.size(); ++i) {
    const auto& a = res_st.replicates[i];
    const auto& b = res_rj.replicates[i];
    w.row({std::to_string(a.replicate), stmala::format_double(a.final_error),
           stmala::format_double(b.final_error), stmala::format_double(a.acceptance_rate),
           stmala::format_double(b.acceptance_rate)});
  }
  if (!args.quiet) std::printf("comparison written to %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  const auto checks = stmala::run_all_checks();
  bool all_pass = true;
  for (const auto& c : checks) {
    all_pass = all_pass && c.pass;
    if (!args.quiet)
      std::printf("%-32s %s  (worst %.3e, tolerance %.3e)\n", c.name.c_str(),
                  c.pass ? "PASS" : "FAIL", c.worst, c.tolerance);
  }
  if (!all_pass) throw stmala::NumericalError("validation checks failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transdimensional samplers for sparse Bayesian variable selection"};
  app.require_subcommand(1);

  CommonArgs sample_args, oracle_args, compare_args, validate_args;
  auto* sample = app.add_subcommand("sample", "Run one sampler from a config file");
  add_common(sample, sample_args, true);
  auto* oracle = app.add_subcommand("oracle", "Enumerate the exact model posterior");
  add_common(oracle, oracle_args, true);
  auto* compare = app.add_subcommand("compare", "Replicated STMALA vs RJMCMC study");
  add_common(compare, compare_args, true);
  auto* validate = app.add_subcommand("validate", "Run the numerical self-checks");
  add_common(validate, validate_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sample->parsed()) return cmd_sample(sample_args);
    if (oracle->parsed()) return cmd_oracle(oracle_args);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (validate->parsed()) return cmd_validate(validate_args);
    std::fprintf(stderr, "no subcommand selected\n");
    return 1;
  } catch (const stmala::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const stmala::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
