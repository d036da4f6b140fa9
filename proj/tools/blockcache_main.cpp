#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blockcache/experiments.hpp"
#include "blockcache/ledger.hpp"

namespace fs = std::filesystem;
using namespace blockcache;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seeds, "seed(s), overriding the config's list");
  cmd->add_option("--out", opts.out_dir, "output directory");
}

HarnessConfig load_config(const CommonOpts& opts, HarnessConfig preset) {
  HarnessConfig cfg =
      opts.config_path.empty() ? std::move(preset) : HarnessConfig::from_json_file(opts.config_path);
  if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
  cfg.validate();
  return cfg;
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
  fs::create_directories(opts.out_dir);
  return (fs::path(opts.out_dir) / name).string();
}

int cmd_solve(const CommonOpts& opts) {
  HarnessConfig cfg = load_config(opts, HarnessConfig::preset_solver_market());
  std::vector<SolveTrace> traces;
  std::vector<SolveRow> rows = run_solve(cfg, &traces);
  emit_solve_csv(out_path(opts, "solve.csv"), rows);
  emit_solve_trace_csv(out_path(opts, "solve_trace.csv"), traces);

  bool all_nash = true;
  for (const auto& r : rows) {
    all_nash = all_nash && r.nash;
    std::cout << "helpers=" << r.helpers << " seed=" << r.seed << " sweeps=" << r.sweeps
              << " nash=" << (r.nash ? "yes" : "NO") << " mean_payoff=" << r.mean_payoff
              << " welfare=" << r.welfare << "\n";
  }
  if (!all_nash) {
    std::cerr << "audit failed: an uncertified profile was produced\n";
    return 1;
  }
  return 0;
}

int cmd_baseline(const CommonOpts& opts) {
  HarnessConfig cfg = load_config(opts, HarnessConfig::preset_solver_market());
  std::vector<BaselineRow> rows = run_baseline(cfg);
  emit_baseline_csv(out_path(opts, "baseline.csv"), rows);
  for (const auto& r : rows)
    std::cout << "helpers=" << r.helpers << " seed=" << r.seed << " trials=" << r.trials
              << " mean_payoff=" << r.mean_payoff << " mean_deliveries=" << r.mean_deliveries
              << "\n";
  return 0;
}

int cmd_optimum(const CommonOpts& opts) {
  HarnessConfig cfg = load_config(opts, HarnessConfig::preset_solver_market());
  std::vector<OptimumRow> rows = run_optimum(cfg);
  emit_optimum_csv(out_path(opts, "optimum.csv"), rows);
  for (const auto& r : rows)
    std::cout << "helpers=" << r.helpers << " welfare=" << r.welfare
              << " mean_payoff=" << r.mean_payoff << " deliveries=" << r.deliveries << "\n";
  return 0;
}

int cmd_simulate(const CommonOpts& opts) {
  HarnessConfig cfg = load_config(opts, HarnessConfig::preset_solver_market());
  int rc = 0;
  for (std::uint64_t seed : cfg.seeds) {
    Simulation sim(cfg, seed);
    sim.run();  // throws on any audit failure

    const std::string suffix = cfg.seeds.size() > 1 ? "_" + std::to_string(seed) : "";
    emit_sim_epochs_csv(out_path(opts, "sim_epochs" + suffix + ".csv"), sim);
    emit_sim_slots_csv(out_path(opts, "sim_slots" + suffix + ".csv"), sim);
    emit_sim_contracts_csv(out_path(opts, "sim_contracts" + suffix + ".csv"), sim);
    save_chain_file(out_path(opts, "chain" + suffix + ".bin"), sim.chain().data());

    const auto& rep = sim.final_validation();
    std::cout << "seed=" << seed << " blocks=" << sim.chain().blocks().size()
              << " supply=" << sim.chain().state().minted_supply()
              << " popularity_tv=" << sim.popularity_tv_distance()
              << " chain=" << (rep.valid ? "valid" : "INVALID") << "\n";
    if (!rep.valid) rc = 1;
  }
  return rc;
}

int cmd_verify_chain(const std::string& path) {
  ChainData data;
  try {
    data = load_chain_file(path);
  } catch (const std::exception& e) {
    std::cerr << "unreadable chain file: " << e.what() << "\n";
    return 1;
  }
  ValidationReport rep = validate_chain(data);
  std::uint64_t txs = 0;
  for (const auto& b : data.blocks) txs += b.transactions.size();
  std::cout << "blocks=" << data.blocks.size() << " transactions=" << txs
            << " reward_per_block=" << data.params.block_reward
            << " slots_per_epoch=" << data.params.slots_per_epoch << "\n";
  if (rep.valid) {
    std::cout << "chain valid; head "
              << to_hex(data.blocks.empty() ? kZeroDigest : data.blocks.back().head) << "\n";
    return 0;
  }
  std::cout << "chain INVALID at block "
            << (rep.first_bad_block ? std::to_string(*rep.first_bad_block) : "?") << ": "
            << rep.message << " [" << append_status_name(rep.error) << "]\n";
  return 1;
}

int cmd_experiment(const std::string& which, const CommonOpts& opts) {
  if (which == "fig5") {
    HarnessConfig cfg = load_config(opts, HarnessConfig::preset_solver_market());
    if (cfg.helpers_sweep.empty())
      cfg.helpers_sweep = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    std::vector<SolveRow> solve = run_solve(cfg);
    std::vector<BaselineRow> baseline = run_baseline(cfg);
    std::vector<OptimumRow> optimum = run_optimum(cfg);
    emit_solve_csv(out_path(opts, "solve.csv"), solve);
    emit_baseline_csv(out_path(opts, "baseline.csv"), baseline);
    emit_optimum_csv(out_path(opts, "optimum.csv"), optimum);
    emit_payoff_vs_helpers_csv(out_path(opts, "payoff_vs_helpers.csv"), solve, baseline,
                               optimum);
    emit_deliveries_vs_helpers_csv(out_path(opts, "deliveries_vs_helpers.csv"), solve, baseline,
                                   optimum);
    for (const auto& r : solve)
      if (!r.nash) {
        std::cerr << "audit failed: uncertified equilibrium\n";
        return 1;
      }
    std::cout << "wrote payoff_vs_helpers.csv and deliveries_vs_helpers.csv ("
              << solve.size() << " certified runs)\n";
    return 0;
  }
  if (which == "fig6") {
    HarnessConfig cfg = load_config(opts, HarnessConfig::preset_pricing_market());
    PricingExperiment exp = run_pricing_experiment(cfg);
    emit_grouping_by_scheme_csv(out_path(opts, "grouping_by_scheme.csv"), exp);
    emit_payoff_by_scheme_csv(out_path(opts, "payoff_by_scheme.csv"), exp);
    for (const auto& s : exp.summaries) {
      std::cout << "scheme=" << s.scheme << " nash=" << (s.nash ? "yes" : "NO")
                << " mean_payoff=" << s.mean_payoff << " spread=" << s.occupancy_spread
                << " grouping=" << s.grouping << "\n";
      if (!s.nash) {
        std::cerr << "audit failed: uncertified equilibrium\n";
        return 1;
      }
    }
    return 0;
  }
  std::cerr << "unknown experiment: " << which << " (expected fig5 or fig6)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blockcache: blockchain-backed content-caching market simulator"};
  app.require_subcommand(1);

  CommonOpts solve_opts, baseline_opts, optimum_opts, sim_opts, exp_opts;
  std::string chain_path, experiment_name;

  add_common(app.add_subcommand("solve", "search and certify a pure NE per seed"), solve_opts);
  add_common(app.add_subcommand("baseline", "Monte Carlo random content selection"),
             baseline_opts);
  add_common(app.add_subcommand("optimum", "centralized welfare optimum"), optimum_opts);
  add_common(app.add_subcommand("simulate", "closed-loop ledger simulation"), sim_opts);

  CLI::App* verify = app.add_subcommand("verify-chain", "validate a chain file");
  verify->add_option("chain", chain_path, "chain binary file")->required();

  CLI::App* experiment = app.add_subcommand("experiment", "preset experiment sweeps");
  experiment->add_option("name", experiment_name, "fig5 or fig6")->required();
  add_common(experiment, exp_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("solve")) return cmd_solve(solve_opts);
    if (app.got_subcommand("baseline")) return cmd_baseline(baseline_opts);
    if (app.got_subcommand("optimum")) return cmd_optimum(optimum_opts);
    if (app.got_subcommand("simulate")) return cmd_simulate(sim_opts);
    if (app.got_subcommand("verify-chain")) return cmd_verify_chain(chain_path);
    if (app.got_subcommand("experiment")) return cmd_experiment(experiment_name, exp_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
