#pragma once

#include <string>
#include <vector>

#include "blockcache/config.hpp"
#include "blockcache/game.hpp"
#include "blockcache/sim.hpp"

namespace blockcache {

// One certified equilibrium search (helpers count x seed).
struct SolveRow {
  int helpers = 0;
  std::uint64_t seed = 0;
  int sweeps = 0;
  bool nash = false;
  double mean_payoff = 0.0;
  double welfare = 0.0;
  double deliveries = 0.0;
  std::string grouping;
  std::string config_hash;
};

struct SolveTrace {
  int helpers = 0;
  std::uint64_t seed = 0;
  std::vector<SolveTraceRow> rows;
};

struct BaselineRow {
  int helpers = 0;
  std::uint64_t seed = 0;
  int trials = 0;
  double mean_payoff = 0.0;
  double mean_welfare = 0.0;
  double mean_deliveries = 0.0;
  std::string config_hash;
};

struct OptimumRow {
  int helpers = 0;
  double welfare = 0.0;
  double mean_payoff = 0.0;
  double deliveries = 0.0;
  std::string grouping;
  std::string config_hash;
};

// Helper counts an experiment runs over: the sweep when set, else the
// configured market size.
std::vector<int> helper_counts(const HarnessConfig& cfg);

// Certified NE per (helpers, seed); throws if a search fails to converge.
std::vector<SolveRow> run_solve(const HarnessConfig& cfg,
                                std::vector<SolveTrace>* traces = nullptr);
std::vector<BaselineRow> run_baseline(const HarnessConfig& cfg);
std::vector<OptimumRow> run_optimum(const HarnessConfig& cfg);

// Pricing-scheme comparison (uniform, equal reward potential, discriminative)
// on one market shape, solved and certified per scheme with the first seed.
struct PricingActionRow {
  std::string scheme;
  GameAction action;
  int occupancy = 0;
  double payoff = 0.0;  // per CH in that group; 0 when unoccupied
};
struct PricingSummaryRow {
  std::string scheme;
  bool nash = false;
  int sweeps = 0;
  double mean_payoff = 0.0;
  int occupancy_spread = 0;  // max - min over all N*K actions
  double welfare = 0.0;
  std::string grouping;
  std::vector<int> per_provider_occupancy;
};
struct PricingExperiment {
  std::vector<PricingActionRow> actions;
  std::vector<PricingSummaryRow> summaries;
};

PricingExperiment run_pricing_experiment(const HarnessConfig& cfg);

// CSV emission; headers documented in docs/FORMATS.md.
void emit_solve_csv(const std::string& path, const std::vector<SolveRow>& rows);
void emit_solve_trace_csv(const std::string& path, const std::vector<SolveTrace>& traces);
void emit_baseline_csv(const std::string& path, const std::vector<BaselineRow>& rows);
void emit_optimum_csv(const std::string& path, const std::vector<OptimumRow>& rows);
void emit_payoff_vs_helpers_csv(const std::string& path, const std::vector<SolveRow>& solve,
                                const std::vector<BaselineRow>& baseline,
                                const std::vector<OptimumRow>& optimum);
void emit_deliveries_vs_helpers_csv(const std::string& path, const std::vector<SolveRow>& solve,
                                    const std::vector<BaselineRow>& baseline,
                                    const std::vector<OptimumRow>& optimum);
void emit_grouping_by_scheme_csv(const std::string& path, const PricingExperiment& exp);
void emit_payoff_by_scheme_csv(const std::string& path, const PricingExperiment& exp);

void emit_sim_epochs_csv(const std::string& path, const Simulation& sim);
void emit_sim_slots_csv(const std::string& path, const Simulation& sim);
void emit_sim_contracts_csv(const std::string& path, const Simulation& sim);

}  // namespace blockcache
