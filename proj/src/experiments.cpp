#include "blockcache/experiments.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "blockcache/csv.hpp"

namespace blockcache {

std::vector<int> helper_counts(const HarnessConfig& cfg) {
  if (!cfg.helpers_sweep.empty()) return cfg.helpers_sweep;
  return {cfg.market.helpers};
}

std::vector<SolveRow> run_solve(const HarnessConfig& cfg, std::vector<SolveTrace>* traces) {
  const std::string hash = cfg.hash_hex();
  std::vector<SolveRow> rows;
  for (int m : helper_counts(cfg)) {
    MarketConfig market = cfg.market;
    market.helpers = m;
    RewardTable table(market);
    for (std::uint64_t seed : cfg.seeds) {
      SolveResult res =
          sequential_best_response(market, table, seed, cfg.sweep_order, cfg.max_sweeps);
      if (!res.converged)
        throw std::runtime_error("best-response search did not converge within " +
                                 std::to_string(cfg.max_sweeps) + " sweeps");
      NashReport rep = is_nash(res.profile, table, market);
      Grouping g = res.profile.grouping(market.providers, market.contents);

      SolveRow row;
      row.helpers = m;
      row.seed = seed;
      row.sweeps = res.sweeps;
      row.nash = rep.nash;
      row.welfare = social_welfare_coverage(g, table, market);
      row.mean_payoff = row.welfare / m;
      row.deliveries = expected_offloaded_deliveries(g, market);
      row.grouping = g.label();
      row.config_hash = hash;
      rows.push_back(std::move(row));

      if (traces) traces->push_back(SolveTrace{m, seed, res.trace});
    }
  }
  return rows;
}

std::vector<BaselineRow> run_baseline(const HarnessConfig& cfg) {
  const std::string hash = cfg.hash_hex();
  std::vector<BaselineRow> rows;
  for (int m : helper_counts(cfg)) {
    MarketConfig market = cfg.market;
    market.helpers = m;
    RewardTable table(market);
    for (std::uint64_t seed : cfg.seeds) {
      BaselineResult res = random_baseline(market, table, cfg.baseline_trials, seed);
      BaselineRow row;
      row.helpers = m;
      row.seed = seed;
      row.trials = cfg.baseline_trials;
      row.mean_payoff = res.mean_payoff;
      row.mean_welfare = res.mean_welfare;
      row.mean_deliveries = res.mean_deliveries;
      row.config_hash = hash;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<OptimumRow> run_optimum(const HarnessConfig& cfg) {
  const std::string hash = cfg.hash_hex();
  std::vector<OptimumRow> rows;
  for (int m : helper_counts(cfg)) {
    MarketConfig market = cfg.market;
    market.helpers = m;
    RewardTable table(market);
    OptimumResult res = centralized_optimum(market, table);
    Grouping g = res.profile.grouping(market.providers, market.contents);

    OptimumRow row;
    row.helpers = m;
    row.welfare = res.welfare;
    row.mean_payoff = res.welfare / m;
    row.deliveries = expected_offloaded_deliveries(g, market);
    row.grouping = g.label();
    row.config_hash = hash;
    rows.push_back(std::move(row));
  }
  return rows;
}

PricingExperiment run_pricing_experiment(const HarnessConfig& cfg) {
  PricingExperiment exp;
  const std::uint64_t seed = cfg.seeds.front();

  const PricingSpec::Scheme schemes[] = {PricingSpec::Scheme::Uniform,
                                         PricingSpec::Scheme::EqualRewardPotential,
                                         PricingSpec::Scheme::Discriminative};
  for (PricingSpec::Scheme scheme : schemes) {
    PricingSpec spec = cfg.pricing;
    spec.scheme = scheme;
    MarketConfig market = cfg.market;
    market.prices = spec.build(market.providers, market.contents, market.zipf_beta);
    RewardTable table(market);

    SolveResult res =
        sequential_best_response(market, table, seed, cfg.sweep_order, cfg.max_sweeps);
    if (!res.converged) throw std::runtime_error("pricing experiment solver did not converge");
    NashReport rep = is_nash(res.profile, table, market);
    Grouping g = res.profile.grouping(market.providers, market.contents);

    PricingSummaryRow summary;
    summary.scheme = PricingSpec::scheme_name(scheme);
    summary.nash = rep.nash;
    summary.sweeps = res.sweeps;
    summary.welfare = social_welfare_coverage(g, table, market);
    summary.mean_payoff = summary.welfare / market.helpers;
    summary.grouping = g.label();
    summary.per_provider_occupancy.assign(market.providers, 0);

    int min_occ = market.helpers, max_occ = 0;
    for (std::size_t i = 0; i < table.action_count(); ++i) {
      GameAction a = table.action_at(i);
      int occ = g.count(a);
      min_occ = std::min(min_occ, occ);
      max_occ = std::max(max_occ, occ);
      summary.per_provider_occupancy[a.provider - 1] += occ;

      PricingActionRow row;
      row.scheme = summary.scheme;
      row.action = a;
      row.occupancy = occ;
      row.payoff = occ > 0 ? payoff_value(table, a, occ, market) : 0.0;
      exp.actions.push_back(std::move(row));
    }
    summary.occupancy_spread = max_occ - min_occ;
    exp.summaries.push_back(std::move(summary));
  }
  return exp;
}

// ---------------------------------------------------------------------------
// CSV emission

void emit_solve_csv(const std::string& path, const std::vector<SolveRow>& rows) {
  CsvWriter csv(path, {"helpers", "seed", "sweeps", "nash", "mean_payoff", "welfare",
                       "deliveries", "grouping", "config_hash"});
  for (const auto& r : rows)
    csv.row({CsvWriter::num(r.helpers), CsvWriter::num(std::uint64_t(r.seed)),
             CsvWriter::num(r.sweeps), r.nash ? "1" : "0", CsvWriter::num(r.mean_payoff),
             CsvWriter::num(r.welfare), CsvWriter::num(r.deliveries), r.grouping,
             r.config_hash});
  csv.close();
}

void emit_solve_trace_csv(const std::string& path, const std::vector<SolveTrace>& traces) {
  CsvWriter csv(path, {"helpers", "seed", "sweep", "ch", "from", "to", "potential"});
  for (const auto& t : traces)
    for (const auto& r : t.rows)
      csv.row({CsvWriter::num(t.helpers), CsvWriter::num(std::uint64_t(t.seed)),
               CsvWriter::num(r.sweep), CsvWriter::num(r.helper + 1), action_label(r.from),
               action_label(r.to), CsvWriter::num(r.potential_after)});
  csv.close();
}

void emit_baseline_csv(const std::string& path, const std::vector<BaselineRow>& rows) {
  CsvWriter csv(path, {"helpers", "seed", "trials", "mean_payoff", "mean_welfare",
                       "mean_deliveries", "config_hash"});
  for (const auto& r : rows)
    csv.row({CsvWriter::num(r.helpers), CsvWriter::num(std::uint64_t(r.seed)),
             CsvWriter::num(r.trials), CsvWriter::num(r.mean_payoff),
             CsvWriter::num(r.mean_welfare), CsvWriter::num(r.mean_deliveries), r.config_hash});
  csv.close();
}

void emit_optimum_csv(const std::string& path, const std::vector<OptimumRow>& rows) {
  CsvWriter csv(path,
                {"helpers", "welfare", "mean_payoff", "deliveries", "grouping", "config_hash"});
  for (const auto& r : rows)
    csv.row({CsvWriter::num(r.helpers), CsvWriter::num(r.welfare),
             CsvWriter::num(r.mean_payoff), CsvWriter::num(r.deliveries), r.grouping,
             r.config_hash});
  csv.close();
}

namespace {

struct PerHelperMeans {
  std::vector<int> helpers;
  std::map<int, double> ne_payoff, ne_deliveries, base_payoff, base_deliveries, opt_payoff,
      opt_deliveries;
};

PerHelperMeans aggregate(const std::vector<SolveRow>& solve,
                         const std::vector<BaselineRow>& baseline,
                         const std::vector<OptimumRow>& optimum) {
  PerHelperMeans out;
  std::map<int, std::pair<double, int>> ne_p, ne_d, b_p, b_d;
  for (const auto& r : solve) {
    ne_p[r.helpers].first += r.mean_payoff;
    ne_p[r.helpers].second++;
    ne_d[r.helpers].first += r.deliveries;
    ne_d[r.helpers].second++;
  }
  for (const auto& r : baseline) {
    b_p[r.helpers].first += r.mean_payoff;
    b_p[r.helpers].second++;
    b_d[r.helpers].first += r.mean_deliveries;
    b_d[r.helpers].second++;
  }
  for (const auto& [m, acc] : ne_p) {
    out.helpers.push_back(m);
    out.ne_payoff[m] = acc.first / acc.second;
    out.ne_deliveries[m] = ne_d[m].first / ne_d[m].second;
  }
  for (const auto& [m, acc] : b_p) {
    out.base_payoff[m] = acc.first / acc.second;
    out.base_deliveries[m] = b_d[m].first / b_d[m].second;
  }
  for (const auto& r : optimum) {
    out.opt_payoff[r.helpers] = r.mean_payoff;
    out.opt_deliveries[r.helpers] = r.deliveries;
  }
  return out;
}

}  // namespace

void emit_payoff_vs_helpers_csv(const std::string& path, const std::vector<SolveRow>& solve,
                                const std::vector<BaselineRow>& baseline,
                                const std::vector<OptimumRow>& optimum) {
  PerHelperMeans agg = aggregate(solve, baseline, optimum);
  CsvWriter csv(path, {"helpers", "ne_mean_payoff", "baseline_mean_payoff",
                       "optimum_mean_payoff"});
  for (int m : agg.helpers)
    csv.row({CsvWriter::num(m), CsvWriter::num(agg.ne_payoff[m]),
             CsvWriter::num(agg.base_payoff[m]), CsvWriter::num(agg.opt_payoff[m])});
  csv.close();
}

void emit_deliveries_vs_helpers_csv(const std::string& path, const std::vector<SolveRow>& solve,
                                    const std::vector<BaselineRow>& baseline,
                                    const std::vector<OptimumRow>& optimum) {
  PerHelperMeans agg = aggregate(solve, baseline, optimum);
  CsvWriter csv(path, {"helpers", "ne_deliveries", "baseline_deliveries", "optimum_deliveries"});
  for (int m : agg.helpers)
    csv.row({CsvWriter::num(m), CsvWriter::num(agg.ne_deliveries[m]),
             CsvWriter::num(agg.base_deliveries[m]), CsvWriter::num(agg.opt_deliveries[m])});
  csv.close();
}

void emit_grouping_by_scheme_csv(const std::string& path, const PricingExperiment& exp) {
  CsvWriter csv(path, {"scheme", "provider", "content", "occupancy", "payoff"});
  for (const auto& r : exp.actions)
    csv.row({r.scheme, CsvWriter::num(r.action.provider), CsvWriter::num(r.action.content),
             CsvWriter::num(r.occupancy), CsvWriter::num(r.payoff)});
  csv.close();
}

void emit_payoff_by_scheme_csv(const std::string& path, const PricingExperiment& exp) {
  CsvWriter csv(path, {"scheme", "nash", "sweeps", "mean_payoff", "occupancy_spread", "welfare",
                       "grouping"});
  for (const auto& r : exp.summaries)
    csv.row({r.scheme, r.nash ? "1" : "0", CsvWriter::num(r.sweeps),
             CsvWriter::num(r.mean_payoff), CsvWriter::num(r.occupancy_spread),
             CsvWriter::num(r.welfare), r.grouping});
  csv.close();
}

void emit_sim_epochs_csv(const std::string& path, const Simulation& sim) {
  CsvWriter csv(path, {"seed", "epoch", "requests", "offloaded", "rollbacks",
                       "prefetch_forfeits", "popularity_tv", "grouping", "mean_ch_income",
                       "supply", "config_hash"});
  const std::string hash = sim.config().hash_hex();
  for (const auto& r : sim.epoch_records())
    csv.row({CsvWriter::num(std::uint64_t(sim.seed())), CsvWriter::num(r.epoch),
             CsvWriter::num(r.requests), CsvWriter::num(r.offloaded),
             CsvWriter::num(r.rollbacks), CsvWriter::num(r.prefetch_forfeits),
             CsvWriter::num(r.popularity_tv), r.grouping, CsvWriter::num(r.mean_ch_income),
             CsvWriter::num(r.supply), hash});
  csv.close();
}

void emit_sim_slots_csv(const std::string& path, const Simulation& sim) {
  CsvWriter csv(path, {"epoch", "slot", "leader", "reward", "transactions"});
  for (const auto& r : sim.slot_records())
    csv.row({CsvWriter::num(r.epoch), CsvWriter::num(r.slot), r.leader_label,
             CsvWriter::num(r.reward), CsvWriter::num(r.transactions)});
  csv.close();
}

void emit_sim_contracts_csv(const std::string& path, const Simulation& sim) {
  CsvWriter csv(path, {"epoch", "contract", "type", "provider", "content", "state", "escrow"});
  for (const auto& [epoch, r] : sim.contract_records())
    csv.row({CsvWriter::num(epoch), r.id, r.type, CsvWriter::num(r.content.provider),
             CsvWriter::num(r.content.content), r.state, CsvWriter::num(r.escrow)});
  csv.close();
}

}  // namespace blockcache
