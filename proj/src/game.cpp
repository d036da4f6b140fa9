#include "blockcache/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "blockcache/rng.hpp"

namespace blockcache {

std::string action_label(GameAction a) {
  return std::to_string(a.provider) + ":" + std::to_string(a.content);
}

void MarketConfig::validate() const {
  if (providers < 1 || contents < 1 || helpers < 1 || users < 1)
    throw std::invalid_argument("N, K, M, L must all be at least 1");
  if (zipf_beta < 0) throw std::invalid_argument("zipf skewness must be non-negative");
  if (epoch_reward < 0) throw std::invalid_argument("epoch reward must be non-negative");
  if (prices.size() != std::size_t(providers))
    throw std::invalid_argument("price matrix must have one row per provider");
  for (const auto& row : prices) {
    if (row.size() != std::size_t(contents))
      throw std::invalid_argument("price matrix must have one column per content");
    for (double o : row)
      if (!(o > 0)) throw std::invalid_argument("every price must be positive");
  }
}

std::vector<std::vector<double>> uniform_prices(int providers, int contents, double price) {
  return std::vector<std::vector<double>>(providers, std::vector<double>(contents, price));
}

std::vector<std::vector<double>> equal_reward_potential_prices(int providers, int contents,
                                                               double zipf_beta,
                                                               double mean_price) {
  std::vector<double> p = zipf_popularity(contents, zipf_beta);
  double inv_sum = 0.0;
  for (double pk : p) inv_sum += 1.0 / pk;
  // mean over k of c/p_k = mean_price  =>  c = mean_price * K / sum(1/p_k)
  const double c = mean_price * contents / inv_sum;
  std::vector<std::vector<double>> prices(providers, std::vector<double>(contents));
  for (int n = 0; n < providers; ++n)
    for (int k = 0; k < contents; ++k) prices[n][k] = c / p[k];
  return prices;
}

std::vector<std::vector<double>> discriminative_prices(int providers, int contents,
                                                       double base_price, double factor) {
  std::vector<std::vector<double>> prices(providers, std::vector<double>(contents));
  double scale = 1.0;
  for (int n = 0; n < providers; ++n) {
    for (int k = 0; k < contents; ++k) prices[n][k] = base_price * scale;
    scale *= factor;
  }
  return prices;
}

std::vector<double> zipf_popularity(int contents, double beta) {
  if (contents < 1) throw std::invalid_argument("content count must be at least 1");
  if (beta < 0) throw std::invalid_argument("zipf skewness must be non-negative");
  std::vector<double> p(contents);
  double norm = 0.0;
  for (int k = 1; k <= contents; ++k) norm += std::pow(double(k), -beta);
  for (int k = 1; k <= contents; ++k) p[k - 1] = std::pow(double(k), -beta) / norm;
  return p;
}

RewardTable::RewardTable(const MarketConfig& cfg) {
  cfg.validate();
  providers_ = cfg.providers;
  contents_ = cfg.contents;
  std::vector<double> p = zipf_popularity(cfg.contents, cfg.zipf_beta);
  values_.resize(cfg.action_count());
  total_ = 0.0;
  for (int n = 0; n < providers_; ++n)
    for (int k = 0; k < contents_; ++k) {
      double r = cfg.prices[n][k] * p[k];
      values_[std::size_t(n) * contents_ + k] = r;
      total_ += r;
    }
}

RewardTable RewardTable::from_values(std::vector<std::vector<double>> values) {
  if (values.empty() || values[0].empty())
    throw std::invalid_argument("reward table must be non-empty");
  RewardTable t;
  t.providers_ = int(values.size());
  t.contents_ = int(values[0].size());
  t.total_ = 0.0;
  for (const auto& row : values) {
    if (row.size() != std::size_t(t.contents_))
      throw std::invalid_argument("ragged reward table");
    for (double v : row) {
      if (!(v > 0)) throw std::invalid_argument("reward potentials must be positive");
      t.values_.push_back(v);
      t.total_ += v;
    }
  }
  return t;
}

void Grouping::remove(GameAction a) {
  int& c = counts_[index(a)];
  if (c == 0) throw std::logic_error("removing from an empty group");
  --c;
  --total_;
}

std::string Grouping::label() const {
  std::string out;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (i) out.push_back('|');
    out += std::to_string(counts_[i]);
  }
  return out;
}

Grouping Profile::grouping(int providers, int contents) const {
  Grouping g(providers, contents);
  for (GameAction a : actions) g.add(a);
  return g;
}

PayoffValue payoff_components(const RewardTable& table, GameAction a, int occupancy,
                              const MarketConfig& cfg) {
  if (occupancy < 1) throw std::invalid_argument("payoff of an empty group");
  const double share = table.at(a) / occupancy;
  PayoffValue v;
  v.delivery = double(cfg.users) / cfg.providers * share;
  v.block_reward = cfg.epoch_reward / table.total() * share;
  return v;
}

double payoff_value(const RewardTable& table, GameAction a, int occupancy,
                    const MarketConfig& cfg) {
  return payoff_components(table, a, occupancy, cfg).total();
}

PayoffValue payoff(const RewardTable& table, const Grouping& grouping, GameAction a,
                   const MarketConfig& cfg) {
  return payoff_components(table, a, grouping.count(a), cfg);
}

GameAction best_response(const Grouping& others, const RewardTable& table,
                         const MarketConfig& cfg) {
  GameAction best{};
  double best_value = -1.0;
  for (std::size_t i = 0; i < table.action_count(); ++i) {
    GameAction a = table.action_at(i);
    double v = payoff_value(table, a, others.count(a) + 1, cfg);
    if (v > best_value) {  // strict: ties keep the lexicographically first
      best = a;
      best_value = v;
    }
  }
  return best;
}

NashReport is_nash(const Profile& profile, const RewardTable& table, const MarketConfig& cfg,
                   double tol) {
  NashReport report;
  Grouping g = profile.grouping(table.providers(), table.contents());
  for (std::size_t m = 0; m < profile.actions.size(); ++m) {
    GameAction cur = profile.actions[m];
    double cur_value = payoff_value(table, cur, g.count(cur), cfg);
    GameAction best = cur;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < table.action_count(); ++i) {
      GameAction a = table.action_at(i);
      if (a == cur) continue;
      double v = payoff_value(table, a, g.count(a) + 1, cfg);
      if (v - cur_value > best_gain) {
        best_gain = v - cur_value;
        best = a;
      }
    }
    if (best_gain > tol)
      report.violations.push_back(NashViolation{int(m), best, best_gain});
  }
  report.nash = report.violations.empty();
  return report;
}

double potential(const Grouping& grouping, const RewardTable& table, const MarketConfig& cfg) {
  double phi = 0.0;
  for (std::size_t i = 0; i < table.action_count(); ++i) {
    GameAction a = table.action_at(i);
    int occupancy = grouping.counts()[i];
    for (int j = 1; j <= occupancy; ++j) phi += payoff_value(table, a, j, cfg);
  }
  return phi;
}

double potential(const Profile& profile, const RewardTable& table, const MarketConfig& cfg) {
  return potential(profile.grouping(table.providers(), table.contents()), table, cfg);
}

SolveResult sequential_best_response_from(Profile initial, const MarketConfig& cfg,
                                          const RewardTable& table, std::uint64_t seed,
                                          SweepOrder order, int max_sweeps) {
  if (initial.actions.size() != std::size_t(cfg.helpers))
    throw std::invalid_argument("profile size must equal the CH count");

  Rng rng(derive_seed(seed, 0xB5));
  SolveResult result;
  result.profile = std::move(initial);
  Grouping g = result.profile.grouping(table.providers(), table.contents());

  std::vector<int> visit(cfg.helpers);
  std::iota(visit.begin(), visit.end(), 0);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    if (order == SweepOrder::Shuffled) rng.shuffle(visit);
    int changes = 0;
    for (int m : visit) {
      GameAction cur = result.profile.actions[m];
      g.remove(cur);
      GameAction br = best_response(g, table, cfg);
      double cur_value = payoff_value(table, cur, g.count(cur) + 1, cfg);
      double br_value = payoff_value(table, br, g.count(br) + 1, cfg);
      // Move only on strict improvement; a tie is not an action change.
      if (br != cur && br_value > cur_value + 1e-9) {
        result.profile.actions[m] = br;
        g.add(br);
        ++changes;
        result.trace.push_back(
            SolveTraceRow{sweep, m, cur, br, potential(g, table, cfg)});
      } else {
        g.add(cur);
      }
    }
    result.sweeps = sweep;
    result.potential_per_sweep.push_back(potential(g, table, cfg));
    if (changes == 0) {
      result.converged = true;
      break;
    }
  }
  return result;
}

SolveResult sequential_best_response(const MarketConfig& cfg, const RewardTable& table,
                                     std::uint64_t seed, SweepOrder order, int max_sweeps) {
  Rng rng(derive_seed(seed, 0xA0));
  Profile initial;
  initial.actions.reserve(cfg.helpers);
  for (int m = 0; m < cfg.helpers; ++m)
    initial.actions.push_back(table.action_at(rng.below(table.action_count())));
  return sequential_best_response_from(std::move(initial), cfg, table, seed, order, max_sweeps);
}

double social_welfare_direct(const Profile& profile, const RewardTable& table,
                             const MarketConfig& cfg) {
  Grouping g = profile.grouping(table.providers(), table.contents());
  double sum = 0.0;
  for (GameAction a : profile.actions) sum += payoff_value(table, a, g.count(a), cfg);
  return sum;
}

double social_welfare_coverage(const Grouping& grouping, const RewardTable& table,
                               const MarketConfig& cfg) {
  const double c = double(cfg.users) / cfg.providers + cfg.epoch_reward / table.total();
  double covered = 0.0;
  for (std::size_t i = 0; i < table.action_count(); ++i)
    if (grouping.counts()[i] > 0) covered += table.at(table.action_at(i));
  return c * covered;
}

double expected_offloaded_deliveries(const Grouping& grouping, const MarketConfig& cfg) {
  std::vector<double> p = zipf_popularity(cfg.contents, cfg.zipf_beta);
  double covered = 0.0;
  for (int n = 0; n < cfg.providers; ++n)
    for (int k = 0; k < cfg.contents; ++k)
      if (grouping.count(GameAction{n + 1, k + 1}) > 0) covered += p[k];
  return double(cfg.users) / cfg.providers * covered;
}

OptimumResult centralized_optimum(const MarketConfig& cfg, const RewardTable& table) {
  std::vector<std::size_t> order(table.action_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.at(table.action_at(a)) > table.at(table.action_at(b));
  });

  const std::size_t cover = std::min<std::size_t>(cfg.helpers, table.action_count());
  OptimumResult result;
  result.profile.actions.reserve(cfg.helpers);
  for (std::size_t m = 0; m < std::size_t(cfg.helpers); ++m)
    result.profile.actions.push_back(table.action_at(order[m < cover ? m : 0]));
  result.welfare = social_welfare_coverage(
      result.profile.grouping(table.providers(), table.contents()), table, cfg);
  return result;
}

BaselineResult random_baseline(const MarketConfig& cfg, const RewardTable& table, int trials,
                               std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("at least one trial");
  BaselineResult out;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, std::uint64_t(t) + 1));
    Grouping g(table.providers(), table.contents());
    for (int m = 0; m < cfg.helpers; ++m) g.add(table.action_at(rng.below(table.action_count())));
    double welfare = social_welfare_coverage(g, table, cfg);
    out.mean_welfare += welfare;
    out.mean_payoff += welfare / cfg.helpers;
    out.mean_deliveries += expected_offloaded_deliveries(g, cfg);
  }
  out.mean_welfare /= trials;
  out.mean_payoff /= trials;
  out.mean_deliveries /= trials;
  return out;
}

}  // namespace blockcache
