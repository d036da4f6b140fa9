#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "blockcache/game.hpp"
#include "blockcache/rng.hpp"

using namespace blockcache;

namespace {

MarketConfig market(int n, int k, int m, int users, double beta, double lambda,
                    std::vector<std::vector<double>> prices) {
  MarketConfig cfg;
  cfg.providers = n;
  cfg.contents = k;
  cfg.helpers = m;
  cfg.users = users;
  cfg.zipf_beta = beta;
  cfg.epoch_reward = lambda;
  cfg.prices = std::move(prices);
  cfg.validate();
  return cfg;
}

MarketConfig random_market(Rng& rng, int max_n = 3, int max_k = 6, int max_m = 50) {
  int n = 1 + int(rng.below(max_n));
  int k = 1 + int(rng.below(max_k));
  int m = 1 + int(rng.below(max_m));
  int users = 50 + int(rng.below(500));
  double beta = rng.real() * 2.0;
  double lambda = rng.real() * 300.0;
  std::vector<std::vector<double>> prices(n, std::vector<double>(k));
  for (auto& row : prices)
    for (auto& o : row) o = 0.5 + rng.real() * 9.5;
  return market(n, k, m, users, beta, lambda, std::move(prices));
}

Profile random_profile(Rng& rng, const MarketConfig& cfg) {
  Profile p;
  for (int m = 0; m < cfg.helpers; ++m) {
    int idx = int(rng.below(cfg.action_count()));
    p.actions.push_back(GameAction{idx / cfg.contents + 1, idx % cfg.contents + 1});
  }
  return p;
}

}  // namespace

TEST_CASE("zipf popularity: uniform, singleton and skewed cases") {
  auto uniform = zipf_popularity(4, 0.0);
  for (double pk : uniform) CHECK(pk == doctest::Approx(0.25).epsilon(1e-12));

  CHECK(zipf_popularity(1, 1.7) == std::vector<double>{1.0});

  // oracle: direct summation of the normalizer
  double norm = 0.0;
  for (int k = 1; k <= 6; ++k) norm += 1.0 / k;
  auto p = zipf_popularity(6, 1.0);
  CHECK(p[0] == doctest::Approx(1.0 / norm).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.408163).epsilon(1e-5));

  double sum = 0.0;
  for (double pk : p) sum += pk;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::is_sorted(p.rbegin(), p.rend()));

  auto p2 = zipf_popularity(3, 2.0);
  CHECK(p2[0] == doctest::Approx(36.0 / 49.0).epsilon(1e-12));
  CHECK(p2[2] == doctest::Approx(4.0 / 49.0).epsilon(1e-12));
}

TEST_CASE("payoff: single-action market and the two-by-two worked example") {
  MarketConfig solo = market(1, 1, 1, 100, 1.0, 10.0, uniform_prices(1, 1, 1.0));
  RewardTable table(solo);
  Grouping g(1, 1);
  g.add({1, 1});
  PayoffValue v = payoff(table, g, {1, 1}, solo);
  CHECK(v.total() == doctest::Approx(110.0).epsilon(1e-12));
  CHECK(v.delivery == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(v.block_reward == doctest::Approx(10.0).epsilon(1e-12));

  MarketConfig two = market(2, 2, 2, 200, 1.0, 50.0, uniform_prices(2, 2, 1.0));
  RewardTable t2(two);
  CHECK(t2.total() == doctest::Approx(2.0).epsilon(1e-12));
  Grouping g2(2, 2);
  g2.add({1, 1});
  g2.add({1, 1});
  PayoffValue w = payoff(t2, g2, {1, 1}, two);
  CHECK(w.delivery == doctest::Approx(100.0 * (2.0 / 3.0) / 2.0).epsilon(1e-9));
  CHECK(w.block_reward == doctest::Approx(25.0 * (2.0 / 3.0) / 2.0).epsilon(1e-9));
  CHECK(w.total() == doctest::Approx(125.0 / 3.0).epsilon(1e-9));

  CHECK_THROWS_AS(payoff_components(t2, {2, 2}, 0, two), std::invalid_argument);
}

TEST_CASE("with no block reward the payoff reduces to the delivery law") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    MarketConfig cfg = random_market(rng);
    cfg.epoch_reward = 0.0;
    RewardTable table(cfg);
    auto p = zipf_popularity(cfg.contents, cfg.zipf_beta);
    GameAction a{1 + int(rng.below(cfg.providers)), 1 + int(rng.below(cfg.contents))};
    int occupancy = 1 + int(rng.below(5));
    // independent evaluation of the per-CH delivery reward
    double oracle =
        cfg.prices[a.provider - 1][a.content - 1] * cfg.users * p[a.content - 1] /
        (double(cfg.providers) * occupancy);
    CHECK(payoff_value(table, a, occupancy, cfg) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("best response: argmax for a lone CH, the worked two-content case") {
  MarketConfig lone = market(2, 3, 1, 100, 1.0, 30.0, uniform_prices(2, 3, 2.0));
  RewardTable table(lone);
  Grouping none(2, 3);
  GameAction br = best_response(none, table, lone);
  CHECK(br == GameAction{1, 1});  // largest reward potential, ties lexicographic

  MarketConfig duo = market(1, 2, 2, 100, 2.0, 0.0, uniform_prices(1, 2, 1.0));
  RewardTable t2(duo);
  auto p = zipf_popularity(2, 2.0);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-12));
  Grouping other(1, 2);
  other.add({1, 1});  // the other CH sits on content 1
  CHECK(payoff_value(t2, {1, 1}, 2, duo) == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(payoff_value(t2, {1, 2}, 1, duo) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(best_response(other, t2, duo) == GameAction{1, 1});
}

TEST_CASE("best response under equal potentials: least crowded action, lexicographic") {
  MarketConfig cfg = market(2, 2, 5, 100, 1.0, 40.0,
                            equal_reward_potential_prices(2, 2, 1.0, 3.0));
  RewardTable table(cfg);
  Grouping others(2, 2);
  others.add({1, 1});
  others.add({1, 1});
  others.add({1, 2});
  others.add({2, 2});
  // brute-force oracle over all candidates
  GameAction oracle{1, 1};
  double best = -1;
  for (std::size_t i = 0; i < table.action_count(); ++i) {
    GameAction a = table.action_at(i);
    double v = payoff_value(table, a, others.count(a) + 1, cfg);
    if (v > best) {
      best = v;
      oracle = a;
    }
  }
  CHECK(oracle == GameAction{2, 1});  // the empty action with the smallest index
  CHECK(best_response(others, table, cfg) == oracle);
}

TEST_CASE("is_nash certifies argmax singletons and flags constructed deviations") {
  MarketConfig lone = market(2, 3, 1, 100, 1.0, 30.0, uniform_prices(2, 3, 2.0));
  RewardTable table(lone);
  Profile at_best{{GameAction{1, 1}}};
  CHECK(is_nash(at_best, table, lone).nash);
  Profile off{{GameAction{2, 3}}};
  NashReport rep = is_nash(off, table, lone);
  CHECK_FALSE(rep.nash);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].helper == 0);
  CHECK(rep.violations[0].better == GameAction{1, 1});
  CHECK(rep.violations[0].gain > 0);
}

TEST_CASE("solver output is always a certified equilibrium") {
  MarketConfig cfg = market(3, 6, 30, 200, 1.0, 120.0, uniform_prices(3, 6, 4.0));
  RewardTable table(cfg);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SolveResult res = sequential_best_response(cfg, table, seed);
    REQUIRE(res.converged);
    CHECK(res.sweeps <= 50);
    CHECK(is_nash(res.profile, table, cfg).nash);
    for (std::size_t i = 1; i < res.potential_per_sweep.size(); ++i)
      CHECK(res.potential_per_sweep[i] >= res.potential_per_sweep[i - 1] - 1e-9);
    // every accepted move strictly raised the potential
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      CHECK(res.trace[i].potential_after > res.trace[i - 1].potential_after - 1e-9);
  }
}

TEST_CASE("shuffled sweep order converges to certified equilibria too") {
  MarketConfig cfg = market(2, 4, 24, 200, 1.0, 120.0, discriminative_prices(2, 4, 4.0, 2.0));
  RewardTable table(cfg);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SolveResult res = sequential_best_response(cfg, table, seed, SweepOrder::Shuffled);
    REQUIRE(res.converged);
    CHECK(is_nash(res.profile, table, cfg).nash);
  }
}

TEST_CASE("starting at an equilibrium terminates in one unchanged sweep") {
  MarketConfig cfg = market(3, 6, 12, 200, 1.0, 120.0, uniform_prices(3, 6, 4.0));
  RewardTable table(cfg);
  SolveResult first = sequential_best_response(cfg, table, 5);
  REQUIRE(is_nash(first.profile, table, cfg).nash);

  SolveResult again = sequential_best_response_from(first.profile, cfg, table, 6);
  CHECK(again.sweeps == 1);
  CHECK(again.converged);
  CHECK(again.trace.empty());
  CHECK(again.profile.actions == first.profile.actions);
}

TEST_CASE("exact potential identity over random unilateral deviations") {
  Rng rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    MarketConfig cfg = random_market(rng, 3, 4, 20);
    RewardTable table(cfg);
    Profile profile = random_profile(rng, cfg);
    int m = int(rng.below(std::uint64_t(cfg.helpers)));
    GameAction from = profile.actions[m];
    GameAction to = table.action_at(rng.below(table.action_count()));

    Grouping g = profile.grouping(cfg.providers, cfg.contents);
    double r_from = payoff_value(table, from, g.count(from), cfg);
    Profile deviated = profile;
    deviated.actions[m] = to;
    Grouping g2 = deviated.grouping(cfg.providers, cfg.contents);
    double r_to = payoff_value(table, to, g2.count(to), cfg);

    double dphi = potential(profile, table, cfg) - potential(deviated, table, cfg);
    CHECK(std::abs(dphi - (r_from - r_to)) <= 1e-9);
  }
}

TEST_CASE("potential: lone CH equals its payoff; empty actions contribute nothing") {
  MarketConfig cfg = market(2, 3, 1, 120, 0.7, 60.0, uniform_prices(2, 3, 2.0));
  RewardTable table(cfg);
  Profile p{{GameAction{2, 1}}};
  Grouping g = p.grouping(2, 3);
  CHECK(potential(p, table, cfg) ==
        doctest::Approx(payoff(table, g, {2, 1}, cfg).total()).epsilon(1e-12));
}

TEST_CASE("social welfare: direct sum equals the coverage closed form") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    MarketConfig cfg = random_market(rng, 3, 4, 25);
    RewardTable table(cfg);
    Profile profile = random_profile(rng, cfg);
    Grouping g = profile.grouping(cfg.providers, cfg.contents);
    CHECK(social_welfare_direct(profile, table, cfg) ==
          doctest::Approx(social_welfare_coverage(g, table, cfg)).epsilon(1e-9));
  }
}

TEST_CASE("welfare depends only on the occupied action set") {
  MarketConfig cfg = market(2, 2, 6, 100, 1.0, 40.0, uniform_prices(2, 2, 3.0));
  RewardTable table(cfg);
  Profile a{{{1, 1}, {1, 1}, {1, 1}, {1, 1}, {1, 1}, {2, 2}}};
  Profile b{{{1, 1}, {2, 2}, {2, 2}, {2, 2}, {2, 2}, {2, 2}}};
  CHECK(social_welfare_direct(a, table, cfg) ==
        doctest::Approx(social_welfare_direct(b, table, cfg)).epsilon(1e-12));

  // everyone on one action: welfare C * R_a regardless of the CH count
  for (int m : {3, 7}) {
    MarketConfig c2 = cfg;
    c2.helpers = m;
    Profile all{std::vector<GameAction>(m, GameAction{1, 2})};
    double c = double(c2.users) / c2.providers + c2.epoch_reward / table.total();
    CHECK(social_welfare_direct(all, table, c2) ==
          doctest::Approx(c * table.at({1, 2})).epsilon(1e-12));
  }
}

TEST_CASE("offloaded deliveries count the covered demand") {
  MarketConfig cfg = market(2, 3, 4, 120, 1.0, 0.0, uniform_prices(2, 3, 1.0));
  auto p = zipf_popularity(3, 1.0);
  Profile profile{{{1, 1}, {1, 1}, {2, 2}, {2, 3}}};
  Grouping g = profile.grouping(2, 3);
  // independent oracle: sum of expected per-action task counts
  double oracle = (120.0 / 2.0) * (p[0] + p[1] + p[2]);
  CHECK(expected_offloaded_deliveries(g, cfg) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("centralized optimum: coverage rule against exhaustive search") {
  // full coverage once M >= N*K
  MarketConfig big = market(2, 2, 9, 100, 1.0, 50.0, uniform_prices(2, 2, 2.0));
  RewardTable tb(big);
  OptimumResult full = centralized_optimum(big, tb);
  double c = double(big.users) / big.providers + big.epoch_reward / tb.total();
  CHECK(full.welfare == doctest::Approx(c * tb.total()).epsilon(1e-9));

  // four table sizes, two customers: the top two get covered
  MarketConfig cfg = market(1, 4, 2, 100, 0.0, 0.0, uniform_prices(1, 4, 1.0));
  RewardTable table = RewardTable::from_values({{0.5, 0.3, 0.15, 0.05}});
  OptimumResult opt = centralized_optimum(cfg, table);
  double c2 = double(cfg.users) / cfg.providers + cfg.epoch_reward / table.total();
  CHECK(opt.welfare == doctest::Approx(c2 * 0.8).epsilon(1e-9));

  // exhaustive oracle over all 4^2 profiles
  double best = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Profile p{{GameAction{1, i + 1}, GameAction{1, j + 1}}};
      best = std::max(best, social_welfare_coverage(p.grouping(1, 4), table, cfg));
    }
  CHECK(opt.welfare == best);
}

TEST_CASE("random baseline: degenerate action space, optimum dominance, seeding") {
  MarketConfig one = market(1, 1, 4, 80, 1.0, 20.0, uniform_prices(1, 1, 2.0));
  RewardTable t1(one);
  BaselineResult b = random_baseline(one, t1, 50, 9);
  Profile unique{std::vector<GameAction>(4, GameAction{1, 1})};
  CHECK(b.mean_welfare ==
        doctest::Approx(social_welfare_direct(unique, t1, one)).epsilon(1e-12));

  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    MarketConfig cfg = random_market(rng, 2, 3, 10);
    RewardTable table(cfg);
    BaselineResult base = random_baseline(cfg, table, 200, trial);
    OptimumResult opt = centralized_optimum(cfg, table);
    CHECK(base.mean_welfare <= opt.welfare + 1e-9);
    CHECK(base.mean_deliveries <=
          expected_offloaded_deliveries(opt.profile.grouping(cfg.providers, cfg.contents), cfg) +
              1e-9);
  }

  // per-trial substreams: same seed, same result
  MarketConfig cfg = market(3, 6, 30, 200, 1.0, 120.0, uniform_prices(3, 6, 4.0));
  RewardTable table(cfg);
  BaselineResult x = random_baseline(cfg, table, 300, 17);
  BaselineResult y = random_baseline(cfg, table, 300, 17);
  CHECK(x.mean_payoff == y.mean_payoff);
  CHECK(x.mean_deliveries == y.mean_deliveries);
}

TEST_CASE("payoff is strictly monotone: down in occupancy, up in potential") {
  MarketConfig cfg = market(2, 3, 10, 150, 1.2, 80.0, uniform_prices(2, 3, 2.5));
  RewardTable table(cfg);
  for (int occ = 1; occ < 10; ++occ)
    CHECK(payoff_value(table, {1, 1}, occ, cfg) > payoff_value(table, {1, 1}, occ + 1, cfg));

  // same occupancy, larger reward potential pays strictly more
  auto p = zipf_popularity(3, 1.2);
  REQUIRE(p[0] > p[1]);
  CHECK(payoff_value(table, {1, 1}, 3, cfg) > payoff_value(table, {1, 2}, 3, cfg));
}

TEST_CASE("CHs sharing an action receive an identical payoff") {
  MarketConfig cfg = market(2, 2, 4, 100, 1.0, 30.0, uniform_prices(2, 2, 2.0));
  RewardTable table(cfg);
  Profile p{{{1, 2}, {1, 2}, {1, 2}, {2, 1}}};
  Grouping g = p.grouping(2, 2);
  double first = payoff(table, g, p.actions[0], cfg).total();
  double second = payoff(table, g, p.actions[1], cfg).total();
  CHECK(first == second);
}

TEST_CASE("scaling prices and reward together scales payoffs and keeps the BR") {
  MarketConfig cfg = market(2, 3, 8, 100, 1.0, 60.0, uniform_prices(2, 3, 2.0));
  const double scale = 3.5;
  MarketConfig scaled = cfg;
  for (auto& row : scaled.prices)
    for (auto& o : row) o *= scale;
  scaled.epoch_reward *= scale;

  RewardTable t1(cfg), t2(scaled);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Grouping others(2, 3);
    for (int i = 0; i < 7; ++i)
      others.add(t1.action_at(rng.below(t1.action_count())));
    CHECK(best_response(others, t1, cfg) == best_response(others, t2, scaled));
    GameAction a = t1.action_at(rng.below(t1.action_count()));
    int occ = others.count(a) + 1;
    CHECK(payoff_value(t2, a, occ, scaled) ==
          doctest::Approx(scale * payoff_value(t1, a, occ, cfg)).epsilon(1e-9));
  }
}

TEST_CASE("equal-reward-potential prices flatten the table; discriminative scale rows") {
  RewardTable flat(
      market(2, 4, 24, 200, 1.0, 120.0, equal_reward_potential_prices(2, 4, 1.0, 4.0)));
  double lo = 1e300, hi = 0;
  for (std::size_t i = 0; i < flat.action_count(); ++i) {
    lo = std::min(lo, flat.at(flat.action_at(i)));
    hi = std::max(hi, flat.at(flat.action_at(i)));
  }
  CHECK(hi - lo < 1e-12);

  auto disc = discriminative_prices(2, 4, 4.0, 2.0);
  for (int k = 0; k < 4; ++k) CHECK(disc[1][k] == doctest::Approx(2.0 * disc[0][k]));

  // mean price of the equal-potential scheme matches the uniform level
  auto eq = equal_reward_potential_prices(2, 4, 1.0, 4.0);
  double mean = 0;
  for (const auto& row : eq)
    for (double o : row) mean += o;
  mean /= 8.0;
  CHECK(mean == doctest::Approx(4.0).epsilon(1e-9));
}
