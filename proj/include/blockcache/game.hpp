#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace blockcache {

// One caching choice: (provider n, content k), both 1-based.
struct GameAction {
  int provider = 1;
  int content = 1;
  friend bool operator==(const GameAction&, const GameAction&) = default;
  friend auto operator<=>(const GameAction&, const GameAction&) = default;
};

std::string action_label(GameAction a);  // "n:k"

// Market parameters of the caching game.
struct MarketConfig {
  int providers = 1;      // N
  int contents = 1;       // K
  int helpers = 1;        // M
  int users = 1;          // L requests per epoch
  double zipf_beta = 1.0;
  double epoch_reward = 0.0;                // lambda, total block reward per epoch
  std::vector<std::vector<double>> prices;  // N x K, each o_{n,k} > 0

  std::size_t action_count() const { return std::size_t(providers) * contents; }
  void validate() const;  // throws std::invalid_argument
};

// Price matrices for the three pricing schemes studied in the experiments.
std::vector<std::vector<double>> uniform_prices(int providers, int contents, double price);
// o_{n,k} = c / p_k with c chosen so the mean price equals `mean_price`;
// makes every reward potential o_{n,k} * p_k identical.
std::vector<std::vector<double>> equal_reward_potential_prices(int providers, int contents,
                                                               double zipf_beta,
                                                               double mean_price);
// Provider n's prices scaled by factor^(n-1) (factor 2 with two providers
// doubles the second CP's prices).
std::vector<std::vector<double>> discriminative_prices(int providers, int contents,
                                                       double base_price, double factor);

// p_k = k^-beta / sum_j j^-beta, non-increasing, summing to one.
std::vector<double> zipf_popularity(int contents, double beta);

// Reward potential per action, R_{n,k} = o_{n,k} * p_k.
class RewardTable {
 public:
  RewardTable(const MarketConfig& cfg);
  static RewardTable from_values(std::vector<std::vector<double>> values);

  double at(GameAction a) const { return values_[index_of(a)]; }
  double total() const { return total_; }
  int providers() const { return providers_; }
  int contents() const { return contents_; }
  std::size_t action_count() const { return values_.size(); }

  std::size_t index_of(GameAction a) const {
    return std::size_t(a.provider - 1) * contents_ + (a.content - 1);
  }
  GameAction action_at(std::size_t index) const {
    return GameAction{int(index) / contents_ + 1, int(index) % contents_ + 1};
  }

 private:
  RewardTable() = default;
  int providers_ = 0;
  int contents_ = 0;
  std::vector<double> values_;  // lexicographic (n,k)
  double total_ = 0.0;
};

// Occupancy counts M_{n,k} per action.
class Grouping {
 public:
  Grouping(int providers, int contents)
      : contents_(contents), counts_(std::size_t(providers) * contents, 0) {}

  int count(GameAction a) const { return counts_[index(a)]; }
  void add(GameAction a) { ++counts_[index(a)]; ++total_; }
  void remove(GameAction a);
  int total() const { return total_; }
  const std::vector<int>& counts() const { return counts_; }
  std::string label() const;  // counts joined with '|', lexicographic order

 private:
  std::size_t index(GameAction a) const {
    return std::size_t(a.provider - 1) * contents_ + (a.content - 1);
  }
  int contents_;
  std::vector<int> counts_;
  int total_ = 0;
};

// Joint action vector, one entry per CH.
struct Profile {
  std::vector<GameAction> actions;
  Grouping grouping(int providers, int contents) const;
};

struct PayoffValue {
  double delivery = 0.0;      // (L/N) * R_a / M_a
  double block_reward = 0.0;  // (lambda / sum R) * R_a / M_a
  double total() const { return delivery + block_reward; }
};

// r(R_a, occupancy): the delivery and expected block-generation components
// for one CH in a group of `occupancy` on action a. Throws on occupancy 0.
PayoffValue payoff_components(const RewardTable& table, GameAction a, int occupancy,
                              const MarketConfig& cfg);
double payoff_value(const RewardTable& table, GameAction a, int occupancy,
                    const MarketConfig& cfg);
// Convenience: the acting CH counted inside `grouping`.
PayoffValue payoff(const RewardTable& table, const Grouping& grouping, GameAction a,
                   const MarketConfig& cfg);

// argmax_a r(R_a, M^{-m}_a + 1) over the grouping of the other CHs; ties
// resolve to the lexicographically smallest (n,k).
GameAction best_response(const Grouping& others, const RewardTable& table,
                         const MarketConfig& cfg);

struct NashViolation {
  int helper = 0;  // 0-based CH index
  GameAction better;
  double gain = 0.0;
};
struct NashReport {
  bool nash = false;
  std::vector<NashViolation> violations;
};

// No CH can gain more than `tol` by a unilateral deviation.
NashReport is_nash(const Profile& profile, const RewardTable& table, const MarketConfig& cfg,
                   double tol = 1e-9);

// Rosenthal potential: sum over actions of sum_{i=1..M_a} r(R_a, i),
// evaluated literally.
double potential(const Grouping& grouping, const RewardTable& table, const MarketConfig& cfg);
double potential(const Profile& profile, const RewardTable& table, const MarketConfig& cfg);

enum class SweepOrder { Fixed, Shuffled };

struct SolveTraceRow {
  int sweep = 0;
  int helper = 0;
  GameAction from;
  GameAction to;
  double potential_after = 0.0;
};

struct SolveResult {
  Profile profile;
  int sweeps = 0;
  bool converged = false;
  std::vector<SolveTraceRow> trace;          // one row per accepted action change
  std::vector<double> potential_per_sweep;   // after each full sweep
};

// Sequential best response from a uniformly random initial profile; each CH
// in turn adopts its best response against the immediately updated grouping,
// moving only on strict improvement. Terminates when a full sweep changes
// no action.
SolveResult sequential_best_response(const MarketConfig& cfg, const RewardTable& table,
                                     std::uint64_t seed, SweepOrder order = SweepOrder::Fixed,
                                     int max_sweeps = 1000);
// Same dynamics from a given starting profile.
SolveResult sequential_best_response_from(Profile initial, const MarketConfig& cfg,
                                          const RewardTable& table, std::uint64_t seed,
                                          SweepOrder order = SweepOrder::Fixed,
                                          int max_sweeps = 1000);

// Sum of all CH payoffs, by direct summation over the profile.
double social_welfare_direct(const Profile& profile, const RewardTable& table,
                             const MarketConfig& cfg);
// Closed form: (L/N + lambda / sum R) * sum of R over occupied actions; a
// profile enters only through its occupied-action set.
double social_welfare_coverage(const Grouping& grouping, const RewardTable& table,
                               const MarketConfig& cfg);

// Expected offloaded deliveries per epoch, (L/N) * sum of p_k over occupied
// (n,k).
double expected_offloaded_deliveries(const Grouping& grouping, const MarketConfig& cfg);

struct OptimumResult {
  Profile profile;
  double welfare = 0.0;
};

// Welfare-maximizing assignment: covers the min(M, N*K) largest reward
// potentials with one CH each (ties lexicographic) and parks any surplus on
// the largest.
OptimumResult centralized_optimum(const MarketConfig& cfg, const RewardTable& table);

struct BaselineResult {
  double mean_payoff = 0.0;      // over CHs and trials
  double mean_welfare = 0.0;     // over trials
  double mean_deliveries = 0.0;  // over trials
};

// Uniform i.i.d. action profiles; trial t draws its stream from
// (seed, t) so the result is independent of evaluation order.
BaselineResult random_baseline(const MarketConfig& cfg, const RewardTable& table, int trials,
                               std::uint64_t seed);

}  // namespace blockcache
