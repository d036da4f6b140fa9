#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockcache/game.hpp"
#include "blockcache/ledger.hpp"

namespace blockcache {

// Price construction for the experiment schemes; `Explicit` carries a full
// matrix from the config file.
struct PricingSpec {
  enum class Scheme { Uniform, EqualRewardPotential, Discriminative, Explicit };
  Scheme scheme = Scheme::Uniform;
  double base_price = 4.0;
  double factor = 2.0;  // Discriminative: provider n pays base * factor^(n-1)
  std::vector<std::vector<double>> explicit_prices;

  std::vector<std::vector<double>> build(int providers, int contents, double zipf_beta) const;
  static const char* scheme_name(Scheme s);
};

// Whole-run configuration; JSON schema documented in docs/FORMATS.md.
struct HarnessConfig {
  MarketConfig market;  // prices filled from `pricing`
  PricingSpec pricing;

  // consensus
  std::uint64_t slots_per_epoch = 12;
  TokenAmount cp_stake_weight = 1;  // kappa, CP stake per unconfirmed token
  TokenAmount genesis_grant_cp = 100000;
  TokenAmount genesis_grant_ch = 1000;

  // contracts
  std::size_t content_chunks = 16;
  std::size_t chunk_size = 64;
  std::size_t por_challenges = 2;
  Slot delivery_deadline_slots = 2;

  // simulation
  int epochs = 20;
  int cheating_users = 0;     // that many users (lowest indices) never return a PoR
  bool freeze_actions = false;  // skip per-epoch re-decision (fixed grouping runs)

  // solver / experiments
  std::vector<int> helpers_sweep;  // empty -> just market.helpers
  SweepOrder sweep_order = SweepOrder::Fixed;
  int max_sweeps = 200;
  int baseline_trials = 1000;

  std::vector<std::uint64_t> seeds{1};

  void finalize();        // builds market.prices from pricing, then validates
  void validate() const;  // throws std::invalid_argument with a clear message

  std::string to_json() const;  // canonical (sorted keys), round-trips
  static HarnessConfig from_json_text(const std::string& text);
  static HarnessConfig from_json_file(const std::string& path);

  // Digest of the canonical serialization; CSV rows carry its prefix.
  std::string hash_hex() const;

  // Integer per-block reward; throws unless epoch_reward is a whole multiple
  // of slots_per_epoch.
  TokenAmount block_reward() const;
  // Integer on-chain price for (n, k) (1-based); throws if prices are not
  // whole token amounts.
  TokenAmount price_tokens(int provider, int content) const;

  // The two experiment presets used throughout: a 3-CP/6-content market
  // with 200 users, and a 2-CP/4-content market with 24 CHs.
  static HarnessConfig preset_solver_market();
  static HarnessConfig preset_pricing_market();
};

}  // namespace blockcache
