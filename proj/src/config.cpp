#include "blockcache/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "blockcache/crypto.hpp"

namespace blockcache {

using nlohmann::json;

std::vector<std::vector<double>> PricingSpec::build(int providers, int contents,
                                                    double zipf_beta) const {
  switch (scheme) {
    case Scheme::Uniform:
      return uniform_prices(providers, contents, base_price);
    case Scheme::EqualRewardPotential:
      return equal_reward_potential_prices(providers, contents, zipf_beta, base_price);
    case Scheme::Discriminative:
      return discriminative_prices(providers, contents, base_price, factor);
    case Scheme::Explicit:
      return explicit_prices;
  }
  throw std::logic_error("unknown pricing scheme");
}

const char* PricingSpec::scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Uniform: return "uniform";
    case Scheme::EqualRewardPotential: return "equal-reward-potential";
    case Scheme::Discriminative: return "discriminative";
    case Scheme::Explicit: return "explicit";
  }
  return "?";
}

static PricingSpec::Scheme scheme_from_name(const std::string& name) {
  if (name == "uniform") return PricingSpec::Scheme::Uniform;
  if (name == "equal-reward-potential") return PricingSpec::Scheme::EqualRewardPotential;
  if (name == "discriminative") return PricingSpec::Scheme::Discriminative;
  if (name == "explicit") return PricingSpec::Scheme::Explicit;
  throw std::invalid_argument("unknown pricing scheme: " + name);
}

void HarnessConfig::finalize() {
  market.prices = pricing.build(market.providers, market.contents, market.zipf_beta);
  validate();
}

void HarnessConfig::validate() const {
  market.validate();
  if (slots_per_epoch < 1) throw std::invalid_argument("slots_per_epoch must be at least 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed required");
  if (pricing.scheme == PricingSpec::Scheme::Discriminative && !(pricing.factor > 0))
    throw std::invalid_argument("discriminative factor must be positive");
  if (!(pricing.base_price > 0)) throw std::invalid_argument("base price must be positive");
  if (content_chunks < 1 || chunk_size < 1)
    throw std::invalid_argument("content chunking must be non-empty");
  if (por_challenges < 1) throw std::invalid_argument("at least one PoR challenge required");
  if (por_challenges > content_chunks)
    throw std::invalid_argument("PoR challenges cannot exceed chunk count");
  if (cheating_users < 0 || cheating_users > market.users)
    throw std::invalid_argument("cheating_users out of range");
  if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be at least 1");
  if (baseline_trials < 1) throw std::invalid_argument("baseline_trials must be at least 1");
  for (int m : helpers_sweep)
    if (m < 1) throw std::invalid_argument("helper counts in the sweep must be positive");
}

TokenAmount HarnessConfig::block_reward() const {
  double per_block = market.epoch_reward / double(slots_per_epoch);
  TokenAmount r = TokenAmount(std::llround(per_block));
  if (double(r) * double(slots_per_epoch) != market.epoch_reward)
    throw std::invalid_argument(
        "epoch_block_reward must be a whole multiple of slots_per_epoch");
  return r;
}

TokenAmount HarnessConfig::price_tokens(int provider, int content) const {
  double o = market.prices[provider - 1][content - 1];
  TokenAmount t = TokenAmount(std::llround(o));
  if (double(t) != o || t == 0)
    throw std::invalid_argument("on-chain settlement needs whole, positive token prices");
  return t;
}

std::string HarnessConfig::to_json() const {
  json j;
  j["market"]["providers"] = market.providers;
  j["market"]["contents"] = market.contents;
  j["market"]["helpers"] = market.helpers;
  j["market"]["users_per_epoch"] = market.users;
  j["market"]["zipf_beta"] = market.zipf_beta;
  j["market"]["epoch_block_reward"] = market.epoch_reward;
  j["market"]["pricing"]["scheme"] = PricingSpec::scheme_name(pricing.scheme);
  j["market"]["pricing"]["base_price"] = pricing.base_price;
  if (pricing.scheme == PricingSpec::Scheme::Discriminative)
    j["market"]["pricing"]["factor"] = pricing.factor;
  if (pricing.scheme == PricingSpec::Scheme::Explicit)
    j["market"]["pricing"]["prices"] = pricing.explicit_prices;

  j["consensus"]["slots_per_epoch"] = slots_per_epoch;
  j["consensus"]["cp_stake_weight"] = cp_stake_weight;
  j["consensus"]["genesis_grant_cp"] = genesis_grant_cp;
  j["consensus"]["genesis_grant_ch"] = genesis_grant_ch;

  j["contracts"]["content_chunks"] = content_chunks;
  j["contracts"]["chunk_size"] = chunk_size;
  j["contracts"]["por_challenges"] = por_challenges;
  j["contracts"]["delivery_deadline_slots"] = delivery_deadline_slots;

  j["simulation"]["epochs"] = epochs;
  j["simulation"]["cheating_users"] = cheating_users;
  j["simulation"]["freeze_actions"] = freeze_actions;

  j["solver"]["helpers_sweep"] = helpers_sweep;
  j["solver"]["sweep_order"] = sweep_order == SweepOrder::Fixed ? "fixed" : "random";
  j["solver"]["max_sweeps"] = max_sweeps;
  j["baseline"]["trials"] = baseline_trials;
  j["seeds"] = seeds;
  return j.dump(2);
}

template <typename T>
static void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

HarnessConfig HarnessConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }

  HarnessConfig cfg;
  try {
    if (j.contains("market")) {
      const json& m = j["market"];
      read_into(m, "providers", cfg.market.providers);
      read_into(m, "contents", cfg.market.contents);
      read_into(m, "helpers", cfg.market.helpers);
      read_into(m, "users_per_epoch", cfg.market.users);
      read_into(m, "zipf_beta", cfg.market.zipf_beta);
      read_into(m, "epoch_block_reward", cfg.market.epoch_reward);
      if (m.contains("pricing")) {
        const json& p = m["pricing"];
        if (p.contains("scheme")) cfg.pricing.scheme = scheme_from_name(p["scheme"]);
        read_into(p, "base_price", cfg.pricing.base_price);
        read_into(p, "factor", cfg.pricing.factor);
        read_into(p, "prices", cfg.pricing.explicit_prices);
      }
    }
    if (j.contains("consensus")) {
      const json& c = j["consensus"];
      read_into(c, "slots_per_epoch", cfg.slots_per_epoch);
      read_into(c, "cp_stake_weight", cfg.cp_stake_weight);
      read_into(c, "genesis_grant_cp", cfg.genesis_grant_cp);
      read_into(c, "genesis_grant_ch", cfg.genesis_grant_ch);
    }
    if (j.contains("contracts")) {
      const json& c = j["contracts"];
      read_into(c, "content_chunks", cfg.content_chunks);
      read_into(c, "chunk_size", cfg.chunk_size);
      read_into(c, "por_challenges", cfg.por_challenges);
      read_into(c, "delivery_deadline_slots", cfg.delivery_deadline_slots);
    }
    if (j.contains("simulation")) {
      const json& s = j["simulation"];
      read_into(s, "epochs", cfg.epochs);
      read_into(s, "cheating_users", cfg.cheating_users);
      read_into(s, "freeze_actions", cfg.freeze_actions);
    }
    if (j.contains("solver")) {
      const json& s = j["solver"];
      read_into(s, "helpers_sweep", cfg.helpers_sweep);
      read_into(s, "max_sweeps", cfg.max_sweeps);
      if (s.contains("sweep_order")) {
        std::string order = s["sweep_order"];
        if (order == "fixed")
          cfg.sweep_order = SweepOrder::Fixed;
        else if (order == "random")
          cfg.sweep_order = SweepOrder::Shuffled;
        else
          throw std::invalid_argument("sweep_order must be \"fixed\" or \"random\"");
      }
    }
    if (j.contains("baseline")) read_into(j["baseline"], "trials", cfg.baseline_trials);
    read_into(j, "seeds", cfg.seeds);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }

  cfg.finalize();
  return cfg;
}

HarnessConfig HarnessConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string HarnessConfig::hash_hex() const {
  return to_hex(sha256(as_span(to_json()))).substr(0, 16);
}

HarnessConfig HarnessConfig::preset_solver_market() {
  HarnessConfig cfg;
  cfg.market.providers = 3;
  cfg.market.contents = 6;
  cfg.market.helpers = 30;
  cfg.market.users = 200;
  cfg.market.zipf_beta = 1.0;
  cfg.market.epoch_reward = 120.0;
  cfg.pricing.scheme = PricingSpec::Scheme::Uniform;
  cfg.pricing.base_price = 4.0;
  cfg.helpers_sweep = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  cfg.finalize();
  return cfg;
}

HarnessConfig HarnessConfig::preset_pricing_market() {
  HarnessConfig cfg;
  cfg.market.providers = 2;
  cfg.market.contents = 4;
  cfg.market.helpers = 24;
  cfg.market.users = 200;
  cfg.market.zipf_beta = 1.0;
  cfg.market.epoch_reward = 120.0;
  cfg.pricing.scheme = PricingSpec::Scheme::Uniform;
  cfg.pricing.base_price = 4.0;
  cfg.finalize();
  return cfg;
}

}  // namespace blockcache
