#pragma once

#include <map>
#include <utility>
#include <vector>

#include "blockcache/config.hpp"
#include "blockcache/consensus.hpp"
#include "blockcache/contracts.hpp"
#include "blockcache/game.hpp"
#include "blockcache/rng.hpp"

namespace blockcache {

// Bank backend that realizes every transfer as a signed transaction staged
// for the current slot's block, pre-validated against the chain state plus
// the already staged batch.
class ChainBank : public Bank {
 public:
  ChainBank(Chain& chain, const IdentityBook& identities);

  void begin_slot(Slot slot);
  std::vector<Transaction> take_batch();
  bool batch_empty() const { return batch_.empty(); }

  TokenAmount balance(const Digest& address) const override;
  bool transfer(const Digest& from, const Digest& to, TokenAmount amount, TxKind kind,
                std::optional<ContentId> content, std::optional<Digest> escrow_ref,
                Digest* escrow_id) override;

 private:
  Chain& chain_;
  const IdentityBook& identities_;
  LedgerState::BlockDelta delta_;
  std::vector<Transaction> batch_;
  Slot slot_ = 0;
  std::uint64_t nonce_ = 0;
};

struct EpochTelemetry {
  std::uint64_t epoch = 0;
  std::uint64_t requests = 0;
  std::uint64_t offloaded = 0;       // tasks paid, attributed to their assignment epoch
  std::uint64_t rollbacks = 0;       // tasks rolled back, same attribution
  std::uint64_t prefetch_forfeits = 0;
  double popularity_tv = 0.0;        // estimate vs the configured Zipf law, cumulative
  std::string grouping;              // occupancy counts chosen for the epoch
  double mean_ch_income = 0.0;       // delivery tokens per CH earned this epoch
  TokenAmount supply = 0;
};

// Closed loop over the ledger, consensus, contract and game modules: per
// epoch the CHs re-decide actions by best response against the popularity
// estimated from on-chain request counts, contracts run the prefetch and
// delivery stages with PoR settlement, and FtS leaders produce one block
// per slot. A final teardown slot resolves and destroys the last epoch's
// contracts so no escrow outlives the run.
class Simulation {
 public:
  Simulation(HarnessConfig cfg, std::uint64_t seed);

  void run();  // throws std::runtime_error on any audit failure

  const HarnessConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const Chain& chain() const { return chain_; }
  const ConsensusRoster& roster() const { return roster_; }
  const ValidationReport& final_validation() const { return final_report_; }

  const std::vector<SlotRecord>& slot_records() const { return slot_records_; }
  const std::vector<EpochTelemetry>& epoch_records() const { return epoch_records_; }
  const std::vector<std::pair<std::uint64_t, ContractRegistry::Row>>& contract_records() const {
    return contract_records_;
  }

  const Digest& cp_address(int provider) const { return cps_[provider - 1].address; }
  const Digest& ch_address(int helper) const { return chs_[helper - 1].address; }
  const Digest& user_address(int user) const { return users_[user - 1].address; }
  const Profile& current_actions() const { return actions_; }

  // Cumulative request-frequency estimate over all blocks so far (raw
  // counts; uniform when no requests exist yet).
  std::vector<double> estimated_popularity() const;
  double popularity_tv_distance() const;

 private:
  void epoch_boundary(std::uint64_t epoch, Slot slot);
  void decide_actions(std::uint64_t epoch);
  void run_prefetch_stage(std::uint64_t epoch, Slot slot);
  void issue_requests(std::uint64_t epoch, Slot slot);
  void settle_due(Slot slot);
  void collect_teardown_counts();
  void audit() const;
  std::vector<Transaction> slot_source(Slot slot);

  HarnessConfig cfg_;
  std::uint64_t seed_;

  std::vector<NodeIdentity> cps_;
  std::vector<NodeIdentity> chs_;
  std::vector<NodeIdentity> users_;
  std::vector<NodeIdentity> node_identities_;  // CHs then CPs, roster order
  IdentityBook book_;
  ConsensusRoster roster_;

  Chain chain_;
  ChainBank bank_;
  ContractRegistry registry_;
  Rng demand_rng_;
  Rng decide_rng_;

  std::vector<double> true_popularity_;
  Profile actions_;
  std::map<int, MerkleContent> ch_contents_;  // helper index -> held copy

  struct PendingSettle {
    ContentId content;
    std::size_t task = 0;
    Slot due = 0;
    int user = 0;  // 0-based
  };
  std::vector<PendingSettle> pending_;

  TokenAmount genesis_total_ = 0;
  std::uint64_t requests_in_epoch_ = 0;

  std::vector<SlotRecord> slot_records_;
  std::vector<EpochTelemetry> epoch_records_;
  std::vector<std::pair<std::uint64_t, ContractRegistry::Row>> contract_records_;
  std::vector<std::uint64_t> offloaded_by_epoch_;
  std::vector<std::uint64_t> rollbacks_by_epoch_;
  std::vector<std::uint64_t> forfeits_by_epoch_;
  ValidationReport final_report_;
  bool ran_ = false;
};

}  // namespace blockcache
