#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "blockcache/ledger.hpp"

namespace blockcache {

// Slot/epoch clock. The genesis block occupies slot 0 outside any epoch;
// epoch e covers the T produced blocks at slots [e*T + 1, (e+1)*T].
inline Slot epoch_first_slot(std::uint64_t epoch, std::uint64_t slots_per_epoch) {
  return epoch * slots_per_epoch + 1;
}
inline Slot epoch_last_slot(std::uint64_t epoch, std::uint64_t slots_per_epoch) {
  return (epoch + 1) * slots_per_epoch;
}
inline std::uint64_t epoch_of_slot(Slot slot, std::uint64_t slots_per_epoch) {
  return slot == 0 ? 0 : (slot - 1) / slots_per_epoch;
}

// Consensus node roster: the M cache helpers followed by the N content
// providers, so node index i < M is CH i and index M + n is CP n.
struct ConsensusRoster {
  std::vector<Digest> helper_addresses;
  std::vector<Digest> provider_addresses;

  std::size_t size() const { return helper_addresses.size() + provider_addresses.size(); }
  bool is_helper(std::size_t node) const { return node < helper_addresses.size(); }
  const Digest& address(std::size_t node) const {
    return is_helper(node) ? helper_addresses[node]
                           : provider_addresses[node - helper_addresses.size()];
  }
  std::string node_label(std::size_t node) const;
};

// Integer token stakes per consensus node, frozen for one epoch.
struct StakeVector {
  std::vector<TokenAmount> stakes;
  std::uint64_t epoch = 0;

  TokenAmount total() const;
};

// Stakes backing epoch `closing_epoch + 1` elections, measured from the
// blocks of `closing_epoch` alone: a CH's stake is its confirmed
// delivery-payment income in the epoch, a CP's stake is `cp_stake_weight`
// times its delivery escrow still unsettled within the epoch's blocks.
StakeVector compute_stakes(const ChainData& chain, std::uint64_t closing_epoch,
                           const ConsensusRoster& roster, TokenAmount cp_stake_weight);

// Election randomness: the digest of the precedent block head, treated as a
// uniform random oracle output.
Digest election_seed(const Digest& prev_block_head);

// Owner of token index `index` (0 <= index < total stake) under the
// cumulative ordering of the stake vector.
std::size_t owner_of_token_index(const StakeVector& stakes, TokenAmount index);

// Follow-the-Satoshi: picks a uniform token index in [0, total) from the
// seed stream (rejection sampling; the stream extends by iterated digesting)
// and returns its owner. Throws std::invalid_argument on zero total stake.
std::size_t fts_elect(const StakeVector& stakes, const Digest& seed);

enum class ProduceStatus { Ok, WrongLeader, StaleSlot };

// Assembles, signs and returns the block for `slot`: the pending
// transactions plus one block-reward mint to the leader. `leader_node` must
// be the elected index for the slot and `leader` its identity.
ProduceStatus produce_block(const NodeIdentity& leader, std::size_t leader_node,
                            std::size_t elected_node, std::vector<Transaction> pending,
                            const Chain& chain, Slot slot, Block* out);

struct SlotRecord {
  std::uint64_t epoch = 0;
  Slot slot = 0;
  std::size_t leader = 0;
  std::string leader_label;
  TokenAmount reward = 0;
  std::size_t transactions = 0;
};

// Per-slot transaction source; called once per slot before production.
using SlotSource = std::function<std::vector<Transaction>(Slot)>;

struct EpochResult {
  StakeVector next_stakes;      // measured from this epoch's blocks
  std::vector<SlotRecord> slots;
};

// Runs the T slots of one epoch against `chain`: per slot, seeds from the
// tip head, elects with `stakes` (falling back to round-robin CP leadership
// when total stake is zero), produces and appends. Identities must cover
// every roster node. Throws std::runtime_error if an append is rejected.
EpochResult run_epoch(Chain& chain, std::uint64_t epoch, const StakeVector& stakes,
                      const ConsensusRoster& roster,
                      const std::vector<NodeIdentity>& node_identities,
                      const SlotSource& source, TokenAmount cp_stake_weight);

}  // namespace blockcache
