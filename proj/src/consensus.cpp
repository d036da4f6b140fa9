#include "blockcache/consensus.hpp"

#include <limits>
#include <map>
#include <stdexcept>

namespace blockcache {

std::string ConsensusRoster::node_label(std::size_t node) const {
  if (is_helper(node)) return "ch:" + std::to_string(node + 1);
  return "cp:" + std::to_string(node - helper_addresses.size() + 1);
}

TokenAmount StakeVector::total() const {
  TokenAmount sum = 0;
  for (TokenAmount s : stakes) sum += s;
  return sum;
}

StakeVector compute_stakes(const ChainData& chain, std::uint64_t closing_epoch,
                           const ConsensusRoster& roster, TokenAmount cp_stake_weight) {
  const Slot first = epoch_first_slot(closing_epoch, chain.params.slots_per_epoch);
  const Slot last = epoch_last_slot(closing_epoch, chain.params.slots_per_epoch);

  std::map<Digest, TokenAmount> ch_income;
  // Delivery escrows posted by CPs within the epoch, minus those settled by
  // any transaction inside the same epoch's blocks.
  std::map<Digest, TokenAmount> cp_posted;    // escrow id -> amount (delivery escrows only)
  std::map<Digest, Digest> escrow_cp;         // escrow id -> CP address
  std::map<Digest, TokenAmount> cp_unconfirmed;

  std::map<Digest, std::size_t> cp_index;
  for (std::size_t n = 0; n < roster.provider_addresses.size(); ++n)
    cp_index[roster.provider_addresses[n]] = n;
  std::map<Digest, std::size_t> ch_index;
  for (std::size_t m = 0; m < roster.helper_addresses.size(); ++m)
    ch_index[roster.helper_addresses[m]] = m;

  for (const auto& block : chain.blocks) {
    if (block.timestamp < first || block.timestamp > last) continue;
    for (const auto& tx : block.transactions) {
      switch (tx.payload.kind) {
        case TxKind::DeliveryPayment:
          if (ch_index.count(tx.receiver)) ch_income[tx.receiver] += tx.payload.value;
          break;
        case TxKind::ContractDeposit:
          if (cp_index.count(tx.sender)) {
            cp_posted[tx.id] = tx.payload.value;
            escrow_cp[tx.id] = tx.sender;
            cp_unconfirmed[tx.sender] += tx.payload.value;
          }
          break;
        default:
          break;
      }
      // Any settlement consuming a CP escrow within the epoch confirms it.
      if (tx.payload.escrow_ref) {
        auto it = cp_posted.find(*tx.payload.escrow_ref);
        if (it != cp_posted.end()) {
          cp_unconfirmed[escrow_cp[it->first]] -= it->second;
          cp_posted.erase(it);
        }
      }
    }
  }

  StakeVector out;
  out.epoch = closing_epoch + 1;
  out.stakes.assign(roster.size(), 0);
  for (std::size_t m = 0; m < roster.helper_addresses.size(); ++m) {
    auto it = ch_income.find(roster.helper_addresses[m]);
    if (it != ch_income.end()) out.stakes[m] = it->second;
  }
  for (std::size_t n = 0; n < roster.provider_addresses.size(); ++n) {
    auto it = cp_unconfirmed.find(roster.provider_addresses[n]);
    if (it != cp_unconfirmed.end())
      out.stakes[roster.helper_addresses.size() + n] = cp_stake_weight * it->second;
  }
  return out;
}

Digest election_seed(const Digest& prev_block_head) { return sha256(as_span(prev_block_head)); }

std::size_t owner_of_token_index(const StakeVector& stakes, TokenAmount index) {
  TokenAmount cum = 0;
  for (std::size_t i = 0; i < stakes.stakes.size(); ++i) {
    cum += stakes.stakes[i];
    if (index < cum) return i;
  }
  throw std::invalid_argument("token index beyond total stake");
}

static std::uint64_t read_u64_be(const Digest& d, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | d[offset + i];
  return v;
}

std::size_t fts_elect(const StakeVector& stakes, const Digest& seed) {
  const TokenAmount total = stakes.total();
  if (total == 0) throw std::invalid_argument("zero total stake");

  // Unbiased draw in [0, total): take 64-bit words from the seed stream,
  // rejecting any above the largest multiple of `total`; the stream extends
  // by re-digesting when all four words of a digest are rejected.
  const std::uint64_t rem = (std::uint64_t(0) - total) % total;
  const std::uint64_t limit = std::uint64_t(0) - rem;  // 0 means accept everything
  Digest stream = seed;
  for (;;) {
    for (std::size_t off = 0; off + 8 <= stream.size(); off += 8) {
      std::uint64_t word = read_u64_be(stream, off);
      if (limit == 0 || word < limit) return owner_of_token_index(stakes, word % total);
    }
    stream = sha256(as_span(stream));
  }
}

ProduceStatus produce_block(const NodeIdentity& leader, std::size_t leader_node,
                            std::size_t elected_node, std::vector<Transaction> pending,
                            const Chain& chain, Slot slot, Block* out) {
  if (leader_node != elected_node) return ProduceStatus::WrongLeader;
  if (slot != chain.tip_slot() + 1) return ProduceStatus::StaleSlot;

  Block block;
  block.timestamp = slot;
  block.transactions = std::move(pending);
  block.transactions.push_back(make_mint_transaction(TxKind::BlockReward, leader.address,
                                                     chain.params().block_reward, slot));
  block.prev_head = chain.tip().head;
  block.proof.public_key = leader.public_key;
  block.proof.signature = leader.sign(as_span(encode_transaction_list(block.transactions)));
  block.head = compute_block_head(block);
  *out = block;
  return ProduceStatus::Ok;
}

EpochResult run_epoch(Chain& chain, std::uint64_t epoch, const StakeVector& stakes,
                      const ConsensusRoster& roster,
                      const std::vector<NodeIdentity>& node_identities,
                      const SlotSource& source, TokenAmount cp_stake_weight) {
  if (node_identities.size() != roster.size())
    throw std::invalid_argument("identity list does not match roster");
  const std::uint64_t T = chain.params().slots_per_epoch;
  const TokenAmount total_stake = stakes.total();

  EpochResult result;
  for (std::uint64_t i = 0; i < T; ++i) {
    const Slot slot = epoch_first_slot(epoch, T) + i;
    std::size_t leader;
    if (total_stake > 0) {
      leader = fts_elect(stakes, election_seed(chain.tip().head));
    } else {
      // Fully idle market: keep the chain live with round-robin CP leadership.
      leader = roster.helper_addresses.size() + (slot % roster.provider_addresses.size());
    }

    Block block;
    ProduceStatus ps = produce_block(node_identities[leader], leader, leader, source(slot),
                                     chain, slot, &block);
    if (ps != ProduceStatus::Ok) throw std::runtime_error("produce_block failed");
    std::string why;
    AppendStatus as = chain.append(block, &why);
    if (as != AppendStatus::Ok)
      throw std::runtime_error("append failed at slot " + std::to_string(slot) + ": " + why);

    SlotRecord rec;
    rec.epoch = epoch;
    rec.slot = slot;
    rec.leader = leader;
    rec.leader_label = roster.node_label(leader);
    rec.reward = chain.params().block_reward;
    rec.transactions = block.transactions.size();
    result.slots.push_back(std::move(rec));
  }

  result.next_stakes = compute_stakes(chain.data(), epoch, roster, cp_stake_weight);
  return result;
}

}  // namespace blockcache
