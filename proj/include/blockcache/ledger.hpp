#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "blockcache/bytes.hpp"
#include "blockcache/crypto.hpp"
#include "blockcache/encoding.hpp"

namespace blockcache {

using TokenAmount = std::uint64_t;
using Slot = std::uint64_t;

// Converts an externally supplied signed quantity into tokens, rejecting
// negative payments at the boundary (token amounts are unsigned inside).
TokenAmount token_amount(long long value);

// (provider, content) pair, 1-based on both axes.
struct ContentId {
  std::uint32_t provider = 0;
  std::uint32_t content = 0;
  friend bool operator==(const ContentId&, const ContentId&) = default;
  friend auto operator<=>(const ContentId&, const ContentId&) = default;
};

enum class TxKind : std::uint8_t {
  UserRequest = 0,
  ContractDeposit = 1,
  DeliveryPayment = 2,
  DepositRefund = 3,
  DepositForfeit = 4,
  BlockReward = 5,
  GenesisGrant = 6,
};

const char* tx_kind_name(TxKind kind);

// Settlements must name the funding deposit they consume (the conflict
// rules track escrow ids), and the nonce keeps structurally identical
// transfers from colliding on the same transaction id.
struct TxPayload {
  std::optional<ContentId> content;
  TokenAmount value = 0;
  TokenAmount fee = 0;
  TxKind kind = TxKind::UserRequest;
  std::optional<Digest> escrow_ref;
  std::uint64_t nonce = 0;

  friend bool operator==(const TxPayload&, const TxPayload&) = default;
};

struct Transaction {
  Digest id{};
  Digest sender{};
  Digest receiver{};
  TxPayload payload;
  Bytes signature;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

Bytes encode_payload(const TxPayload& p);
Bytes encode_transaction(const Transaction& tx);
TxPayload decode_payload(Decoder& dec);
Transaction decode_transaction(Decoder& dec);

// id = H(sender || receiver || payload || signature): every field but the id itself.
Digest compute_tx_id(const Transaction& tx);

// Builds and signs a transfer from `sender`. The signature covers the
// canonical payload encoding; the artifact's flat fee rule (fee = 0) is
// enforced here.
Transaction make_transaction(const NodeIdentity& sender, const Digest& receiver,
                             TxPayload payload);

// Token-supply transactions (genesis grants, block rewards) originate from
// the all-zero address and carry no signature.
Transaction make_mint_transaction(TxKind kind, const Digest& receiver, TokenAmount value,
                                  std::uint64_t nonce);

struct GeneratorProof {
  Bytes public_key;
  Bytes signature;
  friend bool operator==(const GeneratorProof&, const GeneratorProof&) = default;
};

struct Block {
  Slot timestamp = 0;
  std::vector<Transaction> transactions;
  GeneratorProof proof;
  Digest head{};
  Digest prev_head{};

  friend bool operator==(const Block&, const Block&) = default;
};

Bytes encode_block(const Block& b);
Block decode_block(Decoder& dec);
Bytes encode_transaction_list(const std::vector<Transaction>& txs);

// head = H(timestamp || transactions || generator proof || prev head).
Digest compute_block_head(const Block& b);

struct ChainParams {
  TokenAmount block_reward = 0;   // minted to the leader of every non-genesis block
  std::uint64_t slots_per_epoch = 1;
  friend bool operator==(const ChainParams&, const ChainParams&) = default;
};

// Published address -> public key directory. Transactions carry only
// address digests, so verifiers resolve the sender's key here; the chain
// file embeds the directory for standalone verification.
class KeyDirectory {
 public:
  void add(ByteSpan public_key);
  const Bytes* find(const Digest& address) const;
  const std::map<Digest, Bytes>& entries() const { return entries_; }

 private:
  std::map<Digest, Bytes> entries_;
};

enum class AppendStatus {
  Ok,
  BadLink,        // prev-head does not match the tip
  BadTimestamp,   // not tip timestamp + 1
  BadHead,        // stored head differs from recomputation
  BadSignature,   // generator or sender signature fails (or sender key unknown)
  BadTxId,        // stored id differs from recomputation
  BadMint,        // mint kind in the wrong place or malformed mint
  BadReward,      // block reward count or value wrong
  ConflictingTx,  // duplicate id, overdraft, or escrow rule violation
};

const char* append_status_name(AppendStatus s);

// Balance and escrow view obtained by replaying a chain. An escrow entry is
// created by every ContractDeposit and must be consumed by exactly one
// settlement (DeliveryPayment / DepositRefund / DepositForfeit) of the full
// amount sent by the holding account.
class LedgerState {
 public:
  struct Escrow {
    Digest holder{};   // contract account the deposit sits in
    Digest source{};   // account that funded it
    TokenAmount amount = 0;
    Slot created_slot = 0;
    bool consumed = false;
    Slot consumed_slot = 0;
  };

  // Staged effects of a block, validated against the base state before
  // anything commits; a rejected block leaves the state untouched.
  struct BlockDelta {
    std::map<Digest, long long> balance;
    std::set<Digest> new_ids;
    std::map<Digest, Escrow> created;
    std::set<Digest> consumed;
    TokenAmount minted = 0;

    long long effective(const LedgerState& base, const Digest& addr) const {
      auto it = balance.find(addr);
      long long d = it == balance.end() ? 0 : it->second;
      return static_cast<long long>(base.balance(addr)) + d;
    }
  };

  TokenAmount balance(const Digest& address) const;
  TokenAmount minted_supply() const { return minted_; }
  TokenAmount total_balance() const { return total_balance_; }
  // Sum over live (unconsumed) escrow entries held by `holder`.
  TokenAmount live_escrow_of(const Digest& holder) const;
  TokenAmount total_live_escrow() const { return total_live_escrow_; }
  const std::map<Digest, Escrow>& escrows() const { return escrows_; }
  const std::map<Digest, TokenAmount>& balances() const { return balances_; }

  // Applies one transaction; on error the state is unchanged.
  AppendStatus apply(const Transaction& tx, bool genesis_block, Slot slot, std::string* why);

  // Validates one transaction against base state plus already staged
  // effects, extending the delta on success.
  AppendStatus stage(const Transaction& tx, bool genesis_block, Slot slot, BlockDelta& d,
                     std::string* why) const;
  void commit(const BlockDelta& d, Slot slot);

 private:
  std::map<Digest, TokenAmount> balances_;
  std::map<Digest, Escrow> escrows_;
  std::set<Digest> seen_ids_;
  TokenAmount minted_ = 0;
  TokenAmount total_balance_ = 0;
  TokenAmount total_live_escrow_ = 0;
};

// Serialized form of a chain: everything `verify-chain` needs.
struct ChainData {
  ChainParams params;
  KeyDirectory directory;
  std::vector<Block> blocks;
};

struct ValidationReport {
  bool valid = false;
  std::optional<std::size_t> first_bad_block;
  AppendStatus error = AppendStatus::Ok;
  std::string message;
};

// Checks one block (link, head, signatures, mint/reward placement, conflict
// rules) against `state` and applies it on success. `prev` is null for the
// genesis block.
AppendStatus validate_and_apply_block(const ChainParams& params, const KeyDirectory& directory,
                                      const Block& block, const Block* prev, LedgerState& state,
                                      std::string* why);

// Full structural check from genesis: link, head recomputation, signatures,
// mint placement, reward amounts and conflict rules. Never throws; the
// report carries the diagnosis.
ValidationReport validate_chain(const ChainData& data);

// Cumulative head recomputation from genesis (each recomputed head feeds the
// next block's preimage), for tamper-cascade inspection.
std::vector<Digest> recompute_heads(const std::vector<Block>& blocks);

// Append-only chain with a cached replay state. Single writer; readers may
// copy or snapshot freely (value semantics).
class Chain {
 public:
  // Starts a chain from a genesis block holding the given grants.
  static Chain create(ChainParams params,
                      const std::vector<std::pair<Digest, TokenAmount>>& genesis_grants);

  // Adopts externally loaded data, validating it block by block.
  static std::optional<Chain> from_data(ChainData data, ValidationReport* report = nullptr);

  AppendStatus append(const Block& block, std::string* why = nullptr);

  const std::vector<Block>& blocks() const { return data_.blocks; }
  const Block& tip() const { return data_.blocks.back(); }
  Slot tip_slot() const { return tip().timestamp; }
  const ChainParams& params() const { return data_.params; }
  const LedgerState& state() const { return state_; }
  TokenAmount balance(const Digest& address) const { return state_.balance(address); }

  KeyDirectory& directory() { return data_.directory; }
  const KeyDirectory& directory() const { return data_.directory; }
  const ChainData& data() const { return data_; }

 private:
  Chain() = default;
  AppendStatus check_and_apply(const Block& block, std::string* why);

  ChainData data_;
  LedgerState state_;
};

// Per-(provider, content) counts of user-request transactions whose block
// timestamp lies within [from_slot, to_slot].
std::map<ContentId, std::uint64_t> query_request_counts(const ChainData& data, Slot from_slot,
                                                        Slot to_slot);

// Chain file I/O (single binary file in the canonical encoding; layout in
// docs/FORMATS.md). Throws std::runtime_error on I/O failure and
// DecodeError on malformed content.
void save_chain_file(const std::string& path, const ChainData& data);
ChainData load_chain_file(const std::string& path);

}  // namespace blockcache
