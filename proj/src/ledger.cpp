#include "blockcache/ledger.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace blockcache {

TokenAmount token_amount(long long value) {
  if (value < 0) throw std::invalid_argument("negative token amount");
  return static_cast<TokenAmount>(value);
}

const char* tx_kind_name(TxKind kind) {
  switch (kind) {
    case TxKind::UserRequest: return "user-request";
    case TxKind::ContractDeposit: return "contract-deposit";
    case TxKind::DeliveryPayment: return "delivery-payment";
    case TxKind::DepositRefund: return "deposit-refund";
    case TxKind::DepositForfeit: return "deposit-forfeit";
    case TxKind::BlockReward: return "block-reward";
    case TxKind::GenesisGrant: return "genesis-grant";
  }
  return "?";
}

const char* append_status_name(AppendStatus s) {
  switch (s) {
    case AppendStatus::Ok: return "ok";
    case AppendStatus::BadLink: return "bad-link";
    case AppendStatus::BadTimestamp: return "bad-timestamp";
    case AppendStatus::BadHead: return "bad-head";
    case AppendStatus::BadSignature: return "bad-signature";
    case AppendStatus::BadTxId: return "bad-tx-id";
    case AppendStatus::BadMint: return "bad-mint";
    case AppendStatus::BadReward: return "bad-reward";
    case AppendStatus::ConflictingTx: return "conflicting-tx";
  }
  return "?";
}

static bool is_mint_kind(TxKind k) {
  return k == TxKind::BlockReward || k == TxKind::GenesisGrant;
}

static bool is_settlement_kind(TxKind k) {
  return k == TxKind::DeliveryPayment || k == TxKind::DepositRefund ||
         k == TxKind::DepositForfeit;
}

// ---------------------------------------------------------------------------
// Canonical encoding

Bytes encode_payload(const TxPayload& p) {
  Encoder enc;
  enc.put_bool(p.content.has_value());
  if (p.content) {
    enc.put_u32(p.content->provider);
    enc.put_u32(p.content->content);
  }
  enc.put_u64(p.value);
  enc.put_u64(p.fee);
  enc.put_u8(static_cast<std::uint8_t>(p.kind));
  enc.put_optional_digest(p.escrow_ref);
  enc.put_u64(p.nonce);
  return enc.take();
}

TxPayload decode_payload(Decoder& dec) {
  TxPayload p;
  if (dec.get_bool()) {
    ContentId c;
    c.provider = dec.get_u32();
    c.content = dec.get_u32();
    p.content = c;
  }
  p.value = dec.get_u64();
  p.fee = dec.get_u64();
  std::uint8_t kind = dec.get_u8();
  if (kind > static_cast<std::uint8_t>(TxKind::GenesisGrant))
    throw DecodeError("unknown transaction kind");
  p.kind = static_cast<TxKind>(kind);
  p.escrow_ref = dec.get_optional_digest();
  p.nonce = dec.get_u64();
  return p;
}

static void encode_tx_body(Encoder& enc, const Transaction& tx) {
  enc.put_digest(tx.sender);
  enc.put_digest(tx.receiver);
  Bytes payload = encode_payload(tx.payload);
  enc.put_bytes(as_span(payload));
  enc.put_bytes(as_span(tx.signature));
}

Bytes encode_transaction(const Transaction& tx) {
  Encoder enc;
  enc.put_digest(tx.id);
  encode_tx_body(enc, tx);
  return enc.take();
}

Transaction decode_transaction(Decoder& dec) {
  Transaction tx;
  tx.id = dec.get_digest();
  tx.sender = dec.get_digest();
  tx.receiver = dec.get_digest();
  Bytes payload = dec.get_bytes();
  Decoder pd(as_span(payload));
  tx.payload = decode_payload(pd);
  pd.expect_done();
  tx.signature = dec.get_bytes(1024);
  return tx;
}

Digest compute_tx_id(const Transaction& tx) {
  Encoder enc;
  encode_tx_body(enc, tx);
  return sha256(as_span(enc.bytes()));
}

Transaction make_transaction(const NodeIdentity& sender, const Digest& receiver,
                             TxPayload payload) {
  if (payload.fee != 0) throw std::invalid_argument("transaction fee must be 0");
  Transaction tx;
  tx.sender = sender.address;
  tx.receiver = receiver;
  tx.payload = std::move(payload);
  tx.signature = sender.sign(as_span(encode_payload(tx.payload)));
  tx.id = compute_tx_id(tx);
  return tx;
}

Transaction make_mint_transaction(TxKind kind, const Digest& receiver, TokenAmount value,
                                  std::uint64_t nonce) {
  if (!is_mint_kind(kind)) throw std::invalid_argument("not a mint kind");
  Transaction tx;
  tx.sender = kZeroDigest;
  tx.receiver = receiver;
  tx.payload.kind = kind;
  tx.payload.value = value;
  tx.payload.nonce = nonce;
  tx.id = compute_tx_id(tx);
  return tx;
}

Bytes encode_transaction_list(const std::vector<Transaction>& txs) {
  Encoder enc;
  enc.put_u32(static_cast<std::uint32_t>(txs.size()));
  for (const auto& tx : txs) {
    Bytes b = encode_transaction(tx);
    enc.put_bytes(as_span(b));
  }
  return enc.take();
}

static std::vector<Transaction> decode_transaction_list(Decoder& dec) {
  std::uint32_t count = dec.get_u32();
  if (count > (1u << 20)) throw DecodeError("transaction count out of range");
  std::vector<Transaction> txs;
  txs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Bytes b = dec.get_bytes();
    Decoder td(as_span(b));
    txs.push_back(decode_transaction(td));
    td.expect_done();
  }
  return txs;
}

Bytes encode_block(const Block& b) {
  Encoder enc;
  enc.put_u64(b.timestamp);
  Bytes txs = encode_transaction_list(b.transactions);
  enc.put_bytes(as_span(txs));
  enc.put_bytes(as_span(b.proof.public_key));
  enc.put_bytes(as_span(b.proof.signature));
  enc.put_digest(b.head);
  enc.put_digest(b.prev_head);
  return enc.take();
}

Block decode_block(Decoder& dec) {
  Block b;
  b.timestamp = dec.get_u64();
  Bytes txs = dec.get_bytes(1u << 26);
  Decoder td(as_span(txs));
  b.transactions = decode_transaction_list(td);
  td.expect_done();
  b.proof.public_key = dec.get_bytes(1024);
  b.proof.signature = dec.get_bytes(1024);
  b.head = dec.get_digest();
  b.prev_head = dec.get_digest();
  return b;
}

Digest compute_block_head(const Block& b) {
  Encoder enc;
  enc.put_u64(b.timestamp);
  Bytes txs = encode_transaction_list(b.transactions);
  enc.put_bytes(as_span(txs));
  enc.put_bytes(as_span(b.proof.public_key));
  enc.put_bytes(as_span(b.proof.signature));
  enc.put_digest(b.prev_head);
  return sha256(as_span(enc.bytes()));
}

// ---------------------------------------------------------------------------
// Key directory

void KeyDirectory::add(ByteSpan public_key) {
  entries_[derive_address(public_key)] = to_bytes(public_key);
}

const Bytes* KeyDirectory::find(const Digest& address) const {
  auto it = entries_.find(address);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Ledger state

TokenAmount LedgerState::balance(const Digest& address) const {
  auto it = balances_.find(address);
  return it == balances_.end() ? 0 : it->second;
}

TokenAmount LedgerState::live_escrow_of(const Digest& holder) const {
  TokenAmount sum = 0;
  for (const auto& [id, e] : escrows_)
    if (!e.consumed && e.holder == holder) sum += e.amount;
  return sum;
}

AppendStatus LedgerState::apply(const Transaction& tx, bool genesis_block, Slot slot,
                                std::string* why) {
  BlockDelta d;
  AppendStatus s = stage(tx, genesis_block, slot, d, why);
  if (s != AppendStatus::Ok) return s;
  commit(d, slot);
  return AppendStatus::Ok;
}

AppendStatus LedgerState::stage(const Transaction& tx, bool genesis_block, Slot slot,
                                BlockDelta& d, std::string* why) const {
  auto fail = [&](AppendStatus s, const std::string& msg) {
    if (why) *why = msg + " (tx " + to_hex(tx.id).substr(0, 12) + ", kind " +
                    tx_kind_name(tx.payload.kind) + ")";
    return s;
  };

  if (seen_ids_.count(tx.id) || d.new_ids.count(tx.id))
    return fail(AppendStatus::ConflictingTx, "duplicate transaction id");
  if (tx.payload.fee != 0)
    return fail(AppendStatus::ConflictingTx, "nonzero fee");

  const bool mint = tx.sender == kZeroDigest;
  if (mint != is_mint_kind(tx.payload.kind))
    return fail(AppendStatus::BadMint, "mint kind requires the zero sender and vice versa");
  if (mint) {
    if (!tx.signature.empty() || tx.payload.escrow_ref)
      return fail(AppendStatus::BadMint, "malformed mint transaction");
    if ((tx.payload.kind == TxKind::GenesisGrant) != genesis_block)
      return fail(AppendStatus::BadMint, "mint kind in the wrong block");
  } else {
    if (genesis_block)
      return fail(AppendStatus::BadMint, "genesis block admits only grants");
  }

  const bool settles = is_settlement_kind(tx.payload.kind);
  if (settles != tx.payload.escrow_ref.has_value())
    return fail(AppendStatus::ConflictingTx,
                settles ? "settlement without escrow reference"
                        : "escrow reference on a non-settlement kind");

  if (settles) {
    const Digest& ref = *tx.payload.escrow_ref;
    const Escrow* e = nullptr;
    auto created_it = d.created.find(ref);
    if (created_it != d.created.end()) {
      e = &created_it->second;
    } else {
      auto it = escrows_.find(ref);
      if (it != escrows_.end()) e = &it->second;
    }
    if (!e) return fail(AppendStatus::ConflictingTx, "unknown escrow id");
    if (e->consumed || d.consumed.count(ref))
      return fail(AppendStatus::ConflictingTx, "escrow already consumed");
    if (e->holder != tx.sender)
      return fail(AppendStatus::ConflictingTx, "settlement not sent by the escrow holder");
    if (e->amount != tx.payload.value)
      return fail(AppendStatus::ConflictingTx, "settlement must move the full escrow amount");
    d.consumed.insert(ref);
  }

  if (!mint) {
    if (d.effective(*this, tx.sender) < static_cast<long long>(tx.payload.value))
      return fail(AppendStatus::ConflictingTx, "sender balance would go negative");
    d.balance[tx.sender] -= static_cast<long long>(tx.payload.value);
  } else {
    d.minted += tx.payload.value;
  }
  d.balance[tx.receiver] += static_cast<long long>(tx.payload.value);

  if (tx.payload.kind == TxKind::ContractDeposit) {
    Escrow e;
    e.holder = tx.receiver;
    e.source = tx.sender;
    e.amount = tx.payload.value;
    e.created_slot = slot;
    d.created[tx.id] = e;
  }

  d.new_ids.insert(tx.id);
  return AppendStatus::Ok;
}

void LedgerState::commit(const BlockDelta& d, Slot slot) {
  for (const auto& [addr, delta] : d.balance) {
    long long next = static_cast<long long>(balance(addr)) + delta;
    balances_[addr] = static_cast<TokenAmount>(next);
    total_balance_ = static_cast<TokenAmount>(static_cast<long long>(total_balance_) + delta);
  }
  for (const auto& id : d.new_ids) seen_ids_.insert(id);
  for (const auto& [id, e] : d.created) {
    escrows_[id] = e;
    total_live_escrow_ += e.amount;
  }
  for (const auto& ref : d.consumed) {
    auto& e = escrows_[ref];
    e.consumed = true;
    e.consumed_slot = slot;
    total_live_escrow_ -= e.amount;
  }
  minted_ += d.minted;
}

// ---------------------------------------------------------------------------
// Block-level validation

namespace {

AppendStatus check_structure(const ChainParams& params, const KeyDirectory& directory,
                             const Block& block, const Block* prev, std::string* why) {
  auto fail = [&](AppendStatus s, const std::string& msg) {
    if (why) *why = msg;
    return s;
  };
  const bool genesis = prev == nullptr;

  if (genesis) {
    if (block.timestamp != 0) return fail(AppendStatus::BadTimestamp, "genesis timestamp not 0");
    if (block.prev_head != kZeroDigest)
      return fail(AppendStatus::BadLink, "genesis prev-head not zero");
    if (!block.proof.public_key.empty() || !block.proof.signature.empty())
      return fail(AppendStatus::BadSignature, "genesis block carries no generator proof");
  } else {
    if (block.prev_head != prev->head)
      return fail(AppendStatus::BadLink, "prev-head does not match the chain tip");
    if (block.timestamp != prev->timestamp + 1)
      return fail(AppendStatus::BadTimestamp, "timestamp is not tip + 1");
  }

  if (compute_block_head(block) != block.head)
    return fail(AppendStatus::BadHead, "stored head differs from recomputation");

  if (!genesis) {
    if (block.proof.public_key.empty())
      return fail(AppendStatus::BadSignature, "missing generator proof");
    Bytes tx_bytes = encode_transaction_list(block.transactions);
    if (!verify_signature(as_span(block.proof.public_key), as_span(tx_bytes),
                          as_span(block.proof.signature)))
      return fail(AppendStatus::BadSignature, "generator signature invalid");
  }

  std::size_t rewards = 0;
  for (const auto& tx : block.transactions) {
    if (compute_tx_id(tx) != tx.id)
      return fail(AppendStatus::BadTxId,
                  "transaction id differs from recomputation (tx " +
                      to_hex(tx.id).substr(0, 12) + ")");
    if (tx.sender != kZeroDigest) {
      const Bytes* pk = directory.find(tx.sender);
      if (!pk)
        return fail(AppendStatus::BadSignature,
                    "sender key unknown (addr " + to_hex(tx.sender).substr(0, 12) + ")");
      Bytes payload = encode_payload(tx.payload);
      if (!verify_signature(as_span(*pk), as_span(payload), as_span(tx.signature)))
        return fail(AppendStatus::BadSignature,
                    "sender signature invalid (tx " + to_hex(tx.id).substr(0, 12) + ")");
    }
    if (tx.payload.kind == TxKind::BlockReward) {
      ++rewards;
      if (tx.payload.value != params.block_reward)
        return fail(AppendStatus::BadReward, "block reward value mismatch");
    }
  }
  if (!genesis && rewards != 1)
    return fail(AppendStatus::BadReward, "each block mints exactly one reward");
  if (genesis && rewards != 0) return fail(AppendStatus::BadReward, "reward in genesis block");

  return AppendStatus::Ok;
}

}  // namespace

AppendStatus validate_and_apply_block(const ChainParams& params, const KeyDirectory& directory,
                                      const Block& block, const Block* prev, LedgerState& state,
                                      std::string* why) {
  AppendStatus s = check_structure(params, directory, block, prev, why);
  if (s != AppendStatus::Ok) return s;

  const bool genesis = prev == nullptr;
  LedgerState::BlockDelta delta;
  for (const auto& tx : block.transactions) {
    s = state.stage(tx, genesis, block.timestamp, delta, why);
    if (s != AppendStatus::Ok) return s;
  }
  state.commit(delta, block.timestamp);
  return AppendStatus::Ok;
}

ValidationReport validate_chain(const ChainData& data) {
  ValidationReport report;
  if (data.blocks.empty()) {
    report.message = "empty chain (no genesis block)";
    report.error = AppendStatus::BadLink;
    report.first_bad_block = 0;
    return report;
  }
  LedgerState state;
  std::string why;
  for (std::size_t i = 0; i < data.blocks.size(); ++i) {
    const Block* prev = i == 0 ? nullptr : &data.blocks[i - 1];
    AppendStatus s =
        validate_and_apply_block(data.params, data.directory, data.blocks[i], prev, state, &why);
    if (s != AppendStatus::Ok) {
      report.valid = false;
      report.first_bad_block = i;
      report.error = s;
      std::ostringstream os;
      os << "block " << i << ": " << why;
      report.message = os.str();
      return report;
    }
  }
  report.valid = true;
  report.error = AppendStatus::Ok;
  report.message = "ok";
  return report;
}

std::vector<Digest> recompute_heads(const std::vector<Block>& blocks) {
  std::vector<Digest> heads;
  heads.reserve(blocks.size());
  Digest prev = kZeroDigest;
  for (const auto& b : blocks) {
    Block shadow = b;
    shadow.prev_head = prev;
    Digest h = compute_block_head(shadow);
    heads.push_back(h);
    prev = h;
  }
  return heads;
}

// ---------------------------------------------------------------------------
// Chain

Chain Chain::create(ChainParams params,
                    const std::vector<std::pair<Digest, TokenAmount>>& genesis_grants) {
  Block genesis;
  genesis.timestamp = 0;
  genesis.prev_head = kZeroDigest;
  std::uint64_t nonce = 0;
  for (const auto& [addr, amount] : genesis_grants)
    genesis.transactions.push_back(
        make_mint_transaction(TxKind::GenesisGrant, addr, amount, nonce++));
  genesis.head = compute_block_head(genesis);

  Chain chain;
  chain.data_.params = params;
  std::string why;
  AppendStatus s = validate_and_apply_block(chain.data_.params, chain.data_.directory, genesis,
                                            nullptr, chain.state_, &why);
  if (s != AppendStatus::Ok)
    throw std::logic_error(std::string("genesis construction failed: ") + why);
  chain.data_.blocks.push_back(std::move(genesis));
  return chain;
}

std::optional<Chain> Chain::from_data(ChainData data, ValidationReport* report) {
  ValidationReport r = validate_chain(data);
  if (report) *report = r;
  if (!r.valid) return std::nullopt;
  Chain chain;
  chain.data_ = std::move(data);
  for (std::size_t i = 0; i < chain.data_.blocks.size(); ++i) {
    const Block* prev = i == 0 ? nullptr : &chain.data_.blocks[i - 1];
    validate_and_apply_block(chain.data_.params, chain.data_.directory, chain.data_.blocks[i],
                             prev, chain.state_, nullptr);
  }
  return chain;
}

AppendStatus Chain::append(const Block& block, std::string* why) {
  AppendStatus s = validate_and_apply_block(data_.params, data_.directory, block,
                                            &data_.blocks.back(), state_, why);
  if (s != AppendStatus::Ok) return s;
  data_.blocks.push_back(block);
  return AppendStatus::Ok;
}

// ---------------------------------------------------------------------------
// Queries

std::map<ContentId, std::uint64_t> query_request_counts(const ChainData& data, Slot from_slot,
                                                        Slot to_slot) {
  std::map<ContentId, std::uint64_t> counts;
  for (const auto& block : data.blocks) {
    if (block.timestamp < from_slot || block.timestamp > to_slot) continue;
    for (const auto& tx : block.transactions)
      if (tx.payload.kind == TxKind::UserRequest && tx.payload.content)
        ++counts[*tx.payload.content];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Chain file

static constexpr char kChainMagic[4] = {'B', 'C', 'H', '1'};

void save_chain_file(const std::string& path, const ChainData& data) {
  Encoder enc;
  for (char c : kChainMagic) enc.put_u8(static_cast<std::uint8_t>(c));
  enc.put_u64(data.params.block_reward);
  enc.put_u64(data.params.slots_per_epoch);
  enc.put_u32(static_cast<std::uint32_t>(data.directory.entries().size()));
  for (const auto& [addr, pk] : data.directory.entries()) enc.put_bytes(as_span(pk));
  enc.put_u32(static_cast<std::uint32_t>(data.blocks.size()));
  for (const auto& b : data.blocks) {
    Bytes bytes = encode_block(b);
    enc.put_bytes(as_span(bytes));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(enc.bytes().data()),
            static_cast<std::streamsize>(enc.bytes().size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

ChainData load_chain_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Decoder dec(as_span(raw));
  for (char c : kChainMagic)
    if (dec.get_u8() != static_cast<std::uint8_t>(c))
      throw DecodeError("not a chain file (bad magic)");

  ChainData data;
  data.params.block_reward = dec.get_u64();
  data.params.slots_per_epoch = dec.get_u64();
  std::uint32_t keys = dec.get_u32();
  if (keys > (1u << 20)) throw DecodeError("key directory size out of range");
  for (std::uint32_t i = 0; i < keys; ++i) {
    Bytes pk = dec.get_bytes(1024);
    if (pk.empty()) throw DecodeError("empty key in directory");
    data.directory.add(as_span(pk));
  }
  std::uint32_t blocks = dec.get_u32();
  if (blocks > (1u << 24)) throw DecodeError("block count out of range");
  data.blocks.reserve(blocks);
  for (std::uint32_t i = 0; i < blocks; ++i) {
    Bytes b = dec.get_bytes(1u << 26);
    Decoder bd(as_span(b));
    data.blocks.push_back(decode_block(bd));
    bd.expect_done();
  }
  dec.expect_done();
  return data;
}

}  // namespace blockcache
