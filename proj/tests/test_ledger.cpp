#include <doctest.h>

#include <map>

#include "blockcache/ledger.hpp"
#include "blockcache/rng.hpp"

using namespace blockcache;

namespace {

NodeIdentity ident(const char* tag) {
  return NodeIdentity::from_seed(as_span(std::string(tag)));
}

// Signs, stamps and links a block extending `chain`; a reward mint for
// `leader` is appended like the production path does.
Block make_block(const Chain& chain, std::vector<Transaction> txs, const NodeIdentity& leader) {
  txs.push_back(make_mint_transaction(TxKind::BlockReward, leader.address,
                                      chain.params().block_reward, chain.tip_slot() + 1));
  Block b;
  b.timestamp = chain.tip_slot() + 1;
  b.transactions = std::move(txs);
  b.prev_head = chain.tip().head;
  b.proof.public_key = leader.public_key;
  b.proof.signature = leader.sign(as_span(encode_transaction_list(b.transactions)));
  b.head = compute_block_head(b);
  return b;
}

struct Market {
  NodeIdentity cp = ident("ledger.cp");
  NodeIdentity ch = ident("ledger.ch");
  NodeIdentity user = ident("ledger.user");
  NodeIdentity contract = ident("ledger.contract");
  Chain chain = Chain::create(ChainParams{10, 12}, {{cp.address, 1000}, {ch.address, 50}});

  Market() {
    for (const NodeIdentity* id : {&cp, &ch, &user, &contract})
      chain.directory().add(as_span(id->public_key));
  }

  TxPayload pay(TokenAmount value, TxKind kind) {
    TxPayload p;
    p.value = value;
    p.kind = kind;
    p.nonce = nonce++;
    return p;
  }
  std::uint64_t nonce = 0;
};

}  // namespace

TEST_CASE("token_amount rejects negative payments") {
  CHECK(token_amount(0) == 0);
  CHECK(token_amount(41) == 41);
  CHECK_THROWS_AS(token_amount(-1), std::invalid_argument);
}

TEST_CASE("make_transaction produces a valid, tamper-evident transaction") {
  Market m;
  TxPayload p = m.pay(0, TxKind::UserRequest);  // requests carry no payment
  p.content = ContentId{1, 2};
  Transaction tx = make_transaction(m.user, m.cp.address, p);

  CHECK(tx.id == compute_tx_id(tx));
  CHECK(verify_signature(as_span(m.user.public_key), as_span(encode_payload(tx.payload)),
                         as_span(tx.signature)));
  CHECK(tx.payload.fee == 0);

  Transaction tampered = tx;
  tampered.payload.value = 1;
  CHECK_FALSE(verify_signature(as_span(m.user.public_key),
                               as_span(encode_payload(tampered.payload)),
                               as_span(tampered.signature)));

  TxPayload with_fee = m.pay(5, TxKind::DeliveryPayment);
  with_fee.fee = 1;
  CHECK_THROWS_AS(make_transaction(m.cp, m.ch.address, with_fee), std::invalid_argument);
}

TEST_CASE("append_block accepts well-linked blocks and reports link errors") {
  Market m;
  Block b1 = make_block(m.chain, {}, m.cp);
  CHECK(m.chain.append(b1) == AppendStatus::Ok);

  Block b2 = make_block(m.chain, {}, m.cp);
  Block bad_link = b2;
  bad_link.prev_head = m.chain.blocks().front().head;  // grandparent
  bad_link.head = compute_block_head(bad_link);
  CHECK(m.chain.append(bad_link) == AppendStatus::BadLink);

  Block bad_time = b2;
  bad_time.timestamp += 5;
  bad_time.head = compute_block_head(bad_time);
  CHECK(m.chain.append(bad_time) == AppendStatus::BadTimestamp);

  CHECK(m.chain.append(b2) == AppendStatus::Ok);
  CHECK(m.chain.blocks().size() == 3);
}

TEST_CASE("overdraft is a conflicting transaction") {
  Market m;
  // balance replay oracle: CH holds 50 from genesis, so 60 must be rejected
  Transaction spend = make_transaction(m.ch, m.contract.address, m.pay(60, TxKind::ContractDeposit));
  std::string why;
  CHECK(m.chain.append(make_block(m.chain, {spend}, m.cp), &why) == AppendStatus::ConflictingTx);

  Transaction ok_spend =
      make_transaction(m.ch, m.contract.address, m.pay(50, TxKind::ContractDeposit));
  CHECK(m.chain.append(make_block(m.chain, {ok_spend}, m.cp)) == AppendStatus::Ok);
  CHECK(m.chain.balance(m.ch.address) == 0);
  CHECK(m.chain.balance(m.contract.address) == 50);
}

TEST_CASE("escrow settlement rules: full amount, right holder, exactly once") {
  Market m;
  Transaction deposit =
      make_transaction(m.cp, m.contract.address, m.pay(100, TxKind::ContractDeposit));
  REQUIRE(m.chain.append(make_block(m.chain, {deposit}, m.cp)) == AppendStatus::Ok);

  SUBCASE("partial settlement rejected") {
    TxPayload p = m.pay(40, TxKind::DeliveryPayment);
    p.escrow_ref = deposit.id;
    Transaction partial = make_transaction(m.contract, m.ch.address, p);
    CHECK(m.chain.append(make_block(m.chain, {partial}, m.cp)) == AppendStatus::ConflictingTx);
  }

  SUBCASE("settlement by a non-holder rejected") {
    TxPayload p = m.pay(100, TxKind::DeliveryPayment);
    p.escrow_ref = deposit.id;
    Transaction stolen = make_transaction(m.cp, m.ch.address, p);
    CHECK(m.chain.append(make_block(m.chain, {stolen}, m.cp)) == AppendStatus::ConflictingTx);
  }

  SUBCASE("double settlement rejected, single one pays out") {
    TxPayload p = m.pay(100, TxKind::DeliveryPayment);
    p.escrow_ref = deposit.id;
    Transaction settle = make_transaction(m.contract, m.ch.address, p);
    REQUIRE(m.chain.append(make_block(m.chain, {settle}, m.cp)) == AppendStatus::Ok);
    CHECK(m.chain.balance(m.ch.address) == 150);  // delivery pays exactly the escrowed 100

    TxPayload p2 = m.pay(100, TxKind::DepositRefund);
    p2.escrow_ref = deposit.id;
    Transaction again = make_transaction(m.contract, m.cp.address, p2);
    CHECK(m.chain.append(make_block(m.chain, {again}, m.cp)) == AppendStatus::ConflictingTx);
  }

  SUBCASE("settlement without a reference rejected") {
    Transaction loose = make_transaction(m.contract, m.ch.address, m.pay(100, TxKind::DepositRefund));
    CHECK(m.chain.append(make_block(m.chain, {loose}, m.cp)) == AppendStatus::ConflictingTx);
  }
}

TEST_CASE("balances: fresh address zero, genesis grants, delivery income") {
  Market m;
  NodeIdentity fresh = ident("ledger.fresh");
  CHECK(m.chain.balance(fresh.address) == 0);
  CHECK(m.chain.balance(m.cp.address) == 1000);  // configured genesis grant

  TokenAmount before = m.chain.balance(m.ch.address);
  Transaction deposit =
      make_transaction(m.cp, m.contract.address, m.pay(7, TxKind::ContractDeposit));
  TxPayload p = m.pay(7, TxKind::DeliveryPayment);
  p.escrow_ref = deposit.id;
  REQUIRE(m.chain.append(make_block(m.chain, {deposit}, m.cp)) == AppendStatus::Ok);
  Transaction settle = make_transaction(m.contract, m.ch.address, p);
  REQUIRE(m.chain.append(make_block(m.chain, {settle}, m.cp)) == AppendStatus::Ok);
  CHECK(m.chain.balance(m.ch.address) == before + 7);
}

TEST_CASE("conservation: balances sum to grants plus per-block rewards") {
  Market m;
  for (int i = 0; i < 6; ++i)
    REQUIRE(m.chain.append(make_block(m.chain, {}, m.cp)) == AppendStatus::Ok);
  const TokenAmount grants = 1000 + 50;
  CHECK(m.chain.state().total_balance() == grants + 6 * m.chain.params().block_reward);
  CHECK(m.chain.state().minted_supply() == m.chain.state().total_balance());
}

TEST_CASE("validate_chain accepts honest chains, including genesis-only") {
  Market m;
  CHECK(validate_chain(m.chain.data()).valid);  // genesis only

  for (int i = 0; i < 10; ++i) {
    std::vector<Transaction> txs;
    if (i % 2 == 0) {
      TxPayload p = m.pay(0, TxKind::UserRequest);
      p.content = ContentId{1, std::uint32_t(i % 3 + 1)};
      txs.push_back(make_transaction(m.user, m.cp.address, p));
    }
    REQUIRE(m.chain.append(make_block(m.chain, txs, m.cp)) == AppendStatus::Ok);
  }
  ValidationReport rep = validate_chain(m.chain.data());
  CHECK(rep.valid);
  CHECK_FALSE(rep.first_bad_block.has_value());

  // replay determinism
  ValidationReport rep2 = validate_chain(m.chain.data());
  CHECK(rep.valid == rep2.valid);
  CHECK(rep.message == rep2.message);
}

TEST_CASE("single bit flips are caught at or before the mutated block") {
  Market m;
  for (int i = 0; i < 10; ++i) {
    TxPayload p = m.pay(0, TxKind::UserRequest);
    p.content = ContentId{1, 1};
    std::vector<Transaction> txs{make_transaction(m.user, m.cp.address, p)};
    REQUIRE(m.chain.append(make_block(m.chain, txs, m.cp)) == AppendStatus::Ok);
  }

  Rng rng(99);
  int decoded_mutations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t block = 1 + rng.below(m.chain.blocks().size() - 1);
    ChainData data = m.chain.data();
    auto& txs = data.blocks[block].transactions;
    const std::size_t txi = rng.below(txs.size());
    Bytes enc = encode_transaction(txs[txi]);
    const std::size_t bit = rng.below(enc.size() * 8);
    enc[bit / 8] ^= std::uint8_t(1u << (bit % 8));

    try {
      Decoder dec(as_span(enc));
      Transaction mutated = decode_transaction(dec);
      dec.expect_done();
      txs[txi] = mutated;
    } catch (const DecodeError&) {
      continue;  // undecodable mutation: the chain file itself is corrupt
    }
    ++decoded_mutations;
    ValidationReport rep = validate_chain(data);
    CHECK_FALSE(rep.valid);
    REQUIRE(rep.first_bad_block.has_value());
    CHECK(*rep.first_bad_block <= block);
  }
  CHECK(decoded_mutations > 100);
}

TEST_CASE("a flip in block 4 cascades through all recomputed heads") {
  Market m;
  for (int i = 0; i < 10; ++i) {
    TxPayload p = m.pay(0, TxKind::UserRequest);
    p.content = ContentId{1, 1};
    std::vector<Transaction> txs{make_transaction(m.user, m.cp.address, p)};
    REQUIRE(m.chain.append(make_block(m.chain, txs, m.cp)) == AppendStatus::Ok);
  }
  ChainData data = m.chain.data();
  data.blocks[4].transactions[0].payload.nonce ^= 1;  // one-bit change in stored payload

  ValidationReport rep = validate_chain(data);
  CHECK_FALSE(rep.valid);
  REQUIRE(rep.first_bad_block.has_value());
  CHECK(*rep.first_bad_block == 4);

  std::vector<Digest> heads = recompute_heads(data.blocks);
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    if (b < 4)
      CHECK(heads[b] == data.blocks[b].head);
    else
      CHECK(heads[b] != data.blocks[b].head);
  }
}

TEST_CASE("request counts per (provider, content) over a slot window") {
  Market m;
  // window with nothing
  REQUIRE(m.chain.append(make_block(m.chain, {}, m.cp)) == AppendStatus::Ok);
  CHECK(query_request_counts(m.chain.data(), 1, 1).empty());

  // exactly 7 requests for (1,2)
  std::vector<Transaction> txs;
  for (int i = 0; i < 7; ++i) {
    TxPayload p = m.pay(0, TxKind::UserRequest);
    p.content = ContentId{1, 2};
    txs.push_back(make_transaction(m.user, m.cp.address, p));
  }
  REQUIRE(m.chain.append(make_block(m.chain, txs, m.cp)) == AppendStatus::Ok);
  auto counts = query_request_counts(m.chain.data(), 2, 2);
  CHECK(counts[ContentId{1, 2}] == 7);
  CHECK(counts.size() == 1);
}

TEST_CASE("Zipf-sampled request frequencies match the law") {
  // oracle: direct summation of the popularity normalizer for beta=1, K=6
  double norm = 0.0;
  for (int k = 1; k <= 6; ++k) norm += 1.0 / k;
  CHECK(norm == doctest::Approx(2.45).epsilon(1e-12));
  const double p1 = 1.0 / norm;  // 0.408163...

  Market m;
  std::vector<double> p(6);
  for (int k = 1; k <= 6; ++k) p[k - 1] = (1.0 / k) / norm;

  Rng rng(7);
  const int total = 10000;
  int emitted = 0;
  while (emitted < total) {
    std::vector<Transaction> txs;
    for (int i = 0; i < 500 && emitted < total; ++i, ++emitted) {
      double u = rng.real(), cum = 0.0;
      int k = 6;
      for (int j = 0; j < 6; ++j) {
        cum += p[j];
        if (u < cum) {
          k = j + 1;
          break;
        }
      }
      TxPayload pl = m.pay(0, TxKind::UserRequest);
      pl.content = ContentId{1, std::uint32_t(k)};
      txs.push_back(make_transaction(m.user, m.cp.address, pl));
    }
    REQUIRE(m.chain.append(make_block(m.chain, txs, m.cp)) == AppendStatus::Ok);
  }

  auto counts = query_request_counts(m.chain.data(), 1, m.chain.tip_slot());
  std::uint64_t sum = 0, first = 0;
  for (auto& [cid, c] : counts) {
    sum += c;
    if (cid.content == 1) first = c;
  }
  CHECK(sum == total);
  CHECK(double(first) / total == doctest::Approx(p1).epsilon(0.05));
  CHECK(std::abs(double(first) / total - p1) < 0.02);
}

TEST_CASE("LedgerState::apply enforces the same rules one transaction at a time") {
  Market m;
  LedgerState st;
  std::string why;
  Transaction grant = make_mint_transaction(TxKind::GenesisGrant, m.cp.address, 100, 0);
  CHECK(st.apply(grant, true, 0, &why) == AppendStatus::Ok);
  CHECK(st.apply(grant, true, 0, &why) == AppendStatus::ConflictingTx);  // duplicate id
  CHECK(st.balance(m.cp.address) == 100);

  Transaction deposit =
      make_transaction(m.cp, m.contract.address, m.pay(100, TxKind::ContractDeposit));
  CHECK(st.apply(deposit, false, 1, &why) == AppendStatus::Ok);
  CHECK(st.total_live_escrow() == 100);
  CHECK(st.live_escrow_of(m.contract.address) == 100);

  TxPayload p = m.pay(100, TxKind::DepositRefund);
  p.escrow_ref = deposit.id;
  Transaction refund = make_transaction(m.contract, m.cp.address, p);
  CHECK(st.apply(refund, false, 2, &why) == AppendStatus::Ok);
  CHECK(st.total_live_escrow() == 0);
  CHECK(st.balance(m.cp.address) == 100);
  CHECK(st.minted_supply() == 100);
}

TEST_CASE("Chain::from_data adopts valid data and rejects tampered data") {
  Market m;
  for (int i = 0; i < 3; ++i)
    REQUIRE(m.chain.append(make_block(m.chain, {}, m.cp)) == AppendStatus::Ok);

  ValidationReport rep;
  std::optional<Chain> adopted = Chain::from_data(m.chain.data(), &rep);
  REQUIRE(adopted.has_value());
  CHECK(rep.valid);
  CHECK(adopted->tip().head == m.chain.tip().head);
  CHECK(adopted->balance(m.cp.address) == m.chain.balance(m.cp.address));

  ChainData bad = m.chain.data();
  bad.blocks[2].transactions[0].payload.value += 1;
  CHECK_FALSE(Chain::from_data(bad, &rep).has_value());
  CHECK_FALSE(rep.valid);
  CHECK(rep.first_bad_block == 2);
}

TEST_CASE("chain file round-trips and stays valid") {
  Market m;
  for (int i = 0; i < 4; ++i)
    REQUIRE(m.chain.append(make_block(m.chain, {}, m.cp)) == AppendStatus::Ok);

  const std::string path = "test_chain_roundtrip.bin";
  save_chain_file(path, m.chain.data());
  ChainData loaded = load_chain_file(path);
  CHECK(loaded.params == m.chain.params());
  CHECK(loaded.blocks.size() == m.chain.blocks().size());
  CHECK(loaded.blocks.back().head == m.chain.tip().head);
  CHECK(validate_chain(loaded).valid);
  std::remove(path.c_str());
}

TEST_CASE("mint placement rules") {
  Market m;
  // a grant outside genesis
  Transaction grant = make_mint_transaction(TxKind::GenesisGrant, m.ch.address, 5, 77);
  Block b = make_block(m.chain, {grant}, m.cp);
  CHECK(m.chain.append(b) == AppendStatus::BadMint);

  // two rewards in one block
  Transaction extra = make_mint_transaction(TxKind::BlockReward, m.cp.address,
                                            m.chain.params().block_reward, 78);
  CHECK(m.chain.append(make_block(m.chain, {extra}, m.cp)) == AppendStatus::BadReward);

  // wrong reward amount
  std::vector<Transaction> none;
  Block wrong = make_block(m.chain, none, m.cp);
  wrong.transactions.back().payload.value += 1;
  wrong.transactions.back().id = compute_tx_id(wrong.transactions.back());
  wrong.proof.signature = m.cp.sign(as_span(encode_transaction_list(wrong.transactions)));
  wrong.head = compute_block_head(wrong);
  CHECK(m.chain.append(wrong) == AppendStatus::BadReward);
}
