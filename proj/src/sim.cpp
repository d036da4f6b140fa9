#include "blockcache/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace blockcache {

// ---------------------------------------------------------------------------
// ChainBank

ChainBank::ChainBank(Chain& chain, const IdentityBook& identities)
    : chain_(chain), identities_(identities) {}

void ChainBank::begin_slot(Slot slot) {
  if (!batch_.empty()) throw std::logic_error("previous batch was never taken");
  delta_ = LedgerState::BlockDelta{};
  slot_ = slot;
}

std::vector<Transaction> ChainBank::take_batch() {
  delta_ = LedgerState::BlockDelta{};
  return std::exchange(batch_, {});
}

TokenAmount ChainBank::balance(const Digest& address) const {
  long long v = delta_.effective(chain_.state(), address);
  return v < 0 ? 0 : TokenAmount(v);
}

bool ChainBank::transfer(const Digest& from, const Digest& to, TokenAmount amount, TxKind kind,
                         std::optional<ContentId> content, std::optional<Digest> escrow_ref,
                         Digest* escrow_id) {
  const NodeIdentity* sender = identities_.find(from);
  if (!sender) return false;

  TxPayload payload;
  payload.content = content;
  payload.value = amount;
  payload.kind = kind;
  payload.escrow_ref = escrow_ref;
  payload.nonce = nonce_++;
  Transaction tx = make_transaction(*sender, to, payload);

  std::string why;
  if (chain_.state().stage(tx, false, slot_, delta_, &why) != AppendStatus::Ok) return false;
  if (kind == TxKind::ContractDeposit && escrow_id) *escrow_id = tx.id;
  batch_.push_back(std::move(tx));
  return true;
}

// ---------------------------------------------------------------------------
// Simulation

static std::vector<std::pair<Digest, TokenAmount>> genesis_grants(
    const HarnessConfig& cfg, const std::vector<NodeIdentity>& cps,
    const std::vector<NodeIdentity>& chs) {
  std::vector<std::pair<Digest, TokenAmount>> grants;
  for (const auto& cp : cps) grants.emplace_back(cp.address, cfg.genesis_grant_cp);
  for (const auto& ch : chs) grants.emplace_back(ch.address, cfg.genesis_grant_ch);
  return grants;
}

static NodeIdentity participant(std::uint64_t seed, const char* role, int index) {
  Encoder e;
  e.put_u64(seed);
  e.put_bytes(as_span(std::string(role)));
  e.put_u32(std::uint32_t(index));
  return NodeIdentity::from_seed(as_span(e.bytes()));
}

Simulation::Simulation(HarnessConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      seed_(seed),
      cps_(),
      chs_(),
      users_(),
      book_(),
      roster_(),
      chain_([&] {
        cfg_.validate();
        cfg_.block_reward();  // fail early on fractional rewards
        for (int n = 1; n <= cfg_.market.providers; ++n)
          for (int k = 1; k <= cfg_.market.contents; ++k) cfg_.price_tokens(n, k);
        for (int n = 0; n < cfg_.market.providers; ++n)
          cps_.push_back(participant(seed, "cp", n));
        for (int m = 0; m < cfg_.market.helpers; ++m)
          chs_.push_back(participant(seed, "ch", m));
        for (int u = 0; u < cfg_.market.users; ++u)
          users_.push_back(participant(seed, "user", u));
        ChainParams params{cfg_.block_reward(), cfg_.slots_per_epoch};
        return Chain::create(params, genesis_grants(cfg_, cps_, chs_));
      }()),
      bank_(chain_, book_),
      registry_(cfg_.content_chunks, cfg_.chunk_size, cfg_.delivery_deadline_slots),
      demand_rng_(derive_seed(seed, 0xD0)),
      decide_rng_(derive_seed(seed, 0xDE)),
      true_popularity_(zipf_popularity(cfg_.market.contents, cfg_.market.zipf_beta)) {
  for (const auto& id : cps_) {
    book_.add(id);
    chain_.directory().add(as_span(id.public_key));
    roster_.provider_addresses.push_back(id.address);
  }
  for (const auto& id : chs_) {
    book_.add(id);
    chain_.directory().add(as_span(id.public_key));
    roster_.helper_addresses.push_back(id.address);
  }
  for (const auto& id : users_) {
    book_.add(id);
    chain_.directory().add(as_span(id.public_key));
  }
  node_identities_ = chs_;
  node_identities_.insert(node_identities_.end(), cps_.begin(), cps_.end());

  genesis_total_ = TokenAmount(cfg_.market.providers) * cfg_.genesis_grant_cp +
                   TokenAmount(cfg_.market.helpers) * cfg_.genesis_grant_ch;
  actions_.actions.assign(cfg_.market.helpers, GameAction{1, 1});
  offloaded_by_epoch_.assign(std::size_t(cfg_.epochs) + 1, 0);
  rollbacks_by_epoch_.assign(std::size_t(cfg_.epochs) + 1, 0);
  forfeits_by_epoch_.assign(std::size_t(cfg_.epochs) + 1, 0);
}

std::vector<double> Simulation::estimated_popularity() const {
  std::vector<double> est(cfg_.market.contents, 1.0 / cfg_.market.contents);
  auto counts = query_request_counts(chain_.data(), 1, chain_.tip_slot());
  std::uint64_t total = 0;
  std::vector<std::uint64_t> per_content(cfg_.market.contents, 0);
  for (const auto& [cid, c] : counts) {
    if (cid.content >= 1 && cid.content <= std::uint32_t(cfg_.market.contents)) {
      per_content[cid.content - 1] += c;
      total += c;
    }
  }
  if (total == 0) return est;
  for (int k = 0; k < cfg_.market.contents; ++k)
    est[k] = double(per_content[k]) / double(total);
  return est;
}

double Simulation::popularity_tv_distance() const {
  std::vector<double> est = estimated_popularity();
  double tv = 0.0;
  for (int k = 0; k < cfg_.market.contents; ++k)
    tv += std::abs(est[k] - true_popularity_[k]);
  return tv / 2.0;
}

void Simulation::decide_actions(std::uint64_t epoch) {
  const int nk = cfg_.market.providers * cfg_.market.contents;
  if (epoch == 0) {
    for (auto& a : actions_.actions) {
      std::uint64_t idx = decide_rng_.below(std::uint64_t(nk));
      a = GameAction{int(idx) / cfg_.market.contents + 1, int(idx) % cfg_.market.contents + 1};
    }
    return;
  }
  if (cfg_.freeze_actions) return;

  // Best response against the popularity estimated from the chain, with
  // add-one smoothing so every reward potential stays positive.
  auto counts = query_request_counts(chain_.data(), 1, chain_.tip_slot());
  std::vector<std::uint64_t> per_content(cfg_.market.contents, 0);
  std::uint64_t total = 0;
  for (const auto& [cid, c] : counts)
    if (cid.content >= 1 && cid.content <= std::uint32_t(cfg_.market.contents)) {
      per_content[cid.content - 1] += c;
      total += c;
    }
  std::vector<std::vector<double>> estimated_r(cfg_.market.providers,
                                               std::vector<double>(cfg_.market.contents));
  for (int n = 0; n < cfg_.market.providers; ++n)
    for (int k = 0; k < cfg_.market.contents; ++k) {
      double p_hat = double(per_content[k] + 1) / double(total + cfg_.market.contents);
      estimated_r[n][k] = cfg_.market.prices[n][k] * p_hat;
    }
  RewardTable estimated = RewardTable::from_values(std::move(estimated_r));
  SolveResult res = sequential_best_response_from(actions_, cfg_.market, estimated,
                                                  derive_seed(seed_, epoch), cfg_.sweep_order,
                                                  cfg_.max_sweeps);
  actions_ = std::move(res.profile);
}

void Simulation::run_prefetch_stage(std::uint64_t epoch, Slot slot) {
  // Offers and registrations first (a CP may register several CHs), then the
  // PoR round settles the deposits and the CHs enrol for delivery.
  for (int m = 0; m < cfg_.market.helpers; ++m) {
    GameAction a = actions_.actions[m];
    ContentId cid{std::uint32_t(a.provider), std::uint32_t(a.content)};
    const TokenAmount price = cfg_.price_tokens(a.provider, a.content);
    const Digest& ch = chs_[m].address;
    const Digest& cp = cps_[a.provider - 1].address;

    PrefetchContract* pc = registry_.prefetch(cid);
    if (!pc) throw std::runtime_error("missing contract for chosen action");
    ContractStatus s = pc->offer(ch, price, bank_);
    if (s != ContractStatus::Ok)
      throw std::runtime_error(std::string("prefetch offer failed: ") +
                               contract_status_name(s));
    MerkleContent copy = registry_.original(cid);
    s = registry_.register_and_transfer(cid, cp, ch, &copy);
    if (s != ContractStatus::Ok)
      throw std::runtime_error(std::string("register failed: ") + contract_status_name(s));
    ch_contents_.insert_or_assign(m, std::move(copy));
  }

  for (int m = 0; m < cfg_.market.helpers; ++m) {
    GameAction a = actions_.actions[m];
    ContentId cid{std::uint32_t(a.provider), std::uint32_t(a.content)};
    const TokenAmount price = cfg_.price_tokens(a.provider, a.content);
    const Digest& ch = chs_[m].address;

    PrefetchContract* pc = registry_.prefetch(cid);
    DeliveryContract* dc = registry_.delivery(cid);
    Encoder seed_enc;
    seed_enc.put_digest(pc->address());
    seed_enc.put_u64(slot);
    seed_enc.put_u32(std::uint32_t(m));
    PoRChallenge challenge = por_challenge(sha256(as_span(seed_enc.bytes())),
                                           cfg_.content_chunks, cfg_.por_challenges);
    PoRResponse response = por_respond(ch_contents_.at(m), challenge);
    bool ok = por_verify(pc->content_root(), challenge, response);
    ContractStatus s = pc->settle(ch, ok, bank_);
    if (s != ContractStatus::Ok)
      throw std::runtime_error(std::string("prefetch settle failed: ") +
                               contract_status_name(s));
    if (!ok) forfeits_by_epoch_[epoch]++;

    s = dc->offer(ch, price, bank_);
    if (s != ContractStatus::Ok)
      throw std::runtime_error(std::string("delivery offer failed: ") +
                               contract_status_name(s));
  }
}

void Simulation::collect_teardown_counts() {
  for (DeliveryContract* dc : registry_.delivery_contracts())
    for (const auto& t : dc->tasks())
      if (t.state == DeliveryContract::TaskState::AwaitingUserPoR)
        rollbacks_by_epoch_[epoch_of_slot(t.assigned_slot, cfg_.slots_per_epoch)]++;
  for (PrefetchContract* pc : registry_.prefetch_contracts())
    for (const auto& r : pc->responders())
      if (r.registered && !r.settled) {
        // attributed to the epoch being closed; prefetch runs at epoch start
        forfeits_by_epoch_[epoch_of_slot(chain_.tip_slot(), cfg_.slots_per_epoch)]++;
      }
}

void Simulation::epoch_boundary(std::uint64_t epoch, Slot slot) {
  if (epoch > 0) {
    settle_due(slot);  // in-deadline user proofs carried over the boundary
    collect_teardown_counts();
    registry_.destroy_all(bank_);
    pending_.clear();
  }

  for (int n = 1; n <= cfg_.market.providers; ++n)
    for (int k = 1; k <= cfg_.market.contents; ++k) {
      ContentId cid{std::uint32_t(n), std::uint32_t(k)};
      const Digest& cp = cps_[n - 1].address;
      TokenAmount price = cfg_.price_tokens(n, k);
      PrefetchContract* pc = nullptr;
      DeliveryContract* dc = nullptr;
      ContractStatus s = registry_.deploy_prefetch(cp, cid, price, epoch, book_, &pc);
      if (s != ContractStatus::Ok) throw std::runtime_error("prefetch deploy failed");
      s = registry_.deploy_delivery(cp, cid, price, epoch, book_, &dc);
      if (s != ContractStatus::Ok) throw std::runtime_error("delivery deploy failed");
      chain_.directory().add(as_span(pc->account().public_key));
      chain_.directory().add(as_span(dc->account().public_key));
    }

  decide_actions(epoch);
  run_prefetch_stage(epoch, slot);
  requests_in_epoch_ = 0;
}

void Simulation::issue_requests(std::uint64_t epoch, Slot slot) {
  const std::uint64_t T = cfg_.slots_per_epoch;
  const std::uint64_t L = std::uint64_t(cfg_.market.users);
  const std::uint64_t offset = slot - epoch_first_slot(epoch, T);
  std::uint64_t count = L / T + (offset < L % T ? 1 : 0);

  for (std::uint64_t r = 0; r < count; ++r) {
    const int user_idx = int(requests_in_epoch_++ % L);
    const NodeIdentity& user = users_[user_idx];

    // Demand follows the configured Zipf law; the CP is drawn uniformly.
    double u = demand_rng_.real();
    int k = cfg_.market.contents;
    double cum = 0.0;
    for (int i = 0; i < cfg_.market.contents; ++i) {
      cum += true_popularity_[i];
      if (u < cum) {
        k = i + 1;
        break;
      }
    }
    int n = int(demand_rng_.below(std::uint64_t(cfg_.market.providers))) + 1;
    ContentId cid{std::uint32_t(n), std::uint32_t(k)};

    if (!bank_.transfer(user.address, cps_[n - 1].address, 0, TxKind::UserRequest, cid,
                        std::nullopt, nullptr))
      throw std::runtime_error("user request transaction rejected");

    DeliveryContract* dc = registry_.delivery(cid);
    if (dc && !dc->responders().empty()) {
      std::size_t task = 0;
      ContractStatus s = dc->assign_next(user.address, slot, bank_, &task);
      if (s != ContractStatus::Ok)
        throw std::runtime_error(std::string("task assignment failed: ") +
                                 contract_status_name(s));
      if (user_idx >= cfg_.cheating_users)
        pending_.push_back(PendingSettle{cid, task, slot + 1, user_idx});
      // cheating users never answer the PoR; their tasks roll back
    }
  }
}

void Simulation::settle_due(Slot slot) {
  std::vector<PendingSettle> keep;
  for (const auto& p : pending_) {
    if (p.due > slot) {
      keep.push_back(p);
      continue;
    }
    DeliveryContract* dc = registry_.delivery(p.content);
    if (!dc) throw std::logic_error("pending settle against a destroyed contract");
    const auto& task = dc->tasks()[p.task];
    const Digest& ch = dc->responders()[task.responder].ch;
    int helper_index = -1;
    for (int m = 0; m < cfg_.market.helpers; ++m)
      if (chs_[m].address == ch) helper_index = m;
    if (helper_index < 0) throw std::logic_error("task responder not a known CH");

    Encoder seed_enc;
    seed_enc.put_digest(dc->address());
    seed_enc.put_u64(std::uint64_t(p.task));
    seed_enc.put_u64(slot);
    PoRChallenge challenge = por_challenge(sha256(as_span(seed_enc.bytes())),
                                           cfg_.content_chunks, cfg_.por_challenges);
    // The user proves possession from the copy the CH delivered.
    PoRResponse response = por_respond(ch_contents_.at(helper_index), challenge);
    bool ok = por_verify(dc->content_root(), challenge, response);

    ContractStatus s = dc->settle_task(p.task, ok, slot, bank_);
    if (s != ContractStatus::Ok)
      throw std::runtime_error(std::string("delivery settle failed: ") +
                               contract_status_name(s));
    const auto epoch = epoch_of_slot(task.assigned_slot, cfg_.slots_per_epoch);
    if (dc->tasks()[p.task].state == DeliveryContract::TaskState::Paid)
      offloaded_by_epoch_[epoch]++;
    else
      rollbacks_by_epoch_[epoch]++;
  }
  pending_ = std::move(keep);
}

void Simulation::audit() const {
  const LedgerState& st = chain_.state();
  std::ostringstream err;
  if (st.total_balance() != st.minted_supply()) {
    err << "token conservation violated: balances " << st.total_balance() << " vs supply "
        << st.minted_supply();
    throw std::runtime_error(err.str());
  }
  const TokenAmount expected_supply =
      genesis_total_ + TokenAmount(chain_.blocks().size() - 1) * cfg_.block_reward();
  if (st.minted_supply() != expected_supply) {
    err << "supply drift: minted " << st.minted_supply() << " expected " << expected_supply;
    throw std::runtime_error(err.str());
  }

  TokenAmount contract_escrow = 0;
  for (const auto* pc : registry_.prefetch_contracts()) {
    if (chain_.balance(pc->address()) != pc->escrow_held()) {
      err << "prefetch escrow mismatch for " << to_hex(pc->address()).substr(0, 12);
      throw std::runtime_error(err.str());
    }
    contract_escrow += pc->escrow_held();
  }
  for (const auto* dc : registry_.delivery_contracts()) {
    if (chain_.balance(dc->address()) != dc->escrow_held()) {
      err << "delivery escrow mismatch for " << to_hex(dc->address()).substr(0, 12);
      throw std::runtime_error(err.str());
    }
    contract_escrow += dc->escrow_held();
  }
  if (contract_escrow != st.total_live_escrow()) {
    err << "escrow conservation violated: contracts hold " << contract_escrow
        << " but the ledger tracks " << st.total_live_escrow();
    throw std::runtime_error(err.str());
  }
}

std::vector<Transaction> Simulation::slot_source(Slot slot) {
  audit();
  bank_.begin_slot(slot);
  const std::uint64_t epoch = epoch_of_slot(slot, cfg_.slots_per_epoch);
  if (slot == epoch_first_slot(epoch, cfg_.slots_per_epoch))
    epoch_boundary(epoch, slot);
  else
    settle_due(slot);
  issue_requests(epoch, slot);
  return bank_.take_batch();
}

void Simulation::run() {
  if (ran_) throw std::logic_error("simulation already ran");
  const std::uint64_t T = cfg_.slots_per_epoch;

  StakeVector stakes;
  stakes.stakes.assign(roster_.size(), 0);
  stakes.epoch = 0;

  for (int e = 0; e < cfg_.epochs; ++e) {
    EpochResult er = run_epoch(
        chain_, std::uint64_t(e), stakes, roster_, node_identities_,
        [this](Slot slot) { return slot_source(slot); }, cfg_.cp_stake_weight);
    for (auto& rec : er.slots) slot_records_.push_back(std::move(rec));

    EpochTelemetry row;
    row.epoch = std::uint64_t(e);
    row.requests = requests_in_epoch_;
    row.popularity_tv = popularity_tv_distance();
    row.grouping = actions_.grouping(cfg_.market.providers, cfg_.market.contents).label();
    row.supply = chain_.state().minted_supply();
    double income = 0.0;
    for (int m = 0; m < cfg_.market.helpers; ++m) income += double(er.next_stakes.stakes[m]);
    row.mean_ch_income = income / cfg_.market.helpers;
    epoch_records_.push_back(std::move(row));

    for (const auto& r : registry_.rows()) contract_records_.emplace_back(std::uint64_t(e), r);

    stakes = er.next_stakes;
  }

  // Teardown slot: resolve the final epoch's contracts on-chain.
  ran_ = true;
  const Slot slot = epoch_last_slot(std::uint64_t(cfg_.epochs) - 1, T) + 1;
  audit();
  bank_.begin_slot(slot);
  settle_due(slot);
  collect_teardown_counts();
  registry_.destroy_all(bank_);
  pending_.clear();
  std::vector<Transaction> batch = bank_.take_batch();

  std::size_t leader;
  if (stakes.total() > 0)
    leader = fts_elect(stakes, election_seed(chain_.tip().head));
  else
    leader = roster_.helper_addresses.size() + (slot % roster_.provider_addresses.size());
  Block block;
  ProduceStatus ps =
      produce_block(node_identities_[leader], leader, leader, std::move(batch), chain_, slot,
                    &block);
  if (ps != ProduceStatus::Ok) throw std::runtime_error("teardown block production failed");
  std::string why;
  if (chain_.append(block, &why) != AppendStatus::Ok)
    throw std::runtime_error("teardown append failed: " + why);
  audit();

  SlotRecord rec;
  rec.epoch = std::uint64_t(cfg_.epochs);
  rec.slot = slot;
  rec.leader = leader;
  rec.leader_label = roster_.node_label(leader);
  rec.reward = cfg_.block_reward();
  rec.transactions = block.transactions.size();
  slot_records_.push_back(std::move(rec));

  if (chain_.state().total_live_escrow() != 0)
    throw std::runtime_error("escrow outlived the teardown");

  // Fold settlement attribution into the epoch telemetry.
  for (auto& row : epoch_records_) {
    row.offloaded = offloaded_by_epoch_[row.epoch];
    row.rollbacks = rollbacks_by_epoch_[row.epoch];
    row.prefetch_forfeits = forfeits_by_epoch_[row.epoch];
  }

  final_report_ = validate_chain(chain_.data());
  if (!final_report_.valid)
    throw std::runtime_error("final chain validation failed: " + final_report_.message);
}

}  // namespace blockcache
