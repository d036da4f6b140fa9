#include "blockcache/contracts.hpp"

#include <stdexcept>

namespace blockcache {

const char* contract_status_name(ContractStatus s) {
  switch (s) {
    case ContractStatus::Ok: return "ok";
    case ContractStatus::NonPositivePrice: return "non-positive-price";
    case ContractStatus::DuplicateOrder: return "duplicate-order";
    case ContractStatus::WrongState: return "wrong-state";
    case ContractStatus::InsufficientBalance: return "insufficient-balance";
    case ContractStatus::DuplicateOffer: return "duplicate-offer";
    case ContractStatus::NotAResponder: return "not-a-responder";
    case ContractStatus::NotOwner: return "not-owner";
    case ContractStatus::AlreadySettled: return "already-settled";
    case ContractStatus::NoResponders: return "no-responders";
    case ContractStatus::UnknownTask: return "unknown-task";
    case ContractStatus::TransferFailed: return "transfer-failed";
  }
  return "?";
}

void IdentityBook::add(NodeIdentity id) { entries_[id.address] = std::move(id); }

const NodeIdentity* IdentityBook::find(const Digest& address) const {
  auto it = entries_.find(address);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// MemoryBank

void MemoryBank::credit(const Digest& address, TokenAmount amount) {
  balances_[address] += amount;
}

TokenAmount MemoryBank::balance(const Digest& address) const {
  auto it = balances_.find(address);
  return it == balances_.end() ? 0 : it->second;
}

bool MemoryBank::transfer(const Digest& from, const Digest& to, TokenAmount amount, TxKind kind,
                          std::optional<ContentId> content, std::optional<Digest> escrow_ref,
                          Digest* escrow_id) {
  (void)content;
  const bool settles = kind == TxKind::DeliveryPayment || kind == TxKind::DepositRefund ||
                       kind == TxKind::DepositForfeit;
  if (settles != escrow_ref.has_value()) return false;
  if (settles) {
    auto it = escrows_.find(*escrow_ref);
    if (it == escrows_.end() || it->second.consumed) return false;
    if (it->second.holder != from || it->second.amount != amount) return false;
    it->second.consumed = true;
  }
  if (balance(from) < amount) return false;
  balances_[from] -= amount;
  balances_[to] += amount;
  if (kind == TxKind::ContractDeposit) {
    Encoder e;
    e.put_u64(counter_++);
    Digest id = sha256(as_span(e.bytes()));
    escrows_[id] = Escrow{to, amount, false};
    if (escrow_id) *escrow_id = id;
  }
  return true;
}

TokenAmount MemoryBank::total_live_escrow() const {
  TokenAmount sum = 0;
  for (const auto& [id, e] : escrows_)
    if (!e.consumed) sum += e.amount;
  return sum;
}

TokenAmount MemoryBank::total_balance() const {
  TokenAmount sum = 0;
  for (const auto& [addr, v] : balances_) sum += v;
  return sum;
}

// ---------------------------------------------------------------------------
// PrefetchContract

PrefetchContract::PrefetchContract(NodeIdentity account, Digest cp, ContentId content,
                                   TokenAmount price, Digest content_root)
    : account_(std::move(account)),
      cp_(cp),
      content_(content),
      price_(price),
      root_(content_root),
      phase_(Phase::OffersOpen) {}

PrefetchContract::Responder* PrefetchContract::find_responder(const Digest& ch) {
  for (auto& r : responders_)
    if (r.ch == ch) return &r;
  return nullptr;
}

ContractStatus PrefetchContract::offer(const Digest& ch, TokenAmount deposit, Bank& bank) {
  if (phase_ != Phase::OffersOpen && phase_ != Phase::AwaitingPoR)
    return ContractStatus::WrongState;
  if (find_responder(ch)) return ContractStatus::DuplicateOffer;
  if (bank.balance(ch) < deposit) return ContractStatus::InsufficientBalance;

  Responder r;
  r.ch = ch;
  r.deposit = deposit;
  if (!bank.transfer(ch, address(), deposit, TxKind::ContractDeposit, content_, std::nullopt,
                     &r.escrow_id))
    return ContractStatus::TransferFailed;
  escrow_held_ += deposit;
  responders_.push_back(r);
  return ContractStatus::Ok;
}

ContractStatus PrefetchContract::register_responder(const Digest& caller, const Digest& ch) {
  if (caller != cp_) return ContractStatus::NotOwner;
  if (phase_ != Phase::OffersOpen && phase_ != Phase::AwaitingPoR)
    return ContractStatus::WrongState;
  Responder* r = find_responder(ch);
  if (!r) return ContractStatus::NotAResponder;
  r->registered = true;
  phase_ = Phase::AwaitingPoR;
  return ContractStatus::Ok;
}

ContractStatus PrefetchContract::settle(const Digest& ch, bool por_ok, Bank& bank) {
  if (phase_ != Phase::AwaitingPoR) return ContractStatus::WrongState;
  Responder* r = find_responder(ch);
  if (!r || !r->registered) return ContractStatus::NotAResponder;
  if (r->settled) return ContractStatus::AlreadySettled;

  r->por = por_ok ? PorStatus::Passed : PorStatus::Failed;
  const Digest& to = por_ok ? r->ch : cp_;
  TxKind kind = por_ok ? TxKind::DepositRefund : TxKind::DepositForfeit;
  if (!bank.transfer(address(), to, r->deposit, kind, content_, r->escrow_id, nullptr))
    return ContractStatus::TransferFailed;
  r->settled = true;
  escrow_held_ -= r->deposit;

  bool all_done = true;
  for (const auto& resp : responders_)
    if (resp.registered && !resp.settled) all_done = false;
  if (all_done) phase_ = Phase::Settled;
  return ContractStatus::Ok;
}

ContractStatus PrefetchContract::destroy(const Digest& caller, Bank& bank) {
  if (caller != cp_) return ContractStatus::NotOwner;
  if (phase_ == Phase::Destroyed) return ContractStatus::WrongState;
  for (auto& r : responders_) {
    if (r.settled) continue;
    // Registered responders took the content without proving retrievability;
    // their deposits are forfeited. Plain offers are returned.
    const Digest& to = r.registered ? cp_ : r.ch;
    TxKind kind = r.registered ? TxKind::DepositForfeit : TxKind::DepositRefund;
    if (!bank.transfer(address(), to, r.deposit, kind, content_, r.escrow_id, nullptr))
      return ContractStatus::TransferFailed;
    if (r.registered) r.por = PorStatus::Failed;
    r.settled = true;
    escrow_held_ -= r.deposit;
  }
  phase_ = Phase::Destroyed;
  return ContractStatus::Ok;
}

std::size_t PrefetchContract::registered_count() const {
  std::size_t n = 0;
  for (const auto& r : responders_)
    if (r.registered) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// DeliveryContract

DeliveryContract::DeliveryContract(NodeIdentity account, Digest cp, ContentId content,
                                   TokenAmount price, Digest content_root, Slot deadline_slots)
    : account_(std::move(account)),
      cp_(cp),
      content_(content),
      price_(price),
      root_(content_root),
      deadline_slots_(deadline_slots),
      phase_(Phase::OffersOpen) {}

ContractStatus DeliveryContract::offer(const Digest& ch, TokenAmount bond, Bank& bank) {
  if (phase_ != Phase::OffersOpen) return ContractStatus::WrongState;
  for (const auto& r : responders_)
    if (r.ch == ch) return ContractStatus::DuplicateOffer;
  if (bank.balance(ch) < bond) return ContractStatus::InsufficientBalance;

  Responder r;
  r.ch = ch;
  r.bond = bond;
  if (!bank.transfer(ch, address(), bond, TxKind::ContractDeposit, content_, std::nullopt,
                     &r.bond_escrow))
    return ContractStatus::TransferFailed;
  escrow_held_ += bond;
  responders_.push_back(r);
  return ContractStatus::Ok;
}

ContractStatus DeliveryContract::assign_next(const Digest& user, Slot slot, Bank& bank,
                                             std::size_t* task_index) {
  if (phase_ != Phase::OffersOpen) return ContractStatus::WrongState;
  if (responders_.empty()) return ContractStatus::NoResponders;

  std::size_t ri = next_responder_ % responders_.size();
  const Digest& ch = responders_[ri].ch;
  if (bank.balance(ch) < price_) return ContractStatus::InsufficientBalance;
  if (bank.balance(cp_) < price_) return ContractStatus::InsufficientBalance;

  Task t;
  t.responder = ri;
  t.user = user;
  t.assigned_slot = slot;
  t.deadline = slot + deadline_slots_;
  t.deposit = price_;  // security deposit: one delivery's worth
  t.payment = price_;
  if (!bank.transfer(ch, address(), t.deposit, TxKind::ContractDeposit, content_, std::nullopt,
                     &t.deposit_escrow))
    return ContractStatus::TransferFailed;
  if (!bank.transfer(cp_, address(), t.payment, TxKind::ContractDeposit, content_, std::nullopt,
                     &t.payment_escrow))
    return ContractStatus::TransferFailed;
  escrow_held_ += t.deposit + t.payment;
  next_responder_ = ri + 1;
  if (task_index) *task_index = tasks_.size();
  tasks_.push_back(t);
  return ContractStatus::Ok;
}

ContractStatus DeliveryContract::settle_task(std::size_t task_index, bool por_ok, Slot now,
                                             Bank& bank) {
  if (phase_ == Phase::Destroyed) return ContractStatus::WrongState;
  if (task_index >= tasks_.size()) return ContractStatus::UnknownTask;
  Task& t = tasks_[task_index];
  if (t.state != TaskState::AwaitingUserPoR) return ContractStatus::AlreadySettled;

  const Digest& ch = responders_[t.responder].ch;
  if (por_ok && now <= t.deadline) {
    if (!bank.transfer(address(), ch, t.payment, TxKind::DeliveryPayment, content_,
                       t.payment_escrow, nullptr))
      return ContractStatus::TransferFailed;
    if (!bank.transfer(address(), ch, t.deposit, TxKind::DepositRefund, content_,
                       t.deposit_escrow, nullptr))
      return ContractStatus::TransferFailed;
    t.state = TaskState::Paid;
  } else {
    if (!bank.transfer(address(), cp_, t.payment, TxKind::DepositRefund, content_,
                       t.payment_escrow, nullptr))
      return ContractStatus::TransferFailed;
    if (!bank.transfer(address(), cp_, t.deposit, TxKind::DepositForfeit, content_,
                       t.deposit_escrow, nullptr))
      return ContractStatus::TransferFailed;
    t.state = TaskState::RolledBack;
  }
  t.settled_slot = now;
  escrow_held_ -= t.deposit + t.payment;
  return ContractStatus::Ok;
}

ContractStatus DeliveryContract::destroy(const Digest& caller, Bank& bank) {
  if (caller != cp_) return ContractStatus::NotOwner;
  if (phase_ == Phase::Destroyed) return ContractStatus::WrongState;

  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].state != TaskState::AwaitingUserPoR) continue;
    ContractStatus s = settle_task(i, false, tasks_[i].deadline + 1, bank);
    if (s != ContractStatus::Ok) return s;
  }
  for (auto& r : responders_) {
    if (r.bond_released) continue;
    if (!bank.transfer(address(), r.ch, r.bond, TxKind::DepositRefund, content_, r.bond_escrow,
                       nullptr))
      return ContractStatus::TransferFailed;
    r.bond_released = true;
    escrow_held_ -= r.bond;
  }
  phase_ = Phase::Destroyed;
  return ContractStatus::Ok;
}

std::size_t DeliveryContract::unsettled_tasks() const {
  std::size_t n = 0;
  for (const auto& t : tasks_)
    if (t.state == TaskState::AwaitingUserPoR) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// ContractRegistry

ContractRegistry::ContractRegistry(std::size_t chunk_count, std::size_t chunk_size,
                                   Slot deadline_slots)
    : chunk_count_(chunk_count), chunk_size_(chunk_size), deadline_slots_(deadline_slots) {}

const MerkleContent& ContractRegistry::original(ContentId content) {
  auto it = originals_.find(content);
  if (it == originals_.end()) {
    it = originals_
             .emplace(content, MerkleContent::synthetic(content.provider, content.content,
                                                        chunk_count_, chunk_size_))
             .first;
  }
  return it->second;
}

static NodeIdentity contract_identity(const char* type, ContentId content, std::uint64_t epoch) {
  Encoder e;
  e.put_bytes(as_span(std::string("contract.") + type));
  e.put_u32(content.provider);
  e.put_u32(content.content);
  e.put_u64(epoch);
  return NodeIdentity::from_seed(as_span(e.bytes()));
}

ContractStatus ContractRegistry::deploy_prefetch(const Digest& cp, ContentId content,
                                                 TokenAmount price, std::uint64_t epoch,
                                                 IdentityBook& accounts, PrefetchContract** out) {
  if (price == 0) return ContractStatus::NonPositivePrice;
  if (prefetch_.count(content)) return ContractStatus::DuplicateOrder;
  NodeIdentity account = contract_identity("prefetch", content, epoch);
  accounts.add(account);
  const Digest root = original(content).root();
  auto [it, inserted] = prefetch_.emplace(
      content, PrefetchContract(std::move(account), cp, content, price, root));
  if (out) *out = &it->second;
  return ContractStatus::Ok;
}

ContractStatus ContractRegistry::deploy_delivery(const Digest& cp, ContentId content,
                                                 TokenAmount price, std::uint64_t epoch,
                                                 IdentityBook& accounts, DeliveryContract** out) {
  if (price == 0) return ContractStatus::NonPositivePrice;
  if (delivery_.count(content)) return ContractStatus::DuplicateOrder;
  NodeIdentity account = contract_identity("delivery", content, epoch);
  accounts.add(account);
  const Digest root = original(content).root();
  auto [it, inserted] = delivery_.emplace(
      content, DeliveryContract(std::move(account), cp, content, price, root, deadline_slots_));
  if (out) *out = &it->second;
  return ContractStatus::Ok;
}

PrefetchContract* ContractRegistry::prefetch(ContentId content) {
  auto it = prefetch_.find(content);
  return it == prefetch_.end() ? nullptr : &it->second;
}

DeliveryContract* ContractRegistry::delivery(ContentId content) {
  auto it = delivery_.find(content);
  return it == delivery_.end() ? nullptr : &it->second;
}

ContractStatus ContractRegistry::register_and_transfer(ContentId content, const Digest& cp,
                                                       const Digest& ch,
                                                       MerkleContent* copy_out) {
  PrefetchContract* c = prefetch(content);
  if (!c) return ContractStatus::UnknownTask;
  ContractStatus s = c->register_responder(cp, ch);
  if (s != ContractStatus::Ok) return s;
  if (copy_out) *copy_out = original(content);  // in-process byte copy hand-over
  return ContractStatus::Ok;
}

void ContractRegistry::destroy_all(Bank& bank) {
  for (auto& [content, c] : prefetch_)
    if (c.phase() != PrefetchContract::Phase::Destroyed) {
      ContractStatus s = c.destroy(c.cp(), bank);
      if (s != ContractStatus::Ok)
        throw std::runtime_error("prefetch teardown failed: " +
                                 std::string(contract_status_name(s)));
    }
  for (auto& [content, c] : delivery_)
    if (c.phase() != DeliveryContract::Phase::Destroyed) {
      ContractStatus s = c.destroy(c.cp(), bank);
      if (s != ContractStatus::Ok)
        throw std::runtime_error("delivery teardown failed: " +
                                 std::string(contract_status_name(s)));
    }
  prefetch_.clear();
  delivery_.clear();
}

std::size_t ContractRegistry::live_count() const {
  std::size_t n = 0;
  for (const auto& [content, c] : prefetch_)
    if (c.phase() != PrefetchContract::Phase::Destroyed) ++n;
  for (const auto& [content, c] : delivery_)
    if (c.phase() != DeliveryContract::Phase::Destroyed) ++n;
  return n;
}

std::vector<PrefetchContract*> ContractRegistry::prefetch_contracts() {
  std::vector<PrefetchContract*> out;
  for (auto& [content, c] : prefetch_) out.push_back(&c);
  return out;
}

std::vector<DeliveryContract*> ContractRegistry::delivery_contracts() {
  std::vector<DeliveryContract*> out;
  for (auto& [content, c] : delivery_) out.push_back(&c);
  return out;
}

std::vector<const PrefetchContract*> ContractRegistry::prefetch_contracts() const {
  std::vector<const PrefetchContract*> out;
  for (const auto& [content, c] : prefetch_) out.push_back(&c);
  return out;
}

std::vector<const DeliveryContract*> ContractRegistry::delivery_contracts() const {
  std::vector<const DeliveryContract*> out;
  for (const auto& [content, c] : delivery_) out.push_back(&c);
  return out;
}

static const char* prefetch_phase_name(PrefetchContract::Phase p) {
  switch (p) {
    case PrefetchContract::Phase::Deployed: return "deployed";
    case PrefetchContract::Phase::OffersOpen: return "offers-open";
    case PrefetchContract::Phase::AwaitingPoR: return "awaiting-por";
    case PrefetchContract::Phase::Settled: return "settled";
    case PrefetchContract::Phase::Destroyed: return "destroyed";
  }
  return "?";
}

static const char* delivery_phase_name(DeliveryContract::Phase p) {
  switch (p) {
    case DeliveryContract::Phase::Deployed: return "deployed";
    case DeliveryContract::Phase::OffersOpen: return "offers-open";
    case DeliveryContract::Phase::Destroyed: return "destroyed";
  }
  return "?";
}

std::vector<ContractRegistry::Row> ContractRegistry::rows() const {
  std::vector<Row> out;
  for (const auto& [content, c] : prefetch_) {
    Row r;
    r.id = to_hex(c.address()).substr(0, 16);
    r.type = "prefetch";
    r.content = content;
    r.state = prefetch_phase_name(c.phase());
    r.escrow = c.escrow_held();
    out.push_back(std::move(r));
  }
  for (const auto& [content, c] : delivery_) {
    Row r;
    r.id = to_hex(c.address()).substr(0, 16);
    r.type = "delivery";
    r.content = content;
    r.state = delivery_phase_name(c.phase());
    r.escrow = c.escrow_held();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace blockcache
