#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockcache/ledger.hpp"
#include "blockcache/merkle.hpp"

namespace blockcache {

enum class ContractStatus {
  Ok,
  NonPositivePrice,
  DuplicateOrder,
  WrongState,
  InsufficientBalance,
  DuplicateOffer,
  NotAResponder,
  NotOwner,
  AlreadySettled,
  NoResponders,
  UnknownTask,
  TransferFailed,
};

const char* contract_status_name(ContractStatus s);

// Identities known to this process (market participants and contract
// accounts), keyed by address; the settlement layer signs with them.
class IdentityBook {
 public:
  void add(NodeIdentity id);
  const NodeIdentity* find(const Digest& address) const;
  const std::map<Digest, NodeIdentity>& entries() const { return entries_; }

 private:
  std::map<Digest, NodeIdentity> entries_;
};

// Settlement backend the contract machines move money through. The chain
// adaptor realizes each call as an on-chain transaction; MemoryBank mirrors
// the ledger's escrow rules for contract-level unit tests.
class Bank {
 public:
  virtual ~Bank() = default;
  virtual TokenAmount balance(const Digest& address) const = 0;
  // ContractDeposit creates an escrow (its id lands in *escrow_id);
  // settlement kinds pass `escrow_ref` and must move the full amount.
  virtual bool transfer(const Digest& from, const Digest& to, TokenAmount amount, TxKind kind,
                        std::optional<ContentId> content, std::optional<Digest> escrow_ref,
                        Digest* escrow_id) = 0;
};

class MemoryBank : public Bank {
 public:
  void credit(const Digest& address, TokenAmount amount);
  TokenAmount balance(const Digest& address) const override;
  bool transfer(const Digest& from, const Digest& to, TokenAmount amount, TxKind kind,
                std::optional<ContentId> content, std::optional<Digest> escrow_ref,
                Digest* escrow_id) override;

  TokenAmount total_live_escrow() const;
  TokenAmount total_balance() const;

 private:
  struct Escrow {
    Digest holder{};
    TokenAmount amount = 0;
    bool consumed = false;
  };
  std::map<Digest, TokenAmount> balances_;
  std::map<Digest, Escrow> escrows_;
  std::uint64_t counter_ = 0;
};

// Order-for-caching escrow machine (one per CP-content pair per epoch).
// CHs respond with deposits; the CP registers responders and hands over
// the content; a verified proof of retrievability refunds the deposit,
// a failed one forfeits it to the CP.
class PrefetchContract {
 public:
  enum class Phase { Deployed, OffersOpen, AwaitingPoR, Settled, Destroyed };
  enum class PorStatus { Pending, Passed, Failed };

  struct Responder {
    Digest ch{};
    TokenAmount deposit = 0;
    Digest escrow_id{};
    bool registered = false;
    PorStatus por = PorStatus::Pending;
    bool settled = false;
  };

  PrefetchContract(NodeIdentity account, Digest cp, ContentId content, TokenAmount price,
                   Digest content_root);

  ContractStatus offer(const Digest& ch, TokenAmount deposit, Bank& bank);
  ContractStatus register_responder(const Digest& caller, const Digest& ch);
  // por_ok -> deposit back to the CH; otherwise forfeited to the CP.
  ContractStatus settle(const Digest& ch, bool por_ok, Bank& bank);
  // Owner teardown: refunds unregistered deposits, forfeits registered ones
  // that never produced a proof.
  ContractStatus destroy(const Digest& caller, Bank& bank);

  Phase phase() const { return phase_; }
  const NodeIdentity& account() const { return account_; }
  const Digest& address() const { return account_.address; }
  const Digest& cp() const { return cp_; }
  ContentId content() const { return content_; }
  TokenAmount price() const { return price_; }
  const Digest& content_root() const { return root_; }
  const std::vector<Responder>& responders() const { return responders_; }
  std::size_t registered_count() const;
  TokenAmount escrow_held() const { return escrow_held_; }

 private:
  Responder* find_responder(const Digest& ch);

  NodeIdentity account_;
  Digest cp_{};
  ContentId content_;
  TokenAmount price_ = 0;
  Digest root_{};
  Phase phase_ = Phase::Deployed;
  std::vector<Responder> responders_;
  TokenAmount escrow_held_ = 0;
};

// Order-for-delivery escrow machine. Responding CHs post a security bond;
// every assigned task escrows the CP's payment and a per-task CH deposit.
// A user proof of retrievability inside the deadline pays the CH; a timeout
// or invalid proof rolls the task back and awards the deposit to the CP.
class DeliveryContract {
 public:
  enum class Phase { Deployed, OffersOpen, Destroyed };
  enum class TaskState { AwaitingUserPoR, Paid, RolledBack };

  struct Responder {
    Digest ch{};
    TokenAmount bond = 0;
    Digest bond_escrow{};
    bool bond_released = false;
  };

  struct Task {
    std::size_t responder = 0;
    Digest user{};
    Slot assigned_slot = 0;
    Slot deadline = 0;  // inclusive
    TokenAmount deposit = 0;
    Digest deposit_escrow{};
    TokenAmount payment = 0;
    Digest payment_escrow{};
    TaskState state = TaskState::AwaitingUserPoR;
    Slot settled_slot = 0;
  };

  DeliveryContract(NodeIdentity account, Digest cp, ContentId content, TokenAmount price,
                   Digest content_root, Slot deadline_slots);

  ContractStatus offer(const Digest& ch, TokenAmount bond, Bank& bank);
  // Assigns the next user request round-robin over the responders, escrowing
  // the CP payment and the CH task deposit.
  ContractStatus assign_next(const Digest& user, Slot slot, Bank& bank,
                             std::size_t* task_index = nullptr);
  // por_ok with now <= deadline pays the CH and returns its deposit;
  // anything else returns the escrow to the CP plus the CH's deposit.
  ContractStatus settle_task(std::size_t task_index, bool por_ok, Slot now, Bank& bank);
  ContractStatus destroy(const Digest& caller, Bank& bank);

  Phase phase() const { return phase_; }
  const NodeIdentity& account() const { return account_; }
  const Digest& address() const { return account_.address; }
  const Digest& cp() const { return cp_; }
  ContentId content() const { return content_; }
  TokenAmount price() const { return price_; }
  const Digest& content_root() const { return root_; }
  const std::vector<Responder>& responders() const { return responders_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  TokenAmount escrow_held() const { return escrow_held_; }
  std::size_t unsettled_tasks() const;

 private:
  NodeIdentity account_;
  Digest cp_{};
  ContentId content_;
  TokenAmount price_ = 0;
  Digest root_{};
  Slot deadline_slots_ = 2;
  Phase phase_ = Phase::Deployed;
  std::vector<Responder> responders_;
  std::vector<Task> tasks_;
  std::size_t next_responder_ = 0;
  TokenAmount escrow_held_ = 0;
};

// One epoch's worth of live contracts plus the content originals they
// commit to. Destroyed and redeployed wholesale at every epoch boundary.
class ContractRegistry {
 public:
  ContractRegistry(std::size_t chunk_count, std::size_t chunk_size, Slot deadline_slots);

  // Synthetic original for (n, k); built once and cached.
  const MerkleContent& original(ContentId content);

  ContractStatus deploy_prefetch(const Digest& cp, ContentId content, TokenAmount price,
                                 std::uint64_t epoch, IdentityBook& accounts,
                                 PrefetchContract** out = nullptr);
  ContractStatus deploy_delivery(const Digest& cp, ContentId content, TokenAmount price,
                                 std::uint64_t epoch, IdentityBook& accounts,
                                 DeliveryContract** out = nullptr);

  PrefetchContract* prefetch(ContentId content);
  DeliveryContract* delivery(ContentId content);

  // Registers `ch` on the prefetch contract and hands it a content copy.
  ContractStatus register_and_transfer(ContentId content, const Digest& cp, const Digest& ch,
                                       MerkleContent* copy_out);

  // Destroys every live contract (rolling back unsettled work) and clears
  // the registry; the caller redeploys for the next epoch.
  void destroy_all(Bank& bank);

  std::size_t live_count() const;
  std::vector<PrefetchContract*> prefetch_contracts();
  std::vector<DeliveryContract*> delivery_contracts();
  std::vector<const PrefetchContract*> prefetch_contracts() const;
  std::vector<const DeliveryContract*> delivery_contracts() const;

  struct Row {
    std::string id;
    std::string type;
    ContentId content;
    std::string state;
    TokenAmount escrow = 0;
  };
  std::vector<Row> rows() const;

 private:
  std::size_t chunk_count_;
  std::size_t chunk_size_;
  Slot deadline_slots_;
  std::map<ContentId, MerkleContent> originals_;
  std::map<ContentId, PrefetchContract> prefetch_;
  std::map<ContentId, DeliveryContract> delivery_;
};

}  // namespace blockcache
