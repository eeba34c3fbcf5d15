#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "parkedchain/digest.hpp"

namespace parkedchain::ledger {

/// Balances are integer micro-units of the reward currency.
using Amount = std::int64_t;
inline constexpr Amount kUnit = 1'000'000;
Amount to_amount(double units);
double to_units(Amount a);

struct Account {
  std::string identity;
  std::string address;
  std::uint64_t key_handle = 0;
  Digest certificate{};
  Amount balance = 0;
  double reputation = 0.5;
};

enum class ContractState : std::uint8_t {
  Deployed,
  Signed,
  Executing,
  ResultSubmitted,
  Verified,
  Paid,
  Refunded,
  Confiscated
};
std::string state_name(ContractState s);
ContractState parse_state(const std::string& s);

struct RequestSpec {
  double task_bits = 0;
  double required_hz = 0;
  double serving_time_s = 0;
};

struct MenuItem {
  double f_hz = 0;
  Amount reward = 0;
};

struct SmartContractRecord {
  std::string address;
  std::string sr;
  std::string pv;  // empty until signed
  RequestSpec spec;
  std::vector<MenuItem> menu;
  int chosen = -1;
  Amount sr_deposit = 0;
  Amount pv_deposit = 0;
  /// Funds currently held at the contract address.
  Amount escrow = 0;
  ContractState state = ContractState::Deployed;
  Digest result{};
  /// Every state entered, with the logical tick it was entered at.
  std::vector<std::pair<ContractState, std::uint64_t>> history;
  bool visited(ContractState s) const;
};

struct QuorumEvidence {
  int required = 0;
  std::vector<int> signers;
  /// Distinct signers reach the positive requirement.
  bool sufficient() const;
};

struct Block {
  std::uint64_t height = 0;
  Digest previous{};
  std::vector<Digest> transactions;
  int proposer = 0;
  QuorumEvidence quorum;
  Digest digest{};
  Digest compute_digest() const;
};

/// Recomputes every digest and link; true iff the stored chain is intact.
bool verify_chain(std::span<const Block> chain);

struct Verdict {
  bool pass = true;
  bool sr_fraud = false;
};

class Ledger {
 public:
  Ledger();

  const Account& register_account(const std::string& identity);
  /// Genesis issuance; the only operation that changes the total supply.
  void fund(const std::string& address, Amount amount);
  void set_reputation(const std::string& address, double value);

  const SmartContractRecord& post_request(const std::string& sr, const RequestSpec& spec,
                                          std::vector<MenuItem> menu, Amount deposit);
  const SmartContractRecord& sign_contract(const std::string& pv, const std::string& contract, int item,
                                           Amount pv_deposit);
  const SmartContractRecord& execute_task(const std::string& contract, bool pv_departed);
  const SmartContractRecord& verify_and_settle(const std::string& contract, const Verdict& verdict);
  const Block& append_block(std::vector<Digest> transactions, const QuorumEvidence& evidence, int proposer);

  const Account& account(const std::string& address) const;
  const SmartContractRecord& contract(const std::string& address) const;
  const std::map<std::string, Account>& accounts() const { return accounts_; }
  const std::map<std::string, SmartContractRecord>& contracts() const { return contracts_; }
  const std::vector<Block>& chain() const { return chain_; }
  /// Transaction digests not yet written into a block.
  const std::vector<Digest>& pending() const { return pending_; }
  std::vector<Digest> take_pending();
  bool verify_chain() const { return parkedchain::ledger::verify_chain(chain_); }

  Amount total_balances() const;
  Amount total_escrow() const;
  Amount minted() const { return minted_; }
  const std::string& treasury() const { return treasury_; }

  /// Line-delimited canonical dump; restore reproduces an identical ledger.
  void dump(std::ostream& os) const;
  static Ledger restore(std::istream& is);
  /// Explorer CSV `height,digest,tx_count,proposer`.
  void write_explorer(std::ostream& os) const;

 private:
  std::map<std::string, Account> accounts_;
  std::map<std::string, std::string> by_identity_;
  std::map<std::string, SmartContractRecord> contracts_;
  std::vector<Block> chain_;
  std::vector<Digest> pending_;
  std::string treasury_;
  Amount minted_ = 0;
  std::uint64_t tick_ = 0;
  std::uint64_t nonce_ = 0;

  Account& account_mut(const std::string& address);
  SmartContractRecord& contract_mut(const std::string& address);
  void enter(SmartContractRecord& r, ContractState s);
  void record(const Encoder& tx);
  void move_from_escrow(SmartContractRecord& r, const std::string& to, Amount amount);
};

/// Commands for the single-writer queue.
struct RegisterCmd {
  std::string identity;
};
struct FundCmd {
  std::string address;
  Amount amount = 0;
};
struct PostCmd {
  std::string sr;
  RequestSpec spec;
  std::vector<MenuItem> menu;
  Amount deposit = 0;
};
struct SignCmd {
  std::string pv, contract;
  int item = 0;
  Amount deposit = 0;
};
struct ExecuteCmd {
  std::string contract;
  bool departed = false;
};
struct SettleCmd {
  std::string contract;
  Verdict verdict;
};
struct AppendCmd {
  QuorumEvidence evidence;
  int proposer = 0;
};
using Command = std::variant<RegisterCmd, FundCmd, PostCmd, SignCmd, ExecuteCmd, SettleCmd, AppendCmd>;

struct CommandResult {
  bool ok = true;
  std::string error;
  /// Address of the account or contract touched, or the block digest in hex.
  std::string subject;
};

/// Applies one command; a rejected command leaves the ledger unchanged.
CommandResult apply(Ledger& ledger, const Command& cmd);

/// Ordered queue; all mutations go through drain.
class CommandQueue {
 public:
  void push(Command c) { queue_.push_back(std::move(c)); }
  std::size_t size() const { return queue_.size(); }
  std::vector<CommandResult> drain(Ledger& ledger);

 private:
  std::vector<Command> queue_;
};

}  // namespace parkedchain::ledger
