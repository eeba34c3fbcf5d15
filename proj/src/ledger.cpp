#include "parkedchain/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "parkedchain/error.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::ledger {

Amount to_amount(double units) {
  if (!std::isfinite(units) || std::abs(units) > 9e12) throw DomainError("amount out of range");
  return static_cast<Amount>(std::llround(units * static_cast<double>(kUnit)));
}

double to_units(Amount a) { return static_cast<double>(a) / static_cast<double>(kUnit); }

namespace {

constexpr const char* kStateNames[] = {"Deployed", "Signed",   "Executing", "ResultSubmitted",
                                       "Verified", "Paid",     "Refunded",  "Confiscated"};

std::string address_for(std::string_view tag, std::string_view seed) {
  Encoder e;
  e.str(tag).str(seed);
  return "0x" + to_hex(e.sha256()).substr(0, 40);
}

bool valid_identity(const std::string& id) {
  return !id.empty() && std::none_of(id.begin(), id.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string state_name(ContractState s) { return kStateNames[static_cast<int>(s)]; }

ContractState parse_state(const std::string& s) {
  for (int i = 0; i < 8; ++i)
    if (s == kStateNames[i]) return static_cast<ContractState>(i);
  throw ParseError("unknown contract state '" + s + "'");
}

bool SmartContractRecord::visited(ContractState s) const {
  return std::any_of(history.begin(), history.end(), [s](const auto& h) { return h.first == s; });
}

bool QuorumEvidence::sufficient() const {
  std::set<int> distinct(signers.begin(), signers.end());
  return required > 0 && static_cast<int>(distinct.size()) >= required;
}

Digest Block::compute_digest() const {
  Encoder e;
  e.str("block").u64(height).digest(previous).i64(proposer).u64(transactions.size());
  for (const auto& t : transactions) e.digest(t);
  e.i64(quorum.required).u64(quorum.signers.size());
  for (int s : quorum.signers) e.i64(s);
  return e.sha256();
}

bool verify_chain(std::span<const Block> chain) {
  Digest prev{};
  for (std::size_t h = 0; h < chain.size(); ++h) {
    const auto& b = chain[h];
    if (b.height != h || b.previous != prev || b.compute_digest() != b.digest) return false;
    prev = b.digest;
  }
  return true;
}

Ledger::Ledger() {
  treasury_ = address_for("treasury", "");
  Account t;
  t.identity = "treasury";
  t.address = treasury_;
  accounts_.emplace(treasury_, t);
  by_identity_.emplace(t.identity, treasury_);
}

Account& Ledger::account_mut(const std::string& address) {
  auto it = accounts_.find(address);
  if (it == accounts_.end()) throw LedgerError("unknown account " + address);
  return it->second;
}

SmartContractRecord& Ledger::contract_mut(const std::string& address) {
  auto it = contracts_.find(address);
  if (it == contracts_.end()) throw LedgerError("unknown contract " + address);
  return it->second;
}

const Account& Ledger::account(const std::string& address) const {
  return const_cast<Ledger*>(this)->account_mut(address);
}

const SmartContractRecord& Ledger::contract(const std::string& address) const {
  return const_cast<Ledger*>(this)->contract_mut(address);
}

void Ledger::enter(SmartContractRecord& r, ContractState s) {
  r.state = s;
  r.history.emplace_back(s, ++tick_);
}

void Ledger::record(const Encoder& tx) { pending_.push_back(tx.sha256()); }

void Ledger::move_from_escrow(SmartContractRecord& r, const std::string& to, Amount amount) {
  if (amount < 0 || amount > r.escrow) throw LedgerError("escrow underflow");
  r.escrow -= amount;
  account_mut(to).balance += amount;
}

const Account& Ledger::register_account(const std::string& identity) {
  if (!valid_identity(identity)) throw LedgerError("identity must be nonempty without whitespace");
  if (by_identity_.count(identity)) throw LedgerError("identity already registered: " + identity);
  Account a;
  a.identity = identity;
  a.address = address_for("account", identity);
  if (accounts_.count(a.address)) throw LedgerError("address collision");
  Encoder k;
  k.str("key").str(identity);
  const auto kd = k.sha256();
  for (int i = 0; i < 8; ++i) a.key_handle |= static_cast<std::uint64_t>(kd[i]) << (8 * i);
  Encoder c;
  c.str("certificate").str(identity).u64(a.key_handle);
  a.certificate = c.sha256();
  ++tick_;
  Encoder tx;
  tx.str("register").str(identity).str(a.address);
  record(tx);
  by_identity_.emplace(identity, a.address);
  return accounts_.emplace(a.address, a).first->second;
}

void Ledger::fund(const std::string& address, Amount amount) {
  if (amount <= 0) throw LedgerError("funding amount must be positive");
  auto& a = account_mut(address);
  a.balance += amount;
  minted_ += amount;
  ++tick_;
  Encoder tx;
  tx.str("fund").str(address).i64(amount);
  record(tx);
}

void Ledger::set_reputation(const std::string& address, double value) {
  if (!(value >= 0 && value <= 1)) throw LedgerError("reputation must lie in [0,1]");
  account_mut(address).reputation = value;
}

const SmartContractRecord& Ledger::post_request(const std::string& sr, const RequestSpec& spec,
                                                std::vector<MenuItem> menu, Amount deposit) {
  auto& a = account_mut(sr);
  if (menu.empty()) throw LedgerError("menu is empty");
  if (deposit < 0) throw LedgerError("deposit must be nonnegative");
  Amount max_reward = 0;
  for (const auto& m : menu) {
    if (m.reward < 0 || !(m.f_hz >= 0)) throw LedgerError("menu items need nonnegative resource and reward");
    max_reward = std::max(max_reward, m.reward);
  }
  const Amount need = deposit + max_reward;
  if (a.balance < need) throw LedgerError("insufficient balance for deposit and rewards");
  SmartContractRecord r;
  r.address = address_for("contract", sr + "#" + std::to_string(nonce_));
  if (contracts_.count(r.address)) throw LedgerError("contract address collision");
  ++nonce_;
  r.sr = sr;
  r.spec = spec;
  r.menu = std::move(menu);
  r.sr_deposit = deposit;
  a.balance -= need;
  r.escrow = need;
  enter(r, ContractState::Deployed);
  Encoder tx;
  tx.str("post").str(r.address).str(sr).f64(spec.task_bits).f64(spec.required_hz).f64(spec.serving_time_s);
  tx.i64(deposit).u64(r.menu.size());
  for (const auto& m : r.menu) tx.f64(m.f_hz).i64(m.reward);
  record(tx);
  return contracts_.emplace(r.address, std::move(r)).first->second;
}

const SmartContractRecord& Ledger::sign_contract(const std::string& pv, const std::string& contract, int item,
                                                 Amount pv_deposit) {
  auto& r = contract_mut(contract);
  auto& a = account_mut(pv);
  if (r.state != ContractState::Deployed) throw LedgerError("contract is not open for signing");
  if (item < 0 || item >= static_cast<int>(r.menu.size())) throw LedgerError("menu item index out of range");
  if (pv == r.sr) throw LedgerError("requester cannot sign its own contract");
  if (pv_deposit < 0) throw LedgerError("deposit must be nonnegative");
  if (a.balance < pv_deposit) throw LedgerError("insufficient balance for deposit");
  Amount max_reward = 0;
  for (const auto& m : r.menu) max_reward = std::max(max_reward, m.reward);
  a.balance -= pv_deposit;
  r.escrow += pv_deposit;
  r.pv = pv;
  r.chosen = item;
  r.pv_deposit = pv_deposit;
  move_from_escrow(r, r.sr, max_reward - r.menu[item].reward);
  enter(r, ContractState::Signed);
  Encoder tx;
  tx.str("sign").str(contract).str(pv).i64(item).i64(pv_deposit);
  record(tx);
  return r;
}

const SmartContractRecord& Ledger::execute_task(const std::string& contract, bool pv_departed) {
  auto& r = contract_mut(contract);
  if (r.state != ContractState::Signed) throw LedgerError("contract is not signed");
  enter(r, ContractState::Executing);
  Encoder tx;
  tx.str("execute").str(contract).u8(pv_departed);
  if (pv_departed) {
    move_from_escrow(r, r.sr, r.escrow);
    enter(r, ContractState::Confiscated);
  } else {
    Encoder res;
    res.str("result").str(contract).str(r.pv).i64(r.chosen).f64(r.spec.task_bits);
    r.result = res.sha256();
    tx.digest(r.result);
    enter(r, ContractState::ResultSubmitted);
  }
  record(tx);
  return r;
}

const SmartContractRecord& Ledger::verify_and_settle(const std::string& contract, const Verdict& verdict) {
  auto& r = contract_mut(contract);
  if (r.state != ContractState::ResultSubmitted) throw LedgerError("no submitted result to settle");
  const Amount reward = r.menu[r.chosen].reward;
  const std::string sr_target = verdict.sr_fraud ? treasury_ : r.sr;
  if (verdict.pass) {
    enter(r, ContractState::Verified);
    move_from_escrow(r, r.pv, reward + r.pv_deposit);
    move_from_escrow(r, sr_target, r.sr_deposit);
    enter(r, ContractState::Paid);
  } else {
    move_from_escrow(r, r.sr, reward + r.pv_deposit);
    move_from_escrow(r, sr_target, r.sr_deposit);
    enter(r, ContractState::Refunded);
  }
  Encoder tx;
  tx.str("settle").str(contract).u8(verdict.pass).u8(verdict.sr_fraud);
  record(tx);
  return r;
}

const Block& Ledger::append_block(std::vector<Digest> transactions, const QuorumEvidence& evidence, int proposer) {
  if (!evidence.sufficient()) throw LedgerError("block lacks quorum evidence");
  Block b;
  b.height = chain_.size();
  b.previous = chain_.empty() ? Digest{} : chain_.back().digest;
  b.transactions = std::move(transactions);
  b.proposer = proposer;
  b.quorum = evidence;
  b.digest = b.compute_digest();
  ++tick_;
  chain_.push_back(std::move(b));
  return chain_.back();
}

std::vector<Digest> Ledger::take_pending() {
  std::vector<Digest> out;
  out.swap(pending_);
  return out;
}

Amount Ledger::total_balances() const {
  Amount s = 0;
  for (const auto& [_, a] : accounts_) s += a.balance;
  return s;
}

Amount Ledger::total_escrow() const {
  Amount s = 0;
  for (const auto& [_, r] : contracts_) s += r.escrow;
  return s;
}

void Ledger::dump(std::ostream& os) const {
  os << "ledger " << tick_ << ' ' << nonce_ << ' ' << minted_ << '\n';
  for (const auto& [addr, a] : accounts_)
    os << "account " << a.identity << ' ' << addr << ' ' << a.key_handle << ' ' << to_hex(a.certificate) << ' '
       << a.balance << ' ' << fmt(a.reputation) << '\n';
  for (const auto& [addr, r] : contracts_) {
    os << "contract " << addr << ' ' << r.sr << ' ' << (r.pv.empty() ? "-" : r.pv) << ' ' << fmt(r.spec.task_bits)
       << ' ' << fmt(r.spec.required_hz) << ' ' << fmt(r.spec.serving_time_s) << ' ' << r.chosen << ' '
       << r.sr_deposit << ' ' << r.pv_deposit << ' ' << r.escrow << ' ' << state_name(r.state) << ' '
       << to_hex(r.result) << ' ' << r.menu.size();
    for (const auto& m : r.menu) os << ' ' << fmt(m.f_hz) << ' ' << m.reward;
    os << ' ' << r.history.size();
    for (const auto& [s, t] : r.history) os << ' ' << state_name(s) << ' ' << t;
    os << '\n';
  }
  for (const auto& b : chain_) {
    os << "block " << b.height << ' ' << to_hex(b.previous) << ' ' << b.proposer << ' ' << to_hex(b.digest) << ' '
       << b.quorum.required << ' ' << b.quorum.signers.size();
    for (int s : b.quorum.signers) os << ' ' << s;
    os << ' ' << b.transactions.size();
    for (const auto& t : b.transactions) os << ' ' << to_hex(t);
    os << '\n';
  }
  os << "pending " << pending_.size();
  for (const auto& t : pending_) os << ' ' << to_hex(t);
  os << '\n';
}

namespace {

template <class T>
T take(std::istringstream& in, std::size_t row) {
  T v{};
  if (!(in >> v)) throw ParseError("truncated ledger record", row);
  return v;
}

}  // namespace

Ledger Ledger::restore(std::istream& is) {
  Ledger l;
  l.accounts_.clear();
  l.by_identity_.clear();
  std::string line;
  std::size_t row = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream in(line);
    const auto kind = take<std::string>(in, row);
    if (kind == "ledger") {
      l.tick_ = take<std::uint64_t>(in, row);
      l.nonce_ = take<std::uint64_t>(in, row);
      l.minted_ = take<Amount>(in, row);
      header = true;
    } else if (kind == "account") {
      Account a;
      a.identity = take<std::string>(in, row);
      a.address = take<std::string>(in, row);
      a.key_handle = take<std::uint64_t>(in, row);
      a.certificate = from_hex(take<std::string>(in, row));
      a.balance = take<Amount>(in, row);
      a.reputation = parse_double(take<std::string>(in, row), row);
      if (!l.by_identity_.emplace(a.identity, a.address).second) throw ParseError("duplicate identity", row);
      l.accounts_.emplace(a.address, a);
    } else if (kind == "contract") {
      SmartContractRecord r;
      r.address = take<std::string>(in, row);
      r.sr = take<std::string>(in, row);
      r.pv = take<std::string>(in, row);
      if (r.pv == "-") r.pv.clear();
      r.spec.task_bits = parse_double(take<std::string>(in, row), row);
      r.spec.required_hz = parse_double(take<std::string>(in, row), row);
      r.spec.serving_time_s = parse_double(take<std::string>(in, row), row);
      r.chosen = take<int>(in, row);
      r.sr_deposit = take<Amount>(in, row);
      r.pv_deposit = take<Amount>(in, row);
      r.escrow = take<Amount>(in, row);
      r.state = parse_state(take<std::string>(in, row));
      r.result = from_hex(take<std::string>(in, row));
      const auto m = take<std::size_t>(in, row);
      for (std::size_t k = 0; k < m; ++k) {
        MenuItem it;
        it.f_hz = parse_double(take<std::string>(in, row), row);
        it.reward = take<Amount>(in, row);
        r.menu.push_back(it);
      }
      const auto h = take<std::size_t>(in, row);
      for (std::size_t k = 0; k < h; ++k) {
        const auto s = parse_state(take<std::string>(in, row));
        r.history.emplace_back(s, take<std::uint64_t>(in, row));
      }
      l.contracts_.emplace(r.address, std::move(r));
    } else if (kind == "block") {
      Block b;
      b.height = take<std::uint64_t>(in, row);
      b.previous = from_hex(take<std::string>(in, row));
      b.proposer = take<int>(in, row);
      b.digest = from_hex(take<std::string>(in, row));
      b.quorum.required = take<int>(in, row);
      const auto s = take<std::size_t>(in, row);
      for (std::size_t k = 0; k < s; ++k) b.quorum.signers.push_back(take<int>(in, row));
      const auto t = take<std::size_t>(in, row);
      for (std::size_t k = 0; k < t; ++k) b.transactions.push_back(from_hex(take<std::string>(in, row)));
      l.chain_.push_back(std::move(b));
    } else if (kind == "pending") {
      const auto t = take<std::size_t>(in, row);
      for (std::size_t k = 0; k < t; ++k) l.pending_.push_back(from_hex(take<std::string>(in, row)));
    } else {
      throw ParseError("unknown ledger record '" + kind + "'", row);
    }
  }
  if (!header) throw ParseError("ledger dump has no header");
  if (!l.accounts_.count(l.treasury_)) throw ParseError("ledger dump has no treasury account");
  return l;
}

void Ledger::write_explorer(std::ostream& os) const {
  os << "height,digest,tx_count,proposer\n";
  for (const auto& b : chain_)
    os << b.height << ',' << to_hex(b.digest) << ',' << b.transactions.size() << ',' << b.proposer << '\n';
}

namespace {

struct Applier {
  Ledger& l;
  CommandResult operator()(const RegisterCmd& c) { return {true, {}, l.register_account(c.identity).address}; }
  CommandResult operator()(const FundCmd& c) {
    l.fund(c.address, c.amount);
    return {true, {}, c.address};
  }
  CommandResult operator()(const PostCmd& c) {
    return {true, {}, l.post_request(c.sr, c.spec, c.menu, c.deposit).address};
  }
  CommandResult operator()(const SignCmd& c) {
    return {true, {}, l.sign_contract(c.pv, c.contract, c.item, c.deposit).address};
  }
  CommandResult operator()(const ExecuteCmd& c) { return {true, {}, l.execute_task(c.contract, c.departed).address}; }
  CommandResult operator()(const SettleCmd& c) {
    return {true, {}, l.verify_and_settle(c.contract, c.verdict).address};
  }
  CommandResult operator()(const AppendCmd& c) {
    if (!c.evidence.sufficient()) throw LedgerError("block lacks quorum evidence");
    return {true, {}, to_hex(l.append_block(l.take_pending(), c.evidence, c.proposer).digest)};
  }
};

}  // namespace

CommandResult apply(Ledger& ledger, const Command& cmd) {
  try {
    return std::visit(Applier{ledger}, cmd);
  } catch (const LedgerError& e) {
    return {false, e.what(), {}};
  }
}

std::vector<CommandResult> CommandQueue::drain(Ledger& ledger) {
  std::vector<CommandResult> out;
  for (const auto& c : queue_) out.push_back(apply(ledger, c));
  queue_.clear();
  return out;
}

}  // namespace parkedchain::ledger
