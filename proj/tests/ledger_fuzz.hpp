#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parkedchain/ledger.hpp"

namespace fuzz {

using namespace parkedchain::ledger;

struct Outcome {
  bool conserved = true;
  bool paid_after_verified = true;
  bool nonnegative = true;
  bool rejected_unchanged = true;
  int applied = 0;
  int rejected = 0;
  int paid = 0;  // contracts in Paid at the end
};

inline std::string dump_of(const Ledger& l) {
  std::ostringstream os;
  l.dump(os);
  return os.str();
}

/// Runs one random command sequence and audits the ledger after every step.
/// check_rejects also compares full dumps around every rejected command.
inline Outcome run_sequence(std::uint64_t seed, int steps, bool check_rejects) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  auto amount = [&](Amount hi) { return static_cast<Amount>(rng() % static_cast<std::uint64_t>(hi + 1)); };
  Ledger l;
  std::vector<std::string> accounts{l.treasury()};
  std::vector<std::string> contracts;
  Outcome out;
  for (int step = 0; step < steps; ++step) {
    Command cmd;
    switch (pick(8)) {
      case 0:
        cmd = RegisterCmd{"node-" + std::to_string(pick(6))};
        break;
      case 1:
        cmd = FundCmd{accounts[pick(static_cast<int>(accounts.size()))], amount(50 * kUnit) - kUnit};
        break;
      case 2: {
        std::vector<MenuItem> menu(pick(4));
        for (auto& m : menu) m = {1e9 * pick(4), amount(10 * kUnit)};
        cmd = PostCmd{accounts[pick(static_cast<int>(accounts.size()))], {4e6, 1e9, 30}, menu, amount(5 * kUnit)};
        break;
      }
      case 3:
      case 4:
        if (contracts.empty()) continue;
        cmd = SignCmd{accounts[pick(static_cast<int>(accounts.size()))],
                      contracts[pick(static_cast<int>(contracts.size()))], pick(4) - 1, amount(5 * kUnit)};
        break;
      case 5:
        if (contracts.empty()) continue;
        cmd = ExecuteCmd{contracts[pick(static_cast<int>(contracts.size()))], pick(4) == 0};
        break;
      case 6:
        if (contracts.empty()) continue;
        cmd = SettleCmd{contracts[pick(static_cast<int>(contracts.size()))], {pick(3) != 0, pick(5) == 0}};
        break;
      default: {
        QuorumEvidence q{1 + pick(4), {}};
        for (int k = pick(6); k > 0; --k) q.signers.push_back(pick(5));
        cmd = AppendCmd{q, pick(5)};
      }
    }
    const std::string before = check_rejects ? dump_of(l) : std::string();
    const auto res = parkedchain::ledger::apply(l, cmd);
    if (res.ok) {
      ++out.applied;
      if (std::holds_alternative<RegisterCmd>(cmd)) accounts.push_back(res.subject);
      if (std::holds_alternative<PostCmd>(cmd)) contracts.push_back(res.subject);
    } else {
      ++out.rejected;
      if (check_rejects && dump_of(l) != before) out.rejected_unchanged = false;
    }
    if (l.total_balances() + l.total_escrow() != l.minted()) out.conserved = false;
    for (const auto& [_, a] : l.accounts())
      if (a.balance < 0) out.nonnegative = false;
    for (const auto& [_, r] : l.contracts()) {
      if (r.escrow < 0) out.nonnegative = false;
      if (!r.visited(ContractState::Paid)) continue;
      std::uint64_t verified = 0, paid = 0;
      for (const auto& [s, t] : r.history) {
        if (s == ContractState::Verified && !verified) verified = t;
        if (s == ContractState::Paid) paid = t;
      }
      if (!verified || verified >= paid) out.paid_after_verified = false;
    }
  }
  for (const auto& [_, r] : l.contracts()) out.paid += r.state == ContractState::Paid;
  return out;
}

}  // namespace fuzz
