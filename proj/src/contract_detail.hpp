#pragma once

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "parkedchain/contract.hpp"

namespace parkedchain::contract::detail {

struct Recursion {
  bool ok = false;
  std::vector<double> f, pi, omega;
  double ir_residual = 0;
};

/// Backward recursion from a candidate top frequency; omega[0] is the IR multiplier.
Recursion backward_recursion(const ContractProblem& p, double f_top);

double golden_max(const std::function<double(double)>& fn, double lo, double hi, double rel_tol);

/// Replaces decreasing runs of f by the common value maximizing total SR utility.
std::vector<std::pair<int, int>> iron(const ContractProblem& p, std::vector<double>& f);

/// Active-set ascent in u = v(pi) coordinates with u ascending; returns true if the menu improved.
bool polish(const ContractProblem& p, ContractMenu& menu);

struct OracleBest {
  double value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> items;
};

class OracleSearch {
 public:
  static constexpr double kSlack = 1e-12;
  OracleSearch(const ContractProblem& p, std::span<const double> f_grid, std::span<const double> pi_grid);
  std::size_t candidates() const { return items_.size(); }
  /// Best menu whose first item is candidate `first`, pruned against best.value.
  void branch(std::size_t first, OracleBest& best) const;
  ContractMenu menu(const OracleBest& best) const;

 private:
  void dfs(std::vector<std::size_t>& chosen, double partial, OracleBest& best) const;
  const ContractProblem& p_;
  std::vector<ContractItem> items_;
  std::vector<double> util_, term_, bound_;
};

}  // namespace parkedchain::contract::detail
