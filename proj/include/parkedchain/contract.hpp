#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace parkedchain::contract {

/// PV valuation of a reward. Requirements: v(0) = 0, v' > 0, v'' < 0 on (lower, inf),
/// and v' maps (lower, inf) onto (0, inf) so the first-order conditions always have a root.
struct Valuation {
  std::string name;
  double lower = -1;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;             // v^-1
  std::function<double(double)> derivative_inverse;  // (v')^-1

  /// ln(1 + pi)
  static Valuation log1p();
  /// 2(sqrt(1 + pi) - 1)
  static Valuation sqrt1p();
  static Valuation by_name(const std::string& name);
};

struct TaskParams {
  double rho = 0.1;             // profit per second saved
  double cycles_per_bit = 1e4;  // kappa
  double task_bits = 4e6;       // s
  double f_local = 0.5e9;       // Hz
  std::vector<double> rate;     // per-type uplink rate, bits/s; empty means rate_default for all
  double rate_default = 5.5e6;
  double capacitance = 1e-28;  // effective switched capacitance
  double energy_price = 0.1;   // per joule
  double f_max = 3e9;
  Valuation v = Valuation::log1p();

  double cycles() const { return cycles_per_bit * task_bits; }
  /// Energy price times energy per Hz^2: the PV cost is cost_coeff() * f^2.
  double cost_coeff() const { return energy_price * cycles_per_bit * task_bits * capacitance; }
  double rate_for(int j) const { return rate.empty() ? rate_default : rate.at(j); }
  void validate(int types) const;
};

struct ContractProblem {
  std::vector<double> theta;
  std::vector<double> beta;
  TaskParams task;
  int size() const { return static_cast<int>(theta.size()); }
  void validate() const;
};

struct ContractItem {
  double f = 0;
  double pi = 0;
};

enum class Scheme { Complete, Lagrangian, LocalAsymmetric, Stackelberg, Linear, Oracle };
std::string scheme_tag(Scheme s);

struct SolverInfo {
  int iterations = 0;
  int grid_steps = 0;
  double residual = 0;
  /// Inclusive 0-based index ranges replaced by a common value.
  std::vector<std::pair<int, int>> bunched;
  bool polished = false;
  double price = 0;
  std::vector<int> excluded;
};

struct ContractMenu {
  std::vector<ContractItem> items;
  Scheme scheme = Scheme::Complete;
  SolverInfo info;
};

double time_saved(double f, const TaskParams& task, int j);
double energy_cost(double f, const TaskParams& task);
double pv_utility(double theta, double f, double pi, const TaskParams& task);
/// beta_j theta_j (S_j - pi_j); an item with f = 0 offloads nothing and contributes -beta theta pi.
double sr_term(const ContractProblem& p, int j, const ContractItem& item);
double sr_expected_utility(const ContractMenu& menu, const ContractProblem& p);
double sr_expected_utility(std::span<const ContractItem> items, const ContractProblem& p);
/// Utility of type j's own item, for every j.
std::vector<double> pv_utilities(const ContractMenu& menu, const ContractProblem& p);

struct FeasibilityReport {
  std::vector<int> ir;                    // types with negative utility
  std::vector<std::pair<int, int>> ic;    // (type, preferred other item)
  std::vector<int> monotonicity;          // j with f_j < f_{j-1} or f_j > f_max or f_j < 0
  bool feasible() const { return ir.empty() && ic.empty() && monotonicity.empty(); }
};

FeasibilityReport check_feasibility(const ContractMenu& menu, const ContractProblem& p, double tol);

/// dU_SR_j / dpi_j with f_j tied to pi_j through the binding IR (complete information).
double sr_derivative_complete(const ContractProblem& p, int j, double pi);
/// dU_SR_j / dpi_j with f_j tied to pi_j through binding LDIC against a fixed previous item.
double sr_derivative_local(const ContractProblem& p, int j, double pi, const ContractItem& prev);
/// f_j implied by pi_j through the binding IR.
double ir_frequency(const ContractProblem& p, int j, double pi);
/// f_j implied by pi_j through binding LDIC against prev (prev = {0,0} reduces to IR).
double ldic_frequency(const ContractProblem& p, int j, double pi, const ContractItem& prev);

ContractMenu solve_complete_info(const ContractProblem& p);
ContractMenu solve_local_asymmetric(const ContractProblem& p);
ContractMenu solve_lagrangian_iterative(const ContractProblem& p, int steps = 200);

/// Rewards implied by frequencies through the binding IR of type 1 and binding LDIC.
std::vector<ContractItem> assign_rewards(const ContractProblem& p, std::span<const double> f);

/// Best response of a type-theta PV to a per-Hz price.
double best_response(double theta, double price, const TaskParams& task);
ContractMenu menu_at_price(const ContractProblem& p, double price, Scheme scheme);
ContractMenu stackelberg_baseline(const ContractProblem& p);
ContractMenu linear_pricing_baseline(const ContractProblem& p);

/// Exhaustive search over monotone grid menus. Serial reference; see kernels for the parallel one.
ContractMenu grid_oracle(const ContractProblem& p, std::span<const double> f_grid, std::span<const double> pi_grid);

/// Problem file: `key = value` lines, `#` comments.
ContractProblem read_problem(std::istream& is);
void write_problem(std::ostream& os, const ContractProblem& p);

/// Menu CSV `type,theta,beta,f_hz,pi,u_pv,u_sr_term,scheme`.
void write_menu_header(std::ostream& os);
void write_menu_rows(std::ostream& os, const ContractMenu& menu, const ContractProblem& p);

}  // namespace parkedchain::contract
