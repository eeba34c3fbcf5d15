#include "parkedchain/contract.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "contract_detail.hpp"
#include "parkedchain/error.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::contract {

Valuation Valuation::log1p() {
  Valuation v;
  v.name = "log1p";
  v.lower = -1;
  v.value = [](double x) { return std::log1p(x); };
  v.derivative = [](double x) { return 1 / (1 + x); };
  v.inverse = [](double y) { return std::expm1(y); };
  v.derivative_inverse = [](double y) { return 1 / y - 1; };
  return v;
}

Valuation Valuation::sqrt1p() {
  Valuation v;
  v.name = "sqrt1p";
  v.lower = -1;
  v.value = [](double x) { return 2 * (std::sqrt(1 + x) - 1); };
  v.derivative = [](double x) { return 1 / std::sqrt(1 + x); };
  v.inverse = [](double y) {
    const double r = y / 2 + 1;
    return r * r - 1;
  };
  v.derivative_inverse = [](double y) { return 1 / (y * y) - 1; };
  return v;
}

Valuation Valuation::by_name(const std::string& name) {
  if (name == "log1p") return log1p();
  if (name == "sqrt1p") return sqrt1p();
  throw DomainError("unknown valuation '" + name + "'");
}

void TaskParams::validate(int types) const {
  auto pos = [](double x, const char* what) {
    if (!(x > 0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be positive");
  };
  pos(rho, "profit coefficient");
  pos(cycles_per_bit, "cycles per bit");
  pos(task_bits, "task size");
  pos(f_local, "local frequency");
  pos(capacitance, "switched capacitance");
  pos(energy_price, "energy price");
  pos(f_max, "maximum frequency");
  if (rate.empty())
    pos(rate_default, "uplink rate");
  else if (static_cast<int>(rate.size()) != types)
    throw DomainError("need one uplink rate per type");
  for (double r : rate) pos(r, "uplink rate");
  if (!(f_max > f_local)) throw DomainError("maximum frequency must exceed the local frequency");
  if (!v.value || !v.derivative || !v.inverse || !v.derivative_inverse)
    throw DomainError("valuation is incomplete");
}

void ContractProblem::validate() const {
  if (theta.empty()) throw DomainError("problem needs at least one type");
  if (theta.size() != beta.size()) throw DomainError("theta and beta sizes differ");
  double sum = 0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!(theta[j] > 0) || theta[j] > 1) throw DomainError("type values must lie in (0,1]");
    if (j > 0 && !(theta[j] > theta[j - 1])) throw DomainError("type values must be strictly ascending");
    if (!(beta[j] > 0)) throw DomainError("type probabilities must be positive");
    sum += beta[j];
  }
  if (std::abs(sum - 1) > 1e-9) throw DomainError("type probabilities must sum to 1");
  task.validate(size());
}

std::string scheme_tag(Scheme s) {
  switch (s) {
    case Scheme::Complete: return "LC";
    case Scheme::Lagrangian: return "LIA";
    case Scheme::LocalAsymmetric: return "LA";
    case Scheme::Stackelberg: return "SA";
    case Scheme::Linear: return "linear";
    case Scheme::Oracle: return "oracle";
  }
  return "?";
}

double time_saved(double f, const TaskParams& task, int j) {
  if (!(f > 0)) throw DomainError("time saved needs a positive frequency");
  const double k = task.cycles();
  return task.rho * (k / task.f_local - k / f - task.task_bits / task.rate_for(j));
}

double energy_cost(double f, const TaskParams& task) {
  if (f < 0) throw DomainError("frequency must be nonnegative");
  return task.cost_coeff() * f * f;
}

double pv_utility(double theta, double f, double pi, const TaskParams& task) {
  return theta * task.v.value(pi) - task.cost_coeff() * f * f;
}

double sr_term(const ContractProblem& p, int j, const ContractItem& item) {
  const double w = p.beta[j] * p.theta[j];
  if (item.f <= 0) return -w * item.pi;
  return w * (time_saved(item.f, p.task, j) - item.pi);
}

double sr_expected_utility(std::span<const ContractItem> items, const ContractProblem& p) {
  if (static_cast<int>(items.size()) != p.size()) throw DomainError("menu size differs from type count");
  double u = 0;
  for (int j = 0; j < p.size(); ++j) u += sr_term(p, j, items[j]);
  return u;
}

double sr_expected_utility(const ContractMenu& menu, const ContractProblem& p) {
  return sr_expected_utility(menu.items, p);
}

std::vector<double> pv_utilities(const ContractMenu& menu, const ContractProblem& p) {
  std::vector<double> out;
  for (int j = 0; j < p.size(); ++j)
    out.push_back(pv_utility(p.theta[j], menu.items[j].f, menu.items[j].pi, p.task));
  return out;
}

FeasibilityReport check_feasibility(const ContractMenu& menu, const ContractProblem& p, double tol) {
  FeasibilityReport r;
  const int n = p.size();
  if (static_cast<int>(menu.items.size()) != n) throw DomainError("menu size differs from type count");
  for (int j = 0; j < n; ++j) {
    const auto& it = menu.items[j];
    const double own = pv_utility(p.theta[j], it.f, it.pi, p.task);
    if (own < -tol) r.ir.push_back(j);
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      const auto& other = menu.items[k];
      if (pv_utility(p.theta[j], other.f, other.pi, p.task) > own + tol) r.ic.emplace_back(j, k);
    }
    if (it.f < 0 || it.f > p.task.f_max * (1 + tol) ||
        (j > 0 && it.f < menu.items[j - 1].f - tol * std::max(menu.items[j - 1].f, 1.0)))
      r.monotonicity.push_back(j);
  }
  return r;
}

double ldic_frequency(const ContractProblem& p, int j, double pi, const ContractItem& prev) {
  const auto& v = p.task.v;
  const double prev_u = prev.f > 0 || prev.pi != 0 ? v.value(prev.pi) : 0.0;
  const double f2 = prev.f * prev.f + p.theta[j] * (v.value(pi) - prev_u) / p.task.cost_coeff();
  return f2 > 0 ? std::sqrt(f2) : 0.0;
}

double ir_frequency(const ContractProblem& p, int j, double pi) { return ldic_frequency(p, j, pi, {}); }

double sr_derivative_local(const ContractProblem& p, int j, double pi, const ContractItem& prev) {
  const double f = ldic_frequency(p, j, pi, prev);
  if (!(f > 0)) return std::numeric_limits<double>::infinity();
  const auto& t = p.task;
  const double w = p.beta[j] * p.theta[j];
  return w * (t.rho * t.cycles() * p.theta[j] * t.v.derivative(pi) / (2 * t.cost_coeff() * f * f * f) - 1);
}

double sr_derivative_complete(const ContractProblem& p, int j, double pi) {
  return sr_derivative_local(p, j, pi, {});
}

namespace {

// Maximizes type j's SR term over pi with f_j tied to pi through binding LDIC
// against prev (binding IR when prev is the zero item). Returns the item and
// whether the lower bound was active.
struct TypeSolution {
  ContractItem item;
  bool at_lower = false;
  bool at_fmax = false;
  double residual = 0;
  int iterations = 0;
};

TypeSolution solve_type(const ContractProblem& p, int j, const ContractItem& prev) {
  const auto& t = p.task;
  auto g = [&](double pi) { return sr_derivative_local(p, j, pi, prev); };
  TypeSolution s;
  const double lo0 = prev.pi;
  double lo = lo0;
  if (prev.f > 0 && !(g(lo) > 0)) {
    s.item = prev;
    s.at_lower = true;
    s.residual = g(lo);
    return s;
  }
  double cap = 1.0;
  const double s_max = time_saved(t.f_max, t, j);
  if (s_max > 0) cap = std::max(cap, t.v.inverse(2 * s_max / p.theta[j]));
  double hi = lo0 + cap;
  int expansions = 0;
  while (!(g(hi) < 0)) {
    lo = hi;
    hi = lo0 + 2 * (hi - lo0);
    if (++expansions > 200 || !std::isfinite(hi)) {
      std::ostringstream os;
      os << "reward root not bracketed for type " << j + 1 << " (theta " << p.theta[j] << ", upper " << hi
         << ")";
      throw SolverError(os.str());
    }
  }
  int it = 0;
  for (; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  const double pi = 0.5 * (lo + hi);
  s.iterations = it + expansions;
  s.item = {ldic_frequency(p, j, pi, prev), pi};
  s.residual = g(pi);
  if (s.item.f > t.f_max) {
    s.at_fmax = true;
    const double prev_u = prev.f > 0 ? t.v.value(prev.pi) : 0.0;
    s.item.f = t.f_max;
    s.item.pi = t.v.inverse(prev_u + t.cost_coeff() * (t.f_max * t.f_max - prev.f * prev.f) / p.theta[j]);
  }
  return s;
}

}  // namespace

ContractMenu solve_complete_info(const ContractProblem& p) {
  p.validate();
  ContractMenu m;
  m.scheme = Scheme::Complete;
  for (int j = 0; j < p.size(); ++j) {
    auto s = solve_type(p, j, {});
    m.info.iterations += s.iterations;
    m.info.residual = std::max(m.info.residual, std::abs(s.residual));
    if (sr_term(p, j, s.item) < 0) {
      s.item = {};
      m.info.excluded.push_back(j);
    }
    m.items.push_back(s.item);
  }
  return m;
}

ContractMenu solve_local_asymmetric(const ContractProblem& p) {
  p.validate();
  ContractMenu m;
  m.scheme = Scheme::LocalAsymmetric;
  ContractItem prev{};
  for (int j = 0; j < p.size(); ++j) {
    auto s = solve_type(p, j, prev);
    m.info.iterations += s.iterations;
    m.info.residual = std::max(m.info.residual, s.at_lower ? 0.0 : std::abs(s.residual));
    if (s.at_lower) {
      if (m.info.bunched.empty() || m.info.bunched.back().second != j - 1)
        m.info.bunched.emplace_back(j - 1, j);
      else
        m.info.bunched.back().second = j;
    }
    m.items.push_back(s.item);
    prev = s.item;
  }
  return m;
}

std::vector<ContractItem> assign_rewards(const ContractProblem& p, std::span<const double> f) {
  const auto& t = p.task;
  const double c = t.cost_coeff();
  std::vector<ContractItem> out;
  double u = 0, prev_f = 0;
  for (int j = 0; j < p.size(); ++j) {
    u += c * (f[j] * f[j] - prev_f * prev_f) / p.theta[j];
    out.push_back({f[j], t.v.inverse(u)});
    prev_f = f[j];
  }
  return out;
}

namespace detail {

Recursion backward_recursion(const ContractProblem& p, double f_top) {
  const auto& t = p.task;
  const int n = p.size();
  const double c = t.cost_coeff();
  const double rk = t.rho * t.cycles();
  Recursion r;
  r.f.assign(n, 0);
  r.pi.assign(n, 0);
  r.omega.assign(n, 0);
  r.f[n - 1] = f_top;
  r.omega[n - 1] = p.beta[n - 1] * p.theta[n - 1] * rk / (2 * c * f_top * f_top * f_top);
  r.pi[n - 1] = t.v.derivative_inverse(p.beta[n - 1] / r.omega[n - 1]);
  for (int j = n - 2; j >= 0; --j) {
    const double on = r.omega[j + 1], tn = p.theta[j + 1], tj = p.theta[j], bj = p.beta[j];
    const double fn = r.f[j + 1];
    const double un = t.v.value(r.pi[j + 1]);
    const double a = bj * tj * rk / (2 * c);
    // Denominator omega_j theta_j - omega_{j+1} theta_{j+1} stays positive below f_crit.
    const double f_crit = std::cbrt(a * tj / (on * (tn - tj)));
    auto pi_of = [&](double fj) {
      const double oj = on + a / (fj * fj * fj);
      return t.v.derivative_inverse(bj * tj / (oj * tj - on * tn));
    };
    auto resid = [&](double fj) { return t.v.value(pi_of(fj)) - un + c * (fn * fn - fj * fj) / tn; };
    double lo = f_crit * 1e-6, hi = f_crit;
    while (!(resid(lo) > 0) && lo > f_crit * 1e-300) lo *= 1e-3;
    if (!(resid(lo) > 0)) return r;
    for (int it = 0; it < 300 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (resid(mid) > 0 ? lo : hi) = mid;
    }
    r.f[j] = 0.5 * (lo + hi);
    r.omega[j] = on + a / (r.f[j] * r.f[j] * r.f[j]);
    r.pi[j] = pi_of(r.f[j]);
  }
  r.ok = true;
  r.ir_residual = p.theta[0] * t.v.value(r.pi[0]) - c * r.f[0] * r.f[0];
  return r;
}

double golden_max(const std::function<double(double)>& fn, double lo, double hi, double rel_tol) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = fn(x1), f2 = fn(x2);
  for (int it = 0; it < 500 && (b - a) > rel_tol * std::max(std::abs(a), std::abs(b)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = fn(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = fn(x1);
    }
  }
  // Endpoints are candidates too: the maximum may sit on the bracket boundary.
  double best = 0.5 * (a + b), fb = fn(best);
  for (double x : {lo, hi}) {
    const double fx = fn(x);
    if (fx > fb) best = x, fb = fx;
  }
  return best;
}

std::vector<std::pair<int, int>> iron(const ContractProblem& p, std::vector<double>& f) {
  const int n = p.size();
  const double f_max = p.task.f_max;
  std::vector<std::pair<int, int>> ranges;
  auto objective = [&](const std::vector<double>& fv) {
    const auto items = assign_rewards(p, fv);
    return sr_expected_utility(items, p);
  };
  for (int round = 0; round < n * n + 10; ++round) {
    int j = 1;
    while (j < n && !(f[j] < f[j - 1])) ++j;
    if (j >= n) break;
    int m = j - 1;
    while (m > 0 && f[m - 1] == f[m]) --m;
    int e = j;
    while (e + 1 < n && f[e + 1] <= f[m]) ++e;
    double lo = m > 0 ? f[m - 1] : f[m] * 1e-3;
    double hi = e + 1 < n ? f[e + 1] : f_max;
    if (lo > hi) std::swap(lo, hi);
    auto trial = f;
    auto value = [&](double x) {
      for (int k = m; k <= e; ++k) trial[k] = x;
      return objective(trial);
    };
    const double x = golden_max(value, lo, hi, 1e-13);
    for (int k = m; k <= e; ++k) f[k] = x;
    ranges.emplace_back(m, e);
  }
  // Report maximal runs of equal values that came out of ironing.
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < n;) {
    int b = a;
    while (b + 1 < n && f[b + 1] == f[a]) ++b;
    const bool ironed = std::any_of(ranges.begin(), ranges.end(),
                                    [&](auto r) { return r.first >= a && r.second <= b; });
    if (b > a && ironed) out.emplace_back(a, b);
    a = b + 1;
  }
  return out;
}

}  // namespace detail

namespace {

ContractMenu lagrangian_all_served(const ContractProblem& p, int steps) {
  const int n = p.size();
  const auto lc = solve_complete_info(p);
  const auto la = solve_local_asymmetric(p);
  const double f_bar = lc.items[n - 1].f > 0 ? lc.items[n - 1].f : la.items[n - 1].f;
  const double f_dot = la.items[n - 1].f;
  double delta = (f_bar - f_dot) / steps;
  if (std::abs(delta) < 1e-9 * f_bar) delta = 0.5 * f_bar / steps;

  auto residual = [&](double f_top) {
    const auto r = detail::backward_recursion(p, f_top);
    return r.ok ? r.ir_residual : std::numeric_limits<double>::quiet_NaN();
  };

  std::vector<double> grid;
  for (int k = 0; k <= steps; ++k) {
    const double x = f_bar - k * delta;
    if (x > 0) grid.push_back(x);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<std::pair<double, double>> brackets;
  auto scan = [&](const std::vector<double>& xs) {
    double px = 0, pr = std::numeric_limits<double>::quiet_NaN();
    for (double x : xs) {
      const double r = residual(x);
      if (r == 0) brackets.emplace_back(x, x);
      else if (std::isfinite(pr) && std::isfinite(r) && (pr < 0) != (r < 0))
        brackets.emplace_back(px, x);
      px = x;
      pr = r;
    }
  };
  scan(grid);
  int evaluations = static_cast<int>(grid.size());
  if (brackets.empty()) {
    // Widen geometrically on both sides of the nominal bracket.
    std::vector<double> wide;
    for (double x = grid.front(); x > grid.front() * 1e-4; x /= 1.02) wide.push_back(x);
    std::reverse(wide.begin(), wide.end());
    for (double x = grid.back() * 1.02; x < p.task.f_max * 4; x *= 1.02) wide.push_back(x);
    evaluations += static_cast<int>(wide.size());
    scan(wide);
  }
  if (brackets.empty())
    throw SolverError("no feasible candidate for the top frequency: increase the step count or widen the bracket");

  ContractMenu best;
  double best_u = -std::numeric_limits<double>::infinity();
  for (auto [lo, hi] : brackets) {
    double rlo = residual(lo);
    for (int it = 0; it < 300 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double rm = residual(mid);
      if ((rm < 0) == (rlo < 0)) {
        lo = mid;
        rlo = rm;
      } else {
        hi = mid;
      }
    }
    const double f_top = std::abs(residual(lo)) < std::abs(residual(hi)) ? lo : hi;
    const auto rec = detail::backward_recursion(p, f_top);
    if (!rec.ok) continue;
    auto f = rec.f;
    for (auto& x : f) x = std::min(x, p.task.f_max);
    ContractMenu m;
    m.scheme = Scheme::Lagrangian;
    m.info.bunched = detail::iron(p, f);
    m.items = assign_rewards(p, f);
    m.info.residual = std::abs(rec.ir_residual);
    m.info.grid_steps = steps;
    m.info.iterations = evaluations;
    if (detail::polish(p, m)) m.info.polished = true;
    const double u = sr_expected_utility(m, p);
    if (u > best_u) {
      best_u = u;
      best = std::move(m);
    }
  }
  if (best.items.empty()) throw SolverError("backward recursion failed for every bracketed candidate");
  return best;
}

}  // namespace

ContractMenu solve_lagrangian_iterative(const ContractProblem& p, int steps) {
  p.validate();
  if (steps < 10) throw DomainError("Lagrangian search needs at least 10 steps");
  const int n = p.size();
  // The lowest k types may be served the null item; the rest form a smaller
  // problem whose first type carries the binding IR.
  ContractMenu best;
  best.scheme = Scheme::Lagrangian;
  best.items.assign(n, ContractItem{});
  for (int j = 0; j < n; ++j) best.info.excluded.push_back(j);
  double best_u = 0;
  std::string last_error;
  bool solved = false;
  for (int k = 0; k < n; ++k) {
    ContractProblem sub;
    sub.task = p.task;
    if (!sub.task.rate.empty()) sub.task.rate.assign(p.task.rate.begin() + k, p.task.rate.end());
    sub.theta.assign(p.theta.begin() + k, p.theta.end());
    sub.beta.assign(p.beta.begin() + k, p.beta.end());
    double mass = 0;
    for (double b : sub.beta) mass += b;
    for (double& b : sub.beta) b /= mass;
    ContractMenu m;
    try {
      m = lagrangian_all_served(sub, steps);
    } catch (const SolverError& e) {
      last_error = e.what();
      continue;
    }
    solved = true;
    ContractMenu full;
    full.scheme = Scheme::Lagrangian;
    full.info = m.info;
    full.info.excluded.clear();
    full.info.bunched.clear();
    for (int j = 0; j < k; ++j) {
      full.items.push_back({});
      full.info.excluded.push_back(j);
    }
    for (const auto& it : m.items) full.items.push_back(it);
    for (auto [a, b] : m.info.bunched) full.info.bunched.emplace_back(a + k, b + k);
    const double u = sr_expected_utility(full, p);
    if (u > best_u) {
      best_u = u;
      best = std::move(full);
    }
  }
  if (!solved) throw SolverError(last_error);
  return best;
}

double best_response(double theta, double price, const TaskParams& task) {
  if (price < 0) throw DomainError("price must be nonnegative");
  if (price == 0) return 0;
  const double c = task.cost_coeff();
  double f;
  if (task.v.name == "log1p") {
    // Root of 2cp f^2 + 2c f - theta p = 0 in cancellation-free form.
    f = theta * price / (c + std::sqrt(c * c + 2 * c * theta * price * price));
  } else {
    auto h = [&](double x) { return theta * price * task.v.derivative(price * x) - 2 * c * x; };
    double lo = 0, hi = task.f_max;
    if (h(hi) > 0) return task.f_max;
    for (int it = 0; it < 300 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0 ? lo : hi) = mid;
    }
    f = 0.5 * (lo + hi);
  }
  return std::min(f, task.f_max);
}

ContractMenu menu_at_price(const ContractProblem& p, double price, Scheme scheme) {
  ContractMenu m;
  m.scheme = scheme;
  m.info.price = price;
  for (int j = 0; j < p.size(); ++j) {
    const double f = best_response(p.theta[j], price, p.task);
    m.items.push_back({f, price * f});
  }
  return m;
}

static double price_scale(const ContractProblem& p) {
  const auto lc = solve_complete_info(p);
  double num = 0, den = 0;
  for (const auto& it : lc.items) {
    num += it.pi;
    den += it.f;
  }
  return den > 0 && num > 0 ? num / den : 1 / p.task.f_local;
}

ContractMenu stackelberg_baseline(const ContractProblem& p) {
  p.validate();
  const double p0 = price_scale(p);
  auto u_at = [&](double logp) {
    return sr_expected_utility(menu_at_price(p, std::exp(logp), Scheme::Stackelberg), p);
  };
  const double lo = std::log(p0) - 6 * std::log(10.0), hi = std::log(p0) + 6 * std::log(10.0);
  const int k = 480;
  int best_k = -1;
  double best_u = 0;  // price 0: no trade
  for (int i = 0; i <= k; ++i) {
    const double u = u_at(lo + (hi - lo) * i / k);
    if (u > best_u) best_u = u, best_k = i;
  }
  if (best_k < 0) return menu_at_price(p, 0, Scheme::Stackelberg);
  const double a = lo + (hi - lo) * std::max(best_k - 1, 0) / k;
  const double b = lo + (hi - lo) * std::min(best_k + 1, k) / k;
  const double x = detail::golden_max(u_at, a, b, 1e-14);
  auto m = menu_at_price(p, std::exp(x), Scheme::Stackelberg);
  m.info.iterations = k + 1;
  return m;
}

ContractMenu linear_pricing_baseline(const ContractProblem& p) {
  p.validate();
  const auto& t = p.task;
  const double p0 = price_scale(p);
  // Excess demand of a price-taking SR whose demand satisfies S'(f) = c.
  auto excess = [&](double logc) {
    const double c = std::exp(logc);
    const double demand = std::min(std::sqrt(t.rho * t.cycles() / c), t.f_max);
    double d = 0;
    for (int j = 0; j < p.size(); ++j)
      d += p.beta[j] * p.theta[j] * (demand - best_response(p.theta[j], c, t));
    return d;
  };
  double lo = std::log(p0) - 8 * std::log(10.0), hi = std::log(p0) + 8 * std::log(10.0);
  if (!(excess(lo) > 0) || !(excess(hi) < 0)) throw SolverError("linear price not bracketed");
  int it = 0;
  for (; it < 300 && hi - lo > 1e-15 * std::abs(hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0 ? lo : hi) = mid;
  }
  auto m = menu_at_price(p, std::exp(0.5 * (lo + hi)), Scheme::Linear);
  m.info.iterations = it;
  m.info.residual = std::abs(excess(0.5 * (lo + hi)));
  return m;
}

ContractMenu grid_oracle(const ContractProblem& p, std::span<const double> f_grid, std::span<const double> pi_grid) {
  detail::OracleSearch search(p, f_grid, pi_grid);
  detail::OracleBest best;
  for (std::size_t a = 0; a < search.candidates(); ++a) search.branch(a, best);
  return search.menu(best);
}

namespace detail {

OracleSearch::OracleSearch(const ContractProblem& p, std::span<const double> f_grid,
                           std::span<const double> pi_grid)
    : p_(p) {
  p.validate();
  if (p.size() > 4) throw DomainError("grid oracle supports at most 4 types");
  if (f_grid.size() > 30 || pi_grid.size() > 30) throw DomainError("grid oracle supports at most 30 points per axis");
  std::vector<double> fs(f_grid.begin(), f_grid.end()), ps(pi_grid.begin(), pi_grid.end());
  std::sort(fs.begin(), fs.end());
  std::sort(ps.begin(), ps.end());
  for (double f : fs)
    for (double pi : ps)
      if (f >= 0 && f <= p.task.f_max && pi >= 0) items_.push_back({f, pi});
  const int n = p.size();
  util_.assign(static_cast<std::size_t>(n) * items_.size(), 0);
  term_.assign(static_cast<std::size_t>(n) * items_.size(), 0);
  bound_.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < items_.size(); ++a) {
      util_[j * items_.size() + a] = pv_utility(p.theta[j], items_[a].f, items_[a].pi, p.task);
      term_[j * items_.size() + a] = sr_term(p, j, items_[a]);
      mx = std::max(mx, term_[j * items_.size() + a]);
    }
    bound_[j] = mx;
  }
  // bound_[j] becomes the best possible sum of terms for types j..n-1.
  for (int j = n - 1; j >= 0; --j) bound_[j] += bound_[j + 1];
}

void OracleSearch::branch(std::size_t first, OracleBest& best) const {
  std::vector<std::size_t> chosen{first};
  if (util_[first] < -kSlack) return;
  dfs(chosen, term_[first], best);
}

void OracleSearch::dfs(std::vector<std::size_t>& chosen, double partial, OracleBest& best) const {
  const int n = p_.size();
  const std::size_t m = items_.size();
  const int j = static_cast<int>(chosen.size());
  if (j == n) {
    if (partial > best.value) {
      best.value = partial;
      best.items = chosen;
    }
    return;
  }
  if (partial + bound_[j] <= best.value) return;
  const auto& last = items_[chosen.back()];
  for (std::size_t a = chosen.back(); a < m; ++a) {
    if (items_[a].pi < last.pi) continue;
    const double own = util_[j * m + a];
    if (own < -kSlack) continue;
    bool ok = true;
    for (int k = 0; k < j && ok; ++k) {
      const std::size_t b = chosen[k];
      ok = own >= util_[j * m + b] - kSlack && util_[k * m + b] >= util_[k * m + a] - kSlack;
    }
    if (!ok) continue;
    chosen.push_back(a);
    dfs(chosen, partial + term_[j * m + a], best);
    chosen.pop_back();
  }
}

ContractMenu OracleSearch::menu(const OracleBest& best) const {
  ContractMenu m;
  m.scheme = Scheme::Oracle;
  if (best.items.empty()) throw SolverError("grid oracle found no feasible menu");
  for (auto a : best.items) m.items.push_back(items_[a]);
  m.info.residual = best.value;
  return m;
}

}  // namespace detail

ContractProblem read_problem(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", row);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const auto key = trim(line.substr(0, eq));
    if (kv.count(key)) throw ParseError("duplicate key '" + key + "'", row);
    kv[key] = trim(line.substr(eq + 1));
  }
  auto list = [&](const std::string& key) {
    std::vector<double> out;
    std::istringstream ss(kv.at(key));
    std::string tok;
    while (ss >> tok) out.push_back(parse_double(tok));
    return out;
  };
  ContractProblem p;
  if (!kv.count("theta") || !kv.count("beta")) throw ParseError("problem needs theta and beta");
  p.theta = list("theta");
  p.beta = list("beta");
  auto num = [&](const std::string& key, double& dst) {
    if (kv.count(key)) dst = parse_double(kv.at(key));
  };
  auto& t = p.task;
  num("rho", t.rho);
  num("cycles_per_bit", t.cycles_per_bit);
  num("task_bits", t.task_bits);
  num("f_local_hz", t.f_local);
  num("capacitance", t.capacitance);
  num("energy_price", t.energy_price);
  num("f_max_hz", t.f_max);
  if (kv.count("rate_bps")) {
    auto r = list("rate_bps");
    if (r.size() == 1)
      t.rate_default = r[0];
    else
      t.rate = r;
  }
  if (kv.count("valuation")) t.v = Valuation::by_name(kv.at("valuation"));
  static const char* known[] = {"types",       "theta",        "beta",     "rho",       "cycles_per_bit",
                                "task_bits",   "f_local_hz",   "rate_bps", "capacitance", "energy_price",
                                "f_max_hz",    "valuation"};
  for (const auto& [k, v] : kv)
    if (std::find(std::begin(known), std::end(known), k) == std::end(known))
      throw ParseError("unknown key '" + k + "'");
  if (kv.count("types") && parse_int(kv.at("types")) != static_cast<long long>(p.theta.size()))
    throw ParseError("types does not match the number of theta values");
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  return p;
}

void write_problem(std::ostream& os, const ContractProblem& p) {
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
    return s;
  };
  const auto& t = p.task;
  os << "types = " << p.size() << '\n'
     << "theta = " << list(p.theta) << '\n'
     << "beta = " << list(p.beta) << '\n'
     << "rho = " << fmt(t.rho) << '\n'
     << "cycles_per_bit = " << fmt(t.cycles_per_bit) << '\n'
     << "task_bits = " << fmt(t.task_bits) << '\n'
     << "f_local_hz = " << fmt(t.f_local) << '\n'
     << "rate_bps = " << (t.rate.empty() ? fmt(t.rate_default) : list(t.rate)) << '\n'
     << "capacitance = " << fmt(t.capacitance) << '\n'
     << "energy_price = " << fmt(t.energy_price) << '\n'
     << "f_max_hz = " << fmt(t.f_max) << '\n'
     << "valuation = " << t.v.name << '\n';
}

void write_menu_header(std::ostream& os) { os << "type,theta,beta,f_hz,pi,u_pv,u_sr_term,scheme\n"; }

void write_menu_rows(std::ostream& os, const ContractMenu& menu, const ContractProblem& p) {
  for (int j = 0; j < p.size(); ++j) {
    const auto& it = menu.items[j];
    os << j + 1 << ',' << fmt(p.theta[j]) << ',' << fmt(p.beta[j]) << ',' << fmt(it.f) << ',' << fmt(it.pi)
       << ',' << fmt(pv_utility(p.theta[j], it.f, it.pi, p.task)) << ',' << fmt(sr_term(p, j, it)) << ','
       << scheme_tag(menu.scheme) << '\n';
  }
}

}  // namespace parkedchain::contract
