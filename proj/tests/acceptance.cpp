#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifdef PC_HAVE_BOOST_MATH
#include <boost/math/special_functions/gamma.hpp>
#endif

#include "ledger_fuzz.hpp"
#include "parkedchain/consensus.hpp"
#include "parkedchain/contract.hpp"
#include "parkedchain/harness.hpp"
#include "parkedchain/kernels.hpp"
#include "parkedchain/parking.hpp"
#include "parkedchain/reputation.hpp"

using namespace parkedchain;
using contract::ContractMenu;
using contract::ContractProblem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ContractProblem random_problem(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::exponential_distribution<double> ex(1.0);
  ContractProblem p;
  while (static_cast<int>(p.theta.size()) < n) {
    const double t = u(rng);
    if (std::none_of(p.theta.begin(), p.theta.end(), [&](double x) { return std::abs(x - t) < 1e-3; }))
      p.theta.push_back(t);
  }
  std::sort(p.theta.begin(), p.theta.end());
  double s = 0;
  for (int j = 0; j < n; ++j) s += p.beta.emplace_back(ex(rng) + 0.05);
  for (auto& b : p.beta) b /= s;
  p.task.rho = std::uniform_real_distribution<double>(0.05, 0.2)(rng);
  return p;
}

std::vector<ContractMenu> asymmetric_menus(const ContractProblem& p) {
  return {contract::solve_local_asymmetric(p), contract::solve_lagrangian_iterative(p)};
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

double expected_pv(const ContractMenu& m, const ContractProblem& p) {
  const auto u = contract::pv_utilities(m, p);
  double s = 0;
  for (int j = 0; j < p.size(); ++j) s += p.beta[j] * u[j];
  return s;
}

struct Verdict {
  bool pass;
  std::string detail;
};

Verdict feasibility_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  int bad = 0, menus = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    for (const auto& m : asymmetric_menus(p)) {
      ++menus;
      bad += !contract::check_feasibility(m, p, 1e-6).feasible();
    }
  }
  const double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d/%d menus infeasible, %.2f s", bad, menus, secs);
  return {bad == 0 && secs < 60, buf};
}

Verdict bindings() {
  std::mt19937_64 rng(102);
  double worst_ir = 0, worst_ldic = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    for (const auto& m : asymmetric_menus(p)) {
      worst_ir = std::max(worst_ir, std::abs(contract::pv_utility(p.theta[0], m.items[0].f, m.items[0].pi, p.task)));
      std::vector<bool> tied(p.size(), false);
      for (auto [a, b] : m.info.bunched)
        for (int k = a + 1; k <= b; ++k) tied[k] = true;
      for (int j = 1; j < p.size(); ++j) {
        if (tied[j]) continue;
        const auto& a = m.items[j];
        const auto& b = m.items[j - 1];
        const double gap = contract::pv_utility(p.theta[j], a.f, a.pi, p.task) -
                           contract::pv_utility(p.theta[j], b.f, b.pi, p.task);
        worst_ldic = std::max(worst_ldic, std::abs(gap));
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "max |U_PV_1| %.2e, max |LDIC gap| %.2e", worst_ir, worst_ldic);
  return {worst_ir < 1e-8 && worst_ldic < 1e-8, buf};
}

Verdict oracle_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(103);
  int bad = 0;
  double worst = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_problem(rng, 1 + trial % 3);
    const auto lc = contract::solve_complete_info(p);
    double f_top = 0, pi_top = 0;
    for (const auto& it : lc.items) f_top = std::max(f_top, it.f), pi_top = std::max(pi_top, it.pi);
    const auto fg = linspace(0, 1.2 * f_top, 30);
    const auto pg = linspace(0, 1.2 * pi_top, 30);
    const auto oracle = kernels::grid_oracle(p, fg, pg, kernels::Exec::Parallel);
    const double uo = contract::sr_expected_utility(oracle, p);
    const double ul = contract::sr_expected_utility(contract::solve_lagrangian_iterative(p), p);
    // U_SR change from moving every item by one cell in both coordinates.
    const double slope = p.task.rho * p.task.cycles() / (fg[1] * fg[1]);
    double cell = 0;
    for (int j = 0; j < p.size(); ++j) cell += p.beta[j] * p.theta[j] * (slope * (fg[1] - fg[0]) + (pg[1] - pg[0]));
    const double shortfall = uo - ul;
    worst = std::max(worst, shortfall / cell);
    bad += shortfall > cell;
  }
  const double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d/30 outside one cell, worst shortfall %.3f cells, %.2f s", bad, worst, secs);
  return {bad == 0 && secs < 300, buf};
}

Verdict scheme_ordering() {
  const auto t0 = Clock::now();
  const harness::ExperimentConfig cfg;
  const auto summary = harness::load_summary(cfg);
  int hours = 0, bad_sr = 0, bad_pv = 0;
  for (int h = 0; h < 24; ++h) {
    const auto p = harness::problem_at(cfg, summary, h);
    if (p.theta.empty()) continue;
    ++hours;
    const auto menus = harness::compare_schemes(p);
    std::vector<double> sr, pv;
    for (const auto& m : menus) {
      sr.push_back(contract::sr_expected_utility(m, p));
      pv.push_back(expected_pv(m, p));
    }
    for (std::size_t k = 1; k < sr.size(); ++k) bad_sr += sr[k - 1] < sr[k] - 1e-9;
    bad_pv += std::abs(pv[0]) > 1e-9 || pv[1] < -1e-9 || pv[4] < *std::max_element(pv.begin(), pv.end()) - 1e-9;
  }
  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d hours, %d SR order violations, %d PV violations, %.2f s", hours, bad_sr, bad_pv,
                secs);
  return {hours > 0 && bad_sr == 0 && bad_pv == 0 && secs < 120, buf};
}

Verdict self_selection() {
  const harness::ExperimentConfig cfg;
  const auto summary = harness::load_summary(cfg);
  const auto p = harness::problem_at(cfg, summary, cfg.hour);
  int bad = 0, checked = 0;
  for (const auto& m : asymmetric_menus(p)) {
    for (int j = 0; j < p.size(); ++j) {
      ++checked;
      // Binding LDIC leaves type j indifferent to item j-1; ties resolve to the own item.
      const double own = contract::pv_utility(p.theta[j], m.items[j].f, m.items[j].pi, p.task);
      int best = j;
      double best_u = own;
      for (int k = 0; k < p.size(); ++k) {
        const double u = contract::pv_utility(p.theta[j], m.items[k].f, m.items[k].pi, p.task);
        if (u > best_u + 1e-12 * std::max(1.0, std::abs(best_u))) best = k, best_u = u;
      }
      bad += best != j;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d types x 2 menus, %d misselected", p.size(), bad);
  return {p.size() > 0 && bad == 0, buf};
}

// Inverse of the regularized lower incomplete gamma function.
double gamma_p_inverse(double a, double u) {
#ifdef PC_HAVE_BOOST_MATH
  return boost::math::gamma_p_inv(a, u);
#else
  double lo = 0, hi = 1;
  while (parking::gamma_p(a, hi) < u) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (parking::gamma_p(a, mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
#endif
}

double gamma_q_independent(double a, double x) {
#ifdef PC_HAVE_BOOST_MATH
  return boost::math::gamma_q(a, x);
#else
  return parking::gamma_q(a, x);
#endif
}

// Stratified Monte Carlo of the conditional stay probability: each component's
// conditional law beyond t_p is sampled through its inverse CDF.
double stay_monte_carlo(const parking::Mixture& m, double tp, double tau, int samples, std::mt19937_64& rng) {
  const double qs = m.h_short * gamma_q_independent(m.shape_short, tp / m.scale_short);
  const double ql = m.h_long * gamma_q_independent(m.shape_long, tp / m.scale_long);
  const double w_short = qs / (qs + ql);
  std::uniform_real_distribution<double> jitter(0, 1);
  auto component = [&](double shape, double scale, int n) {
    const double lo = 1 - gamma_q_independent(shape, tp / scale);
    int stay = 0;
    for (int i = 0; i < n; ++i) {
      const double u = lo + (1 - lo) * (i + jitter(rng)) / n;
      stay += scale * gamma_p_inverse(shape, std::min(u, std::nextafter(1.0, 0.0))) > tp + tau;
    }
    return static_cast<double>(stay) / n;
  };
  const int ns = std::max(1, static_cast<int>(std::lround(samples * w_short)));
  const int nl = std::max(1, samples - ns);
  return w_short * component(m.shape_short, m.scale_short, ns) +
         (1 - w_short) * component(m.shape_long, m.scale_long, nl);
}

Verdict parking_math() {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> tp(0, 6), tau(0.01, 4);
  std::uniform_int_distribution<int> hour(0, 23);
  const auto params = parking::GammaMixtureParams::defaults();
  double worst_sum = 0;
  for (int k = 0; k < 100000; ++k) {
    const parking::PVState s{k, hour(rng), tp(rng), tau(rng)};
    worst_sum = std::max(worst_sum, std::abs(parking::stay_probability(s, params) +
                                             parking::leave_probability(s, params) - 1));
  }
  std::uniform_real_distribution<double> shape(0.5, 5), scale(0.3, 3), w(0, 1);
  double worst_mc = 0;
  for (int set = 0; set < 10; ++set) {
    const double h = w(rng);
    const parking::Mixture m{h, 1 - h, shape(rng), scale(rng), shape(rng), scale(rng)};
    const double t = 0.25 * set, dt = 0.5 + 0.1 * set;
    const double want = parking::stay_probability({0, 0, t, dt}, parking::GammaMixtureParams::uniform(m));
    worst_mc = std::max(worst_mc, std::abs(stay_monte_carlo(m, t, dt, 1000000, rng) - want));
  }
  double worst_memory = 0;
  for (double s : {0.5, 1.7, 4.0}) {
    const auto p = parking::GammaMixtureParams::uniform({1, 0, 1, s, 1, s});
    for (double t = 0; t < 10; t += 0.7)
      for (double dt : {0.1, 1.0, 3.0})
        worst_memory = std::max(worst_memory, std::abs(parking::stay_probability({0, 5, t, dt}, p) -
                                                       parking::stay_probability({0, 5, 0, dt}, p)));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max |Ps+Po-1| %.1e, max MC error %.1e, max memory gap %.1e", worst_sum, worst_mc,
                worst_memory);
  return {worst_sum <= 1e-12 && worst_mc <= 1e-3 && worst_memory <= 1e-9, buf};
}

Verdict subjective_logic() {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> u01(0, 1);
  auto draw = [&] {
    double c1 = u01(rng), c2 = u01(rng);
    if (c1 > c2) std::swap(c1, c2);
    reputation::Opinion o{c1, c2 - c1, 1 - c2, u01(rng)};
    if (o.u < 1e-6) o = {o.b * 0.9, o.d * 0.9, o.u * 0.9 + 0.1, o.a};
    return o;
  };
  int bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto a = draw(), b = draw();
    const auto f = reputation::fuse_final(a, b);
    const auto n = reputation::fuse_final(a, reputation::vacuous(b.a));
    const bool closed = reputation::is_valid(f) && std::abs(f.b + f.d + f.u - 1) <= 1e-12;
    const bool neutral = std::abs(n.b - a.b) <= 1e-12 && std::abs(n.d - a.d) <= 1e-12 && std::abs(n.u - a.u) <= 1e-12;
    const bool reduces = f.u <= std::min(a.u, b.u) + 1e-12;
    bad += !(closed && neutral && reduces);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/10000 pairs violate a property", bad);
  return {bad == 0, buf};
}

Verdict detection_ordering() {
  const auto t0 = Clock::now();
  consensus::PopulationConfig cfg;
  cfg.misbehaving = 10;
  const auto runs = kernels::detection_ensemble(cfg, 0.45, 1, 100, kernels::Exec::Parallel);
  int lead = 0;
  for (const auto& r : runs) lead += r.sl_reach <= r.lr_reach && r.sl_reach <= cfg.slots;
  const double secs = seconds_since(t0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "SL full detection no later than LR in %d/100 seeds, %.2f s", lead, secs);
  return {lead >= 95 && secs < 60, buf};
}

Verdict collusion_ordering() {
  consensus::CollusionConfig cfg;
  std::vector<double> thr;
  for (int k = 1; k <= 12; ++k) thr.push_back(k / 20.0);
  const auto runs = kernels::collusion_ensemble(cfg, thr, 1, 100, kernels::Exec::Parallel);
  int bad = 0;
  double sl_mean = 0, lr_mean = 0;
  for (std::size_t t = 0; t < thr.size(); ++t) {
    int sl = 0, lr = 0;
    for (const auto& r : runs) sl += r[t].sl_correct, lr += r[t].lr_correct;
    bad += sl < lr;
    sl_mean += sl / 100.0 / thr.size();
    lr_mean += lr / 100.0 / thr.size();
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d thresholds with SL < LR, mean correct SL %.3f LR %.3f", bad, sl_mean, lr_mean);
  return {bad == 0, buf};
}

Verdict consensus_safety() {
  const auto t0 = Clock::now();
  const consensus::ConsensusConfig cfg{10, 3};
  const std::vector<consensus::ModelCheckCase> cases{{{0, 1, 2}, true}, {{1, 2, 3}, false}};
  const auto r = kernels::model_check(cfg, cases, kernels::Exec::Parallel);
  const auto bound = static_cast<std::size_t>(5 * cfg.n * cfg.n);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu views, %zu divergent, live %s, max %zu messages per view (bound %zu), %.2f s",
                r.views, r.divergent, r.failure_free_live ? "yes" : "no", r.max_messages, bound, seconds_since(t0));
  return {r.views > 0 && r.divergent == 0 && r.failure_free_live && r.max_messages <= bound, buf};
}

Verdict ledger_conservation() {
  int bad = 0;
  long long paid = 0;
  for (std::uint64_t seed = 1; seed <= 100000; ++seed) {
    const auto out = fuzz::run_sequence(seed, 40, false);
    bad += !(out.conserved && out.paid_after_verified && out.nonnegative);
    paid += out.paid;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d/100000 sequences violate an invariant, %lld payouts", bad, paid);
  return {bad == 0 && paid > 0, buf};
}

Verdict determinism() {
  const harness::ExperimentConfig cfg;
  int bad = 0;
  for (const auto& name : harness::scenario_names()) {
    std::ostringstream a, b;
    harness::run_scenario(name, cfg).write_csv(a);
    harness::run_scenario(name, cfg).write_csv(b);
    bad += a.str() != b.str() || a.str().empty();
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/%zu scenarios differ on rerun", bad, harness::scenario_names().size());
  return {bad == 0, buf};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"contract feasibility suite", feasibility_suite},
      {"IR and LDIC bindings", bindings},
      {"grid oracle optimality", oracle_optimality},
      {"scheme ordering over 24 hours", scheme_ordering},
      {"self-selection", self_selection},
      {"parking probability", parking_math},
      {"subjective logic fusion", subjective_logic},
      {"detection ordering", detection_ordering},
      {"collusion ordering", collusion_ordering},
      {"consensus safety and liveness", consensus_safety},
      {"ledger conservation", ledger_conservation},
      {"scenario determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v{false, ""};
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2zu %s: %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
