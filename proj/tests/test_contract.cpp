#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "parkedchain/contract.hpp"
#include "parkedchain/error.hpp"
#include "parkedchain/harness.hpp"
#include "parkedchain/kernels.hpp"

using namespace parkedchain;
using namespace parkedchain::contract;

namespace {

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

ContractProblem default_instance(int hour = 9) {
  harness::ExperimentConfig cfg;
  static const auto summary = harness::load_summary(cfg);
  return harness::problem_at(cfg, summary, hour);
}

double ldic_gap(const ContractProblem& p, const ContractMenu& m, int j) {
  const auto& a = m.items[j];
  const auto& b = m.items[j - 1];
  return pv_utility(p.theta[j], a.f, a.pi, p.task) - pv_utility(p.theta[j], b.f, b.pi, p.task);
}

}  // namespace

TEST_CASE("time saved examples") {
  TaskParams t;
  t.rate_default = t.task_bits / 0.8;
  CHECK(time_saved(1e9, t, 0) == doctest::Approx(3.92).epsilon(1e-12));
  TaskParams z;
  z.rate_default = 1e300;
  CHECK(std::abs(time_saved(z.f_local, z, 0)) < 1e-12);
  CHECK(time_saved(2e9, t, 0) > time_saved(1e9, t, 0));
  CHECK_THROWS_AS(time_saved(0, t, 0), DomainError);
  CHECK_THROWS_AS(time_saved(-1, t, 0), DomainError);
}

TEST_CASE("energy cost and PV utility examples") {
  TaskParams t;
  CHECK(energy_cost(0, t) == 0);
  CHECK(energy_cost(1e9, t) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(energy_cost(2e9, t) == doctest::Approx(4 * energy_cost(1e9, t)).epsilon(1e-12));
  CHECK(pv_utility(0.5, 0, 0, t) == 0);
  CHECK(pv_utility(0.5, 1e9, std::exp(1.0) - 1, t) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pv_utility(0.5, 1e9, 2, t) > pv_utility(0.5, 1e9, 1, t));
  CHECK(pv_utility(0.5, 2e9, 1, t) < pv_utility(0.5, 1e9, 1, t));
}

TEST_CASE("SR expected utility examples") {
  ContractProblem p;
  p.theta = {1};
  p.beta = {1};
  p.task.rate_default = p.task.task_bits / 0.8;
  ContractMenu m;
  m.items = {{1e9, 1}};
  CHECK(sr_expected_utility(m, p) == doctest::Approx(2.92).epsilon(1e-12));
  m.items = {{1e9, time_saved(1e9, p.task, 0)}};
  CHECK(std::abs(sr_expected_utility(m, p)) < 1e-12);

  std::mt19937_64 rng(5);
  const auto q = random_problem(rng, 4);
  std::vector<ContractItem> items{{1e9, 1}, {1.2e9, 2}, {1.5e9, 3}, {2e9, 4}};
  const double base = sr_expected_utility(items, q);
  for (int j = 0; j < 4; ++j) {
    auto up = items;
    up[j].pi += 1;
    CHECK(sr_expected_utility(up, q) - base == doctest::Approx(-q.beta[j] * q.theta[j]).epsilon(1e-9));
  }
}

TEST_CASE("valuations satisfy their contract") {
  for (const auto& v : {Valuation::log1p(), Valuation::sqrt1p()}) {
    CHECK(v.value(0) == 0);
    for (double x : {0.1, 1.0, 7.5, 100.0}) {
      const double h = 1e-5 * std::max(1.0, x);
      CHECK(v.derivative(x) > 0);
      CHECK((v.value(x + h) - v.value(x - h)) / (2 * h) == doctest::Approx(v.derivative(x)).epsilon(1e-7));
      CHECK(v.value(x + h) - 2 * v.value(x) + v.value(x - h) < 0);
      CHECK(v.inverse(v.value(x)) == doctest::Approx(x).epsilon(1e-12));
      CHECK(v.derivative_inverse(v.derivative(x)) == doctest::Approx(x).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(Valuation::by_name("cubic"), DomainError);
}

TEST_CASE("feasibility checker flags exactly the perturbed pair") {
  ContractProblem p;
  p.theta = {0.3, 0.6};
  p.beta = {0.5, 0.5};
  ContractMenu zero;
  zero.items = {{0, 0}, {0, 0}};
  CHECK(check_feasibility(zero, p, 1e-9).feasible());

  auto m = solve_local_asymmetric(p);
  REQUIRE(check_feasibility(m, p, 1e-9).feasible());
  m.items[0].pi *= 1.5;  // item 1 now pays more than type 2's own item is worth to it
  const auto r = check_feasibility(m, p, 1e-9);
  REQUIRE(r.ic.size() == 1);
  CHECK(r.ic[0] == std::pair{1, 0});
  CHECK(r.ir.empty());
}

TEST_CASE("complete information leaves every PV at zero utility") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 1 + trial % 7);
    const auto m = solve_complete_info(p);
    for (int j = 0; j < p.size(); ++j) {
      const auto& it = m.items[j];
      CHECK(std::abs(pv_utility(p.theta[j], it.f, it.pi, p.task)) < 1e-9);
      if (it.f > 0 && it.f < p.task.f_max) CHECK(std::abs(sr_derivative_complete(p, j, it.pi)) < 1e-8);
    }
  }
}

TEST_CASE("analytic SR derivatives match central differences") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto p = random_problem(rng, 3);
    const int j = trial % 3;
    const ContractItem prev{0.6e9, 0.8};
    for (double pi : {0.9, 2.0, 5.0}) {
      auto sr_local = [&](double x) { return sr_term(p, j, {ldic_frequency(p, j, x, prev), x}); };
      auto sr_ir = [&](double x) { return sr_term(p, j, {ir_frequency(p, j, x), x}); };
      const double h = 1e-5 * pi;
      const double fd_local = (sr_local(pi + h) - sr_local(pi - h)) / (2 * h);
      const double fd_ir = (sr_ir(pi + h) - sr_ir(pi - h)) / (2 * h);
      CHECK(sr_derivative_local(p, j, pi, prev) == doctest::Approx(fd_local).epsilon(1e-6));
      CHECK(sr_derivative_complete(p, j, pi) == doctest::Approx(fd_ir).epsilon(1e-6));
    }
  }
}

TEST_CASE("SR term is concave in the reward at every solver optimum") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 5);
    const auto lc = solve_complete_info(p);
    const auto la = solve_local_asymmetric(p);
    for (int j = 0; j < p.size(); ++j) {
      const double pi = lc.items[j].pi;
      if (lc.items[j].f <= 0 || lc.items[j].f >= p.task.f_max) continue;
      const double h = 1e-3 * pi;
      auto g = [&](double x) { return sr_term(p, j, {ir_frequency(p, j, x), x}); };
      CHECK(g(pi + h) - 2 * g(pi) + g(pi - h) < 1e-12 * std::abs(g(pi)));
    }
    ContractItem prev{};
    for (int j = 0; j < p.size(); ++j) {
      const auto it = la.items[j];
      if (it.pi > prev.pi && it.f < p.task.f_max) {
        const double h = 1e-3 * (it.pi - prev.pi);
        auto g = [&](double x) { return sr_term(p, j, {ldic_frequency(p, j, x, prev), x}); };
        // Very low types need astronomically large rewards; there only rounding is left.
        CHECK(g(it.pi + h) - 2 * g(it.pi) + g(it.pi - h) < 1e-12 * std::abs(g(it.pi)));
      }
      prev = it;
    }
  }
}

TEST_CASE("asymmetric solvers are feasible with binding IR and LDIC") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    for (const auto& m : {solve_local_asymmetric(p), solve_lagrangian_iterative(p)}) {
      CAPTURE(scheme_tag(m.scheme));
      CAPTURE(trial);
      const auto r = check_feasibility(m, p, 1e-6);
      CHECK(r.feasible());
      const auto& first = m.items[0];
      CHECK(std::abs(pv_utility(p.theta[0], first.f, first.pi, p.task)) < 1e-8);
      for (int j = 1; j < p.size(); ++j) CHECK(std::abs(ldic_gap(p, m, j)) < 1e-8);
      const auto u = pv_utilities(m, p);
      for (double x : u) CHECK(x >= -1e-9);
      for (int j = 1; j < p.size(); ++j) {
        CHECK(m.items[j].f >= m.items[j - 1].f);
        CHECK(m.items[j].pi >= m.items[j - 1].pi);
      }
    }
  }
}

TEST_CASE("ironed ranges share one item and strict rises elsewhere") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    const auto m = solve_lagrangian_iterative(p);
    std::vector<bool> tied(p.size(), false);
    for (auto [a, b] : m.info.bunched) {
      for (int k = a + 1; k <= b; ++k) {
        tied[k] = true;
        CHECK(m.items[k].f == m.items[a].f);
        CHECK(m.items[k].pi == doctest::Approx(m.items[a].pi).epsilon(1e-12));
      }
    }
    for (int j = 1; j < p.size(); ++j)
      if (!tied[j] && m.items[j].f != m.items[j - 1].f) CHECK(m.items[j].pi > m.items[j - 1].pi);
  }
}

TEST_CASE("each type picks its own item") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    const auto m = solve_lagrangian_iterative(p);
    for (int j = 0; j < p.size(); ++j) {
      const double own = pv_utility(p.theta[j], m.items[j].f, m.items[j].pi, p.task);
      for (int k = 0; k < p.size(); ++k)
        CHECK(pv_utility(p.theta[j], m.items[k].f, m.items[k].pi, p.task) <= own + 1e-9);
    }
  }
}

TEST_CASE("Lagrangian search dominates the local solution") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(rng, 2 + trial % 6);
    const double lia = sr_expected_utility(solve_lagrangian_iterative(p), p);
    CHECK(lia >= sr_expected_utility(solve_local_asymmetric(p), p) - 1e-9);
    CHECK(lia <= sr_expected_utility(solve_complete_info(p), p) + 1e-9);
  }
}

TEST_CASE("single type reduces to complete information") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 1);
    const auto lc = solve_complete_info(p);
    const auto lia = solve_lagrangian_iterative(p);
    CHECK(lia.items[0].f == doctest::Approx(lc.items[0].f).epsilon(1e-8));
    CHECK(lia.items[0].pi == doctest::Approx(lc.items[0].pi).epsilon(1e-8));
  }
  ContractProblem p;
  p.theta = {0.5};
  p.beta = {1};
  CHECK_THROWS_AS(solve_lagrangian_iterative(p, 5), DomainError);
}

TEST_CASE("reward assignment reproduces binding constraints") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_problem(rng, 4);
    std::vector<double> f{0.4e9, 0.7e9, 0.7e9, 1.3e9};
    ContractMenu m;
    m.items = assign_rewards(p, f);
    CHECK(std::abs(pv_utility(p.theta[0], f[0], m.items[0].pi, p.task)) < 1e-9);
    for (int j = 1; j < 4; ++j) CHECK(std::abs(ldic_gap(p, m, j)) < 1e-9);
    CHECK(m.items[2].pi == doctest::Approx(m.items[1].pi));
    CHECK(check_feasibility(m, p, 1e-9).feasible());
  }
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

// Largest change of U_SR from moving every item by one grid cell.
double cell_bound(const ContractProblem& p, const std::vector<double>& fg, const std::vector<double>& pg) {
  const double df = fg[1] - fg[0], dp = pg[1] - pg[0];
  const double f_lo = fg[1];
  const double slope = p.task.rho * p.task.cycles() / (f_lo * f_lo);
  double b = 0;
  for (int j = 0; j < p.size(); ++j) b += p.beta[j] * p.theta[j] * (slope * df + dp);
  return b;
}

}  // namespace

TEST_CASE("grid oracle agrees with the solvers on small instances") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 1 + trial % 3;
    const auto p = random_problem(rng, n);
    const auto lc = solve_complete_info(p);
    const auto lia = solve_lagrangian_iterative(p);
    double f_top = 0, pi_top = 0;
    for (const auto& it : lc.items) f_top = std::max(f_top, it.f), pi_top = std::max(pi_top, it.pi);
    const auto fg = linspace(0, 1.2 * f_top, 30);
    const auto pg = linspace(0, 1.2 * pi_top, 30);
    const auto oracle = grid_oracle(p, fg, pg);
    REQUIRE(check_feasibility(oracle, p, 1e-12).feasible());
    const double uo = sr_expected_utility(oracle, p);
    const double ul = sr_expected_utility(lia, p);
    CAPTURE(trial);
    CHECK(uo <= sr_expected_utility(lc, p) + 1e-9);
    CHECK(ul >= uo - 1e-9);
    CHECK(ul - uo <= cell_bound(p, fg, pg));
    const auto par = kernels::grid_oracle(p, fg, pg, kernels::Exec::Parallel);
    for (int j = 0; j < n; ++j) {
      CHECK(par.items[j].f == oracle.items[j].f);
      CHECK(par.items[j].pi == oracle.items[j].pi);
    }
  }
}

TEST_CASE("single-type oracle matches a direct scan") {
  std::mt19937_64 rng(21);
  const auto p = random_problem(rng, 1);
  const auto fg = linspace(0, 2e9, 30);
  const auto pg = linspace(0, 10, 30);
  double best = 0;
  for (double f : fg)
    for (double pi : pg)
      if (pv_utility(p.theta[0], f, pi, p.task) >= 0) best = std::max(best, sr_term(p, 0, {f, pi}));
  CHECK(sr_expected_utility(grid_oracle(p, fg, pg), p) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("grid oracle rejects oversize inputs") {
  std::mt19937_64 rng(22);
  const auto p = random_problem(rng, 5);
  const auto g = linspace(0, 1e9, 10);
  CHECK_THROWS_AS(grid_oracle(p, g, g), DomainError);
  const auto q = random_problem(rng, 2);
  const auto big = linspace(0, 1e9, 31);
  CHECK_THROWS_AS(grid_oracle(q, big, g), DomainError);
}

TEST_CASE("baselines") {
  std::mt19937_64 rng(23);
  const auto p = random_problem(rng, 4);
  const auto zero = menu_at_price(p, 0, Scheme::Stackelberg);
  for (const auto& it : zero.items) CHECK(it.f == 0);
  for (double price : {1e-10, 1e-9, 5e-9}) {
    const auto m = menu_at_price(p, price, Scheme::Stackelberg);
    for (int j = 0; j < p.size(); ++j) {
      CHECK(pv_utility(p.theta[j], m.items[j].f, m.items[j].pi, p.task) >= 0);
      const double f = m.items[j].f;
      auto u = [&](double x) { return pv_utility(p.theta[j], x, price * x, p.task); };
      CHECK(u(f) >= u(f * 1.001));
      CHECK(u(f) >= u(f * 0.999));
    }
  }
  CHECK_THROWS_AS(best_response(0.5, -1, p.task), DomainError);

  const auto sa = stackelberg_baseline(p);
  const auto lin = linear_pricing_baseline(p);
  for (const auto& m : {sa, lin})
    for (double u : pv_utilities(m, p)) CHECK(u >= 0);
  CHECK(sr_expected_utility(lin, p) <= sr_expected_utility(sa, p) + 1e-9);
}

TEST_CASE("scheme ordering on the default instance") {
  const auto p = default_instance();
  REQUIRE(p.size() > 1);
  const auto menus = harness::compare_schemes(p);
  std::vector<double> sr, pv;
  for (const auto& m : menus) {
    sr.push_back(sr_expected_utility(m, p));
    double s = 0;
    const auto u = pv_utilities(m, p);
    for (int j = 0; j < p.size(); ++j) s += p.beta[j] * u[j];
    pv.push_back(s);
  }
  for (std::size_t k = 1; k < sr.size(); ++k) CHECK(sr[k - 1] >= sr[k] - 1e-9);
  CHECK(std::abs(pv[0]) < 1e-9);
  CHECK(pv[1] >= -1e-9);
  CHECK(pv[4] == *std::max_element(pv.begin(), pv.end()));
}

TEST_CASE("problem file round trip") {
  std::mt19937_64 rng(24);
  auto p = random_problem(rng, 3);
  p.task.rate = {5e6, 5.5e6, 6e6};
  p.task.v = Valuation::sqrt1p();
  std::stringstream ss;
  write_problem(ss, p);
  const auto q = read_problem(ss);
  CHECK(q.theta == p.theta);
  CHECK(q.beta == p.beta);
  CHECK(q.task.rho == p.task.rho);
  CHECK(q.task.rate == p.task.rate);
  CHECK(q.task.v.name == "sqrt1p");

  std::istringstream bad("theta = 0.2 0.4\nbeta = 0.5 0.5\ncolour = red\n");
  CHECK_THROWS_AS(read_problem(bad), ParseError);
  std::istringstream unsorted("theta = 0.4 0.2\nbeta = 0.5 0.5\n");
  CHECK_THROWS_AS(read_problem(unsorted), ParseError);
  std::istringstream mass("theta = 0.2 0.4\nbeta = 0.5 0.6\n");
  CHECK_THROWS_AS(read_problem(mass), ParseError);
}

TEST_CASE("menu CSV") {
  ContractProblem p;
  p.theta = {0.3, 0.6};
  p.beta = {0.4, 0.6};
  const auto m = solve_lagrangian_iterative(p);
  std::ostringstream os;
  write_menu_header(os);
  write_menu_rows(os, m, p);
  const auto s = os.str();
  CHECK(s.rfind("type,theta,beta,f_hz,pi,u_pv,u_sr_term,scheme\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
  CHECK(s.find(",LIA\n") != std::string::npos);
}
