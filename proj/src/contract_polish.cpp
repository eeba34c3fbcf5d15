#include <algorithm>
#include <cmath>

#include "contract_detail.hpp"

namespace parkedchain::contract::detail {

namespace {

struct Point {
  std::vector<double> f;
  bool ok = true;
};

Point frequencies(const ContractProblem& p, const std::vector<double>& u) {
  const double c = p.task.cost_coeff();
  Point pt;
  double l = 0, prev = 0;
  for (int j = 0; j < p.size(); ++j) {
    l += p.theta[j] * (u[j] - prev);
    prev = u[j];
    if (!(l > 0)) pt.ok = false;
    pt.f.push_back(l > 0 ? std::sqrt(l / c) : 0.0);
  }
  return pt;
}

std::vector<double> gradient(const ContractProblem& p, const std::vector<double>& u) {
  const auto& t = p.task;
  const int n = p.size();
  const double c = t.cost_coeff(), rk = t.rho * t.cycles();
  const auto pt = frequencies(p, u);
  std::vector<double> direct(n), tail(n + 1, 0.0);
  for (int j = n - 1; j >= 0; --j) {
    const double f3 = pt.f[j] * pt.f[j] * pt.f[j];
    direct[j] = p.beta[j] * p.theta[j] * rk / (2 * c * f3);
    tail[j] = tail[j + 1] + direct[j];
  }
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) {
    const double pi = t.v.inverse(u[k]);
    g[k] = direct[k] * p.theta[k] - p.beta[k] * p.theta[k] / t.v.derivative(pi);
    if (k + 1 < n) g[k] -= tail[k + 1] * (p.theta[k + 1] - p.theta[k]);
  }
  return g;
}

double objective(const ContractProblem& p, const std::vector<double>& u) {
  const auto pt = frequencies(p, u);
  if (!pt.ok) return -std::numeric_limits<double>::infinity();
  return sr_expected_utility(assign_rewards(p, pt.f), p);
}

}  // namespace

bool polish(const ContractProblem& p, ContractMenu& menu) {
  const int n = p.size();
  const auto& t = p.task;
  std::vector<double> u(n);
  for (int j = 0; j < n; ++j) u[j] = t.v.value(menu.items[j].pi);
  const double start = objective(p, u);

  // Blocks are maximal runs of equal u, stored as start indices.
  auto blocks_of = [&](const std::vector<double>& x) {
    std::vector<int> b{0};
    for (int j = 1; j < n; ++j)
      if (x[j] != x[j - 1]) b.push_back(j);
    b.push_back(n);
    return b;
  };

  bool changed = false;
  for (int round = 0; round < 200; ++round) {
    bool moved = false;
    auto b = blocks_of(u);
    // Split the block whose prefix gradient sum is most negative.
    const auto g = gradient(p, u);
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
      double prefix = 0, worst = 0;
      int split = -1;
      for (int s = b[k]; s + 1 < b[k + 1]; ++s) {
        prefix += g[s];
        if (prefix < worst) worst = prefix, split = s;
      }
      if (split >= 0 && worst < -1e-12 * std::max(1.0, std::abs(start))) {
        const double step = 1e-9 * std::max(1.0, std::abs(u[split]));
        for (int s = b[k]; s <= split; ++s) u[s] -= step;
        if (b[k] > 0 && u[b[k]] < u[b[k] - 1]) {
          for (int s = b[k]; s <= split; ++s) u[s] += step;
          continue;
        }
        moved = true;
      }
    }
    b = blocks_of(u);
    // Maximize each block value between its neighbors.
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
      const int lo_i = b[k], hi_i = b[k + 1];
      auto slope = [&](double x) {
        auto trial = u;
        for (int s = lo_i; s < hi_i; ++s) trial[s] = x;
        if (!frequencies(p, trial).ok) return std::numeric_limits<double>::infinity();
        const auto gt = gradient(p, trial);
        double d = 0;
        for (int s = lo_i; s < hi_i; ++s) d += gt[s];
        return d;
      };
      double lo = lo_i > 0 ? u[lo_i - 1] : 0.0;
      double hi = hi_i < n ? u[hi_i] : u[lo_i] + 1;
      if (hi_i >= n)
        while (slope(hi) > 0 && hi < 1e6) hi = lo + 2 * (hi - lo);
      double x;
      if (slope(lo) <= 0)
        x = lo;
      else if (slope(hi) >= 0)
        x = hi;
      else {
        double a = lo, c = hi;
        for (int it = 0; it < 200 && c - a > 1e-16 * std::max(1.0, std::abs(c)); ++it) {
          const double mid = 0.5 * (a + c);
          (slope(mid) > 0 ? a : c) = mid;
        }
        x = 0.5 * (a + c);
      }
      if (x != u[lo_i]) {
        auto trial = u;
        for (int s = lo_i; s < hi_i; ++s) trial[s] = x;
        if (objective(p, trial) >= objective(p, u)) {
          u = trial;
          moved = true;
        }
      }
    }
    if (!moved) break;
    changed = true;
  }
  if (!changed) return false;
  const double end = objective(p, u);
  const auto pt = frequencies(p, u);
  if (!(end > start + 1e-13 * std::max(1.0, std::abs(start))) || !pt.ok) return false;
  for (double f : pt.f)
    if (f > t.f_max) return false;
  auto items = assign_rewards(p, pt.f);
  menu.items = std::move(items);
  menu.info.bunched.clear();
  for (int a = 0; a < n;) {
    int e = a;
    while (e + 1 < n && u[e + 1] == u[a]) ++e;
    if (e > a) menu.info.bunched.emplace_back(a, e);
    a = e + 1;
  }
  return true;
}

}  // namespace parkedchain::contract::detail
