#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "parkedchain/consensus.hpp"
#include "parkedchain/error.hpp"
#include "parkedchain/reputation.hpp"

using namespace parkedchain;
using namespace parkedchain::reputation;

namespace {

Opinion random_opinion(std::mt19937_64& rng, bool allow_dogmatic = true) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Uniform on the simplex via sorted cuts.
  double c1 = u01(rng), c2 = u01(rng);
  if (c1 > c2) std::swap(c1, c2);
  Opinion o{c1, c2 - c1, 1 - c2, u01(rng)};
  if (!allow_dogmatic && o.u < 1e-6) o = {o.b * 0.9, o.d * 0.9, o.u * 0.9 + 0.1, o.a};
  return o;
}

bool near(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("evidence mapping examples") {
  const auto e = local_opinion({}, 0.5);
  CHECK(e.b == 0);
  CHECK(e.d == 0);
  CHECK(e.u == 1);
  const auto p8 = opinion_from_evidence(8, 0, 0.5);
  CHECK(near(p8.b, 0.8));
  CHECK(near(p8.u, 0.2));
  std::vector<InteractionRecord> h{{1, 0, 1, true, 4}, {2, 0, 1, false, 3}, {2, 0, 1, false, 1}};
  const auto o = local_opinion(h, 0.5);
  CHECK(near(o.b, 0.4));
  CHECK(near(o.d, 0.4));
  CHECK(near(o.u, 0.2));
}

TEST_CASE("reputation value examples") {
  CHECK(reputation_value({1, 0, 0, 0.5}) == 1);
  CHECK(reputation_value({0, 0, 1, 0.5}) == 0.5);
  CHECK(near(reputation_value({0.5, 0.3, 0.2, 0.5}), 0.6));
}

TEST_CASE("weight factor examples") {
  const std::vector<double> five{5, 5, 5};
  CHECK(near(familiarity_weight(5, five), 1));
  const std::vector<double> peers{2, 4, 6, 8, 5};
  CHECK(near(familiarity_weight(10, peers), 2));
  CHECK(familiarity_weight(0, peers) == 0);
  const std::vector<double> zeros{0, 0};
  CHECK_THROWS_AS(familiarity_weight(1, zeros), DomainError);

  WeightConfig w;
  CHECK(near(timeliness_weight(5, 1, w), 1.25));
  CHECK(near(timeliness_weight(2, 1, w), 10));
  WeightConfig flat{0.3, 0.4, 0.3, 1, 0};
  CHECK(timeliness_weight(9, 2, flat) == 1);
  CHECK_THROWS_AS(timeliness_weight(3, 3, w), DomainError);
  CHECK_THROWS_AS(timeliness_weight(3, 4, w), DomainError);

  CHECK(similarity_weight(7, 7) == 1);
  CHECK(near(similarity_weight(8, 10), 1.0 / 3));
  CHECK(near(similarity_weight(3, 12), 0.1));

  CHECK(near(overall_weight(1, 1, 1, w), 1));
  CHECK(near(overall_weight(2, 1.25, 1.0 / 3, w), 1.2));
  CHECK(overall_weight(7, 3, 2, {1, 0, 0, 10, 1.5}) == 7);
}

TEST_CASE("weight config validation") {
  CHECK_THROWS(WeightConfig{0.3, 0.3, 0.3, 10, 1.5}.validate());
  CHECK_THROWS(WeightConfig{-0.1, 0.8, 0.3, 10, 1.5}.validate());
  CHECK_THROWS(WeightConfig{0.3, 0.4, 0.3, 0, 1.5}.validate());
  CHECK_NOTHROW(WeightConfig{}.validate());
}

TEST_CASE("overall weight is linear in each factor") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 5);
  WeightConfig w;
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng), y = u(rng), z = u(rng), h = u(rng);
    const double base = overall_weight(x, y, z, w);
    CHECK(near(overall_weight(x + h, y, z, w) - base, w.gamma1 * h, 1e-12));
    CHECK(near(overall_weight(x, y + h, z, w) - base, w.gamma2 * h, 1e-12));
    CHECK(near(overall_weight(x, y, z + h, w) - base, w.gamma3 * h, 1e-12));
  }
}

TEST_CASE("synthesis examples") {
  const Opinion a{0.6, 0.2, 0.2, 0.5}, b{0.4, 0.4, 0.2, 0.3};
  const std::vector<WeightedOpinion> one{{3.0, a}};
  const auto s1 = synthesize_recommended(one);
  CHECK(near(s1.b, a.b));
  CHECK(near(s1.u, a.u));
  const std::vector<WeightedOpinion> two{{1.0, a}, {1.0, b}};
  const auto s2 = synthesize_recommended(two);
  CHECK(near(s2.b, 0.5));
  CHECK(near(s2.d, 0.3));
  CHECK(near(s2.u, 0.2));
  CHECK(near(s2.a, 0.4));
  const std::vector<WeightedOpinion> zero_second{{2.0, a}, {0.0, b}};
  CHECK(near(synthesize_recommended(zero_second).d, a.d));
  CHECK_THROWS_AS(synthesize_recommended({}), DomainError);
  const std::vector<WeightedOpinion> nothing{{0.0, a}};
  CHECK_THROWS_AS(synthesize_recommended(nothing), DomainError);
}

TEST_CASE("fusion examples") {
  const Opinion local{0.6, 0.2, 0.2, 0.5}, syn{0.5, 0.3, 0.2, 0.7};
  const auto f = fuse_final(local, syn);
  CHECK(near(f.b, 0.22 / 0.36));
  CHECK(near(f.d, 0.10 / 0.36));
  CHECK(near(f.u, 0.04 / 0.36));
  CHECK(f.a == 0.5);
  const auto v = fuse_final(local, vacuous(0.5));
  CHECK(near(v.b, local.b));
  CHECK(near(v.d, local.d));
  CHECK(near(v.u, local.u));
  const auto w = fuse_final(vacuous(0.5), local);
  CHECK(near(w.b, local.b));
  CHECK(near(w.u, local.u));
  CHECK_THROWS_AS(fuse_final({1, 0, 0, 0.5}, {0, 1, 0, 0.5}), DomainError);
}

TEST_CASE("fusion closure, neutrality and uncertainty reduction on random pairs") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 10000; ++k) {
    const auto a = random_opinion(rng, false), b = random_opinion(rng, false);
    const auto f = fuse_final(a, b);
    REQUIRE(is_valid(f));
    CHECK(f.u <= std::min(a.u, b.u) + 1e-12);
    const auto n = fuse_final(a, vacuous(b.a));
    CHECK(near(n.b, a.b, 1e-12));
    CHECK(near(n.d, a.d, 1e-12));
    CHECK(near(n.u, a.u, 1e-12));
  }
}

TEST_CASE("average final reputation") {
  const std::vector<double> one{0.5}, three{0.2, 0.4, 0.6}, same{0.7, 0.7, 0.7, 0.7};
  CHECK(average_final_reputation(one) == 0.5);
  CHECK(near(average_final_reputation(three), 0.4));
  CHECK(near(average_final_reputation(same), 0.7));
  CHECK_THROWS_AS(average_final_reputation({}), DomainError);
}

TEST_CASE("baseline EMA examples") {
  CHECK(linear_reputation_baseline({}) == 0.5);
  const std::vector<InteractionRecord> one{{1, 0, 1, true, 1}};
  CHECK(near(linear_reputation_baseline(one), 0.6));
  std::vector<InteractionRecord> stream;
  for (int s = 1; s <= 400; ++s) stream.push_back({s, 0, 1, true, 1});
  CHECK(near(linear_reputation_baseline(stream), 1, 1e-12));
  // Expanding counts into repeated rows changes nothing.
  const std::vector<InteractionRecord> packed{{1, 0, 1, true, 3}, {1, 2, 1, false, 1}};
  const std::vector<InteractionRecord> spread{
      {1, 0, 1, true, 1}, {1, 0, 1, true, 1}, {1, 0, 1, true, 1}, {1, 2, 1, false, 1}};
  CHECK(near(linear_reputation_baseline(packed), linear_reputation_baseline(spread)));
}

TEST_CASE("local opinion monotonicity") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> cnt(1, 5);
  for (int k = 0; k < 500; ++k) {
    std::vector<InteractionRecord> h;
    for (int r = 0; r < k % 12; ++r) h.push_back({1, 0, 1, coin(rng), cnt(rng)});
    const auto before = local_opinion(h, 0.5);
    auto plus = h;
    plus.push_back({1, 0, 1, true, 1});
    auto minus = h;
    minus.push_back({1, 0, 1, false, 1});
    CHECK(local_opinion(plus, 0.5).b >= before.b);
    CHECK(local_opinion(minus, 0.5).d >= before.d);
  }
}

TEST_CASE("interaction log rejects malformed records") {
  InteractionLog log(3);
  CHECK_THROWS_AS(log.add({1, 0, 0, true, 1}), DomainError);
  CHECK_THROWS_AS(log.add({1, 0, 3, true, 1}), DomainError);
  log.add({2, 0, 1, true, 1});
  CHECK_THROWS_AS(log.add({1, 1, 2, true, 1}), DomainError);
  CHECK(log.pair_count(0, 1) == 1);
  CHECK(log.peer_mean(0) == 1);
  CHECK(log.peer_mean(2) == 0);
}

namespace {

// Independent reimplementation of the view from the raw records.
double oracle_average(const std::vector<InteractionRecord>& recs, int n, int t, const std::vector<double>& arr,
                      const ViewParams& vp, int j) {
  const double a = vp.base_rate;
  std::map<std::pair<int, int>, std::pair<double, double>> seg;  // (rater, slot) -> (P, Q) about j
  std::vector<double> pair(n * n, 0);
  for (const auto& r : recs) {
    pair[r.rater * n + r.target] += r.count;
    if (r.target == j && r.slot <= t) (r.positive ? seg[{r.rater, r.slot}].first : seg[{r.rater, r.slot}].second) += r.count;
  }
  auto mean_of = [&](int k) {
    double s = 0;
    int c = 0;
    for (int m = 0; m < n; ++m)
      if (pair[k * n + m] > 0) s += pair[k * n + m], ++c;
    return c ? s / c : 0.0;
  };
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    if (i == j) continue;
    double W = 0, B = 0, U = 0;
    for (const auto& [key, pq] : seg) {
      const auto [k, slot] = key;
      if (k == i) continue;
      const double tot = pq.first + pq.second + 2;
      const double mk = mean_of(k);
      const double x = mk > 0 ? pair[k * n + j] / mk : 0;
      const double gap = std::max(1, t - slot);
      const double y = vp.weights.alpha1 / std::pow(gap, vp.weights.alpha2);
      const double z = 1 / (1 + std::abs(arr[k] - arr[j]));
      const double w = vp.weights.gamma1 * x + vp.weights.gamma2 * y + vp.weights.gamma3 * z;
      W += w;
      B += w * pq.first / tot;
      U += w * 2 / tot;
    }
    double sb = 0, su = 1;
    if (W > 0) sb = B / W, su = U / W;
    double lb = 0, lu = 1;
    if (auto it = seg.find({i, t}); it != seg.end()) {
      const double tot = it->second.first + it->second.second + 2;
      lb = it->second.first / tot, lu = 2 / tot;
    }
    const double k = su + lu - su * lu;
    const double fb = (lb * su + sb * lu) / k, fu = su * lu / k;
    sum += fb + fu * a;
  }
  return sum / (n - 1);
}

}  // namespace

TEST_CASE("view matches an independent recomputation on random logs") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 5);
    const int slots = 1 + static_cast<int>(rng() % 5);
    std::vector<InteractionRecord> recs;
    InteractionLog log(n);
    for (int s = 1; s <= slots; ++s)
      for (int e = 0; e < 2 * n; ++e) {
        const int i = static_cast<int>(rng() % n), j = static_cast<int>(rng() % n);
        if (i == j) continue;
        InteractionRecord r{s, i, j, rng() % 3 != 0, 1 + static_cast<int>(rng() % 4)};
        recs.push_back(r);
        log.add(r);
      }
    std::vector<double> arr(n);
    for (auto& h : arr) h = static_cast<double>(rng() % 24);
    ViewParams vp;
    vp.base_rate = 0.3 + 0.4 * static_cast<double>(rng() % 100) / 100;
    const auto view = compute_view(log, slots, arr, vp);
    for (int j = 0; j < n; ++j) {
      CHECK(view.average[j] == doctest::Approx(oracle_average(recs, n, slots, arr, vp, j)).epsilon(1e-12));
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i) * n + j;
        CHECK(is_valid(view.final[idx]));
        CHECK(near(view.final_value[idx], reputation_value(view.final[idx]), 1e-15));
      }
    }
  }
}

TEST_CASE("view rejects slots before recorded history") {
  InteractionLog log(3);
  log.add({4, 0, 1, true, 1});
  const std::vector<double> arr{1, 2, 3};
  CHECK_THROWS_AS(compute_view(log, 3, arr, {}), DomainError);
  const std::vector<double> short_arr{1, 2};
  CHECK_THROWS_AS(compute_view(log, 4, short_arr, {}), DomainError);
}

TEST_CASE("interaction csv round trip") {
  const std::vector<InteractionRecord> recs{{1, 0, 1, true, 2}, {2, 1, 0, false, 1}};
  std::stringstream ss;
  write_interactions(ss, recs);
  const auto back = read_interactions(ss);
  REQUIRE(back.size() == 3);
  CHECK(back[0].positive);
  CHECK(back[1].slot == 1);
  CHECK_FALSE(back[2].positive);
  std::stringstream bad("slot,rater,target,outcome\n1,0,1,2\n");
  CHECK_THROWS_AS(read_interactions(bad), ParseError);
  std::stringstream self("1,2,2,1\n");
  CHECK_THROWS_AS(read_interactions(self), ParseError);
}

TEST_CASE("subjective-logic value crosses thresholds no later than the baseline") {
  consensus::PopulationConfig cfg;
  cfg.population = 20;
  cfg.misbehaving = 1;
  for (double thr : {0.3, 0.4, 0.5, 0.6}) {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto run = consensus::simulate_population(cfg, seed, false);
      const int j = run.misbehaving[0];
      int sl = cfg.slots + 1, lr = cfg.slots + 1;
      for (int t = cfg.slots; t >= 1; --t) {
        if (run.sl[t - 1][j] < thr) sl = t;
        if (run.lr[t - 1][j] < thr) lr = t;
      }
      ok += sl <= lr;
    }
    CHECK_MESSAGE(ok >= 95, "threshold " << thr << ": " << ok << "/100");
  }
}
