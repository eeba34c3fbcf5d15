#include "parkedchain/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "parkedchain/error.hpp"
#include "parkedchain/parking.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::consensus {

void ConsensusConfig::validate() const {
  if (l < 0) throw DomainError("byzantine bound l must be nonnegative");
  if (n < 4) throw DomainError("consensus needs at least 4 nodes");
  if (n < 3 * l + 1) throw DomainError("consensus needs n >= 3l + 1");
  if (threshold < 0 || threshold > 1) throw DomainError("reputation threshold must lie in [0,1]");
  if (slots < 1) throw DomainError("slot schedule must be positive");
}

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Request: return "request";
    case Kind::PrePrepare: return "pre-prepare";
    case Kind::Prepare: return "prepare";
    case Kind::Accept: return "accept";
    case Kind::Reply: return "reply";
  }
  return "?";
}

Digest BlockProposal::digest() const {
  Encoder e;
  e.u64(height).i64(proposer).u64(transactions.size());
  for (const auto& t : transactions) e.digest(t);
  return e.sha256();
}

HmacSigner::HmacSigner(std::uint64_t secret) : secret_(secret) {}

const Digest& HmacSigner::key(int node) const {
  auto it = keys_.find(node);
  if (it == keys_.end()) {
    Encoder e;
    e.str("node-key").u64(secret_).i64(node);
    it = keys_.emplace(node, e.sha256()).first;
  }
  return it->second;
}

Digest HmacSigner::tag(int node, std::span<const std::uint8_t> payload) const {
  std::string k(reinterpret_cast<const char*>(&node), sizeof node);
  k.append(reinterpret_cast<const char*>(payload.data()), payload.size());
  auto it = cache_.find(k);
  if (it != cache_.end()) return it->second;
  const auto t = hmac_sha256(key(node), payload);
  cache_.emplace(std::move(k), t);
  return t;
}

bool HmacSigner::verify(int node, std::span<const std::uint8_t> payload, const Digest& t) const {
  return tag(node, payload) == t;
}

namespace {

std::vector<std::uint8_t> payload(std::uint64_t view, Kind kind, const Digest& d, int sender) {
  Encoder e;
  e.u64(view).u8(static_cast<std::uint8_t>(kind)).digest(d).i64(sender);
  return e.bytes();
}

struct Net {
  Net(const Signer& s, std::uint64_t v, bool r) : signer(s), view(v), record(r) {}
  const Signer& signer;
  std::uint64_t view;
  bool record;
  std::size_t count = 0;
  std::vector<NetMessage> trace;
  std::vector<NetMessage> inflight;

  void send(int slot, int from, int to, Kind kind, const Digest& d, bool byz) {
    NetMessage m;
    m.send_slot = slot;
    m.delivery_slot = slot + 1;
    m.sender = from;
    m.recipient = to;
    m.kind = kind;
    m.digest = d;
    m.tag = signer.tag(from, payload(view, kind, d, from));
    m.from_byzantine = byz;
    ++count;
    if (record) trace.push_back(m);
    inflight.push_back(m);
  }

  std::vector<NetMessage> deliver(int slot) {
    std::vector<NetMessage> out;
    std::vector<NetMessage> rest;
    for (auto& m : inflight) (m.delivery_slot <= slot ? out : rest).push_back(m);
    inflight = std::move(rest);
    std::stable_sort(out.begin(), out.end(), [](const NetMessage& a, const NetMessage& b) {
      return std::tie(a.recipient, a.sender) < std::tie(b.recipient, b.sender);
    });
    for (auto& m : out) m.corrupted = !signer.verify(m.sender, payload(view, m.kind, m.digest, m.sender), m.tag);
    return out;
  }
};

struct Cert {
  Digest digest{};
  std::vector<std::pair<int, Digest>> accepts;  // (sender id, tag)
};

}  // namespace

ViewOutcome run_view(const ConsensusConfig& config, const ViewInput& in) {
  if (!in.nodes || !in.signer) throw DomainError("view needs nodes and a signer");
  const auto& nodes = *in.nodes;
  const int n = static_cast<int>(nodes.size());
  if (n != config.n) throw DomainError("node count differs from configuration");
  if (in.leader < 0 || in.leader >= n) throw DomainError("leader position out of range");
  const Digest proposed = in.proposal.digest();
  std::vector<Digest> valid = in.valid;
  if (valid.empty()) valid.push_back(proposed);
  auto is_valid = [&](const Digest& d) { return std::find(valid.begin(), valid.end(), d) != valid.end(); };
  const Adversary empty_adv;
  const Adversary& adv = in.adversary ? *in.adversary : empty_adv;
  auto behavior = [&](int pos) { return nodes[pos].behavior; };
  auto honest = [&](int pos) { return behavior(pos) == Behavior::Honest; };
  auto id = [&](int pos) { return nodes[pos].id; };
  std::map<int, int> pos_of;
  for (int i = 0; i < n; ++i) pos_of[id(i)] = i;

  Net net{*in.signer, in.view, in.record_trace};
  ViewOutcome out;
  out.commits.assign(n, std::nullopt);
  int abnormal = 0;
  for (int i = 0; i < n; ++i) abnormal += !honest(i);
  out.within_abnormal_bound = abnormal < (config.n - config.l) / 3.0;

  auto vote_digest = [&](Vote v, std::uint64_t mask, int recipient_pos) -> std::optional<Digest> {
    switch (v) {
      case Vote::Silent: return std::nullopt;
      case Vote::Proposed: return proposed;
      case Vote::Alternate: return adv.alternate;
      case Vote::Split: return (mask >> recipient_pos & 1) ? adv.alternate : proposed;
    }
    return std::nullopt;
  };
  auto plan_of = [&](int pos) {
    auto it = adv.plans.find(id(pos));
    return it == adv.plans.end() ? ByzantinePlan{} : it->second;
  };

  // Slot 0: request from the client to the leader.
  net.send(0, kClient, id(in.leader), Kind::Request, proposed, false);
  net.deliver(1);

  // Slot 1: leader pre-prepares.
  const int leader = in.leader;
  if (behavior(leader) == Behavior::CrashFaulty) {
    out.view_change = true;
    out.abort_reason = "leader crashed";
    out.messages = net.count;
    out.trace = std::move(net.trace);
    return out;
  }
  for (int r = 0; r < n; ++r) {
    if (r == leader) continue;
    if (honest(leader)) {
      net.send(1, id(leader), id(r), Kind::PrePrepare, proposed, false);
    } else {
      const std::uint8_t c = r < static_cast<int>(adv.leader_choice.size()) ? adv.leader_choice[r] : 0;
      if (c == 1) net.send(1, id(leader), id(r), Kind::PrePrepare, proposed, true);
      if (c == 2) net.send(1, id(leader), id(r), Kind::PrePrepare, adv.alternate, true);
    }
  }
  std::vector<std::optional<Digest>> preprepared(n);
  if (honest(leader) && is_valid(proposed)) preprepared[leader] = proposed;
  for (const auto& m : net.deliver(2)) {
    const int r = pos_of.at(m.recipient);
    if (m.corrupted || m.kind != Kind::PrePrepare || m.sender != id(leader)) continue;
    if (honest(r) && !preprepared[r] && is_valid(m.digest)) preprepared[r] = m.digest;
  }

  // Slot 2: prepare broadcast.
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < n; ++r) {
      if (r == i) continue;
      if (honest(i) && preprepared[i]) net.send(2, id(i), id(r), Kind::Prepare, *preprepared[i], false);
      if (behavior(i) == Behavior::Byzantine) {
        const auto plan = plan_of(i);
        if (auto d = vote_digest(plan.prepare, plan.mask, r)) net.send(2, id(i), id(r), Kind::Prepare, *d, true);
      }
    }
  }
  std::vector<std::map<Digest, std::set<int>>> prepares(n);
  for (const auto& m : net.deliver(3))
    if (!m.corrupted && m.kind == Kind::Prepare) prepares[pos_of.at(m.recipient)][m.digest].insert(m.sender);
  std::vector<std::optional<Digest>> prepared(n);
  for (int i = 0; i < n; ++i) {
    if (!honest(i) || !preprepared[i]) continue;
    const auto it = prepares[i].find(*preprepared[i]);
    const int got = it == prepares[i].end() ? 0 : static_cast<int>(it->second.size());
    if (got >= config.prepare_quorum()) prepared[i] = preprepared[i];
  }

  // Slot 3: accept broadcast.
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < n; ++r) {
      if (r == i) continue;
      if (honest(i) && prepared[i]) net.send(3, id(i), id(r), Kind::Accept, *prepared[i], false);
      if (behavior(i) == Behavior::Byzantine) {
        const auto plan = plan_of(i);
        if (auto d = vote_digest(plan.accept, plan.mask, r)) net.send(3, id(i), id(r), Kind::Accept, *d, true);
      }
    }
  }
  std::vector<std::map<Digest, std::map<int, Digest>>> accepts(n);
  for (const auto& m : net.deliver(4))
    if (!m.corrupted && m.kind == Kind::Accept) accepts[pos_of.at(m.recipient)][m.digest].emplace(m.sender, m.tag);
  std::vector<std::optional<Cert>> certs(n);
  for (int i = 0; i < n; ++i) {
    if (!honest(i) || !prepared[i]) continue;
    auto& got = accepts[i][*prepared[i]];
    got.emplace(id(i), in.signer->tag(id(i), payload(in.view, Kind::Accept, *prepared[i], id(i))));
    out.max_accepts = std::max(out.max_accepts, static_cast<int>(got.size()));
    if (static_cast<int>(got.size()) >= config.accept_quorum()) {
      out.commits[i] = prepared[i];
      certs[i] = Cert{*prepared[i], {got.begin(), got.end()}};
    }
  }

  // Slot 4: committed nodes reply to the client and forward their certificate.
  for (int i = 0; i < n; ++i) {
    if (!certs[i]) continue;
    net.send(4, id(i), kClient, Kind::Reply, certs[i]->digest, false);
    for (int r = 0; r < n; ++r)
      if (r != i) net.send(4, id(i), id(r), Kind::Reply, certs[i]->digest, false);
  }
  auto cert_ok = [&](const Cert& c) {
    std::set<int> senders;
    for (const auto& [s, t] : c.accepts)
      if (in.signer->verify(s, payload(in.view, Kind::Accept, c.digest, s), t)) senders.insert(s);
    return static_cast<int>(senders.size()) >= config.accept_quorum();
  };
  std::map<Digest, std::set<int>> client_replies;
  std::vector<int> late;
  for (const auto& m : net.deliver(5)) {
    if (m.corrupted || m.kind != Kind::Reply) continue;
    if (m.recipient == kClient) {
      client_replies[m.digest].insert(m.sender);
      continue;
    }
    const int r = pos_of.at(m.recipient);
    const int s = pos_of.at(m.sender);
    if (honest(r) && !out.commits[r] && certs[s] && certs[s]->digest == m.digest && cert_ok(*certs[s])) {
      out.commits[r] = m.digest;
      late.push_back(r);
    }
  }
  for (int r : late) net.send(5, id(r), kClient, Kind::Reply, *out.commits[r], false);
  for (const auto& m : net.deliver(6))
    if (!m.corrupted && m.recipient == kClient && m.kind == Kind::Reply) client_replies[m.digest].insert(m.sender);

  for (const auto& [d, senders] : client_replies)
    if (static_cast<int>(senders.size()) >= config.l + 1) out.client_accepted = true;
  for (int i = 0; i < n; ++i) {
    if (honest(i) && out.commits[i]) {
      out.committed = true;
      out.digest = *out.commits[i];
      break;
    }
  }
  if (!out.committed) out.abort_reason = "accept quorum not reached";
  out.messages = net.count;
  out.trace = std::move(net.trace);
  return out;
}

ConsensusRun run_consensus(const ConsensusConfig& config, std::vector<ConsensusNode>& nodes, BlockProposal proposal,
                           std::span<const Digest> valid, const Adversary* adversary, const Signer& signer,
                           int max_views) {
  ConsensusRun run;
  const int n = static_cast<int>(nodes.size());
  for (int v = 0; v < max_views && !run.committed; ++v) {
    ViewInput in;
    in.nodes = &nodes;
    in.leader = v % n;
    in.view = static_cast<std::uint64_t>(v);
    in.proposal = proposal;
    in.proposal.proposer = nodes[in.leader].id;
    in.valid.assign(valid.begin(), valid.end());
    if (in.valid.empty()) in.valid.push_back(in.proposal.digest());
    in.adversary = adversary;
    in.signer = &signer;
    in.record_trace = false;
    auto out = run_view(config, in);
    if (out.committed) {
      run.committed = true;
      run.digest = out.digest;
      for (int i = 0; i < n; ++i)
        if (nodes[i].behavior == Behavior::Honest && out.commits[i]) nodes[i].log.push_back(*out.commits[i]);
    }
    run.views.push_back(std::move(out));
  }
  return run;
}

std::vector<int> select_consensus_nodes(const std::map<int, double>& reputations, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > reputations.size())
    throw DomainError("population smaller than the consensus group");
  std::vector<std::pair<int, double>> v(reputations.begin(), reputations.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(v[i].first);
  return out;
}

void write_trace(std::ostream& os, std::span<const NetMessage> trace) {
  auto who = [](int x) { return x == kClient ? std::string("client") : std::to_string(x); };
  for (const auto& m : trace) {
    std::string flags;
    if (m.from_byzantine) flags = "byzantine";
    if (m.corrupted) flags += flags.empty() ? "corrupted" : "|corrupted";
    if (flags.empty()) flags = "-";
    os << m.send_slot << ',' << who(m.sender) << ',' << who(m.recipient) << ',' << kind_name(m.kind) << ','
       << to_hex(m.digest) << ',' << flags << '\n';
  }
}

std::vector<bool> inject_behavior(const BehaviorProfile& profile, int slots, std::uint64_t seed, int node) {
  if (profile.before < 0 || profile.before > 1 || profile.after < 0 || profile.after > 1)
    throw DomainError("cooperation probabilities must lie in [0,1]");
  auto rng = make_rng(seed, 0x62656800ULL + static_cast<std::uint64_t>(node));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<bool> out;
  for (int s = 1; s <= slots; ++s) out.push_back(unit(rng) < profile.at(s));
  return out;
}

void PopulationConfig::validate() const {
  if (population < 2) throw DomainError("population needs at least two nodes");
  if (misbehaving < 0 || misbehaving > population) throw DomainError("misbehaving count exceeds population");
  if (slots < 1) throw DomainError("need at least one slot");
  if (count_min < 1 || count_max < count_min) throw DomainError("interaction count range is invalid");
  view.weights.validate();
  if (view.base_rate < 0 || view.base_rate > 1) throw DomainError("base rate must lie in [0,1]");
}

PopulationRun simulate_population(const PopulationConfig& cfg, std::uint64_t seed, bool all_targets) {
  cfg.validate();
  const int n = cfg.population;
  PopulationRun run{{}, {}, {}, reputation::InteractionLog(n), {}, {}};
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  auto pick = make_rng(seed, 1);
  std::shuffle(ids.begin(), ids.end(), pick);
  run.misbehaving.assign(ids.begin(), ids.begin() + cfg.misbehaving);
  std::sort(run.misbehaving.begin(), run.misbehaving.end());
  std::vector<bool> bad(n, false);
  for (int i : run.misbehaving) bad[i] = true;

  const auto arrivals = parking::ArrivalDistribution::synthetic_default();
  auto hour_rng = make_rng(seed, 2);
  std::discrete_distribution<int> hour(arrivals.weight.begin(), arrivals.weight.end());
  for (int i = 0; i < n; ++i) run.arrival_hours.push_back(hour(hour_rng));

  const BehaviorProfile honest{1, 1, 0};
  for (int i = 0; i < n; ++i)
    run.cooperative.push_back(inject_behavior(bad[i] ? cfg.misbehaving_profile : honest, cfg.slots, seed, i));

  auto count_rng = make_rng(seed, 3);
  std::uniform_int_distribution<int> count(cfg.count_min, cfg.count_max);
  std::vector<int> targets;
  if (all_targets) {
    targets.resize(n);
    std::iota(targets.begin(), targets.end(), 0);
  } else {
    targets = run.misbehaving;
  }
  for (int s = 1; s <= cfg.slots; ++s) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) run.log.add({s, i, j, run.cooperative[j][s - 1], count(count_rng)});
    auto view = reputation::prepare_view(run.log, s, run.arrival_hours, cfg.view);
    std::vector<double> sl(n, std::numeric_limits<double>::quiet_NaN());
    for (int j : targets) {
      reputation::compute_target(run.log, s, run.arrival_hours, cfg.view, j, view);
      sl[j] = view.average[j];
    }
    run.sl.push_back(std::move(sl));
    run.lr.push_back(reputation::baseline_values(run.log, s));
  }
  return run;
}

DetectionSeries detection_from_run(const PopulationRun& run, int slots, double threshold) {
  DetectionSeries out;
  const auto m = run.misbehaving.size();
  std::vector<bool> sl_hit(run.cooperative.size(), false), lr_hit(run.cooperative.size(), false);
  out.sl_reach = out.lr_reach = slots + 1;
  for (int s = 1; s <= slots; ++s) {
    std::size_t a = 0, b = 0;
    for (int j : run.misbehaving) {
      if (run.sl[s - 1][j] < threshold) sl_hit[j] = true;
      if (run.lr[s - 1][j] < threshold) lr_hit[j] = true;
      a += sl_hit[j];
      b += lr_hit[j];
    }
    out.sl.push_back(m ? static_cast<double>(a) / m : 0.0);
    out.lr.push_back(m ? static_cast<double>(b) / m : 0.0);
    if (m && a == m && out.sl_reach > slots) out.sl_reach = s;
    if (m && b == m && out.lr_reach > slots) out.lr_reach = s;
  }
  return out;
}

DetectionSeries detection_experiment(const PopulationConfig& cfg, double threshold, std::uint64_t seed) {
  const auto run = simulate_population(cfg, seed, false);
  return detection_from_run(run, cfg.slots, threshold);
}

void CollusionConfig::validate() const {
  population.validate();
  consensus.validate();
  if (colluder_fraction < 0 || colluder_fraction > 1) throw DomainError("colluder fraction must lie in [0,1]");
  if (consensus.n > population.population) throw DomainError("consensus group exceeds the population");
}

bool committee_commits_truth(const ConsensusConfig& base, const std::vector<bool>& colluding, std::uint64_t seed) {
  const int n = static_cast<int>(colluding.size());
  if (n < 4) return false;
  ConsensusConfig cfg = base;
  cfg.n = n;
  cfg.l = std::min(base.l, (n - 1) / 3);
  std::vector<ConsensusNode> nodes;
  Adversary adv;
  adv.alternate = sha256("forged verification result " + std::to_string(seed));
  adv.leader_choice.assign(n, 2);
  for (int i = 0; i < n; ++i) {
    nodes.push_back({i, colluding[i] ? Behavior::Byzantine : Behavior::Honest, {}});
    if (colluding[i]) adv.plans[i] = {Vote::Alternate, Vote::Alternate, 0};
  }
  BlockProposal proposal;
  proposal.height = 1;
  proposal.transactions.push_back(sha256("verification result " + std::to_string(seed)));
  // The digest covers the proposer, so the true block has one digest per honest leader.
  std::vector<Digest> truth;
  for (int i = 0; i < n; ++i) {
    if (colluding[i]) continue;
    proposal.proposer = i;
    truth.push_back(proposal.digest());
  }
  HmacSigner signer(seed);
  auto run = run_consensus(cfg, nodes, proposal, truth, &adv, signer, n);
  return run.committed && std::find(truth.begin(), truth.end(), run.digest) != truth.end();
}

std::vector<CollusionTrial> collusion_trials(const CollusionConfig& cfg, std::span<const double> thresholds,
                                             std::uint64_t seed) {
  cfg.validate();
  auto pop = cfg.population;
  pop.misbehaving = static_cast<int>(std::lround(cfg.colluder_fraction * pop.population));
  const auto run = simulate_population(pop, seed, true);
  const int n = pop.population;
  std::vector<bool> colluder(n, false);
  for (int i : run.misbehaving) colluder[i] = true;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto perm = make_rng(seed, 4);
  std::shuffle(order.begin(), order.end(), perm);

  std::vector<CollusionTrial> out;
  for (double thr : thresholds) {
    CollusionTrial t;
    for (int scheme = 0; scheme < 2; ++scheme) {
      const auto& values = scheme == 0 ? run.sl : run.lr;
      std::vector<bool> flagged(n, false);
      for (const auto& slot : values)
        for (int i = 0; i < n; ++i)
          if (slot[i] < thr) flagged[i] = true;
      std::vector<bool> committee;
      int colluders = 0;
      for (int i : order) {
        if (static_cast<int>(committee.size()) == cfg.consensus.n) break;
        if (flagged[i]) continue;
        committee.push_back(colluder[i]);
        colluders += colluder[i];
      }
      const bool ok = committee_commits_truth(cfg.consensus, committee, seed);
      (scheme == 0 ? t.sl_correct : t.lr_correct) = ok;
      (scheme == 0 ? t.sl_colluders : t.lr_colluders) = colluders;
    }
    out.push_back(t);
  }
  return out;
}

double collusion_experiment(const CollusionConfig& cfg, double threshold, Scheme scheme, int trials,
                            std::uint64_t base_seed) {
  if (trials < 1) throw DomainError("need at least one trial");
  int ok = 0;
  for (int k = 0; k < trials; ++k) {
    const auto t = collusion_trials(cfg, std::span(&threshold, 1), base_seed + k)[0];
    ok += scheme == Scheme::SL ? t.sl_correct : t.lr_correct;
  }
  return static_cast<double>(ok) / trials;
}

namespace {

std::vector<Vote> vote_options() { return {Vote::Silent, Vote::Proposed, Vote::Alternate, Vote::Split}; }

}  // namespace

std::vector<Adversary> enumerate_adversaries(const ConsensusConfig& config, const ModelCheckCase& c,
                                             const Digest& /*proposed*/, const Digest& alternate) {
  const int n = config.n;
  std::vector<bool> byz(n, false);
  for (int b : c.byzantine) {
    if (b < 0 || b >= n) throw DomainError("byzantine position out of range");
    byz[b] = true;
  }
  std::vector<int> honest_replicas, byz_replicas;
  for (int i = 1; i < n; ++i) (byz[i] ? byz_replicas : honest_replicas).push_back(i);

  // Leader patterns: every assignment of {none, proposed, alternate} to honest replicas.
  std::vector<std::vector<std::uint8_t>> leader_patterns;
  if (byz[0]) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < honest_replicas.size(); ++k) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<std::uint8_t> choice(n, 0);
      std::size_t x = code;
      for (int r : honest_replicas) {
        choice[r] = static_cast<std::uint8_t>(x % 3);
        x /= 3;
      }
      leader_patterns.push_back(choice);
    }
  } else {
    leader_patterns.push_back({});
  }

  std::vector<Adversary> out;
  for (const auto& pattern : leader_patterns) {
    std::vector<std::uint64_t> masks;
    std::uint64_t half = 0, odd = 0, follow = 0;
    for (int r = 0; r < n; ++r) {
      if (r < n / 2) half |= 1ULL << r;
      if (r % 2) odd |= 1ULL << r;
      if (!pattern.empty() && pattern[r] == 2) follow |= 1ULL << r;
    }
    masks = {half, odd};
    if (!pattern.empty()) masks.push_back(follow);
    std::vector<ByzantinePlan> plans;
    for (Vote p : vote_options())
      for (Vote a : vote_options()) {
        const bool split = p == Vote::Split || a == Vote::Split;
        if (!split) {
          plans.push_back({p, a, 0});
          continue;
        }
        for (auto m : masks) plans.push_back({p, a, m});
      }
    if (byz_replicas.empty()) {
      Adversary adv;
      adv.alternate = alternate;
      adv.leader_choice = pattern;
      out.push_back(std::move(adv));
      continue;
    }
    if (c.shared_plan) {
      for (const auto& plan : plans) {
        Adversary adv;
        adv.alternate = alternate;
        adv.leader_choice = pattern;
        for (int b : byz_replicas) adv.plans[b] = plan;
        out.push_back(std::move(adv));
      }
    } else {
      std::vector<std::size_t> idx(byz_replicas.size(), 0);
      while (true) {
        Adversary adv;
        adv.alternate = alternate;
        adv.leader_choice = pattern;
        for (std::size_t k = 0; k < byz_replicas.size(); ++k) adv.plans[byz_replicas[k]] = plans[idx[k]];
        out.push_back(std::move(adv));
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == plans.size()) idx[k++] = 0;
        if (k == idx.size()) break;
      }
    }
  }
  return out;
}

namespace {

BlockProposal model_proposal() {
  BlockProposal p;
  p.height = 1;
  p.transactions.push_back(sha256("model check block"));
  return p;
}

Digest model_alternate() { return sha256("model check conflicting block"); }

}  // namespace

std::vector<Adversary> model_check_adversaries(const ConsensusConfig& config, const ModelCheckCase& c) {
  return enumerate_adversaries(config, c, model_proposal().digest(), model_alternate());
}

ModelCheckReport check_views(const ConsensusConfig& config, const ModelCheckCase& c,
                             std::span<const Adversary> adversaries, std::size_t begin, std::size_t end) {
  ModelCheckReport rep;
  std::vector<ConsensusNode> nodes;
  for (int i = 0; i < config.n; ++i) nodes.push_back({i, Behavior::Honest, {}});
  for (int b : c.byzantine) nodes[b].behavior = Behavior::Byzantine;
  HmacSigner signer(0x6d6f64656cULL);
  ViewInput in;
  in.nodes = &nodes;
  in.leader = 0;
  in.proposal = model_proposal();
  in.valid = {in.proposal.digest(), model_alternate()};
  in.signer = &signer;
  in.record_trace = false;
  for (std::size_t k = begin; k < end && k < adversaries.size(); ++k) {
    in.adversary = &adversaries[k];
    const auto out = run_view(config, in);
    ++rep.views;
    rep.max_messages = std::max(rep.max_messages, out.messages);
    std::optional<Digest> first;
    bool divergent = false, any = false, all = true;
    for (int i = 0; i < config.n; ++i) {
      if (nodes[i].behavior != Behavior::Honest) continue;
      if (!out.commits[i]) {
        all = false;
        continue;
      }
      any = true;
      if (first && *first != *out.commits[i]) divergent = true;
      if (!first) first = out.commits[i];
    }
    rep.divergent += divergent;
    rep.partial += any && !all;
    rep.committed += any;
  }
  return rep;
}

ModelCheckReport merge(const ModelCheckReport& a, const ModelCheckReport& b) {
  ModelCheckReport r;
  r.views = a.views + b.views;
  r.divergent = a.divergent + b.divergent;
  r.partial = a.partial + b.partial;
  r.committed = a.committed + b.committed;
  r.max_messages = std::max(a.max_messages, b.max_messages);
  r.failure_free_live = a.failure_free_live || b.failure_free_live;
  return r;
}

ModelCheckReport model_check(const ConsensusConfig& config, std::span<const ModelCheckCase> cases) {
  ModelCheckReport total = check_views(config, ModelCheckCase{}, std::vector<Adversary>{Adversary{}}, 0, 1);
  total.failure_free_live = total.committed == 1 && total.partial == 0;
  for (const auto& c : cases) {
    const auto advs = model_check_adversaries(config, c);
    total = merge(total, check_views(config, c, advs, 0, advs.size()));
  }
  return total;
}

}  // namespace parkedchain::consensus
