#include "parkedchain/reputation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "parkedchain/error.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::reputation {

bool is_valid(const Opinion& o, double tol) {
  auto in01 = [tol](double v) { return v >= -tol && v <= 1 + tol; };
  return in01(o.b) && in01(o.d) && in01(o.u) && in01(o.a) && std::abs(o.b + o.d + o.u - 1) <= tol;
}

void validate(const Opinion& o) {
  if (!is_valid(o)) throw DomainError("opinion components must lie in [0,1] with b + d + u = 1");
}

void WeightConfig::validate() const {
  if (gamma1 < 0 || gamma2 < 0 || gamma3 < 0) throw DomainError("weights gamma must be nonnegative");
  if (std::abs(gamma1 + gamma2 + gamma3 - 1) > 1e-9) throw DomainError("weights gamma must sum to 1");
  if (!(alpha1 > 0) || !(alpha2 >= 0)) throw DomainError("timeliness alpha1 must be > 0 and alpha2 >= 0");
}

Opinion opinion_from_evidence(double positive, double negative, double base_rate) {
  if (positive < 0 || negative < 0) throw DomainError("evidence counts must be nonnegative");
  const double total = positive + negative + kEvidenceWeight;
  return {positive / total, negative / total, kEvidenceWeight / total, base_rate};
}

Opinion local_opinion(std::span<const InteractionRecord> history, double base_rate) {
  double p = 0, q = 0;
  for (const auto& r : history) (r.positive ? p : q) += r.count;
  return opinion_from_evidence(p, q, base_rate);
}

double reputation_value(const Opinion& o) { return o.b + o.u * o.a; }

double familiarity_weight(double p_ij, std::span<const double> peer_counts) {
  if (peer_counts.empty()) throw DomainError("familiarity needs at least one peer count");
  double sum = 0;
  for (double c : peer_counts) {
    if (c < 0) throw DomainError("interaction counts must be nonnegative");
    sum += c;
  }
  if (sum <= 0) throw DomainError("no interaction history: peer counts are all zero");
  return p_ij / (sum / static_cast<double>(peer_counts.size()));
}

double timeliness_weight(int t, int t_ij, const WeightConfig& cfg) {
  if (t <= t_ij) throw DomainError("timeliness needs an opinion strictly older than the current slot");
  return cfg.alpha1 * std::pow(static_cast<double>(t - t_ij), -cfg.alpha2);
}

double similarity_weight(double arrival_i, double arrival_j) {
  if (arrival_i < 0 || arrival_j < 0) throw DomainError("arrival hours must be nonnegative");
  return 1.0 / (1.0 + std::abs(arrival_i - arrival_j));
}

double overall_weight(double x, double y, double z, const WeightConfig& cfg) {
  return cfg.gamma1 * x + cfg.gamma2 * y + cfg.gamma3 * z;
}

Opinion synthesize_recommended(std::span<const WeightedOpinion> opinions) {
  double w = 0, b = 0, d = 0, u = 0, a = 0;
  for (const auto& [wk, o] : opinions) {
    if (wk < 0) throw DomainError("recommendation weights must be nonnegative");
    w += wk;
    b += wk * o.b;
    d += wk * o.d;
    u += wk * o.u;
    a += wk * o.a;
  }
  if (opinions.empty() || !(w > 0)) throw DomainError("synthesis needs a positive total weight");
  return {b / w, d / w, u / w, a / w};
}

Opinion fuse_final(const Opinion& local, const Opinion& syn) {
  const double k = syn.u + local.u - syn.u * local.u;
  if (!(k > 0)) throw DomainError("cannot fuse two dogmatic opinions (both u = 0)");
  return {(local.b * syn.u + syn.b * local.u) / k, (local.d * syn.u + syn.d * local.u) / k,
          syn.u * local.u / k, local.a};
}

double average_final_reputation(std::span<const double> finals) {
  if (finals.empty()) throw DomainError("average reputation needs at least one rater");
  double s = 0;
  for (double g : finals) s += g;
  return s / static_cast<double>(finals.size());
}

double linear_reputation_baseline(std::span<const InteractionRecord> history) {
  std::map<int, std::pair<double, double>> by_slot;
  for (const auto& r : history) {
    auto& [pos, all] = by_slot[r.slot];
    if (r.positive) pos += r.count;
    all += r.count;
  }
  double v = kBaselinePrior;
  for (const auto& [slot, e] : by_slot)
    if (e.second > 0) v += kBaselineSmoothing * (e.first / e.second - v);
  return v;
}

InteractionLog::InteractionLog(int population)
    : population_(population),
      segments_(population),
      pair_counts_(static_cast<std::size_t>(population) * population, 0.0),
      last_segment_(static_cast<std::size_t>(population) * population, -1),
      peer_nonzero_(population, 0),
      peer_sum_(population, 0.0),
      slot_evidence_(population) {
  if (population < 2) throw DomainError("population must have at least two nodes");
}

void InteractionLog::add(const InteractionRecord& r) {
  if (r.rater < 0 || r.rater >= population_ || r.target < 0 || r.target >= population_)
    throw DomainError("interaction id out of range");
  if (r.rater == r.target) throw DomainError("rater and target must differ");
  if (r.count < 0) throw DomainError("interaction count must be nonnegative");
  if (!records_.empty() && r.slot < records_.back().slot)
    throw DomainError("interactions must be added in slot order");
  records_.push_back(r);

  auto& segs = segments_[r.target];
  int& last = last_segment_[r.rater * population_ + r.target];
  if (last < 0 || segs[last].slot != r.slot) {
    last = static_cast<int>(segs.size());
    segs.push_back({r.rater, r.slot, 0, 0});
  }
  Segment& seg = segs[last];
  (r.positive ? seg.positive : seg.negative) += r.count;

  double& pc = pair_counts_[r.rater * population_ + r.target];
  if (pc == 0 && r.count > 0) ++peer_nonzero_[r.rater];
  pc += r.count;
  peer_sum_[r.rater] += r.count;

  auto& [pos, all] = slot_evidence_[r.target][r.slot];
  if (r.positive) pos += r.count;
  all += r.count;
}

double InteractionLog::peer_mean(int rater) const {
  return peer_nonzero_[rater] ? peer_sum_[rater] / peer_nonzero_[rater] : 0.0;
}

std::vector<std::pair<int, double>> InteractionLog::slot_fractions(int target) const {
  std::vector<std::pair<int, double>> out;
  for (const auto& [slot, e] : slot_evidence_[target])
    if (e.second > 0) out.emplace_back(slot, e.first / e.second);
  return out;
}

namespace {

struct Accum {
  double w = 0, b = 0, d = 0, u = 0, a = 0;
  void add(double wk, const Opinion& o) {
    w += wk;
    b += wk * o.b;
    d += wk * o.d;
    u += wk * o.u;
    a += wk * o.a;
  }
};

Opinion clamp_normalized(double b, double d, double u, double a) {
  b = std::max(b, 0.0);
  d = std::max(d, 0.0);
  u = std::max(u, 0.0);
  const double s = b + d + u;
  return {b / s, d / s, u / s, std::clamp(a, 0.0, 1.0)};
}

}  // namespace

void compute_target(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                    const ViewParams& params, int target, ReputationView& view) {
  const int n = log.population();
  const auto& w = params.weights;
  std::vector<Accum> per_rater(n);
  std::vector<const Segment*> current(n, nullptr);
  Accum total;
  for (const auto& s : log.segments(target)) {
    if (s.slot > t) continue;
    const Opinion o = opinion_from_evidence(s.positive, s.negative, params.base_rate);
    const double mean = log.peer_mean(s.rater);
    const double x = mean > 0 ? log.pair_count(s.rater, target) / mean : 0.0;
    const double y = timeliness_weight(t, std::min(s.slot, t - 1), w);
    const double z = similarity_weight(arrival_hours[s.rater], arrival_hours[target]);
    const double wk = overall_weight(x, y, z, w);
    per_rater[s.rater].add(wk, o);
    total.add(wk, o);
    if (s.slot == t) current[s.rater] = &s;
  }

  std::vector<double> finals;
  finals.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    const std::size_t idx = static_cast<std::size_t>(i) * n + target;
    if (i == target) {
      view.local[idx] = view.synthetic[idx] = view.final[idx] = vacuous(params.base_rate);
      view.final_value[idx] = params.base_rate;
      continue;
    }
    const Opinion local = current[i] ? opinion_from_evidence(current[i]->positive, current[i]->negative,
                                                             params.base_rate)
                                     : vacuous(params.base_rate);
    const Accum& own = per_rater[i];
    const double ws = total.w - own.w;
    const Opinion syn = ws > 1e-12 * std::max(total.w, 1.0)
                            ? clamp_normalized((total.b - own.b) / ws, (total.d - own.d) / ws,
                                               (total.u - own.u) / ws, (total.a - own.a) / ws)
                            : vacuous(params.base_rate);
    const Opinion fin = fuse_final(local, syn);
    view.local[idx] = local;
    view.synthetic[idx] = syn;
    view.final[idx] = fin;
    view.final_value[idx] = reputation_value(fin);
    finals.push_back(view.final_value[idx]);
  }
  view.average[target] = average_final_reputation(finals);
}

static void check_view_args(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                            const ViewParams& params) {
  params.weights.validate();
  if (arrival_hours.size() != static_cast<std::size_t>(log.population()))
    throw DomainError("need one arrival hour per node");
  if (!log.records().empty() && log.records().back().slot > t)
    throw DomainError("view slot precedes recorded interactions");
}

static ReputationView empty_view(int n, int t) {
  ReputationView v;
  v.slot = t;
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  v.local.resize(nn);
  v.synthetic.resize(nn);
  v.final.resize(nn);
  v.final_value.resize(nn);
  v.average.resize(n);
  return v;
}

ReputationView compute_view(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                            const ViewParams& params) {
  check_view_args(log, t, arrival_hours, params);
  auto view = empty_view(log.population(), t);
  for (int j = 0; j < log.population(); ++j) compute_target(log, t, arrival_hours, params, j, view);
  return view;
}

ReputationView prepare_view(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                            const ViewParams& params) {
  check_view_args(log, t, arrival_hours, params);
  return empty_view(log.population(), t);
}

std::vector<double> baseline_values(const InteractionLog& log, int t) {
  std::vector<double> out(log.population(), kBaselinePrior);
  for (int j = 0; j < log.population(); ++j) {
    double v = kBaselinePrior;
    for (const auto& [slot, frac] : log.slot_fractions(j)) {
      if (slot > t) break;
      v += kBaselineSmoothing * (frac - v);
    }
    out[j] = v;
  }
  return out;
}

void write_interactions(std::ostream& os, std::span<const InteractionRecord> records) {
  os << "slot,rater,target,outcome\n";
  for (const auto& r : records)
    for (int c = 0; c < r.count; ++c)
      os << r.slot << ',' << r.rater << ',' << r.target << ',' << (r.positive ? 1 : 0) << '\n';
}

std::vector<InteractionRecord> read_interactions(std::istream& is) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    if (row == 1 && !f.empty() && f[0] == "slot") continue;
    if (f.size() != 4) throw ParseError("expected 4 columns slot,rater,target,outcome", row);
    InteractionRecord r;
    r.slot = static_cast<int>(parse_int(f[0], row));
    r.rater = static_cast<int>(parse_int(f[1], row));
    r.target = static_cast<int>(parse_int(f[2], row));
    const auto outcome = parse_int(f[3], row);
    if (outcome != 0 && outcome != 1) throw ParseError("outcome must be 0 or 1", row);
    if (r.rater < 0 || r.target < 0 || r.slot < 0) throw ParseError("ids and slots must be nonnegative", row);
    if (r.rater == r.target) throw ParseError("rater and target must differ", row);
    r.positive = outcome == 1;
    out.push_back(r);
  }
  return out;
}

}  // namespace parkedchain::reputation
