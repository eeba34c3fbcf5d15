#include "parkedchain/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "parkedchain/error.hpp"
#include "parkedchain/ledger.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::harness {

using nlohmann::json;

std::vector<double> ExperimentConfig::sweep() const {
  if (!thresholds.empty()) return thresholds;
  std::vector<double> out;
  for (int k = 1; k <= 12; ++k) out.push_back(k / 20.0);
  return out;
}

namespace {

std::string type_name(const json& v) { return v.type_name(); }

class Reader {
 public:
  explicit Reader(std::vector<std::string>& diag) : diag_(diag) {}

  const json* section(const json& root, const char* name, std::initializer_list<const char*> keys) {
    auto it = root.find(name);
    if (it == root.end()) return nullptr;
    if (!it->is_object()) {
      diag_.push_back(std::string(name) + ": expected an object, got " + type_name(*it));
      return nullptr;
    }
    unknown(*it, name, keys);
    return &*it;
  }

  void unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!known.count(it.key())) diag_.push_back((where.empty() ? "" : where + ".") + it.key() + ": unknown key");
  }

  void number(const json* obj, const std::string& where, const char* key, double& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = (*obj)[key];
    if (!v.is_number()) {
      diag_.push_back(where + "." + key + ": expected a number, got " + type_name(v));
      return;
    }
    out = v.get<double>();
  }

  template <class Int>
  void integer(const json* obj, const std::string& where, const char* key, Int& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = (*obj)[key];
    if (!v.is_number_integer()) {
      diag_.push_back(where + "." + key + ": expected an integer, got " + type_name(v));
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (!v.is_number_unsigned()) {
        diag_.push_back(where + "." + key + ": must be nonnegative");
        return;
      }
      out = static_cast<Int>(v.get<std::uint64_t>());
    } else {
      out = static_cast<Int>(v.get<std::int64_t>());
    }
  }

  void text(const json* obj, const std::string& where, const char* key, std::string& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = (*obj)[key];
    if (!v.is_string()) {
      diag_.push_back(where + "." + key + ": expected a string, got " + type_name(v));
      return;
    }
    out = v.get<std::string>();
  }

  bool numbers(const json* obj, const std::string& where, const char* key, std::vector<double>& out) {
    if (!obj || !obj->contains(key)) return false;
    const auto& v = (*obj)[key];
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      diag_.push_back(where + "." + key + ": expected an array of numbers");
      return false;
    }
    out = v.get<std::vector<double>>();
    return true;
  }

 private:
  std::vector<std::string>& diag_;
};

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_relative()) p = std::filesystem::path(base) / p;
  return p.lexically_normal().string();
}

void check_ranges(const ExperimentConfig& c, std::vector<std::string>& d) {
  auto positive = [&](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) d.push_back(std::string(name) + ": must be positive (got " + fmt(v) + ")");
  };
  auto unit = [&](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) d.push_back(std::string(name) + ": must lie in [0,1] (got " + fmt(v) + ")");
  };
  if (c.types < 1) d.push_back("contract.types: must be at least 1");
  positive(c.task.rho, "contract.rho");
  positive(c.task.cycles_per_bit, "contract.cycles_per_bit");
  positive(c.task.task_bits, "contract.task_bits");
  positive(c.task.f_local, "contract.f_local_hz");
  positive(c.task.rate_default, "contract.rate_bps");
  positive(c.task.capacitance, "contract.capacitance");
  positive(c.task.energy_price, "contract.energy_price");
  positive(c.task.f_max, "contract.f_max_hz");
  if (c.task.f_max <= c.task.f_local) d.push_back("contract.f_max_hz: must exceed contract.f_local_hz");
  if (c.valuation != "log1p" && c.valuation != "sqrt1p")
    d.push_back("contract.valuation: unknown valuation '" + c.valuation + "' (log1p or sqrt1p)");

  for (const auto& [path, name] : {std::pair{c.params_path, "parking.params"}, {c.trace_path, "parking.trace"}})
    if (!path.empty() && !std::filesystem::is_regular_file(path))
      d.push_back(std::string(name) + ": file not found: " + path);
  if (c.trace_path.empty() && c.synthetic_records < 1) d.push_back("parking.synthetic_records: must be at least 1");
  positive(c.horizon_hours, "parking.horizon_hours");
  if (c.hour < 0 || c.hour > 23) d.push_back("parking.hour: must lie in 0..23");

  const auto& w = c.population.view.weights;
  if (w.gamma1 < 0 || w.gamma2 < 0 || w.gamma3 < 0) d.push_back("reputation.gamma: weights must be nonnegative");
  const double gs = w.gamma1 + w.gamma2 + w.gamma3;
  if (std::abs(gs - 1) > 1e-9) d.push_back("reputation.gamma: weights must sum to 1 (got " + fmt(gs) + ")");
  positive(w.alpha1, "reputation.alpha[0]");
  if (!(w.alpha2 >= 0)) d.push_back("reputation.alpha[1]: must be nonnegative");
  unit(c.population.view.base_rate, "reputation.base_rate");
  const auto& pc = c.population;
  if (pc.population < 2) d.push_back("reputation.population: must be at least 2");
  if (pc.misbehaving < 0 || pc.misbehaving > pc.population)
    d.push_back("reputation.misbehaving: must lie in 0..population");
  if (pc.slots < 1) d.push_back("reputation.slots: must be at least 1");
  if (pc.misbehaving_profile.onset < 0) d.push_back("reputation.onset: must be nonnegative");
  unit(pc.misbehaving_profile.before, "reputation.cooperate_before");
  unit(pc.misbehaving_profile.after, "reputation.cooperate_after");
  if (pc.count_min < 1 || pc.count_max < pc.count_min)
    d.push_back("reputation.interactions: need 1 <= min <= max");
  unit(c.threshold, "reputation.threshold");
  if (c.detection_seeds < 1) d.push_back("reputation.seeds: must be at least 1");

  const auto& cc = c.consensus;
  if (cc.l < 0) d.push_back("consensus.l: must be nonnegative");
  if (cc.n < 4) d.push_back("consensus.n: must be at least 4");
  if (cc.n < 3 * cc.l + 1) d.push_back("consensus.n: must be at least 3l + 1");
  if (cc.n > pc.population) d.push_back("consensus.n: exceeds reputation.population");

  unit(c.colluder_fraction, "collusion.colluder_fraction");
  for (double t : c.thresholds) unit(t, "collusion.thresholds");
  if (c.collusion_seeds < 1) d.push_back("collusion.seeds: must be at least 1");
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const std::string& base_dir) {
  ExperimentConfig c;
  std::vector<std::string> d;
  std::string_view trimmed = json_text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
  json root = json::object();
  if (!trimmed.empty()) {
    try {
      root = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
  }
  if (!root.is_object()) throw ConfigError({"top level must be a JSON object"});

  Reader r(d);
  r.unknown(root, "", {"scenario", "seed", "contract", "parking", "reputation", "consensus", "collusion"});
  r.text(&root, "config", "scenario", c.scenario);
  r.integer(&root, "config", "seed", c.seed);

  if (auto s = r.section(root, "contract",
                         {"types", "rho", "cycles_per_bit", "task_bits", "f_local_hz", "rate_bps", "capacitance",
                          "energy_price", "f_max_hz", "valuation"})) {
    r.integer(s, "contract", "types", c.types);
    r.number(s, "contract", "rho", c.task.rho);
    r.number(s, "contract", "cycles_per_bit", c.task.cycles_per_bit);
    r.number(s, "contract", "task_bits", c.task.task_bits);
    r.number(s, "contract", "f_local_hz", c.task.f_local);
    r.number(s, "contract", "rate_bps", c.task.rate_default);
    r.number(s, "contract", "capacitance", c.task.capacitance);
    r.number(s, "contract", "energy_price", c.task.energy_price);
    r.number(s, "contract", "f_max_hz", c.task.f_max);
    r.text(s, "contract", "valuation", c.valuation);
  }
  if (auto s = r.section(root, "parking", {"params", "trace", "synthetic_records", "horizon_hours", "hour"})) {
    r.text(s, "parking", "params", c.params_path);
    r.text(s, "parking", "trace", c.trace_path);
    r.integer(s, "parking", "synthetic_records", c.synthetic_records);
    r.number(s, "parking", "horizon_hours", c.horizon_hours);
    r.integer(s, "parking", "hour", c.hour);
  }
  c.params_path = resolve(base_dir, c.params_path);
  c.trace_path = resolve(base_dir, c.trace_path);
  if (auto s = r.section(root, "reputation",
                         {"gamma", "alpha", "base_rate", "population", "misbehaving", "slots", "onset",
                          "cooperate_before", "cooperate_after", "interactions", "threshold", "seeds"})) {
    std::vector<double> v;
    auto& w = c.population.view.weights;
    if (r.numbers(s, "reputation", "gamma", v)) {
      if (v.size() != 3)
        d.push_back("reputation.gamma: expected 3 weights");
      else
        w.gamma1 = v[0], w.gamma2 = v[1], w.gamma3 = v[2];
    }
    if (r.numbers(s, "reputation", "alpha", v)) {
      if (v.size() != 2)
        d.push_back("reputation.alpha: expected 2 values");
      else
        w.alpha1 = v[0], w.alpha2 = v[1];
    }
    r.number(s, "reputation", "base_rate", c.population.view.base_rate);
    r.integer(s, "reputation", "population", c.population.population);
    r.integer(s, "reputation", "misbehaving", c.population.misbehaving);
    r.integer(s, "reputation", "slots", c.population.slots);
    r.integer(s, "reputation", "onset", c.population.misbehaving_profile.onset);
    r.number(s, "reputation", "cooperate_before", c.population.misbehaving_profile.before);
    r.number(s, "reputation", "cooperate_after", c.population.misbehaving_profile.after);
    if (r.numbers(s, "reputation", "interactions", v)) {
      if (v.size() != 2 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
        d.push_back("reputation.interactions: expected [min, max] integers");
      else
        c.population.count_min = static_cast<int>(v[0]), c.population.count_max = static_cast<int>(v[1]);
    }
    r.number(s, "reputation", "threshold", c.threshold);
    r.integer(s, "reputation", "seeds", c.detection_seeds);
  }
  if (auto s = r.section(root, "consensus", {"n", "l"})) {
    r.integer(s, "consensus", "n", c.consensus.n);
    r.integer(s, "consensus", "l", c.consensus.l);
  }
  c.consensus.threshold = c.threshold;
  c.consensus.slots = c.population.slots;
  if (auto s = r.section(root, "collusion", {"colluder_fraction", "thresholds", "seeds"})) {
    r.number(s, "collusion", "colluder_fraction", c.colluder_fraction);
    r.numbers(s, "collusion", "thresholds", c.thresholds);
    r.integer(s, "collusion", "seeds", c.collusion_seeds);
  }
  check_ranges(c, d);
  if (!d.empty()) throw ConfigError(std::move(d));
  c.task.v = contract::Valuation::by_name(c.valuation);
  return c;
}

ExperimentConfig validate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(ss.str(), dir.empty() ? "." : dir);
}

std::string canonical_config(const ExperimentConfig& c) {
  const auto& w = c.population.view.weights;
  json j;
  j["scenario"] = c.scenario;
  j["seed"] = c.seed;
  j["contract"] = {{"types", c.types},
                   {"rho", c.task.rho},
                   {"cycles_per_bit", c.task.cycles_per_bit},
                   {"task_bits", c.task.task_bits},
                   {"f_local_hz", c.task.f_local},
                   {"rate_bps", c.task.rate_default},
                   {"capacitance", c.task.capacitance},
                   {"energy_price", c.task.energy_price},
                   {"f_max_hz", c.task.f_max},
                   {"valuation", c.valuation}};
  j["parking"] = {{"params", c.params_path},
                  {"trace", c.trace_path},
                  {"synthetic_records", c.synthetic_records},
                  {"horizon_hours", c.horizon_hours},
                  {"hour", c.hour}};
  j["reputation"] = {{"gamma", {w.gamma1, w.gamma2, w.gamma3}},
                     {"alpha", {w.alpha1, w.alpha2}},
                     {"base_rate", c.population.view.base_rate},
                     {"population", c.population.population},
                     {"misbehaving", c.population.misbehaving},
                     {"slots", c.population.slots},
                     {"onset", c.population.misbehaving_profile.onset},
                     {"cooperate_before", c.population.misbehaving_profile.before},
                     {"cooperate_after", c.population.misbehaving_profile.after},
                     {"interactions", {c.population.count_min, c.population.count_max}},
                     {"threshold", c.threshold},
                     {"seeds", c.detection_seeds}};
  j["consensus"] = {{"n", c.consensus.n}, {"l", c.consensus.l}};
  j["collusion"] = {{"colluder_fraction", c.colluder_fraction},
                    {"thresholds", c.sweep()},
                    {"seeds", c.collusion_seeds}};
  return j.dump();
}

Digest config_digest(const ExperimentConfig& cfg) { return sha256(canonical_config(cfg)); }

void ResultTable::write_csv(std::ostream& os) const {
  for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << '\n';
  }
}

void ResultTable::write_provenance(std::ostream& os) const {
  os << "scenario=" << scenario << '\n'
     << "config_digest=" << provenance.config_digest << '\n'
     << "seed=" << provenance.seed << '\n'
     << "version=" << provenance.version << '\n'
     << "rows=" << rows.size() << '\n';
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"arrival-histogram", "reputation-decay",    "detection-rate",
                                              "collusion",         "contract-feasibility", "utility-vs-hour",
                                              "utility-vs-type"};
  return names;
}

bool is_scenario(const std::string& name) {
  const auto& n = scenario_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

std::vector<std::string> scenario_columns(const std::string& name) {
  static const std::vector<std::string> schemes{"lc", "lia", "la", "sa", "linear"};
  auto with_schemes = [&](std::vector<std::string> head) {
    for (const char* who : {"sr_", "pv_"})
      for (const auto& s : schemes) head.push_back(who + s);
    return head;
  };
  if (name == "arrival-histogram") return {"hour", "arrivals", "share", "present", "types"};
  if (name == "reputation-decay") return {"slot", "node", "sl", "lr"};
  if (name == "detection-rate") return {"slot", "sl_rate", "lr_rate", "sl_complete", "lr_complete"};
  if (name == "collusion") return {"threshold", "sl_probability", "lr_probability", "sl_colluders", "lr_colluders"};
  if (name == "contract-feasibility") return {"type", "item", "theta", "f_hz", "pi", "u_pv", "own", "best"};
  if (name == "utility-vs-hour") return with_schemes({"hour", "types"});
  if (name == "utility-vs-type") return with_schemes({"type", "theta", "beta"});
  throw DomainError("unknown scenario '" + name + "'");
}

parking::TraceSummary load_summary(const ExperimentConfig& cfg) {
  auto params = parking::GammaMixtureParams::defaults();
  if (!cfg.params_path.empty()) {
    std::ifstream in(cfg.params_path);
    if (!in) throw Error("cannot read parameter file " + cfg.params_path);
    params = parking::read_params(in);
  }
  if (!cfg.trace_path.empty()) {
    std::ifstream in(cfg.trace_path);
    if (!in) throw Error("cannot read trace file " + cfg.trace_path);
    return parking::ingest_trace(in, params, cfg.types, cfg.horizon_hours);
  }
  const auto trace = parking::synthesize_population(params, parking::ArrivalDistribution::synthetic_default(),
                                                    cfg.synthetic_records, cfg.seed);
  return parking::summarize_trace(trace, params, cfg.types, cfg.horizon_hours);
}

contract::ContractProblem problem_at(const ExperimentConfig& cfg, const parking::TraceSummary& summary, int hour) {
  contract::ContractProblem p;
  p.theta = summary.profiles.at(hour).theta;
  p.beta = summary.profiles.at(hour).beta;
  p.task = cfg.task;
  p.task.v = contract::Valuation::by_name(cfg.valuation);
  return p;
}

std::vector<contract::ContractMenu> compare_schemes(const contract::ContractProblem& p) {
  return {contract::solve_complete_info(p), contract::solve_lagrangian_iterative(p),
          contract::solve_local_asymmetric(p), contract::stackelberg_baseline(p),
          contract::linear_pricing_baseline(p)};
}

namespace {

constexpr double kAuditTol = 1e-6;

void audit(const contract::ContractMenu& menu, const contract::ContractProblem& p, int hour) {
  const auto rep = contract::check_feasibility(menu, p, kAuditTol);
  if (!rep.feasible())
    throw SolverError(contract::scheme_tag(menu.scheme) + " menu at hour " + std::to_string(hour) +
                      " violates IR/IC/monotonicity");
}

double expected_pv(const contract::ContractMenu& menu, const contract::ContractProblem& p) {
  const auto u = contract::pv_utilities(menu, p);
  double s = 0;
  for (int j = 0; j < p.size(); ++j) s += p.beta[j] * u[j];
  return s;
}

using Rows = std::vector<std::vector<std::string>>;

Rows arrival_histogram(const ExperimentConfig& cfg) {
  const auto s = load_summary(cfg);
  const double total = static_cast<double>(std::accumulate(s.histogram.begin(), s.histogram.end(), std::int64_t{0}));
  Rows rows;
  for (int h = 0; h < 24; ++h)
    rows.push_back({std::to_string(h), std::to_string(s.histogram[h]), fmt(total > 0 ? s.histogram[h] / total : 0),
                    std::to_string(s.present[h]), std::to_string(s.profiles[h].effective())});
  return rows;
}

Rows reputation_decay(const ExperimentConfig& cfg) {
  const auto run = consensus::simulate_population(cfg.population, cfg.seed, false);
  Rows rows;
  for (int t = 1; t <= cfg.population.slots; ++t)
    for (int j : run.misbehaving)
      rows.push_back({std::to_string(t), std::to_string(j), fmt(run.sl[t - 1][j]), fmt(run.lr[t - 1][j])});
  return rows;
}

Rows detection_rate(const ExperimentConfig& cfg, kernels::Exec exec) {
  const auto series =
      kernels::detection_ensemble(cfg.population, cfg.threshold, cfg.seed, cfg.detection_seeds, exec);
  Rows rows;
  const double k = static_cast<double>(series.size());
  for (int t = 1; t <= cfg.population.slots; ++t) {
    double sl = 0, lr = 0, slc = 0, lrc = 0;
    for (const auto& s : series) {
      sl += s.sl[t - 1];
      lr += s.lr[t - 1];
      slc += s.sl_reach <= t;
      lrc += s.lr_reach <= t;
    }
    rows.push_back({std::to_string(t), fmt(sl / k), fmt(lr / k), fmt(slc / k), fmt(lrc / k)});
  }
  return rows;
}

Rows collusion(const ExperimentConfig& cfg, kernels::Exec exec) {
  consensus::CollusionConfig cc;
  cc.population = cfg.population;
  cc.consensus = cfg.consensus;
  cc.colluder_fraction = cfg.colluder_fraction;
  const auto sweep = cfg.sweep();
  const auto trials = kernels::collusion_ensemble(cc, sweep, cfg.seed, cfg.collusion_seeds, exec);
  const double k = static_cast<double>(trials.size());
  Rows rows;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    double sl = 0, lr = 0, slc = 0, lrc = 0;
    for (const auto& t : trials) {
      sl += t[i].sl_correct;
      lr += t[i].lr_correct;
      slc += t[i].sl_colluders;
      lrc += t[i].lr_colluders;
    }
    rows.push_back({fmt(sweep[i]), fmt(sl / k), fmt(lr / k), fmt(slc / k), fmt(lrc / k)});
  }
  return rows;
}

Rows contract_feasibility(const ExperimentConfig& cfg) {
  const auto p = problem_at(cfg, load_summary(cfg), cfg.hour);
  if (p.theta.empty()) throw SolverError("no parked vehicles present at hour " + std::to_string(cfg.hour));
  const auto menu = contract::solve_lagrangian_iterative(p);
  audit(menu, p, cfg.hour);
  Rows rows;
  for (int j = 0; j < p.size(); ++j) {
    std::vector<double> u;
    for (const auto& it : menu.items) u.push_back(contract::pv_utility(p.theta[j], it.f, it.pi, p.task));
    const auto best = std::max_element(u.begin(), u.end()) - u.begin();
    for (int k = 0; k < p.size(); ++k)
      rows.push_back({std::to_string(j + 1), std::to_string(k + 1), fmt(p.theta[j]), fmt(menu.items[k].f),
                      fmt(menu.items[k].pi), fmt(u[k]), k == j ? "1" : "0", k == best ? "1" : "0"});
  }
  return rows;
}

Rows utility_vs_hour(const ExperimentConfig& cfg) {
  const auto s = load_summary(cfg);
  Rows rows;
  for (int h = 0; h < 24; ++h) {
    const auto p = problem_at(cfg, s, h);
    std::vector<std::string> row{std::to_string(h), std::to_string(p.size())};
    if (p.theta.empty()) {
      row.resize(12, "0");
      rows.push_back(row);
      continue;
    }
    const auto menus = compare_schemes(p);
    audit(menus[1], p, h);
    for (const auto& m : menus) row.push_back(fmt(contract::sr_expected_utility(m, p)));
    for (const auto& m : menus) row.push_back(fmt(expected_pv(m, p)));
    rows.push_back(row);
  }
  return rows;
}

Rows utility_vs_type(const ExperimentConfig& cfg) {
  const auto p = problem_at(cfg, load_summary(cfg), cfg.hour);
  if (p.theta.empty()) throw SolverError("no parked vehicles present at hour " + std::to_string(cfg.hour));
  const auto menus = compare_schemes(p);
  audit(menus[1], p, cfg.hour);
  Rows rows;
  for (int j = 0; j < p.size(); ++j) {
    std::vector<std::string> row{std::to_string(j + 1), fmt(p.theta[j]), fmt(p.beta[j])};
    for (const auto& m : menus) row.push_back(fmt(contract::sr_term(p, j, m.items[j])));
    for (const auto& m : menus)
      row.push_back(fmt(contract::pv_utility(p.theta[j], m.items[j].f, m.items[j].pi, p.task)));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ResultTable run_scenario(const std::string& name, const ExperimentConfig& cfg, kernels::Exec exec) {
  ResultTable t;
  t.scenario = name;
  t.columns = scenario_columns(name);
  if (name == "arrival-histogram") t.rows = arrival_histogram(cfg);
  if (name == "reputation-decay") t.rows = reputation_decay(cfg);
  if (name == "detection-rate") t.rows = detection_rate(cfg, exec);
  if (name == "collusion") t.rows = collusion(cfg, exec);
  if (name == "contract-feasibility") t.rows = contract_feasibility(cfg);
  if (name == "utility-vs-hour") t.rows = utility_vs_hour(cfg);
  if (name == "utility-vs-type") t.rows = utility_vs_type(cfg);
  t.provenance.config_digest = to_hex(config_digest(cfg));
  t.provenance.seed = cfg.seed;
  return t;
}

namespace {

struct Round {
  bool committed = false;
  bool truthful = false;
  Digest digest{};
  ledger::QuorumEvidence evidence;
  int proposer = -1;
};

/// One DBFT round over the committee. Misbehaving members vote for a forged digest.
Round consensus_round(const ExperimentConfig& cfg, const std::vector<int>& committee, const std::vector<bool>& bad,
                      const std::vector<Digest>& txs, std::uint64_t height, std::uint64_t seed) {
  const int n = static_cast<int>(committee.size());
  consensus::ConsensusConfig cc = cfg.consensus;
  cc.n = n;
  std::vector<consensus::ConsensusNode> nodes;
  consensus::Adversary adv;
  adv.alternate = sha256("forged block " + std::to_string(height));
  adv.leader_choice.assign(n, 2);
  for (int k = 0; k < n; ++k) {
    const int id = committee[k];
    nodes.push_back({id, bad[id] ? consensus::Behavior::Byzantine : consensus::Behavior::Honest, {}});
    if (bad[id]) adv.plans[id] = {consensus::Vote::Alternate, consensus::Vote::Alternate, 0};
  }
  consensus::BlockProposal proposal;
  proposal.height = height;
  proposal.transactions = txs;
  // The digest covers the proposer, so the true block has one digest per honest leader.
  std::vector<Digest> truth;
  for (int k = 0; k < n; ++k) {
    if (bad[committee[k]]) continue;
    proposal.proposer = committee[k];
    truth.push_back(proposal.digest());
  }
  consensus::HmacSigner signer(seed);
  auto run = consensus::run_consensus(cc, nodes, proposal, truth, &adv, signer, n);
  Round r;
  r.committed = run.committed;
  r.digest = run.digest;
  r.truthful = run.committed && std::find(truth.begin(), truth.end(), run.digest) != truth.end();
  r.evidence.required = cc.accept_quorum();
  if (run.committed) {
    const auto& last = run.views.back();
    for (int k = 0; k < n; ++k)
      if (last.commits[k]) r.evidence.signers.push_back(committee[k]);
    r.proposer = committee[(run.views.size() - 1) % n];
  }
  return r;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  PipelineResult out;
  const auto run = consensus::simulate_population(cfg.population, cfg.seed, true);
  const int m = cfg.population.population;
  std::map<int, double> rep;
  for (int i = 0; i < m; ++i) rep[i] = run.sl.back()[i];
  out.committee = consensus::select_consensus_nodes(rep, cfg.consensus.n);
  std::vector<bool> bad(m, false);
  for (int i : run.misbehaving) bad[i] = true;

  const auto p = problem_at(cfg, load_summary(cfg), cfg.hour);
  const auto menu = p.theta.empty() ? contract::ContractMenu{} : contract::solve_lagrangian_iterative(p);
  if (!p.theta.empty()) audit(menu, p, cfg.hour);

  ledger::Ledger led;
  const std::string sr = led.register_account("sr").address;
  std::vector<std::string> pv(m);
  for (int i = 0; i < m; ++i) {
    pv[i] = led.register_account("pv-" + std::to_string(i)).address;
    led.set_reputation(pv[i], rep[i]);
    led.fund(pv[i], ledger::kUnit * 10);
  }
  std::vector<ledger::MenuItem> items;
  ledger::Amount max_reward = 0;
  for (const auto& it : menu.items) {
    items.push_back({it.f, ledger::to_amount(it.pi)});
    max_reward = std::max(max_reward, items.back().reward);
  }
  const ledger::Amount sr_deposit = ledger::kUnit, pv_deposit = ledger::kUnit / 2;
  led.fund(sr, (sr_deposit + max_reward) * std::max(1, p.size()) + ledger::kUnit);

  // One contract per type, each signed by a non-committee PV.
  std::vector<int> pool;
  const std::set<int> in_committee(out.committee.begin(), out.committee.end());
  for (int i = 0; i < m; ++i)
    if (!in_committee.count(i)) pool.push_back(i);
  auto rng = make_rng(cfg.seed, 0x706970ULL);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> contracts;
  for (int j = 0; j < p.size() && j < static_cast<int>(pool.size()); ++j) {
    ledger::RequestSpec spec{cfg.task.task_bits, menu.items[j].f,
                             menu.items[j].f > 0 ? cfg.task.cycles() / menu.items[j].f : 0};
    const auto& c = led.post_request(sr, spec, items, sr_deposit);
    contracts.push_back(c.address);
    led.sign_contract(pv[pool[j]], c.address, j, pv_deposit);
    led.execute_task(c.address, unit(rng) >= p.theta[j]);
  }

  std::uint64_t height = 0;
  auto commit_pending = [&]() {
    const auto txs = led.pending();
    const auto r = consensus_round(cfg, out.committee, bad, txs, height, cfg.seed + height);
    if (!r.committed) return false;
    led.append_block(led.take_pending(), r.evidence, r.proposer);
    ++height;
    return true;
  };
  commit_pending();

  // Verification: the committee agrees on the submitted results.
  std::vector<Digest> results;
  for (const auto& a : contracts)
    if (led.contract(a).state == ledger::ContractState::ResultSubmitted) results.push_back(led.contract(a).result);
  const auto verify = consensus_round(cfg, out.committee, bad, results, 1000 + height, cfg.seed ^ 0x766572ULL);
  const bool pass = verify.truthful;
  for (const auto& a : contracts)
    if (led.contract(a).state == ledger::ContractState::ResultSubmitted) led.verify_and_settle(a, {pass, false});
  commit_pending();

  for (const auto& a : contracts) {
    ++out.contracts;
    const auto s = led.contract(a).state;
    out.paid += s == ledger::ContractState::Paid;
    out.refunded += s == ledger::ContractState::Refunded;
    out.confiscated += s == ledger::ContractState::Confiscated;
  }
  out.blocks = static_cast<int>(led.chain().size());
  out.chain_ok = led.verify_chain();
  std::ostringstream dump, explorer;
  led.dump(dump);
  led.write_explorer(explorer);
  out.ledger_dump = dump.str();
  out.explorer = explorer.str();
  Encoder e;
  e.str(out.ledger_dump).str(out.explorer);
  out.digest = e.sha256();
  return out;
}

}  // namespace parkedchain::harness
