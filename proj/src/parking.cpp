#include "parkedchain/parking.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "parkedchain/error.hpp"
#include "parkedchain/util.hpp"

namespace parkedchain::parking {

namespace {

constexpr double kRelTol = 1e-15;
constexpr int kMaxIter = 100000;

// exp(-x + a ln x - lgamma(a)), the common prefactor of both expansions.
double prefactor(double a, double x) { return std::exp(-x + a * std::log(x) - std::lgamma(a)); }

double lower_series(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kRelTol) return sum * prefactor(a, x);
  }
  throw DomainError("incomplete gamma series did not converge");
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double upper_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1) < kRelTol) return h * prefactor(a, x);
  }
  throw DomainError("incomplete gamma continued fraction did not converge");
}

void check_gamma_args(double a, double x) {
  if (!(a > 0)) throw DomainError("incomplete gamma needs shape > 0");
  if (!(x >= 0)) throw DomainError("incomplete gamma needs x >= 0");
}

double gamma_pdf(double t, double shape, double scale) {
  return std::exp((shape - 1) * std::log(t) - t / scale - std::lgamma(shape) - shape * std::log(scale));
}

}  // namespace

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0) return 0;
  if (std::isinf(x)) return 1;
  return x < a + 1 ? lower_series(a, x) : 1 - upper_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0) return 1;
  if (std::isinf(x)) return 0;
  return x < a + 1 ? 1 - lower_series(a, x) : upper_fraction(a, x);
}

void Mixture::validate() const {
  if (h_short < 0 || h_long < 0 || std::abs(h_short + h_long - 1) > 1e-9)
    throw DomainError("mixture weights must be nonnegative and sum to 1");
  if (!(shape_short > 0) || !(shape_long > 0) || !(scale_short > 0) || !(scale_long > 0))
    throw DomainError("gamma shapes and scales must be positive");
}

const Mixture& GammaMixtureParams::at(int hour) const {
  if (hour < 0 || hour > 23) throw DomainError("arrival hour must be in 0..23");
  return hours[hour];
}

void GammaMixtureParams::validate() const {
  for (const auto& m : hours) m.validate();
}

GammaMixtureParams GammaMixtureParams::defaults() {
  GammaMixtureParams p;
  for (int h = 0; h < 24; ++h) {
    const double z = (h - 8.0) / 2.5;
    const double long_share = 0.15 + 0.6 * std::exp(-0.5 * z * z);
    p.hours[h] = {1 - long_share, long_share, 1.6, 0.75, 4.0, 2.0};
  }
  return p;
}

GammaMixtureParams GammaMixtureParams::uniform(const Mixture& m) {
  GammaMixtureParams p;
  p.hours.fill(m);
  return p;
}

void TypeProfile::validate() const {
  if (theta.empty() || theta.size() != beta.size()) throw DomainError("type profile needs matching theta and beta");
  double sum = 0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (!(theta[j] > 0) || theta[j] > 1) throw DomainError("type values must lie in (0,1]");
    if (j > 0 && !(theta[j] > theta[j - 1])) throw DomainError("type values must be strictly ascending");
    if (beta[j] < 0) throw DomainError("type probabilities must be nonnegative");
    sum += beta[j];
  }
  if (std::abs(sum - 1) > 1e-9) throw DomainError("type probabilities must sum to 1");
}

double density(double t_p, const Mixture& m) {
  if (!(t_p > 0)) throw DomainError("density needs a positive parked duration");
  return m.h_short * gamma_pdf(t_p, m.shape_short, m.scale_short) +
         m.h_long * gamma_pdf(t_p, m.shape_long, m.scale_long);
}

double density(double t_p, int arrival_hour, const GammaMixtureParams& params) {
  return density(t_p, params.at(arrival_hour));
}

double survival(double t, const Mixture& m) {
  if (t < 0) throw DomainError("survival needs t >= 0");
  return m.h_short * gamma_q(m.shape_short, t / m.scale_short) +
         m.h_long * gamma_q(m.shape_long, t / m.scale_long);
}

static void check_state(const PVState& pv) {
  if (!(pv.parked_hours >= 0)) throw DomainError("parked duration must be >= 0");
  if (!(pv.horizon_hours > 0)) throw DomainError("horizon must be > 0");
}

double stay_probability(const PVState& pv, const GammaMixtureParams& params) {
  check_state(pv);
  const auto& m = params.at(pv.arrival_hour);
  const double den = survival(pv.parked_hours, m);
  if (!(den > 0)) throw DomainError("parked duration is beyond the numeric support of the survival function");
  return std::clamp(survival(pv.parked_hours + pv.horizon_hours, m) / den, 0.0, 1.0);
}

double leave_probability(const PVState& pv, const GammaMixtureParams& params) {
  return 1 - stay_probability(pv, params);
}

double stay_probability_gamma_products(const PVState& pv, const GammaMixtureParams& params, bool corrected) {
  check_state(pv);
  const auto& m = params.at(pv.arrival_hour);
  const double gs = std::tgamma(m.shape_short), gl = std::tgamma(m.shape_long);
  // Unnormalized lower incomplete gamma.
  auto lower = [](double a, double x) { return gamma_p(a, x) * std::tgamma(a); };
  auto term = [&](double t) {
    const double ls = lower(m.shape_short, t / m.scale_short);
    const double ll = lower(m.shape_long, t / m.scale_long);
    return corrected ? m.h_short * ls * gl + m.h_long * ll * gs - gl * gs
                     : m.h_short * ls * gs + m.h_long * ll * gl - gl * gs;
  };
  const double den = term(pv.parked_hours);
  if (den == 0) throw DomainError("survival denominator vanished");
  return term(pv.parked_hours + pv.horizon_hours) / den;
}

TypeProfile classify_values(std::vector<double> values, int n) {
  if (values.empty()) throw DomainError("cannot classify an empty population");
  if (n < 1) throw DomainError("type count must be at least 1");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  std::vector<std::size_t> cuts{0};
  for (int k = 1; k < n; ++k) {
    std::size_t c = (static_cast<std::size_t>(k) * m + n / 2) / n;
    c = std::max(c, cuts.back());
    while (c > 0 && c < m && values[c] == values[c - 1]) ++c;
    if (c > cuts.back() && c < m) cuts.push_back(c);
  }
  cuts.push_back(m);
  TypeProfile p;
  p.requested = n;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const auto lo = cuts[k], hi = cuts[k + 1];
    double s = 0;
    for (auto i = lo; i < hi; ++i) s += values[i];
    p.theta.push_back(s / static_cast<double>(hi - lo));
    p.beta.push_back(static_cast<double>(hi - lo) / static_cast<double>(m));
  }
  return p;
}

TypeProfile classify_types(std::span<const PVState> pvs, const GammaMixtureParams& params, int n) {
  std::vector<double> values;
  values.reserve(pvs.size());
  for (const auto& pv : pvs) values.push_back(stay_probability(pv, params));
  return classify_values(std::move(values), n);
}

std::vector<TraceRecord> read_trace(std::istream& is) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv(line);
    if (row == 1 && !f.empty() && f[0] == "arrival_hour") continue;
    if (f.size() != 2) throw ParseError("expected 2 columns arrival_hour,duration_hours", row);
    const auto hour = parse_int(f[0], row);
    const double dur = parse_double(f[1], row);
    if (hour < 0 || hour > 23) throw ParseError("arrival_hour must be in 0..23", row);
    if (!(dur > 0) || !std::isfinite(dur)) throw ParseError("duration_hours must be positive", row);
    out.push_back({static_cast<int>(hour), dur});
  }
  return out;
}

void write_trace(std::ostream& os, std::span<const TraceRecord> trace) {
  os << "arrival_hour,duration_hours\n";
  for (const auto& r : trace) os << r.arrival_hour << ',' << fmt(r.duration_hours) << '\n';
}

std::array<std::int64_t, 24> arrival_histogram(std::span<const TraceRecord> trace) {
  std::array<std::int64_t, 24> h{};
  for (const auto& r : trace) {
    if (r.arrival_hour < 0 || r.arrival_hour > 23) throw DomainError("arrival hour out of range");
    ++h[r.arrival_hour];
  }
  return h;
}

std::vector<PVState> present_population(std::span<const TraceRecord> trace, int slot, double horizon_hours) {
  std::vector<PVState> out;
  int id = 0;
  for (const auto& r : trace) {
    const int elapsed = ((slot - r.arrival_hour) % 24 + 24) % 24;
    if (r.duration_hours > elapsed) out.push_back({id, r.arrival_hour, static_cast<double>(elapsed), horizon_hours});
    ++id;
  }
  return out;
}

TraceSummary summarize_trace(std::span<const TraceRecord> trace, const GammaMixtureParams& params, int n,
                             double horizon_hours) {
  TraceSummary s;
  s.histogram = arrival_histogram(trace);
  for (int t = 0; t < 24; ++t) {
    const auto pop = present_population(trace, t, horizon_hours);
    s.present[t] = static_cast<std::int64_t>(pop.size());
    if (!pop.empty()) s.profiles[t] = classify_types(pop, params, n);
  }
  return s;
}

TraceSummary ingest_trace(std::istream& is, const GammaMixtureParams& params, int n, double horizon_hours) {
  const auto trace = read_trace(is);
  return summarize_trace(trace, params, n, horizon_hours);
}

ArrivalDistribution ArrivalDistribution::synthetic_default() {
  ArrivalDistribution a;
  auto bump = [](double h, double mu, double sd) {
    const double z = (h - mu) / sd;
    return std::exp(-0.5 * z * z) / sd;
  };
  for (int h = 3; h <= 21; ++h) a.weight[h] = 0.6 * bump(h, 9, 1.5) + 0.4 * bump(h, 12.5, 2) + 0.02;
  return a;
}

ArrivalDistribution ArrivalDistribution::flat() {
  ArrivalDistribution a;
  a.weight.fill(1.0);
  return a;
}

std::vector<TraceRecord> synthesize_population(const GammaMixtureParams& params,
                                               const ArrivalDistribution& arrivals, std::size_t count,
                                               std::uint64_t seed) {
  params.validate();
  auto rng = make_rng(seed, 0x7061726b);
  std::discrete_distribution<int> hour(arrivals.weight.begin(), arrivals.weight.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TraceRecord> out;
  out.reserve(count);
  while (out.size() < count) {
    const int h = hour(rng);
    const auto& m = params.hours[h];
    const bool is_short = unit(rng) < m.h_short;
    std::gamma_distribution<double> g(is_short ? m.shape_short : m.shape_long,
                                      is_short ? m.scale_short : m.scale_long);
    const double d = g(rng);
    if (d > 0) out.push_back({h, d});
  }
  return out;
}

GammaMixtureParams read_params(std::istream& is) {
  GammaMixtureParams p;
  std::array<bool, 24> seen{};
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv(line);
    if (f[0] == "hour") continue;
    if (f.size() != 7) throw ParseError("expected hour and six mixture fields", row);
    const auto h = parse_int(f[0], row);
    if (h < 0 || h > 23) throw ParseError("hour must be in 0..23", row);
    if (seen[h]) throw ParseError("duplicate hour " + std::to_string(h), row);
    seen[h] = true;
    Mixture m{parse_double(f[1], row), parse_double(f[2], row), parse_double(f[3], row),
              parse_double(f[4], row), parse_double(f[5], row), parse_double(f[6], row)};
    try {
      m.validate();
    } catch (const DomainError& e) {
      throw ParseError(e.what(), row);
    }
    p.hours[h] = m;
  }
  for (int h = 0; h < 24; ++h)
    if (!seen[h]) throw ParseError("missing parameters for hour " + std::to_string(h));
  return p;
}

void write_params(std::ostream& os, const GammaMixtureParams& params) {
  os << "hour,h_short,h_long,shape_short,scale_short,shape_long,scale_long\n";
  for (int h = 0; h < 24; ++h) {
    const auto& m = params.hours[h];
    os << h << ',' << fmt(m.h_short) << ',' << fmt(m.h_long) << ',' << fmt(m.shape_short) << ','
       << fmt(m.scale_short) << ',' << fmt(m.shape_long) << ',' << fmt(m.scale_long) << '\n';
  }
}

}  // namespace parkedchain::parking
