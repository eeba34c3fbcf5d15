#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace parkedchain::parking {

/// Regularized lower/upper incomplete gamma, series / continued-fraction hybrid.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Dual-Gamma mixture for one arrival hour. Scales are in hours.
struct Mixture {
  double h_short = 0.5, h_long = 0.5;
  double shape_short = 1, scale_short = 1;
  double shape_long = 1, scale_long = 1;
  void validate() const;
  double mean() const { return h_short * shape_short * scale_short + h_long * shape_long * scale_long; }
};

struct GammaMixtureParams {
  std::array<Mixture, 24> hours;
  const Mixture& at(int hour) const;
  void validate() const;
  /// Illustrative default set (not fitted to any trace).
  static GammaMixtureParams defaults();
  /// Same mixture for every hour.
  static GammaMixtureParams uniform(const Mixture& m);
};

struct PVState {
  int id = 0;
  int arrival_hour = 0;
  double parked_hours = 0;
  double horizon_hours = 1;
};

struct TypeProfile {
  std::vector<double> theta;
  std::vector<double> beta;
  int requested = 0;
  int effective() const { return static_cast<int>(theta.size()); }
  void validate() const;
};

double density(double t_p, const Mixture& m);
double density(double t_p, int arrival_hour, const GammaMixtureParams& params);
/// P[duration > t].
double survival(double t, const Mixture& m);

double stay_probability(const PVState& pv, const GammaMixtureParams& params);
double leave_probability(const PVState& pv, const GammaMixtureParams& params);
/// Survival ratio written with unnormalized incomplete gammas and Gamma products.
/// corrected = false reproduces the printed arrangement, whose Gamma normalizers
/// are attached to the wrong components; it agrees only when both shapes match.
double stay_probability_gamma_products(const PVState& pv, const GammaMixtureParams& params, bool corrected);

/// Quantile-bin classification of survival values into at most n types.
TypeProfile classify_values(std::vector<double> values, int n);
TypeProfile classify_types(std::span<const PVState> pvs, const GammaMixtureParams& params, int n);

struct TraceRecord {
  int arrival_hour = 0;
  double duration_hours = 0;
};

/// Trace CSV `arrival_hour,duration_hours`. Any malformed row rejects the file.
std::vector<TraceRecord> read_trace(std::istream& is);
void write_trace(std::ostream& os, std::span<const TraceRecord> trace);

std::array<std::int64_t, 24> arrival_histogram(std::span<const TraceRecord> trace);

/// PVs still parked at slot, with cyclic elapsed time (slot - arrival) mod 24.
std::vector<PVState> present_population(std::span<const TraceRecord> trace, int slot, double horizon_hours);

struct TraceSummary {
  std::array<std::int64_t, 24> histogram{};
  std::array<TypeProfile, 24> profiles;
  std::array<std::int64_t, 24> present{};
};

TraceSummary summarize_trace(std::span<const TraceRecord> trace, const GammaMixtureParams& params, int n,
                             double horizon_hours);
TraceSummary ingest_trace(std::istream& is, const GammaMixtureParams& params, int n, double horizon_hours);

struct ArrivalDistribution {
  std::array<double, 24> weight{};
  /// Bimodal morning/noon profile, peak at 9.
  static ArrivalDistribution synthetic_default();
  static ArrivalDistribution flat();
};

std::vector<TraceRecord> synthesize_population(const GammaMixtureParams& params,
                                               const ArrivalDistribution& arrivals, std::size_t count,
                                               std::uint64_t seed);

/// Parameter file: one row per hour `hour,h_short,h_long,shape_short,scale_short,shape_long,scale_long`,
/// `#` comments allowed, all 24 hours required.
GammaMixtureParams read_params(std::istream& is);
void write_params(std::ostream& os, const GammaMixtureParams& params);

}  // namespace parkedchain::parking
