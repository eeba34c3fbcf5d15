#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace parkedchain::reputation {

/// Subjective-logic opinion: belief, disbelief, uncertainty, base rate.
struct Opinion {
  double b = 0, d = 0, u = 1, a = 0.5;
};

inline constexpr double kOpinionTol = 1e-9;
inline constexpr double kEvidenceWeight = 2.0;

bool is_valid(const Opinion& o, double tol = kOpinionTol);
void validate(const Opinion& o);
inline Opinion vacuous(double base_rate) { return {0, 0, 1, base_rate}; }

struct InteractionRecord {
  int slot = 0;
  int rater = 0;
  int target = 0;
  bool positive = true;
  int count = 1;
};

struct WeightConfig {
  double gamma1 = 0.3, gamma2 = 0.4, gamma3 = 0.3;
  double alpha1 = 10, alpha2 = 1.5;
  void validate() const;
};

/// Evidence mapping with prior weight W: b = P/(P+Q+W), d = Q/(P+Q+W), u = W/(P+Q+W).
Opinion local_opinion(std::span<const InteractionRecord> history, double base_rate);
Opinion opinion_from_evidence(double positive, double negative, double base_rate);

double reputation_value(const Opinion& o);
double familiarity_weight(double p_ij, std::span<const double> peer_counts);
double timeliness_weight(int t, int t_ij, const WeightConfig& cfg);
double similarity_weight(double arrival_i, double arrival_j);
double overall_weight(double x, double y, double z, const WeightConfig& cfg);

struct WeightedOpinion {
  double weight;
  Opinion opinion;
};

Opinion synthesize_recommended(std::span<const WeightedOpinion> opinions);
Opinion fuse_final(const Opinion& local, const Opinion& syn);
double average_final_reputation(std::span<const double> finals);

inline constexpr double kBaselineSmoothing = 0.2;
inline constexpr double kBaselinePrior = 0.5;

/// Exponential moving average of the per-slot positive fraction.
double linear_reputation_baseline(std::span<const InteractionRecord> history);

/// Per-slot evidence of one rater about one target.
struct Segment {
  int rater;
  int slot;
  double positive;
  double negative;
};

/// Append-only interaction store indexed by target.
class InteractionLog {
 public:
  explicit InteractionLog(int population);

  int population() const { return population_; }
  void add(const InteractionRecord& r);
  std::span<const InteractionRecord> records() const { return records_; }

  const std::vector<Segment>& segments(int target) const { return segments_[target]; }
  /// Total interaction count of rater with target.
  double pair_count(int rater, int target) const { return pair_counts_[rater * population_ + target]; }
  /// Mean pair count of rater over targets it has interacted with; 0 if none.
  double peer_mean(int rater) const;

  /// Per-slot positive fraction about target, slot-ascending.
  std::vector<std::pair<int, double>> slot_fractions(int target) const;

 private:
  int population_;
  std::vector<InteractionRecord> records_;
  std::vector<std::vector<Segment>> segments_;
  std::vector<double> pair_counts_;
  std::vector<int> last_segment_;
  std::vector<int> peer_nonzero_;
  std::vector<double> peer_sum_;
  std::vector<std::map<int, std::pair<double, double>>> slot_evidence_;
};

struct ViewParams {
  WeightConfig weights;
  double base_rate = 0.5;
};

/// Immutable per-slot snapshot of the reputation of every target.
struct ReputationView {
  int slot = 0;
  /// Indexed [rater * population + target]; diagonal entries are vacuous and unused.
  std::vector<Opinion> local;
  std::vector<Opinion> synthetic;
  std::vector<Opinion> final;
  std::vector<double> final_value;
  /// Mean final value over all raters other than the target.
  std::vector<double> average;
};

/// Builds the view at slot t from every segment with slot <= t. arrival_hours[i]
/// feeds the similarity weight. Targets are independent; see kernels for the
/// parallel variant.
ReputationView compute_view(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                            const ViewParams& params);

/// Validates arguments and allocates an empty view for compute_target.
ReputationView prepare_view(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                            const ViewParams& params);

/// Computes the view rows for a single target (used by serial and parallel kernels).
void compute_target(const InteractionLog& log, int t, std::span<const double> arrival_hours,
                    const ViewParams& params, int target, ReputationView& view);

/// Baseline values for every target at slot t.
std::vector<double> baseline_values(const InteractionLog& log, int t);

/// Interaction CSV `slot,rater,target,outcome`.
void write_interactions(std::ostream& os, std::span<const InteractionRecord> records);
std::vector<InteractionRecord> read_interactions(std::istream& is);

}  // namespace parkedchain::reputation
