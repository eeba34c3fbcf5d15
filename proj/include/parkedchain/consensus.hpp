#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parkedchain/digest.hpp"
#include "parkedchain/reputation.hpp"

namespace parkedchain::consensus {

struct ConsensusConfig {
  int n = 10;
  int l = 3;
  double threshold = 0.45;
  int slots = 20;
  /// Requires n >= 4 and n >= 3l + 1.
  void validate() const;
  int prepare_quorum() const { return 2 * l; }
  int accept_quorum() const { return n - l; }
};

enum class Behavior { Honest, Byzantine, CrashFaulty };
enum class Kind { Request, PrePrepare, Prepare, Accept, Reply };
enum class Phase { Request, Propose, Prepare, Accept, Reply, Committed, Aborted };

std::string kind_name(Kind k);

inline constexpr int kClient = -1;

struct NetMessage {
  int send_slot = 0;
  int delivery_slot = 0;
  int sender = 0;
  int recipient = 0;
  Kind kind = Kind::Request;
  Digest digest{};
  Digest tag{};
  bool corrupted = false;
  bool from_byzantine = false;
};

struct BlockProposal {
  std::uint64_t height = 0;
  std::vector<Digest> transactions;
  int proposer = 0;
  Phase phase = Phase::Request;
  Digest digest() const;
};

struct ConsensusNode {
  int id = 0;
  Behavior behavior = Behavior::Honest;
  std::vector<Digest> log;
};

/// Tamper-evident tags over (view, kind, digest, sender). Byzantine nodes can
/// only produce their own tags.
class Signer {
 public:
  virtual ~Signer() = default;
  virtual Digest tag(int node, std::span<const std::uint8_t> payload) const = 0;
  virtual bool verify(int node, std::span<const std::uint8_t> payload, const Digest& tag) const = 0;
};

/// HMAC-SHA256 with per-node keys derived from a secret seed.
class HmacSigner : public Signer {
 public:
  explicit HmacSigner(std::uint64_t secret);
  Digest tag(int node, std::span<const std::uint8_t> payload) const override;
  bool verify(int node, std::span<const std::uint8_t> payload, const Digest& tag) const override;

 private:
  std::uint64_t secret_;
  // Tags are memoized per (node, payload); instances are not thread-safe.
  mutable std::map<std::string, Digest> cache_;
  mutable std::map<int, Digest> keys_;
  const Digest& key(int node) const;
};

/// Bounded adversary. Each byzantine node picks one vote per phase; Split sends
/// the alternate digest to recipients in mask and the proposed digest to the rest.
enum class Vote : std::uint8_t { Silent, Proposed, Alternate, Split };

struct ByzantinePlan {
  Vote prepare = Vote::Silent;
  Vote accept = Vote::Silent;
  std::uint64_t mask = 0;
};

struct Adversary {
  /// Conflicting digest the byzantine nodes push.
  Digest alternate{};
  /// Plan per byzantine node id; missing ids stay silent.
  std::map<int, ByzantinePlan> plans;
  /// Byzantine leader: per-recipient pre-prepare (0 none, 1 proposed, 2 alternate).
  std::vector<std::uint8_t> leader_choice;
};

struct ViewOutcome {
  bool committed = false;
  Digest digest{};
  bool view_change = false;
  std::string abort_reason;
  /// Committed digest per node position (nullopt if none).
  std::vector<std::optional<Digest>> commits;
  bool client_accepted = false;
  std::size_t messages = 0;
  int max_accepts = 0;
  bool within_abnormal_bound = true;
  std::vector<NetMessage> trace;
};

struct ViewInput {
  const std::vector<ConsensusNode>* nodes = nullptr;
  int leader = 0;  // position in nodes
  std::uint64_t view = 0;
  BlockProposal proposal;
  /// Digests honest nodes accept as valid blocks. Empty means only the proposal's digest.
  std::vector<Digest> valid;
  const Adversary* adversary = nullptr;
  const Signer* signer = nullptr;
  bool record_trace = true;
};

/// Runs request, pre-prepare, prepare, accept, reply over synchronous rounds.
ViewOutcome run_view(const ConsensusConfig& config, const ViewInput& in);

struct ConsensusRun {
  std::vector<ViewOutcome> views;
  bool committed = false;
  Digest digest{};
};

/// Rotates the leader through nodes in order until a view commits or max_views pass.
ConsensusRun run_consensus(const ConsensusConfig& config, std::vector<ConsensusNode>& nodes, BlockProposal proposal,
                           std::span<const Digest> valid, const Adversary* adversary, const Signer& signer,
                           int max_views);

/// Top n ids by value, ties to the lowest id.
std::vector<int> select_consensus_nodes(const std::map<int, double>& reputations, int n);

/// Trace lines `slot,sender,recipient,kind,digest,flags`.
void write_trace(std::ostream& os, std::span<const NetMessage> trace);

/// Cooperation probability by slot (slots are 1-based).
struct BehaviorProfile {
  double before = 1;
  double after = 1;
  int onset = 0;
  double at(int slot) const { return slot <= onset ? before : after; }
};

/// Cooperation flag for slots 1..slots, drawn from a stream owned by (seed, node).
std::vector<bool> inject_behavior(const BehaviorProfile& profile, int slots, std::uint64_t seed, int node);

struct PopulationConfig {
  int population = 50;
  int misbehaving = 10;
  int slots = 10;
  BehaviorProfile misbehaving_profile{0.8, 0.1, 5};
  int count_min = 5;
  int count_max = 10;
  reputation::ViewParams view;
  void validate() const;
};

/// Seeded behavior and interaction history for one population.
struct PopulationRun {
  std::vector<int> misbehaving;  // ids
  std::vector<double> arrival_hours;
  std::vector<std::vector<bool>> cooperative;  // [node][slot-1]
  reputation::InteractionLog log;
  /// Per slot 1..slots: SL average value and LR value per node.
  std::vector<std::vector<double>> sl, lr;
};

/// Simulates every slot and records SL and LR values. With all_targets false the
/// SL value is computed only for misbehaving nodes (others stay NaN).
PopulationRun simulate_population(const PopulationConfig& cfg, std::uint64_t seed, bool all_targets = true);

struct DetectionSeries {
  std::vector<double> sl, lr;  // per slot 1..slots
  int sl_reach = 0, lr_reach = 0;  // first slot with rate 1, slots + 1 if never
};

/// Share of misbehaving nodes whose value has fallen strictly below threshold by each slot.
DetectionSeries detection_experiment(const PopulationConfig& cfg, double threshold, std::uint64_t seed);
DetectionSeries detection_from_run(const PopulationRun& run, int slots, double threshold);

struct CollusionConfig {
  PopulationConfig population;
  ConsensusConfig consensus;
  double colluder_fraction = 0.4;
  void validate() const;
};

struct CollusionTrial {
  bool sl_correct = false, lr_correct = false;
  int sl_colluders = 0, lr_colluders = 0;  // colluders in the committee
};

/// One seeded trial per threshold sharing the same population run.
std::vector<CollusionTrial> collusion_trials(const CollusionConfig& cfg, std::span<const double> thresholds,
                                             std::uint64_t seed);

/// Correct-block outcome of one committee where `colluding[i]` marks byzantine members.
bool committee_commits_truth(const ConsensusConfig& base, const std::vector<bool>& colluding, std::uint64_t seed);

enum class Scheme { SL, LR };

/// Monte-Carlo correct-block probability over seeds base_seed .. base_seed + trials - 1.
double collusion_experiment(const CollusionConfig& cfg, double threshold, Scheme scheme, int trials,
                            std::uint64_t base_seed);

struct ModelCheckReport {
  std::size_t views = 0;
  std::size_t divergent = 0;
  std::size_t partial = 0;
  std::size_t committed = 0;
  std::size_t max_messages = 0;
  bool failure_free_live = false;
};

/// Exhaustive check over bounded adversary choices. Byzantine ids are taken
/// from `byzantine`; if the leader (position 0) is byzantine every per-replica
/// pre-prepare pattern is enumerated.
struct ModelCheckCase {
  std::vector<int> byzantine;
  bool shared_plan = true;  // all byzantine replicas use the same plan
};

std::vector<Adversary> enumerate_adversaries(const ConsensusConfig& config, const ModelCheckCase& c,
                                             const Digest& proposed, const Digest& alternate);
/// Adversaries for one case, pushing the model check's conflicting block.
std::vector<Adversary> model_check_adversaries(const ConsensusConfig& config, const ModelCheckCase& c);
/// Each call uses its own signer, so disjoint ranges can run concurrently.
ModelCheckReport check_views(const ConsensusConfig& config, const ModelCheckCase& c,
                             std::span<const Adversary> adversaries, std::size_t begin, std::size_t end);
ModelCheckReport merge(const ModelCheckReport& a, const ModelCheckReport& b);
/// Serial reference over every adversary of every case, plus a failure-free view.
ModelCheckReport model_check(const ConsensusConfig& config, std::span<const ModelCheckCase> cases);

}  // namespace parkedchain::consensus
