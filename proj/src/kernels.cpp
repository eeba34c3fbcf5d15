#include "parkedchain/kernels.hpp"

#include <algorithm>

#include "contract_detail.hpp"

namespace parkedchain::kernels {

reputation::ReputationView reputation_view(const reputation::InteractionLog& log, int t,
                                           std::span<const double> arrival_hours,
                                           const reputation::ViewParams& params, Exec exec) {
  auto view = reputation::prepare_view(log, t, arrival_hours, params);
  const int n = log.population();
  if (exec == Exec::Serial) {
    for (int j = 0; j < n; ++j) reputation::compute_target(log, t, arrival_hours, params, j, view);
    return view;
  }
  // Each target owns its column and its average entry.
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < n; ++j) reputation::compute_target(log, t, arrival_hours, params, j, view);
  return view;
}

namespace {

bool better(const contract::detail::OracleBest& a, const contract::detail::OracleBest& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.items < b.items;
}

}  // namespace

contract::ContractMenu grid_oracle(const contract::ContractProblem& p, std::span<const double> f_grid,
                                   std::span<const double> pi_grid, Exec exec) {
  if (exec == Exec::Serial) return contract::grid_oracle(p, f_grid, pi_grid);
  contract::detail::OracleSearch search(p, f_grid, pi_grid);
  const auto m = static_cast<long>(search.candidates());
  contract::detail::OracleBest best;
#pragma omp parallel
  {
    contract::detail::OracleBest local;
#pragma omp for schedule(dynamic)
    for (long a = 0; a < m; ++a) search.branch(static_cast<std::size_t>(a), local);
#pragma omp critical
    if (!local.items.empty() && (best.items.empty() || better(local, best))) best = local;
  }
  return search.menu(best);
}

std::vector<consensus::DetectionSeries> detection_ensemble(const consensus::PopulationConfig& cfg,
                                                           double threshold, std::uint64_t base_seed,
                                                           int seeds, Exec exec) {
  std::vector<consensus::DetectionSeries> out(std::max(seeds, 0));
  if (exec == Exec::Serial) {
    for (int s = 0; s < seeds; ++s) out[s] = consensus::detection_experiment(cfg, threshold, base_seed + s);
    return out;
  }
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < seeds; ++s) out[s] = consensus::detection_experiment(cfg, threshold, base_seed + s);
  return out;
}

std::vector<std::vector<consensus::CollusionTrial>> collusion_ensemble(const consensus::CollusionConfig& cfg,
                                                                       std::span<const double> thresholds,
                                                                       std::uint64_t base_seed, int seeds,
                                                                       Exec exec) {
  std::vector<std::vector<consensus::CollusionTrial>> out(std::max(seeds, 0));
  if (exec == Exec::Serial) {
    for (int s = 0; s < seeds; ++s) out[s] = consensus::collusion_trials(cfg, thresholds, base_seed + s);
    return out;
  }
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < seeds; ++s) out[s] = consensus::collusion_trials(cfg, thresholds, base_seed + s);
  return out;
}

consensus::ModelCheckReport model_check(const consensus::ConsensusConfig& config,
                                        std::span<const consensus::ModelCheckCase> cases, Exec exec) {
  if (exec == Exec::Serial) return consensus::model_check(config, cases);
  auto total = consensus::model_check(config, {});
  constexpr std::size_t kChunk = 256;
  for (const auto& c : cases) {
    const auto advs = consensus::model_check_adversaries(config, c);
    const auto chunks = static_cast<long>((advs.size() + kChunk - 1) / kChunk);
    std::vector<consensus::ModelCheckReport> parts(chunks);
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < chunks; ++k)
      parts[k] = consensus::check_views(config, c, advs, k * kChunk, (k + 1) * kChunk);
    for (const auto& r : parts) total = consensus::merge(total, r);
  }
  return total;
}

}  // namespace parkedchain::kernels
