#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "parkedchain/consensus.hpp"
#include "parkedchain/contract.hpp"
#include "parkedchain/reputation.hpp"

/// Hot loops with a serial reference and an OpenMP version. Both return
/// identical results for identical inputs.
namespace parkedchain::kernels {

enum class Exec { Serial, Parallel };

reputation::ReputationView reputation_view(const reputation::InteractionLog& log, int t,
                                           std::span<const double> arrival_hours,
                                           const reputation::ViewParams& params, Exec exec);

contract::ContractMenu grid_oracle(const contract::ContractProblem& p, std::span<const double> f_grid,
                                   std::span<const double> pi_grid, Exec exec);

/// One detection series per seed in [base_seed, base_seed + seeds).
std::vector<consensus::DetectionSeries> detection_ensemble(const consensus::PopulationConfig& cfg,
                                                           double threshold, std::uint64_t base_seed,
                                                           int seeds, Exec exec);

/// trials[seed][threshold] for seeds in [base_seed, base_seed + seeds).
std::vector<std::vector<consensus::CollusionTrial>> collusion_ensemble(const consensus::CollusionConfig& cfg,
                                                                       std::span<const double> thresholds,
                                                                       std::uint64_t base_seed, int seeds,
                                                                       Exec exec);

/// Exhaustive model check split into chunks of adversaries.
consensus::ModelCheckReport model_check(const consensus::ConsensusConfig& config,
                                        std::span<const consensus::ModelCheckCase> cases, Exec exec);

}  // namespace parkedchain::kernels
