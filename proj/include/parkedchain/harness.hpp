#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "parkedchain/consensus.hpp"
#include "parkedchain/contract.hpp"
#include "parkedchain/digest.hpp"
#include "parkedchain/kernels.hpp"
#include "parkedchain/parking.hpp"

namespace parkedchain::harness {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 1;

  int types = 7;
  contract::TaskParams task;
  std::string valuation = "log1p";

  std::string params_path;  // dual-Gamma parameter file; empty uses built-in defaults
  std::string trace_path;   // arrival trace CSV; empty uses the synthetic population
  std::size_t synthetic_records = 100000;
  double horizon_hours = 1;
  int hour = 9;  // instance hour for contract-feasibility and utility-vs-type

  consensus::PopulationConfig population;
  double threshold = 0.45;
  int detection_seeds = 100;

  consensus::ConsensusConfig consensus;
  double colluder_fraction = 0.4;
  std::vector<double> thresholds;  // collusion sweep; empty means 0.05, 0.10, ..., 0.60
  int collusion_seeds = 100;

  std::vector<double> sweep() const;
};

/// Parses JSON text over the defaults and range-checks it. Every violation is
/// reported in one ConfigError. Relative paths resolve against base_dir.
ExperimentConfig parse_config(std::string_view json_text, const std::string& base_dir = ".");
/// Reads and validates a config file; an empty file yields the defaults.
ExperimentConfig validate_config(const std::string& path);
/// Canonical JSON of the normalized config (sorted keys, shortest numbers).
std::string canonical_config(const ExperimentConfig& cfg);
Digest config_digest(const ExperimentConfig& cfg);

struct Provenance {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

struct ResultTable {
  std::string scenario;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  Provenance provenance;
  void write_csv(std::ostream& os) const;
  void write_provenance(std::ostream& os) const;
};

const std::vector<std::string>& scenario_names();
bool is_scenario(const std::string& name);

/// Columns of each scenario's table.
std::vector<std::string> scenario_columns(const std::string& name);

/// Deterministic per (name, config, seed). Throws DomainError for unknown names and
/// SolverError when a contract menu fails the feasibility audit.
ResultTable run_scenario(const std::string& name, const ExperimentConfig& cfg,
                         kernels::Exec exec = kernels::Exec::Parallel);

/// Parking summary and the contract instance at one hour.
struct Instance {
  parking::TraceSummary summary;
  contract::ContractProblem problem;  // theta empty if nobody is present
};
parking::TraceSummary load_summary(const ExperimentConfig& cfg);
contract::ContractProblem problem_at(const ExperimentConfig& cfg, const parking::TraceSummary& summary, int hour);

/// Menus of the five compared schemes: LC, LIA, LA, SA, linear.
std::vector<contract::ContractMenu> compare_schemes(const contract::ContractProblem& p);

struct PipelineResult {
  Digest digest{};
  int contracts = 0;
  int paid = 0;
  int refunded = 0;
  int confiscated = 0;
  int blocks = 0;
  bool chain_ok = false;
  std::vector<int> committee;
  std::string ledger_dump;
  std::string explorer;
};

/// Reputation, node selection, contract design, ledger lifecycle and consensus
/// verification in one seeded run. digest covers the ledger dump and explorer.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

}  // namespace parkedchain::harness
