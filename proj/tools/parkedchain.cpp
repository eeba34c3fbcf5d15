#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "parkedchain/error.hpp"
#include "parkedchain/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw parkedchain::Error("cannot write " + p.string());
  return os;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace parkedchain;
  CLI::App app{"Parked-vehicle edge computing simulator"};
  std::string scenario, config_path, out_dir = ".", trace;
  std::uint64_t seed = 0;
  std::string names;
  for (const auto& n : harness::scenario_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("scenario", scenario, "One of: " + names + ", pipeline")->required();
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Seed, overrides the config");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--trace", trace, "Arrival trace CSV `arrival_hour,duration_hours`");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  if (!harness::is_scenario(scenario) && scenario != "pipeline") {
    std::cerr << "unknown scenario '" << scenario << "'; expected one of: " << names << ", pipeline\n";
    return kConfigError;
  }

  harness::ExperimentConfig cfg;
  try {
    cfg = harness::validate_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (!trace.empty()) {
      if (!std::filesystem::is_regular_file(trace)) throw ConfigError({"--trace: file not found: " + trace});
      cfg.trace_path = trace;
    }
    cfg.scenario = scenario;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kIoError;
  }

  try {
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    if (scenario == "pipeline") {
      const auto r = harness::run_pipeline(cfg);
      open_out(out / "pipeline.csv") << r.explorer;
      open_out(out / "ledger.txt") << r.ledger_dump;
      auto prov = open_out(out / "provenance.txt");
      prov << "scenario=pipeline\nconfig_digest=" << to_hex(harness::config_digest(cfg)) << "\nseed=" << cfg.seed
           << "\nversion=" << harness::kVersion << "\npipeline_digest=" << to_hex(r.digest) << '\n';
      std::cout << "contracts " << r.contracts << ", paid " << r.paid << ", refunded " << r.refunded
                << ", confiscated " << r.confiscated << ", blocks " << r.blocks << '\n';
      return kOk;
    }
    const auto table = harness::run_scenario(scenario, cfg);
    auto csv = open_out(out / (scenario + ".csv"));
    table.write_csv(csv);
    auto prov = open_out(out / "provenance.txt");
    table.write_provenance(prov);
    if (!csv || !prov) throw Error("write failed in " + out.string());
    std::cout << scenario << ": " << table.rows.size() << " rows -> " << (out / (scenario + ".csv")).string()
              << '\n';
  } catch (const SolverError& e) {
    std::cerr << "solver: " << e.what() << '\n';
    return kSolverError;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
