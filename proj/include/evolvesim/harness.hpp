#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evolvesim/domain.hpp"
#include "evolvesim/driver.hpp"
#include "evolvesim/loss.hpp"

namespace evolvesim {

struct TargetSpec {
  std::string family = "majority";  // majority | conjunction | halfspace | file
  std::vector<int> variables;       // conjunction, 1-based
  std::vector<double> w;            // halfspace
  double theta = 0.0;
  std::filesystem::path path;
};

struct DistributionSpec {
  std::string family = "scaled-hypercube-uniform";  // | product | file
  std::vector<double> bit_probs;
  std::filesystem::path path;
};

struct LossSpec {
  std::string family = "power";  // power | quadratic | linear | mixture
  double c = 2.0;
  std::vector<LossSpec> parts;   // mixture
  std::vector<double> weights;
};

struct StartSpec {
  std::string kind = "zero";  // zero | ones | adversarial | file
  std::filesystem::path path;
};

struct ExperimentConfig {
  std::string experiment = "evolve";  // evolve | neighborhood-audit | loss-check | csq-lab
  std::size_t n = 0;
  TargetSpec target;
  DistributionSpec distribution;
  LossSpec loss;
  std::vector<LossSpec> schedule;  // loss_schedule_evolve when non-empty
  double epsilon = 0.1;
  std::optional<double> gamma;     // exact margin when absent
  std::vector<std::uint64_t> seeds;
  ResourceBudget budget;
  StartSpec start;
  FitnessMode fitness = FitnessMode::empirical;
  PoolMode pool = PoolMode::sampled;
  bool stop_on_convergence = true;
  std::filesystem::path output_dir = "out";
};

/// Throws ConfigError naming the offending field. Relative input paths resolve
/// against base_dir and must exist; output_dir is left as given.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
/// Parse errors carry the line and column of the document.
ExperimentConfig load_config(const std::filesystem::path& path);

Halfspace make_target(const TargetSpec& spec, std::size_t n);
FiniteDistribution make_distribution(const DistributionSpec& spec, std::size_t n);
Loss make_loss(const LossSpec& spec);
BoundedLinearRep make_start(const StartSpec& spec, const Halfspace& target);

// JSON documents: distribution {"n", "support", "probs"}, halfspace {"w", "theta"},
// representation {"coeffs"}.
FiniteDistribution distribution_from_json(const nlohmann::json& j);
nlohmann::json distribution_to_json(const FiniteDistribution& d);
Halfspace halfspace_from_json(const nlohmann::json& j);
nlohmann::json halfspace_to_json(const Halfspace& f);
BoundedLinearRep rep_from_json(const nlohmann::json& j);
nlohmann::json rep_to_json(const BoundedLinearRep& r);
nlohmann::json read_json_file(const std::filesystem::path& path);

struct Summary {
  std::size_t runs = 0;
  double converged_fraction = 0.0;
  double monotone_fraction = 0.0;
  double converged_monotone_fraction = 0.0;  // among converged runs; 1 when none converged
  double mean_final_lperf = 0.0;
  double mean_generations = 0.0;
  std::size_t extinct = 0;
};

/// Exact aggregates; throws InputDomainError on an empty list.
Summary summarize(const std::vector<Verdict>& verdicts);

struct RunBundle {
  EvolutionParams params;
  double gamma = 0.0;
  std::vector<Trajectory> runs;  // seed order
  Summary summary;
};

/// Worker count from EVOLVESIM_WORKERS, else the hardware concurrency.
std::size_t worker_count();

/// Runs every seed on a worker pool and writes trajectory_<seed>.csv,
/// verdict_<seed>.json and summary.json under output_dir. Output bytes depend
/// only on the config and seeds.
RunBundle run_experiment(const ExperimentConfig& config, bool write_files = true);

std::string summary_json(const RunBundle& bundle);

}  // namespace evolvesim
