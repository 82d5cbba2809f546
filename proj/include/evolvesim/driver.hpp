#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "evolvesim/domain.hpp"
#include "evolvesim/loss.hpp"
#include "evolvesim/mutation.hpp"
#include "evolvesim/selection.hpp"

namespace evolvesim {

/// Which guarantee the parameters are derived from: the quadratic-loss
/// neighborhood (alpha = eps gamma / (3 sqrt n), LPerf gain alpha^2 / 2) or a
/// general well-behaved loss with bounds (a, A, B) (LPerf gain alpha^2 B / 2).
struct LossRegime {
  bool quadratic = true;
  LossBounds bounds{};

  static LossRegime quadratic_loss() { return {}; }
  static LossRegime well_behaved(const LossBounds& b) { return {false, b}; }
};

/// Regime for a loss: quadratic when the loss is quadratic-equivalent,
/// otherwise its certified bounds. nullopt when the loss is not certified.
std::optional<LossRegime> regime_for(const Loss& loss);

enum class BudgetPolicy { error, shrink };

/// Ceiling on point evaluations s * (distinct candidates per step) * g.
struct ResourceBudget {
  double max_evaluations = 1e10;
  BudgetPolicy policy = BudgetPolicy::error;
};

struct BudgetReport {
  double requested = 0.0;       // evaluations implied by the derived s, p, g
  double granted = 0.0;         // after shrinking (== requested when not capped)
  bool capped = false;
  double shrink_exponent = 1.0; // s' = s^rho, g' = g^rho
  double derived_samples = 0.0;
  double derived_generations = 0.0;
};

struct EvolutionParams {
  SelectionParams selection;
  std::size_t generations = 1;
  double epsilon = 0.1;
  NeighborhoodSpec alpha_spec{std::vector<double>{0.5}};

  // Provenance of derived parameters (zero when set by hand).
  double alpha = 0.0;
  double step_gain = 0.0;  // guaranteed true LPerf gain per step
  BudgetReport budget;

  void validate() const;
};

/// Parameters for (n, eps, gamma, regime):
///   alpha = theoretical step, Delta = alpha^2/2 (quadratic) or alpha^2 B/2,
///   t = Delta/4, g = ceil(4/Delta) + 1, N = neighborhood size,
///   p = ceil(N ln(3N(g+1)/eps)), s = ceil((8/t^2) ln(16 p (g+1)/eps)).
/// When s * (min(p, N) + 1) * g exceeds the budget, BudgetPolicy::error throws
/// ResourceError; BudgetPolicy::shrink replaces s, g by s^rho, g^rho with rho
/// chosen so the product meets the budget.
EvolutionParams derive_params(std::size_t n, double epsilon, double gamma, const LossRegime& regime,
                              const ResourceBudget& budget = {});

struct GenerationRecord {
  std::size_t gen = 0;
  std::string kind;  // "start", "beneficial", "neutral", "extinct"
  double emp_v = 0.0;
  double true_lperf = 0.0;
  std::size_t bene_count = 0;
  std::size_t neut_count = 0;
  MutationStep step;
  std::optional<Hypothesis> rep;  // r_gen
};

struct Verdict {
  bool converged = false;
  bool monotone = true;
  bool extinct = false;
  bool loss_certified = true;
  double final_lperf = 0.0;
  std::size_t generations_used = 0;
  std::optional<std::size_t> first_hit;
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::vector<GenerationRecord> records;
  Verdict verdict;
};

enum class FitnessMode { empirical, exact };

struct EvolveOptions {
  FitnessMode fitness = FitnessMode::empirical;
  PoolMode pool = PoolMode::sampled;
  /// Stop at the first generation whose exact LPerf exceeds 1 - eps. The audit
  /// value never feeds selection.
  bool stop_on_convergence = true;
};

/// Runs r_i <- SelNB(..., r_{i-1}) for i in [g]. Selection sees only the fitness
/// oracle chosen by options.fitness; the exact LPerf in each record is an audit.
Trajectory evolve(const LabeledDistribution& task, const EvolutionParams& params, const Loss& loss,
                  const Hypothesis& r0, std::uint64_t seed, const EvolveOptions& options = {});

/// As evolve, with generation i >= 1 selecting under schedule[(i - 1) mod size].
/// Every loss must be certified (common bounds exist); throws InputDomainError
/// otherwise. Audit LPerf is measured under schedule[0].
Trajectory loss_schedule_evolve(const LabeledDistribution& task, const EvolutionParams& params,
                                std::span<const Loss> schedule, const Hypothesis& r0, std::uint64_t seed,
                                const EvolveOptions& options = {});

/// True iff every record's exact LPerf is >= that of record 0 (less 1e-12).
bool monotonicity_check(const Trajectory& trajectory);

/// gen,case,emp_v,true_lperf,bene_count,neut_count,chosen_delta_coord,chosen_delta_sign,alpha_level
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);
std::string verdict_json(const Verdict& verdict);

}  // namespace evolvesim
