#include "evolvesim/driver.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "evolvesim/errors.hpp"

namespace evolvesim {

namespace {

constexpr double kMonotoneSlack = 1e-12;

// ceil that ignores rounding noise in values meant to be integral (4/Delta).
std::size_t stable_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

std::size_t checked_size(double x, const char* what) {
  if (!std::isfinite(x) || x >= 9.0e18) throw ResourceError(std::string(what) + " overflows", x);
  return static_cast<std::size_t>(x);
}

}  // namespace

std::optional<LossRegime> regime_for(const Loss& loss) {
  if (loss.quadratic_equivalent()) return LossRegime::quadratic_loss();
  if (const auto& declared = loss.declared_bounds(); declared && !check_bounds(loss, *declared))
    return LossRegime::well_behaved(*declared);
  const Verification v = verify_well_behaved(loss);
  if (const auto* cert = std::get_if<Certificate>(&v)) return LossRegime::well_behaved(cert->bounds);
  return std::nullopt;
}

void EvolutionParams::validate() const {
  selection.validate();
  if (generations < 1) throw InputDomainError("generations must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputDomainError("epsilon must lie in (0, 1)");
}

EvolutionParams derive_params(std::size_t n, double epsilon, double gamma, const LossRegime& regime,
                              const ResourceBudget& budget) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputDomainError("epsilon must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputDomainError("gamma must lie in (0, 1]");
  if (n < 1) throw InputDomainError("n must be positive");

  EvolutionParams out;
  out.epsilon = epsilon;
  if (regime.quadratic) {
    out.alpha = theoretical_alpha_quadratic(epsilon, gamma, n);
    out.step_gain = out.alpha * out.alpha / 2.0;
  } else {
    out.alpha = theoretical_alpha_well_behaved(epsilon, gamma, n, regime.bounds);
    out.step_gain = out.alpha * out.alpha * regime.bounds.B / 2.0;
  }
  out.alpha_spec = evolution_levels(n, out.alpha);

  const double t = out.step_gain / 4.0;
  const double g = static_cast<double>(stable_ceil(4.0 / out.step_gain)) + 1.0;
  const double big_n = static_cast<double>(out.alpha_spec.size(n));
  const double p = std::ceil(big_n * std::log(3.0 * big_n * (g + 1.0) / epsilon));
  const double s = std::ceil((8.0 / (t * t)) * std::log(16.0 * p * (g + 1.0) / epsilon));

  out.selection.tolerance = t;
  out.selection.pool = checked_size(p, "pool size");

  const double per_step = std::min(p, big_n) + 1.0;
  BudgetReport& report = out.budget;
  report.derived_samples = s;
  report.derived_generations = g;
  report.requested = s * per_step * g;
  report.granted = report.requested;
  double s_final = s;
  double g_final = g;
  if (report.requested > budget.max_evaluations) {
    if (budget.policy == BudgetPolicy::error) {
      throw ResourceError("derived parameters need " + std::to_string(report.requested) +
                              " point evaluations, above the budget of " + std::to_string(budget.max_evaluations),
                          report.requested);
    }
    const double room = budget.max_evaluations / per_step;
    if (room < 1.0) throw ResourceError("budget cannot cover a single generation", per_step);
    const double rho = std::log(room) / std::log(s * g);
    s_final = std::max(1.0, std::floor(std::pow(s, rho)));
    g_final = std::max(1.0, std::floor(std::pow(g, rho)));
    while (s_final * per_step * g_final > budget.max_evaluations && s_final > 1.0) s_final -= 1.0;
    report.capped = true;
    report.shrink_exponent = rho;
    report.granted = s_final * per_step * g_final;
  }
  out.selection.samples = checked_size(s_final, "sample size");
  out.generations = checked_size(g_final, "generation count");
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

GenerationRecord make_record(std::size_t gen, std::string kind, double emp_v, const Hypothesis& rep,
                             const LabeledDistribution& task, const Loss& audit_loss) {
  GenerationRecord rec;
  rec.gen = gen;
  rec.kind = std::move(kind);
  rec.emp_v = emp_v;
  rec.true_lperf = lperf_true(task, rep, audit_loss);
  rec.rep = rep;
  return rec;
}

Trajectory run(const LabeledDistribution& task, const EvolutionParams& params, std::span<const Loss> schedule,
               const Hypothesis& r0, std::uint64_t seed, const EvolveOptions& options, bool certified) {
  params.validate();
  if (schedule.empty()) throw InputDomainError("empty loss schedule");
  if (r0.dim() != task.dim()) throw DimensionMismatch(task.dim(), r0.dim());

  const Mutator mutator(params.alpha_spec, task.dim());
  const Loss& audit_loss = schedule.front();
  const double threshold = 1.0 - params.epsilon;

  auto fitness_for = [&](const Loss& loss) {
    return options.fitness == FitnessMode::exact ? exact_fitness(task, loss)
                                                 : empirical_fitness(task, loss, params.selection.samples);
  };

  Trajectory traj;
  traj.verdict.seed = seed;
  traj.verdict.loss_certified = certified;

  Hypothesis current = r0;
  {
    Stream s0(seed, {0, kSlotCandidate});
    const double v0 = fitness_for(schedule.front())(current, s0);
    traj.records.push_back(make_record(0, "start", v0, current, task, audit_loss));
  }
  if (traj.records.back().true_lperf > threshold) traj.verdict.first_hit = 0;

  for (std::size_t gen = 1; gen <= params.generations; ++gen) {
    if (traj.verdict.first_hit && options.stop_on_convergence) break;
    const Loss& loss = schedule[(gen - 1) % schedule.size()];
    const SelectionOutcome outcome =
        sel_nb(mutator, current, params.selection, fitness_for(loss), seed, gen, options.pool);

    if (!outcome.result) {
      GenerationRecord rec = make_record(gen, "extinct", outcome.v_current, current, task, audit_loss);
      rec.bene_count = outcome.bene_count;
      rec.neut_count = outcome.neut_count;
      traj.records.push_back(std::move(rec));
      traj.verdict.extinct = true;
      break;
    }

    double chosen_v = outcome.v_current;
    for (const PoolEntry& e : outcome.pool)
      if (e.candidate.step == outcome.result->step) chosen_v = e.value;

    current = outcome.result->rep;
    GenerationRecord rec = make_record(gen, to_string(outcome.kind), chosen_v, current, task, audit_loss);
    rec.bene_count = outcome.bene_count;
    rec.neut_count = outcome.neut_count;
    rec.step = outcome.result->step;
    traj.records.push_back(std::move(rec));
    if (!traj.verdict.first_hit && traj.records.back().true_lperf > threshold) traj.verdict.first_hit = gen;
  }

  Verdict& v = traj.verdict;
  v.final_lperf = traj.records.back().true_lperf;
  v.generations_used = traj.records.back().gen;
  v.converged = options.stop_on_convergence ? v.first_hit.has_value() : (!v.extinct && v.final_lperf > threshold);
  v.monotone = monotonicity_check(traj);
  return traj;
}

}  // namespace

Trajectory evolve(const LabeledDistribution& task, const EvolutionParams& params, const Loss& loss,
                  const Hypothesis& r0, std::uint64_t seed, const EvolveOptions& options) {
  const bool certified = std::holds_alternative<Certificate>(verify_well_behaved(loss));
  return run(task, params, std::span<const Loss>(&loss, 1), r0, seed, options, certified);
}

Trajectory loss_schedule_evolve(const LabeledDistribution& task, const EvolutionParams& params,
                                std::span<const Loss> schedule, const Hypothesis& r0, std::uint64_t seed,
                                const EvolveOptions& options) {
  common_bounds(schedule);  // certification gate
  return run(task, params, schedule, r0, seed, options, true);
}

bool monotonicity_check(const Trajectory& trajectory) {
  if (trajectory.records.empty()) return true;
  const double base = trajectory.records.front().true_lperf;
  return std::all_of(trajectory.records.begin(), trajectory.records.end(),
                     [base](const GenerationRecord& r) { return r.true_lperf >= base - kMonotoneSlack; });
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "gen,case,emp_v,true_lperf,bene_count,neut_count,chosen_delta_coord,chosen_delta_sign,alpha_level\n";
  char buf[512];
  for (const GenerationRecord& r : trajectory.records) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%zu,%zu,%d,%d,%.17g\n", r.gen, r.kind.c_str(), r.emp_v,
                  r.true_lperf, r.bene_count, r.neut_count, r.step.coord, r.step.sign, r.step.alpha);
    os << buf;
  }
}

std::string verdict_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["converged"] = v.converged;
  j["monotone"] = v.monotone;
  j["final_lperf"] = v.final_lperf;
  j["generations_used"] = v.generations_used;
  j["seed"] = v.seed;
  j["first_hit_generation"] = v.first_hit ? nlohmann::ordered_json(*v.first_hit) : nlohmann::ordered_json(nullptr);
  j["extinct"] = v.extinct;
  j["loss_certified"] = v.loss_certified;
  return j.dump(2);
}

}  // namespace evolvesim
