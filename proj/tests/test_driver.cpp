#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "evolvesim/driver.hpp"
#include "evolvesim/errors.hpp"

using namespace evolvesim;

namespace {

const ResourceBudget kUnlimited{1e300, BudgetPolicy::error};

std::string csv(const Trajectory& t) {
  std::ostringstream os;
  write_trajectory_csv(os, t);
  return os.str();
}

Trajectory with_lperf(std::vector<double> values) {
  Trajectory t;
  for (std::size_t i = 0; i < values.size(); ++i) {
    GenerationRecord r;
    r.gen = i;
    r.kind = i == 0 ? "start" : "neutral";
    r.true_lperf = values[i];
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("derived parameters at n = 9") {
  const EvolutionParams p = derive_params(9, 0.25, 0.5, LossRegime::quadratic_loss(), kUnlimited);
  const double alpha = 0.25 * 0.5 / 9.0;
  const double delta = alpha * alpha / 2.0;
  CHECK(p.alpha == doctest::Approx(0.013889).epsilon(1e-4));
  CHECK(p.step_gain == doctest::Approx(9.645e-5).epsilon(1e-3));
  CHECK(p.selection.tolerance == doctest::Approx(2.41e-5).epsilon(1e-3));
  CHECK(p.generations == 41473);

  // Levels 2^-1 .. 2^-7 survive the alpha/2 cut: N = 1 + 2 * 10 * 7.
  REQUIRE(p.alpha_spec.alpha_levels().size() == 7);
  const double big_n = 141.0, g = 41473.0;
  CHECK(p.selection.pool == static_cast<std::size_t>(std::ceil(big_n * std::log(3.0 * big_n * (g + 1.0) / 0.25))));
  const double t = delta / 4.0;
  const double pool = static_cast<double>(p.selection.pool);
  CHECK(static_cast<double>(p.selection.samples) ==
        doctest::Approx(std::ceil(8.0 / (t * t) * std::log(16.0 * pool * (g + 1.0) / 0.25))).epsilon(1e-12));
  CHECK_FALSE(p.budget.capped);
}

TEST_CASE("parameters grow polynomially") {
  // Doubling n at fixed eps, gamma: 1/t and g scale like n, s like n^2 up to logs.
  const LossRegime q = LossRegime::quadratic_loss();
  for (std::size_t n : {2, 4, 8, 16}) {
    const EvolutionParams a = derive_params(n, 0.2, 0.3, q, kUnlimited);
    const EvolutionParams b = derive_params(2 * n, 0.2, 0.3, q, kUnlimited);
    CAPTURE(n);
    CHECK(std::log2(a.selection.tolerance / b.selection.tolerance) <= 1.0 + 1e-9);
    CHECK(std::log2(double(b.generations) / double(a.generations)) <= 1.0 + 1e-3);
    CHECK(std::log2(double(b.budget.derived_samples) / a.budget.derived_samples) <= 2.5);
    CHECK(std::log2(double(b.selection.pool) / double(a.selection.pool)) <= 2.5);
  }
  // Halving eps: alpha halves, so 1/t and g grow 4x.
  const EvolutionParams e1 = derive_params(4, 0.2, 0.3, q, kUnlimited);
  const EvolutionParams e2 = derive_params(4, 0.1, 0.3, q, kUnlimited);
  CHECK(e1.selection.tolerance / e2.selection.tolerance == doctest::Approx(4.0));
}

TEST_CASE("budget ceiling") {
  const LossRegime q = LossRegime::quadratic_loss();
  CHECK_THROWS_AS(derive_params(5, 0.25, 0.2, q, {1e9, BudgetPolicy::error}), ResourceError);
  try {
    derive_params(5, 0.25, 0.2, q, {1e9, BudgetPolicy::error});
  } catch (const ResourceError& e) {
    CHECK(e.magnitude() > 1e9);
  }
  const EvolutionParams p = derive_params(5, 0.25, 0.2, q, {1e9, BudgetPolicy::shrink});
  CHECK(p.budget.capped);
  CHECK(p.budget.granted <= 1e9);
  CHECK(p.budget.shrink_exponent > 0.0);
  CHECK(p.budget.shrink_exponent < 1.0);
  CHECK(double(p.selection.samples) == std::floor(std::pow(p.budget.derived_samples, p.budget.shrink_exponent)));
  CHECK(double(p.generations) == std::floor(std::pow(p.budget.derived_generations, p.budget.shrink_exponent)));

  CHECK_THROWS_AS(derive_params(5, 0.0, 0.2, q), InputDomainError);
  CHECK_THROWS_AS(derive_params(5, 0.25, 1.5, q), InputDomainError);
}

TEST_CASE("a representable target converges at generation 0") {
  // n = 1: x = +-1 and clip(4 x) = sign(x).
  const LabeledDistribution task(Halfspace::normalized({1.0}, 0.0), uniform_scaled_hypercube(1));
  const EvolutionParams p = derive_params(1, 0.25, 1.0, LossRegime::quadratic_loss(), kUnlimited);
  const Trajectory t = evolve(task, p, power_loss(2.0), BoundedLinearRep({0.0, 4.0}), 3);
  CHECK(t.verdict.converged);
  CHECK(t.verdict.first_hit == std::optional<std::size_t>{0});
  CHECK(t.verdict.generations_used == 0);
  CHECK(t.records.size() == 1);
  CHECK(t.verdict.final_lperf == 1.0);
}

TEST_CASE("uncertified losses run with a flag") {
  const LabeledDistribution task(Halfspace::normalized({2.0, 1.0}, 0.0), uniform_scaled_hypercube(2));
  EvolutionParams p = derive_params(2, 0.25, 0.5, LossRegime::quadratic_loss(), {1e7, BudgetPolicy::shrink});
  p.generations = 5;
  const Trajectory t = evolve(task, p, linear_loss(), BoundedLinearRep::zero(2), 1);
  CHECK_FALSE(t.verdict.loss_certified);
  const Trajectory u = evolve(task, p, power_loss(2.0), BoundedLinearRep::zero(2), 1);
  CHECK(u.verdict.loss_certified);
}

TEST_CASE("monotonicity is relative to the start") {
  CHECK(monotonicity_check(with_lperf({0.5, 0.6, 0.7, 0.8})));
  CHECK_FALSE(monotonicity_check(with_lperf({0.5, 0.6, 0.49, 0.8})));
  CHECK(monotonicity_check(with_lperf({0.5, 0.9, 0.7, 0.7})));
}

TEST_CASE("exact fitness with the full neighborhood gains at least half a step") {
  const Loss q = unscaled_quadratic();
  for (std::size_t n : {3, 4, 5}) {
    std::vector<double> w(n, 1.0);
    w[0] = 2.0;
    const LabeledDistribution task(Halfspace::normalized(w, 0.1), uniform_scaled_hypercube(n));
    const double gamma = margin(task.target(), task.dist());
    const EvolutionParams p = derive_params(n, 0.2, gamma, LossRegime::quadratic_loss(), {1e9, BudgetPolicy::shrink});
    const EvolveOptions exact{FitnessMode::exact, PoolMode::enumerated, true};
    for (const BoundedLinearRep& r0 : {BoundedLinearRep::zero(n), BoundedLinearRep::constant_coeffs(n, 1.0)}) {
      const Trajectory t = evolve(task, p, q, r0, 7, exact);
      CAPTURE(n);
      CHECK(t.verdict.converged);
      CHECK(t.verdict.monotone);
      CHECK(t.records.size() <= p.generations + 1);
      for (std::size_t i = 1; i < t.records.size(); ++i) {
        CHECK(t.records[i].gen == i);
        CHECK(t.records[i].kind == "beneficial");
        CHECK(t.records[i].true_lperf - t.records[i - 1].true_lperf >= p.step_gain / 2.0);
      }
    }
  }
}

TEST_CASE("trajectories are reproducible") {
  const std::size_t n = 3;
  const LabeledDistribution task(Halfspace::normalized({1.0, 1.0, 1.0}, 0.0), uniform_scaled_hypercube(n));
  const EvolutionParams p = derive_params(n, 0.3, 1.0 / 3.0, LossRegime::quadratic_loss(), {2e7, BudgetPolicy::shrink});
  const Trajectory a = evolve(task, p, power_loss(2.0), BoundedLinearRep::zero(n), 12);
  const Trajectory b = evolve(task, p, power_loss(2.0), BoundedLinearRep::zero(n), 12);
  CHECK(csv(a) == csv(b));
  CHECK(verdict_json(a.verdict) == verdict_json(b.verdict));
  CHECK(csv(a).rfind("gen,case,emp_v,true_lperf,bene_count,neut_count,chosen_delta_coord,chosen_delta_sign,alpha_level\n", 0) == 0);
  CHECK(a.records.size() <= p.generations + 1);

  // A constant schedule is the plain run.
  const std::vector<Loss> one{power_loss(2.0)};
  const Trajectory c = loss_schedule_evolve(task, p, one, BoundedLinearRep::zero(n), 12);
  CHECK(csv(c) == csv(a));

  const std::vector<Loss> bad{power_loss(2.0), linear_loss()};
  CHECK_THROWS_AS(loss_schedule_evolve(task, p, bad, BoundedLinearRep::zero(n), 12), InputDomainError);
}

TEST_CASE("alternating losses converge under common bounds") {
  const std::size_t n = 5;
  const LabeledDistribution task(Halfspace::normalized(std::vector<double>(n, 1.0), 0.0), uniform_scaled_hypercube(n));
  const std::vector<Loss> parts{power_loss(2.0), power_loss(3.0)};
  const std::vector<double> half{0.5, 0.5};
  const std::vector<Loss> schedule{power_loss(2.0), convex_combination(parts, half)};
  const LossBounds b = common_bounds(schedule);
  const EvolutionParams p = derive_params(n, 0.25, 0.2, LossRegime::well_behaved(b), {1e9, BudgetPolicy::shrink});
  const EvolveOptions exact{FitnessMode::exact, PoolMode::enumerated, true};
  const Trajectory t = loss_schedule_evolve(task, p, schedule, BoundedLinearRep::zero(n), 1, exact);
  CHECK(t.verdict.converged);
  CHECK(t.verdict.monotone);
}
