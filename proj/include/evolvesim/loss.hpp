#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evolvesim/domain.hpp"
#include "evolvesim/rng.hpp"

namespace evolvesim {

/// Bounds (a, A, B) of a well-behaved loss: -l L'(l, l(1-z)) >= A L(l, l(1-z))^a
/// for z in [0, 2], and L''(l, z) <= B on [-1, 1].
struct LossBounds {
  double a = 0.0;
  double A = 0.0;
  double B = 0.0;
};

/// A loss L(label, prediction) on {-1, 1} x [-1, 1] with its first and second
/// derivatives in the prediction. Immutable once built.
class Loss {
 public:
  using Fn = std::function<double(int label, double z)>;

  Loss(std::string name, Fn eval, Fn d1, Fn d2, std::optional<LossBounds> declared = std::nullopt,
       bool quadratic_equivalent = false);

  double operator()(int label, double z) const { return eval_(label, z); }
  double d1(int label, double z) const { return d1_(label, z); }
  double d2(int label, double z) const { return d2_(label, z); }

  /// L(-1, 1); the normalizer in LPerf.
  double scale() const { return eval_(-1, 1.0); }
  const std::string& name() const { return name_; }
  /// Closed-form bounds the constructor of this family claims, if any.
  const std::optional<LossBounds>& declared_bounds() const { return declared_; }
  /// True when LPerf under this loss equals 1 - ||f - phi||^2_D / 2.
  bool quadratic_equivalent() const { return quadratic_equivalent_; }

 private:
  std::string name_;
  Fn eval_, d1_, d2_;
  std::optional<LossBounds> declared_;
  bool quadratic_equivalent_;
};

/// L(y, z) = |y - z|^c / 2^(c-1), c >= 2.
Loss power_loss(double c);
/// L_Q(y, z) = (z - y)^2 with L(-1, 1) = 4.
Loss unscaled_quadratic();
/// L_1(y, z) = |z - y|. Not well-behaved.
Loss linear_loss();
/// Pointwise convex combination; weights must lie on the simplex.
Loss convex_combination(std::span<const Loss> losses, std::span<const double> weights);

struct Certificate {
  LossBounds bounds;
  double grid_step = 0.0;
};

struct Violation {
  int condition = 0;  // 1..5
  double witness_z = 0.0;
  int label = 0;
  std::string detail;
};

using Verification = std::variant<Certificate, Violation>;

/// Grid audit of the five well-behavedness conditions. grid_step in (0, 0.01].
///
/// (1), (2) are checked exactly; (3) as agreement of d1/d2 with central finite
/// differences; (4) searches a over {1/8, ..., 1} and takes A as the grid
/// infimum of -l L'(l, l(1-z)) / L(l, l(1-z))^a over z in (0, 2]. An exponent is
/// rejected when that ratio keeps decreasing below the grid (the infimum is 0);
/// the smallest admissible a is reported. (5) takes B as the grid max of L''.
Verification verify_well_behaved(const Loss& loss, double grid_step = 1e-3);

/// Checks that given bounds satisfy conditions (4) and (5) on the grid.
std::optional<Violation> check_bounds(const Loss& loss, const LossBounds& bounds, double grid_step = 1e-3);

/// Grid infimum of -l L'(l, l(1-z)) / L(l, l(1-z))^a over z in (0, 2], both labels.
double condition4_infimum(const Loss& loss, double a, double grid_step);

struct DerivativeAudit {
  double max_d1_error = 0.0;
  double max_d2_error = 0.0;
  double worst_z = 0.0;
};

/// Compares d1/d2 with central finite differences (step h) at `points` equally
/// spaced predictions in [-1, 1] for both labels. d1 is checked at every grid
/// point (second-order one-sided differences at the two endpoints); d2 at
/// interior points only.
DerivativeAudit finite_difference_audit(const Loss& loss, std::size_t points = 401, double h = 1e-4);

/// Bounds common to every loss in a schedule: a is the largest certified
/// exponent, A the smallest grid infimum at that exponent, B the largest
/// certified B. Throws InputDomainError if any loss fails certification.
LossBounds common_bounds(std::span<const Loss> losses, double grid_step = 1e-3);

/// Bounds for the unscaled quadratic (y - z)^2 = 2 power_loss(2): (a, 2^{1-a} A, 2B)
/// from the certificate of power_loss(2). Used for its correlation witness.
LossBounds quadratic_witness_bounds(double grid_step = 1e-3);

namespace detail {
/// Loss extended beyond the label by reflection, L(l, z) = L(l, 2l - z) past l.
double reflected(const Loss& loss, int label, double z);
/// Largest violation of L(l, u + d) - L(l, u) <= d L'(l, u) + d^2 B / 2 over a
/// grid of u in [-1, 1] and steps |d| <= max_step, using the reflected
/// extension; <= 0 means the second-order bound holds.
double taylor_bound_excess(const Loss& loss, double B, double max_step, double grid_step);
}  // namespace detail

/// 1 - 2 E_D[L(f, phi)] / L(-1, 1), exact over the support.
double lperf_true(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss);
double lperf_true(const Halfspace& f, const Hypothesis& phi, const FiniteDistribution& d, const Loss& loss);

/// Exact E_D[L(f, phi)].
double expected_loss_values(const LabeledDistribution& task, std::span<const double> values, const Loss& loss);
double expected_loss(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss);

/// Empirical LPerf on s i.i.d. draws from D taken from `stream`.
double lperf_empirical(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss,
                       std::size_t s, Stream& stream);
double lperf_empirical(const Halfspace& f, const Hypothesis& phi, const FiniteDistribution& d,
                       const Loss& loss, std::size_t s, Stream& stream);

}  // namespace evolvesim
