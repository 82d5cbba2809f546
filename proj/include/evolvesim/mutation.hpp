#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "evolvesim/domain.hpp"
#include "evolvesim/loss.hpp"
#include "evolvesim/rng.hpp"

namespace evolvesim {

/// Step magnitudes of the single-coordinate neighborhood. The stay-put member
/// is always part of the neighborhood.
class NeighborhoodSpec {
 public:
  /// Levels must lie in (0, 1]; they are sorted descending and deduplicated.
  explicit NeighborhoodSpec(std::vector<double> alpha_levels);

  const std::vector<double>& alpha_levels() const { return levels_; }
  bool include_stay() const { return true; }
  std::size_t size(std::size_t n) const { return 1 + 2 * (n + 1) * levels_.size(); }

 private:
  std::vector<double> levels_;
};

/// One single-coordinate move phi <- P_1(phi + sign * alpha * x_coord). coord == -1 is stay-put.
struct MutationStep {
  int coord = -1;
  int sign = 0;
  double alpha = 0.0;

  bool stay() const { return coord < 0; }
  friend bool operator==(const MutationStep&, const MutationStep&) = default;
};

struct Candidate {
  Hypothesis rep;
  MutationStep step;
};

/// P_1(phi + sign * alpha * x_coord); phi itself for stay-put.
Hypothesis apply_step(const Hypothesis& phi, const MutationStep& step);

/// Stay-put first, then coordinates 0..n, levels descending, +alpha before -alpha.
std::vector<Candidate> neighborhood(const Hypothesis& phi, const NeighborhoodSpec& spec, std::size_t n);

/// {2^-t : t in [n]}
std::vector<double> alpha_schedule(std::size_t n);

/// epsilon * gamma / (3 sqrt(n)); the step guaranteeing a squared-distance drop of alpha^2.
double theoretical_alpha_quadratic(double epsilon, double gamma, std::size_t n);
/// A gamma epsilon^(a+1) / (B 2^(a+3) sqrt(n)); the step guaranteeing a loss drop of alpha^2 B / 2.
double theoretical_alpha_well_behaved(double epsilon, double gamma, std::size_t n, const LossBounds& bounds);

/// Levels used by evolution runs: the geometric schedule truncated to levels
/// >= alpha/2, or the full schedule when alpha is unknown.
NeighborhoodSpec evolution_levels(std::size_t n, std::optional<double> theoretical_alpha);

/// Mutator M: a uniform draw over the neighborhood of the current representation.
class Mutator {
 public:
  Mutator(NeighborhoodSpec spec, std::size_t n) : spec_(std::move(spec)), n_(n) {}

  const NeighborhoodSpec& spec() const { return spec_; }
  std::size_t dim() const { return n_; }
  std::size_t neighborhood_size() const { return spec_.size(n_); }

  std::vector<Candidate> neighborhood(const Hypothesis& phi) const {
    return evolvesim::neighborhood(phi, spec_, n_);
  }
  /// The step at a position of neighborhood() order.
  MutationStep step_at(std::size_t index) const;
  /// Index into neighborhood(phi) order, uniform.
  std::size_t draw_index(Stream& stream) const { return stream.below(neighborhood_size()); }
  Candidate mutate(const Hypothesis& phi, Stream& stream) const;

 private:
  NeighborhoodSpec spec_;
  std::size_t n_;
};

struct BestNeighbor {
  Candidate best;
  double loss_before = 0.0;   // E_D[L(f, phi)]
  double loss_after = 0.0;    // E_D[L(f, best)]
  double lperf_gain = 0.0;    // LPerf(best) - LPerf(phi)
};

/// Exhaustive audit over the neighborhood using exact expectations. Ties keep
/// the earlier candidate in neighborhood order. Never used inside selection.
BestNeighbor best_neighbor_exact(const Hypothesis& phi, const LabeledDistribution& task, const Loss& loss,
                                 const NeighborhoodSpec& spec);

/// Both sides of the neighborhood guarantee at one (f, D, phi), plus the
/// correlation witness max_j |E_D[L'(f, phi) x_j]| against its lower bound.
struct NeighborhoodAudit {
  bool quadratic = true;
  double alpha = 0.0;
  double required_drop = 0.0;   // alpha^2 or alpha^2 B / 2
  double loss_before = 0.0;     // E_D[L(f, phi)]
  double loss_after = 0.0;      // best single neighbor at level alpha
  double rhs = 0.0;             // max{loss_before - required_drop, epsilon}
  bool holds = false;           // loss_after <= rhs
  MutationStep best_step;
  double max_correlation = 0.0;
  int witness_coord = 0;
  double correlation_bound = 0.0;  // A gamma eps^(a+1) / (2^(a+3) sqrt n)
  bool witness_applies = false;    // loss_before > epsilon
  bool witness_holds = true;

  std::string to_json() const;
};

/// quadratic: `loss` must be the unscaled quadratic, alpha = eps gamma / (3 sqrt n)
/// and the drop is alpha^2. Otherwise alpha uses `bounds` and the drop is
/// alpha^2 B / 2. The witness bound always uses `bounds`.
NeighborhoodAudit audit_neighborhood(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss,
                                     const LossBounds& bounds, bool quadratic, double epsilon, double gamma);

/// E_D[L'(f, phi) x_j] for j in [0..n] (x_0 = 1).
std::vector<double> loss_gradient_correlations(const Hypothesis& phi, const LabeledDistribution& task,
                                               const Loss& loss);

/// ||f - phi||^2_D
double squared_distance(const Hypothesis& phi, const LabeledDistribution& task);
/// ||f - psi||^2_D for psi = phi + sign * alpha * x_coord before clipping.
double squared_distance_unclipped(const Hypothesis& phi, const MutationStep& step, const LabeledDistribution& task);

}  // namespace evolvesim
