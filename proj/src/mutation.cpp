#include "evolvesim/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "evolvesim/errors.hpp"

namespace evolvesim {

NeighborhoodSpec::NeighborhoodSpec(std::vector<double> alpha_levels) : levels_(std::move(alpha_levels)) {
  if (levels_.empty()) throw InputDomainError("NeighborhoodSpec: at least one alpha level is required");
  for (double a : levels_)
    if (!(a > 0.0 && a <= 1.0)) throw InputDomainError("NeighborhoodSpec: alpha levels must lie in (0, 1]");
  std::sort(levels_.begin(), levels_.end(), std::greater<>());
  levels_.erase(std::unique(levels_.begin(), levels_.end()), levels_.end());
}

Hypothesis apply_step(const Hypothesis& phi, const MutationStep& step) {
  if (step.stay()) return phi;
  return phi.extended(step.coord, step.sign * step.alpha);
}

std::vector<Candidate> neighborhood(const Hypothesis& phi, const NeighborhoodSpec& spec, std::size_t n) {
  if (phi.dim() != n) throw DimensionMismatch(n, phi.dim());
  std::vector<Candidate> out;
  out.reserve(spec.size(n));
  out.push_back(Candidate{phi, MutationStep{}});
  for (std::size_t i = 0; i <= n; ++i) {
    for (double alpha : spec.alpha_levels()) {
      for (int sign : {1, -1}) {
        const MutationStep step{static_cast<int>(i), sign, alpha};
        out.push_back(Candidate{apply_step(phi, step), step});
      }
    }
  }
  return out;
}

std::vector<double> alpha_schedule(std::size_t n) {
  if (n < 1) throw InputDomainError("alpha_schedule: n must be positive");
  std::vector<double> levels;
  for (std::size_t t = 1; t <= n; ++t) levels.push_back(std::ldexp(1.0, -static_cast<int>(t)));
  return levels;
}

namespace {
void require_unit_interval(double v, const char* what) {
  if (!(v > 0.0 && v <= 1.0)) throw InputDomainError(std::string(what) + " must lie in (0, 1]");
}
}  // namespace

double theoretical_alpha_quadratic(double epsilon, double gamma, std::size_t n) {
  require_unit_interval(epsilon, "epsilon");
  require_unit_interval(gamma, "gamma");
  if (n < 1) throw InputDomainError("n must be positive");
  return epsilon * gamma / (3.0 * std::sqrt(static_cast<double>(n)));
}

double theoretical_alpha_well_behaved(double epsilon, double gamma, std::size_t n, const LossBounds& b) {
  require_unit_interval(epsilon, "epsilon");
  require_unit_interval(gamma, "gamma");
  if (n < 1) throw InputDomainError("n must be positive");
  if (!(b.a > 0.0 && b.A > 0.0 && b.B > 0.0)) throw InputDomainError("loss bounds must be positive");
  return b.A * gamma * std::pow(epsilon, b.a + 1.0) / (b.B * std::pow(2.0, b.a + 3.0) * std::sqrt(static_cast<double>(n)));
}

NeighborhoodSpec evolution_levels(std::size_t n, std::optional<double> theoretical_alpha) {
  std::vector<double> levels = alpha_schedule(n);
  if (!theoretical_alpha) return NeighborhoodSpec(std::move(levels));
  const double alpha = *theoretical_alpha;
  if (!(alpha > 0.0)) throw InputDomainError("evolution_levels: alpha must be positive");
  std::erase_if(levels, [alpha](double l) { return l < alpha / 2.0; });
  if (levels.empty()) levels.push_back(std::min(1.0, alpha));
  return NeighborhoodSpec(std::move(levels));
}

MutationStep Mutator::step_at(std::size_t index) const {
  if (index >= neighborhood_size()) throw InputDomainError("Mutator: neighborhood index out of range");
  if (index == 0) return MutationStep{};
  const std::size_t levels = spec_.alpha_levels().size();
  const std::size_t k = index - 1;
  const std::size_t coord = k / (2 * levels);
  const std::size_t level = (k / 2) % levels;
  return MutationStep{static_cast<int>(coord), k % 2 == 0 ? 1 : -1, spec_.alpha_levels()[level]};
}

Candidate Mutator::mutate(const Hypothesis& phi, Stream& stream) const {
  if (phi.dim() != n_) throw DimensionMismatch(n_, phi.dim());
  const MutationStep step = step_at(draw_index(stream));
  return Candidate{apply_step(phi, step), step};
}

// ---------------------------------------------------------------------------

BestNeighbor best_neighbor_exact(const Hypothesis& phi, const LabeledDistribution& task, const Loss& loss,
                                 const NeighborhoodSpec& spec) {
  std::vector<Candidate> cands = neighborhood(phi, spec, phi.dim());
  const double before = expected_loss(task, phi, loss);
  std::size_t best = 0;
  double best_loss = before;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double l = expected_loss(task, cands[i].rep, loss);
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  BestNeighbor out{std::move(cands[best]), before, best_loss, 0.0};
  out.lperf_gain = 2.0 * (before - best_loss) / loss.scale();
  return out;
}

NeighborhoodAudit audit_neighborhood(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss,
                                     const LossBounds& bounds, bool quadratic, double epsilon, double gamma) {
  const std::size_t n = task.dim();
  NeighborhoodAudit out;
  out.quadratic = quadratic;
  if (quadratic) {
    out.alpha = theoretical_alpha_quadratic(epsilon, gamma, n);
    out.required_drop = out.alpha * out.alpha;
  } else {
    out.alpha = theoretical_alpha_well_behaved(epsilon, gamma, n, bounds);
    out.required_drop = out.alpha * out.alpha * bounds.B / 2.0;
  }
  const BestNeighbor best = best_neighbor_exact(phi, task, loss, NeighborhoodSpec({out.alpha}));
  out.loss_before = best.loss_before;
  out.loss_after = best.loss_after;
  out.best_step = best.best.step;
  out.rhs = std::max(out.loss_before - out.required_drop, epsilon);
  out.holds = out.loss_after <= out.rhs;

  const std::vector<double> corr = loss_gradient_correlations(phi, task, loss);
  for (std::size_t j = 0; j < corr.size(); ++j)
    if (std::abs(corr[j]) > out.max_correlation) {
      out.max_correlation = std::abs(corr[j]);
      out.witness_coord = static_cast<int>(j);
    }
  out.correlation_bound = bounds.A * gamma * std::pow(epsilon, bounds.a + 1.0) /
                          (std::pow(2.0, bounds.a + 3.0) * std::sqrt(static_cast<double>(n)));
  out.witness_applies = out.loss_before > epsilon;
  out.witness_holds = !out.witness_applies || out.max_correlation >= out.correlation_bound;
  return out;
}

std::string NeighborhoodAudit::to_json() const {
  nlohmann::ordered_json j;
  j["regime"] = quadratic ? "quadratic" : "well-behaved";
  j["alpha"] = alpha;
  j["required_drop"] = required_drop;
  j["lhs"] = loss_after;
  j["rhs"] = rhs;
  j["loss_before"] = loss_before;
  j["holds"] = holds;
  j["best_step"] = {{"coord", best_step.coord}, {"sign", best_step.sign}, {"alpha", best_step.alpha}};
  j["max_correlation"] = max_correlation;
  j["witness_coord"] = witness_coord;
  j["correlation_bound"] = correlation_bound;
  j["witness_applies"] = witness_applies;
  j["witness_holds"] = witness_holds;
  return j.dump(2);
}

std::vector<double> loss_gradient_correlations(const Hypothesis& phi, const LabeledDistribution& task,
                                               const Loss& loss) {
  if (phi.dim() != task.dim()) throw DimensionMismatch(task.dim(), phi.dim());
  const FiniteDistribution& d = task.dist();
  const std::vector<double> values = phi.values_on(d);
  std::vector<double> corr(d.dim() + 1, 0.0);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const Point& x = d.point(k);
    const double g = d.prob(k) * loss.d1(task.label(k), values[k]);
    corr[0] += g;
    for (std::size_t j = 0; j < x.dim(); ++j) corr[j + 1] += g * x[j];
  }
  return corr;
}

double squared_distance(const Hypothesis& phi, const LabeledDistribution& task) {
  if (phi.dim() != task.dim()) throw DimensionMismatch(task.dim(), phi.dim());
  const FiniteDistribution& d = task.dist();
  const std::vector<double> values = phi.values_on(d);
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double r = task.label(k) - values[k];
    s += d.prob(k) * r * r;
  }
  return s;
}

double squared_distance_unclipped(const Hypothesis& phi, const MutationStep& step, const LabeledDistribution& task) {
  if (phi.dim() != task.dim()) throw DimensionMismatch(task.dim(), phi.dim());
  const FiniteDistribution& d = task.dist();
  const std::vector<double> values = phi.values_on(d);
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    double psi = values[k];
    if (!step.stay()) psi += step.sign * step.alpha * (step.coord == 0 ? 1.0 : d.point(k)[step.coord - 1]);
    const double r = task.label(k) - psi;
    s += d.prob(k) * r * r;
  }
  return s;
}

}  // namespace evolvesim
