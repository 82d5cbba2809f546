#include "evolvesim/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "evolvesim/errors.hpp"

namespace evolvesim {

namespace {

constexpr double kDerivativeTolerance = 1e-6;
constexpr double kExactTolerance = 1e-12;
constexpr std::size_t kDerivativeGridPoints = 401;
constexpr double kFiniteDifferenceStep = 1e-4;

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Loss::Loss(std::string name, Fn eval, Fn d1, Fn d2, std::optional<LossBounds> declared, bool quadratic_equivalent)
    : name_(std::move(name)),
      eval_(std::move(eval)),
      d1_(std::move(d1)),
      d2_(std::move(d2)),
      declared_(declared),
      quadratic_equivalent_(quadratic_equivalent) {}

Loss power_loss(double c) {
  if (!std::isfinite(c) || c < 2.0)
    throw InputDomainError("power_loss: exponent must be >= 2 (L'' is unbounded near y = z otherwise)");
  const double norm = std::pow(2.0, c - 1.0);
  auto eval = [c, norm](int y, double z) { return std::pow(std::abs(y - z), c) / norm; };
  auto d1 = [c, norm](int y, double z) {
    const double d = y - z;
    return -c * sgn(d) * std::pow(std::abs(d), c - 1.0) / norm;
  };
  auto d2 = [c, norm](int y, double z) {
    const double d = std::abs(y - z);
    if (d == 0.0) return c == 2.0 ? c * (c - 1.0) / norm : 0.0;
    return c * (c - 1.0) * std::pow(d, c - 2.0) / norm;
  };
  LossBounds bounds;
  bounds.a = (c - 1.0) / c;
  bounds.A = c / std::pow(2.0, (c - 1.0) - (c - 1.0) * (c - 1.0) / c);
  bounds.B = c * (c - 1.0) / 2.0;
  return Loss("power(c=" + fmt(c) + ")", eval, d1, d2, bounds, c == 2.0);
}

Loss unscaled_quadratic() {
  return Loss(
      "quadratic", [](int y, double z) { return (z - y) * (z - y); },
      [](int y, double z) { return 2.0 * (z - y); }, [](int, double) { return 2.0; }, std::nullopt, true);
}

Loss linear_loss() {
  // On [-1, 1], sign(y - z) = y except at z = y, where the one-sided
  // derivative from inside the domain is used.
  return Loss(
      "linear", [](int y, double z) { return std::abs(z - y); }, [](int y, double) { return -static_cast<double>(y); },
      [](int, double) { return 0.0; });
}

Loss convex_combination(std::span<const Loss> losses, std::span<const double> weights) {
  if (losses.empty()) throw InputDomainError("convex_combination: empty loss list");
  if (losses.size() != weights.size()) throw DimensionMismatch(losses.size(), weights.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputDomainError("convex_combination: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > kExactTolerance) throw InputDomainError("convex_combination: weights do not sum to 1");

  std::vector<Loss> parts(losses.begin(), losses.end());
  std::vector<double> ws(weights.begin(), weights.end());
  auto combine = [parts, ws](double (Loss::*member)(int, double) const) {
    return [parts, ws, member](int y, double z) {
      double s = 0.0;
      for (std::size_t i = 0; i < parts.size(); ++i) s += ws[i] * (parts[i].*member)(y, z);
      return s;
    };
  };
  std::string name = "convex(";
  bool quadratic = true;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) name += ", ";
    name += fmt(ws[i]) + "*" + parts[i].name();
    quadratic = quadratic && (parts[i].quadratic_equivalent() || ws[i] == 0.0);
  }
  name += ")";
  // A single quadratic-equivalent family stays quadratic-equivalent only when
  // every part has the same scale; mixing L_Q with power(2) does not.
  if (quadratic) {
    for (const Loss& l : parts)
      if (std::abs(l.scale() - parts.front().scale()) > kExactTolerance) quadratic = false;
  }
  return Loss(
      name, [f = combine(&Loss::operator())](int y, double z) { return f(y, z); }, combine(&Loss::d1),
      combine(&Loss::d2), std::nullopt, quadratic);
}

// ---------------------------------------------------------------------------

DerivativeAudit finite_difference_audit(const Loss& loss, std::size_t points, double h) {
  DerivativeAudit audit;
  if (points < 3) throw InputDomainError("finite_difference_audit: need at least 3 points");
  for (int y : {-1, 1}) {
    for (std::size_t k = 0; k < points; ++k) {
      const double z = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(points - 1);
      const bool interior = k > 0 && k + 1 < points;
      double fd1;
      if (interior) {
        fd1 = (loss(y, z + h) - loss(y, z - h)) / (2.0 * h);
      } else {
        const double s = k == 0 ? 1.0 : -1.0;  // step inward
        fd1 = s * (-3.0 * loss(y, z) + 4.0 * loss(y, z + s * h) - loss(y, z + 2.0 * s * h)) / (2.0 * h);
      }
      const double e1 = std::abs(fd1 - loss.d1(y, z));
      if (e1 > audit.max_d1_error) {
        audit.max_d1_error = e1;
        if (e1 >= audit.max_d2_error) audit.worst_z = z;
      }
      if (interior) {
        const double fd2 = (loss(y, z + h) - 2.0 * loss(y, z) + loss(y, z - h)) / (h * h);
        const double e2 = std::abs(fd2 - loss.d2(y, z));
        if (e2 > audit.max_d2_error) {
          audit.max_d2_error = e2;
          if (e2 >= audit.max_d1_error) audit.worst_z = z;
        }
      }
    }
  }
  return audit;
}

double condition4_infimum(const Loss& loss, double a, double grid_step) {
  double inf = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::llround(2.0 / grid_step));
  for (int l : {-1, 1}) {
    for (std::size_t k = 1; k <= steps; ++k) {
      const double z = std::min(2.0, static_cast<double>(k) * grid_step);
      const double pred = l * (1.0 - z);
      const double value = loss(l, pred);
      const double slope = -l * loss.d1(l, pred);
      if (value <= 0.0) {
        if (slope < 0.0) return -std::numeric_limits<double>::infinity();
        continue;
      }
      inf = std::min(inf, slope / std::pow(value, a));
    }
  }
  return inf;
}

namespace {

std::optional<Violation> check_exact_conditions(const Loss& loss) {
  for (int l : {-1, 1}) {
    if (std::abs(loss(l, l)) > kExactTolerance)
      return Violation{1, static_cast<double>(l), l, "L(l, l) = " + fmt(loss(l, l)) + " != 0"};
  }
  for (int l : {-1, 1}) {
    if (std::abs(loss(l, -l) - 2.0) > kExactTolerance)
      return Violation{2, static_cast<double>(-l), l, "L(l, -l) = " + fmt(loss(l, -l)) + " != 2"};
  }
  const DerivativeAudit fd = finite_difference_audit(loss, kDerivativeGridPoints, kFiniteDifferenceStep);
  if (fd.max_d1_error > kDerivativeTolerance || fd.max_d2_error > kDerivativeTolerance)
    return Violation{3, fd.worst_z, 0,
                     "derivative disagrees with finite differences by " +
                         fmt(std::max(fd.max_d1_error, fd.max_d2_error))};
  for (int l : {-1, 1}) {
    const double slope = loss.d1(l, l);
    if (std::abs(slope) > kExactTolerance)
      return Violation{4, 0.0, l, "L'(l, l) = " + fmt(slope) + " != 0"};
  }
  return std::nullopt;
}

// Worst (largest) second derivative over the prediction grid.
double max_second_derivative(const Loss& loss, double grid_step) {
  double best = -std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::llround(2.0 / grid_step));
  for (int l : {-1, 1})
    for (std::size_t k = 0; k <= steps; ++k) {
      const double z = std::min(1.0, -1.0 + static_cast<double>(k) * grid_step);
      best = std::max(best, loss.d2(l, z));
    }
  return best;
}

void require_grid_step(double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 0.01)) throw InputDomainError("grid_step must lie in (0, 0.01]");
}

}  // namespace

Verification verify_well_behaved(const Loss& loss, double grid_step) {
  require_grid_step(grid_step);
  if (auto v = check_exact_conditions(loss)) return *v;

  std::optional<LossBounds> found;
  for (int eighths = 1; eighths <= 8 && !found; ++eighths) {
    const double a = eighths / 8.0;
    const double A = condition4_infimum(loss, a, grid_step);
    if (!(A > 0.0) || !std::isfinite(A)) continue;
    // The ratio must not keep falling below the grid; compare against a grid
    // twice as fine near z = 0.
    const double finer = condition4_infimum(loss, a, grid_step / 2.0);
    if (finer < A * (1.0 - 1e-9)) continue;
    found = LossBounds{a, A, 0.0};
  }
  if (!found) {
    return Violation{4, grid_step, 0, "no exponent a in {1/8, ..., 1} gives a positive slope bound A"};
  }

  const double B = max_second_derivative(loss, grid_step);
  if (!(B > 0.0) || !std::isfinite(B)) return Violation{5, 0.0, 0, "second derivative bound B = " + fmt(B)};
  found->B = B;
  return Certificate{*found, grid_step};
}

std::optional<Violation> check_bounds(const Loss& loss, const LossBounds& bounds, double grid_step) {
  require_grid_step(grid_step);
  if (auto v = check_exact_conditions(loss)) return v;
  const auto steps = static_cast<std::size_t>(std::llround(2.0 / grid_step));
  for (int l : {-1, 1}) {
    for (std::size_t k = 1; k <= steps; ++k) {
      const double z = std::min(2.0, static_cast<double>(k) * grid_step);
      const double pred = l * (1.0 - z);
      const double lhs = -l * loss.d1(l, pred);
      const double rhs = bounds.A * std::pow(loss(l, pred), bounds.a);
      if (lhs < rhs * (1.0 - 1e-9) - 1e-15) return Violation{4, z, l, "slope " + fmt(lhs) + " < " + fmt(rhs)};
    }
    for (std::size_t k = 0; k <= steps; ++k) {
      const double z = std::min(1.0, -1.0 + static_cast<double>(k) * grid_step);
      if (loss.d2(l, z) > bounds.B * (1.0 + 1e-9))
        return Violation{5, z, l, "L'' = " + fmt(loss.d2(l, z)) + " > B = " + fmt(bounds.B)};
    }
  }
  return std::nullopt;
}

LossBounds common_bounds(std::span<const Loss> losses, double grid_step) {
  if (losses.empty()) throw InputDomainError("common_bounds: empty schedule");
  std::vector<LossBounds> certs;
  for (const Loss& l : losses) {
    const Verification v = verify_well_behaved(l, grid_step);
    if (const auto* bad = std::get_if<Violation>(&v))
      throw InputDomainError("loss '" + l.name() + "' is not certified: condition " + std::to_string(bad->condition) +
                             " (" + bad->detail + ")");
    certs.push_back(std::get<Certificate>(v).bounds);
  }
  LossBounds common{0.0, std::numeric_limits<double>::infinity(), 0.0};
  for (const LossBounds& b : certs) {
    common.a = std::max(common.a, b.a);
    common.B = std::max(common.B, b.B);
  }
  for (const Loss& l : losses) common.A = std::min(common.A, condition4_infimum(l, common.a, grid_step));
  if (!(common.A > 0.0)) throw InputDomainError("common_bounds: schedule admits no positive common A");
  return common;
}

namespace detail {

double reflected(const Loss& loss, int label, double z) {
  const bool beyond = label > 0 ? z > 1.0 : z < -1.0;
  return beyond ? loss(label, 2.0 * label - z) : loss(label, z);
}

double taylor_bound_excess(const Loss& loss, double B, double max_step, double grid_step) {
  double worst = -std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::llround(2.0 / grid_step));
  const std::size_t dsteps = 16;
  for (int l : {-1, 1})
    for (std::size_t k = 0; k <= steps; ++k) {
      const double u = std::min(1.0, -1.0 + static_cast<double>(k) * grid_step);
      const double base = loss(l, u);
      const double slope = loss.d1(l, u);
      for (std::size_t j = 1; j <= dsteps; ++j) {
        const double mag = max_step * static_cast<double>(j) / static_cast<double>(dsteps);
        for (double d : {mag, -mag}) {
          const double target = u + d;
          // Predictions beyond the far side -l lie outside the reflected domain.
          if (l > 0 ? target < -1.0 : target > 1.0) continue;
          const double excess = reflected(loss, l, target) - base - d * slope - d * d * B / 2.0;
          worst = std::max(worst, excess);
        }
      }
    }
  return worst;
}

}  // namespace detail

// ---------------------------------------------------------------------------

double expected_loss_values(const LabeledDistribution& task, std::span<const double> values, const Loss& loss) {
  const FiniteDistribution& d = task.dist();
  if (values.size() != d.size()) throw DimensionMismatch(d.size(), values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) total += d.prob(i) * loss(task.label(i), values[i]);
  return total;
}

double expected_loss(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss) {
  if (phi.dim() != task.dim()) throw DimensionMismatch(task.dim(), phi.dim());
  return expected_loss_values(task, phi.values_on(task.dist()), loss);
}

double lperf_true(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss) {
  return 1.0 - 2.0 * expected_loss(task, phi, loss) / loss.scale();
}

double lperf_true(const Halfspace& f, const Hypothesis& phi, const FiniteDistribution& d, const Loss& loss) {
  return lperf_true(LabeledDistribution(f, d), phi, loss);
}

double lperf_empirical(const LabeledDistribution& task, const Hypothesis& phi, const Loss& loss,
                       std::size_t s, Stream& stream) {
  if (s == 0) throw InputDomainError("lperf_empirical: sample count must be positive");
  if (phi.dim() != task.dim()) throw DimensionMismatch(task.dim(), phi.dim());
  const FiniteDistribution& d = task.dist();
  std::vector<std::uint64_t> counts(d.size(), 0);
  for (std::size_t i = 0; i < s; ++i) ++counts[d.sample_index(stream)];
  const std::vector<double> values = phi.values_on(d);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (counts[i] == 0) continue;
    total += static_cast<double>(counts[i]) * loss(task.label(i), values[i]);
  }
  return 1.0 - (2.0 / loss.scale()) * total / static_cast<double>(s);
}

double lperf_empirical(const Halfspace& f, const Hypothesis& phi, const FiniteDistribution& d,
                       const Loss& loss, std::size_t s, Stream& stream) {
  return lperf_empirical(LabeledDistribution(f, d), phi, loss, s, stream);
}

LossBounds quadratic_witness_bounds(double grid_step) {
  const Verification v = verify_well_behaved(power_loss(2.0), grid_step);
  const LossBounds& b = std::get<Certificate>(v).bounds;
  return {b.a, std::pow(2.0, 1.0 - b.a) * b.A, 2.0 * b.B};
}

}  // namespace evolvesim
