#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "evolvesim/rng.hpp"

namespace evolvesim {

/// Normalization tolerance for unit-ball membership and probability sums.
inline constexpr double kNormTolerance = 1e-12;

/// P_1: clip a real to [-1, 1] preserving sign. Throws InputDomainError on non-finite input.
double clip_p1(double a);

/// A point of the unit ball B_n. The constant coordinate x_0 = 1 is not stored.
class Point {
 public:
  explicit Point(std::vector<double> coords);

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }
  double norm() const;

  friend bool operator==(const Point&, const Point&) = default;

 private:
  std::vector<double> coords_;
};

/// Finite-support distribution over points of B_n.
class FiniteDistribution {
 public:
  FiniteDistribution(std::vector<Point> support, std::vector<double> probs);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return support_.size(); }
  const Point& point(std::size_t i) const { return support_[i]; }
  double prob(std::size_t i) const { return probs_[i]; }
  const std::vector<Point>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }

  /// Probability mass at x (0 when x is not a support point).
  double density(const Point& x) const;
  /// density(x) / other.density(x); throws InputDomainError when other has no mass at x.
  double density_ratio(const FiniteDistribution& other, const Point& x) const;

  /// Index of a support point drawn from the distribution (Walker alias method).
  std::size_t sample_index(Stream& stream) const;

  /// Shared by copies; distinct for separately constructed distributions.
  std::uint64_t id() const { return id_; }

 private:
  std::uint64_t id_;
  std::size_t dim_;
  std::vector<Point> support_;
  std::vector<double> probs_;
  std::vector<double> alias_threshold_;
  std::vector<std::size_t> alias_index_;
};

/// Target concept sign(<w, x> - theta), stored with ||w||_2 = 1 and |theta| <= 1.
class Halfspace {
 public:
  /// Rescales (w, theta) jointly so that ||w|| = 1. Throws InputDomainError if
  /// w is zero or the rescaled |theta| exceeds 1 (constant on the ball).
  static Halfspace normalized(std::vector<double> w, double theta);

  std::size_t dim() const { return w_.size(); }
  const std::vector<double>& weights() const { return w_; }
  double theta() const { return theta_; }

  /// <w, x> - theta
  double linear_form(const Point& x) const;
  /// Label in {-1, +1}; throws MarginViolation when the linear form is exactly zero.
  int eval(const Point& x) const;

 private:
  Halfspace(std::vector<double> w, double theta) : w_(std::move(w)), theta_(theta) {}
  std::vector<double> w_;
  double theta_;
};

/// min over support points of |<w, x> - theta|. Throws MarginViolation if zero.
double margin(const Halfspace& f, const FiniteDistribution& d);

/// phi(x) = P_1(a_0 + sum_i a_i x_i). Coefficients are unbounded; evaluation clips.
class BoundedLinearRep {
 public:
  explicit BoundedLinearRep(std::vector<double> coeffs);
  static BoundedLinearRep zero(std::size_t n) { return BoundedLinearRep(std::vector<double>(n + 1, 0.0)); }
  static BoundedLinearRep constant_coeffs(std::size_t n, double value) {
    return BoundedLinearRep(std::vector<double>(n + 1, value));
  }

  std::size_t dim() const { return coeffs_.size() - 1; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double coeff(std::size_t i) const { return coeffs_[i]; }

  /// Unclipped a_0 + sum_i a_i x_i.
  double raw(const Point& x) const;
  double eval(const Point& x) const { return clip_p1(raw(x)); }

  friend bool operator==(const BoundedLinearRep&, const BoundedLinearRep&) = default;

 private:
  std::vector<double> coeffs_;
};

/// phi_0 = P_1(base), phi_k(x) = P_1(phi_{k-1}(x) + delta_k x_{j_k}). Each step
/// clips the previous function's values, so a chain is not in general a
/// clipped linear form. Copies share structure; extending is O(1).
class Hypothesis {
 public:
  struct Step {
    int coord = 0;  // 0 is the constant coordinate
    double delta = 0.0;
    friend bool operator==(const Step&, const Step&) = default;
  };

  Hypothesis(BoundedLinearRep base);  // NOLINT(google-explicit-constructor)

  /// P_1(this + delta x_coord). Throws on a bad coordinate or non-finite delta.
  Hypothesis extended(int coord, double delta) const;

  std::size_t dim() const { return node_->base->dim(); }
  std::size_t length() const { return node_->depth; }
  const BoundedLinearRep& base() const { return *node_->base; }
  /// Oldest first.
  std::vector<Step> steps() const;

  double eval(const Point& x) const;
  /// Values at the support points of d. The table of the most recent
  /// distribution is cached on the node, and a child built from a cached
  /// parent costs O(|support|).
  std::vector<double> values_on(const FiniteDistribution& d) const;

  /// Same node (cheap identity), as opposed to structural equality.
  bool same_node(const Hypothesis& o) const { return node_ == o.node_; }
  friend bool operator==(const Hypothesis& a, const Hypothesis& b);

 private:
  struct Node {
    std::shared_ptr<const BoundedLinearRep> base;
    std::shared_ptr<const Node> parent;
    Step step;
    std::size_t depth = 0;
    mutable std::mutex cache_mutex;
    mutable std::uint64_t cache_id = 0;
    mutable std::shared_ptr<const std::vector<double>> cache;
    ~Node();
  };
  explicit Hypothesis(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static std::shared_ptr<const std::vector<double>> cached(const Node& node, std::uint64_t id);

  std::shared_ptr<const Node> node_;
};

/// A target paired with a distribution, with labels precomputed on the support.
/// Throws MarginViolation if the target is zero on any support point.
class LabeledDistribution {
 public:
  LabeledDistribution(Halfspace target, FiniteDistribution dist);

  const Halfspace& target() const { return target_; }
  const FiniteDistribution& dist() const { return dist_; }
  std::size_t dim() const { return dist_.dim(); }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Halfspace target_;
  FiniteDistribution dist_;
  std::vector<int> labels_;
};

// Scaled Boolean hypercube {-1/sqrt(n), 1/sqrt(n)}^n. Bit 1 maps to +1/sqrt(n),
// bit 0 to -1/sqrt(n). Pattern index p has bit i equal to (p >> i) & 1.

Point scaled_hypercube_point(std::span<const std::uint8_t> bits);
Point scaled_hypercube_point(std::size_t n, std::uint64_t pattern);
/// Uniform distribution on all 2^n scaled cube points, n in [1, 24].
FiniteDistribution uniform_scaled_hypercube(std::size_t n);
/// Product distribution with Pr[bit i = 1] = p[i]; patterns with zero mass are dropped.
FiniteDistribution product_scaled_hypercube(std::span<const double> bit_probs);

}  // namespace evolvesim
