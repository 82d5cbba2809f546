#include "evolvesim/domain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "evolvesim/errors.hpp"

namespace evolvesim {

double clip_p1(double a) {
  if (!std::isfinite(a)) throw InputDomainError("clip_p1: non-finite input");
  if (a > 1.0) return 1.0;
  if (a < -1.0) return -1.0;
  return a;
}

double Stream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// ---------------------------------------------------------------------------

Point::Point(std::vector<double> coords) : coords_(std::move(coords)) {
  for (double c : coords_)
    if (!std::isfinite(c)) throw InputDomainError("Point: non-finite coordinate");
  if (norm() > 1.0 + kNormTolerance) throw InputDomainError("Point: outside the unit ball");
}

double Point::norm() const {
  double s = 0.0;
  for (double c : coords_) s += c * c;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

namespace {
std::atomic<std::uint64_t> next_distribution_id{1};
}  // namespace

FiniteDistribution::FiniteDistribution(std::vector<Point> support, std::vector<double> probs)
    : id_(next_distribution_id.fetch_add(1, std::memory_order_relaxed)),
      dim_(support.empty() ? 0 : support.front().dim()),
      support_(std::move(support)),
      probs_(std::move(probs)) {
  if (support_.empty()) throw InputDomainError("FiniteDistribution: empty support");
  if (support_.size() != probs_.size()) throw DimensionMismatch(support_.size(), probs_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (support_[i].dim() != dim_) throw DimensionMismatch(dim_, support_[i].dim());
    if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i]))
      throw InputDomainError("FiniteDistribution: negative or non-finite probability");
    total += probs_[i];
  }
  if (std::abs(total - 1.0) > kNormTolerance)
    throw InputDomainError("FiniteDistribution: probabilities sum to " + std::to_string(total));

  std::set<std::vector<double>> seen;
  for (const Point& p : support_) {
    if (!seen.emplace(p.coords().begin(), p.coords().end()).second)
      throw InputDomainError("FiniteDistribution: duplicate support point");
  }

  // Walker alias table.
  const std::size_t m = probs_.size();
  alias_threshold_.assign(m, 1.0);
  alias_index_.resize(m);
  std::iota(alias_index_.begin(), alias_index_.end(), std::size_t{0});
  std::vector<double> scaled(m);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < m; ++i) {
    scaled[i] = probs_[i] * static_cast<double>(m) / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    alias_threshold_[s] = scaled[s];
    alias_index_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (std::size_t i : small) alias_threshold_[i] = probs_[i] > 0.0 ? 1.0 : 0.0;
  for (std::size_t i : large) alias_threshold_[i] = 1.0;
}

double FiniteDistribution::density(const Point& x) const {
  for (std::size_t i = 0; i < support_.size(); ++i)
    if (support_[i] == x) return probs_[i];
  return 0.0;
}

double FiniteDistribution::density_ratio(const FiniteDistribution& other, const Point& x) const {
  const double denom = other.density(x);
  if (denom <= 0.0) throw InputDomainError("density_ratio: reference distribution has no mass at x");
  return density(x) / denom;
}

std::size_t FiniteDistribution::sample_index(Stream& stream) const {
  const std::size_t m = support_.size();
  const double u = stream.uniform() * static_cast<double>(m);
  std::size_t col = static_cast<std::size_t>(u);
  if (col >= m) col = m - 1;
  const double frac = u - static_cast<double>(col);
  return frac < alias_threshold_[col] ? col : alias_index_[col];
}

// ---------------------------------------------------------------------------

Halfspace Halfspace::normalized(std::vector<double> w, double theta) {
  if (w.empty()) throw InputDomainError("Halfspace: empty weight vector");
  double sq = 0.0;
  for (double v : w) {
    if (!std::isfinite(v)) throw InputDomainError("Halfspace: non-finite weight");
    sq += v * v;
  }
  if (!std::isfinite(theta)) throw InputDomainError("Halfspace: non-finite threshold");
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw InputDomainError("Halfspace: zero weight vector");
  // Already unit within rounding: keep the bits so stored targets reload exactly.
  if (std::abs(norm - 1.0) > kNormTolerance) {
    for (double& v : w) v /= norm;
    theta /= norm;
  }
  if (std::abs(theta) > 1.0 + kNormTolerance)
    throw InputDomainError("Halfspace: |theta| > ||w||, halfspace is constant on the unit ball");
  theta = std::clamp(theta, -1.0, 1.0);
  return Halfspace(std::move(w), theta);
}

double Halfspace::linear_form(const Point& x) const {
  if (x.dim() != w_.size()) throw DimensionMismatch(w_.size(), x.dim());
  double s = 0.0;
  for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x[i];
  return s - theta_;
}

int Halfspace::eval(const Point& x) const {
  const double v = linear_form(x);
  if (v == 0.0) throw MarginViolation("halfspace is exactly zero on a labelled point");
  return v > 0.0 ? 1 : -1;
}

double margin(const Halfspace& f, const FiniteDistribution& d) {
  double m = std::numeric_limits<double>::infinity();
  for (const Point& x : d.support()) m = std::min(m, std::abs(f.linear_form(x)));
  if (!(m > 0.0)) throw MarginViolation("zero margin on a support point");
  return m;
}

// ---------------------------------------------------------------------------

BoundedLinearRep::BoundedLinearRep(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw InputDomainError("BoundedLinearRep: needs at least the constant coefficient");
  for (double c : coeffs_)
    if (!std::isfinite(c)) throw InputDomainError("BoundedLinearRep: non-finite coefficient");
}

double BoundedLinearRep::raw(const Point& x) const {
  if (x.dim() != dim()) throw DimensionMismatch(dim(), x.dim());
  double s = coeffs_[0];
  for (std::size_t i = 0; i < x.dim(); ++i) s += coeffs_[i + 1] * x[i];
  return s;
}

// ---------------------------------------------------------------------------

Hypothesis::Hypothesis(BoundedLinearRep base) {
  auto node = std::make_shared<Node>();
  node->base = std::make_shared<const BoundedLinearRep>(std::move(base));
  node_ = std::move(node);
}

Hypothesis::Node::~Node() {
  // Unlink uniquely owned ancestors iteratively; long chains would otherwise
  // recurse once per step.
  std::shared_ptr<const Node> p = std::move(parent);
  while (p && p.use_count() == 1) {
    std::shared_ptr<const Node> next = std::move(const_cast<Node&>(*p).parent);
    p = std::move(next);
  }
}

Hypothesis Hypothesis::extended(int coord, double delta) const {
  if (coord < 0 || static_cast<std::size_t>(coord) > dim())
    throw InputDomainError("Hypothesis: coordinate " + std::to_string(coord) + " out of range");
  if (!std::isfinite(delta)) throw InputDomainError("Hypothesis: non-finite step");
  auto node = std::make_shared<Node>();
  node->base = node_->base;
  node->parent = node_;
  node->step = Step{coord, delta};
  node->depth = node_->depth + 1;
  return Hypothesis(std::move(node));
}

std::vector<Hypothesis::Step> Hypothesis::steps() const {
  std::vector<Step> out;
  out.reserve(node_->depth);
  for (const Node* n = node_.get(); n->parent; n = n->parent.get()) out.push_back(n->step);
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {
double coordinate(const Point& x, int coord) { return coord == 0 ? 1.0 : x[static_cast<std::size_t>(coord - 1)]; }
}  // namespace

double Hypothesis::eval(const Point& x) const {
  if (x.dim() != dim()) throw DimensionMismatch(dim(), x.dim());
  double v = node_->base->eval(x);
  for (const Step& st : steps()) v = clip_p1(v + st.delta * coordinate(x, st.coord));
  return v;
}

std::shared_ptr<const std::vector<double>> Hypothesis::cached(const Node& node, std::uint64_t id) {
  std::lock_guard<std::mutex> lock(node.cache_mutex);
  return node.cache_id == id ? node.cache : nullptr;
}

std::vector<double> Hypothesis::values_on(const FiniteDistribution& d) const {
  if (d.dim() != dim()) throw DimensionMismatch(dim(), d.dim());
  std::vector<const Node*> path;
  std::shared_ptr<const std::vector<double>> start;
  for (const Node* n = node_.get(); n; n = n->parent.get()) {
    if ((start = cached(*n, d.id()))) break;
    path.push_back(n);
  }
  std::vector<double> v;
  if (start) {
    v = *start;
  } else {
    const Node* root = path.back();
    path.pop_back();
    v.resize(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) v[k] = root->base->eval(d.point(k));
  }
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const Step& st = (*it)->step;
    for (std::size_t k = 0; k < d.size(); ++k) v[k] = clip_p1(v[k] + st.delta * coordinate(d.point(k), st.coord));
  }
  if (!start || !path.empty()) {
    auto table = std::make_shared<const std::vector<double>>(v);
    std::lock_guard<std::mutex> lock(node_->cache_mutex);
    node_->cache_id = d.id();
    node_->cache = std::move(table);
  }
  return v;
}

bool operator==(const Hypothesis& a, const Hypothesis& b) {
  if (a.node_ == b.node_) return true;
  return a.length() == b.length() && a.base() == b.base() && a.steps() == b.steps();
}

LabeledDistribution::LabeledDistribution(Halfspace target, FiniteDistribution dist)
    : target_(std::move(target)), dist_(std::move(dist)) {
  if (target_.dim() != dist_.dim()) throw DimensionMismatch(target_.dim(), dist_.dim());
  labels_.reserve(dist_.size());
  for (const Point& x : dist_.support()) labels_.push_back(target_.eval(x));
}

// ---------------------------------------------------------------------------

Point scaled_hypercube_point(std::span<const std::uint8_t> bits) {
  if (bits.empty()) throw InputDomainError("scaled_hypercube_point: n must be positive");
  const double v = 1.0 / std::sqrt(static_cast<double>(bits.size()));
  std::vector<double> coords(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) coords[i] = bits[i] ? v : -v;
  return Point(std::move(coords));
}

Point scaled_hypercube_point(std::size_t n, std::uint64_t pattern) {
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = static_cast<std::uint8_t>((pattern >> i) & 1U);
  return scaled_hypercube_point(bits);
}

FiniteDistribution uniform_scaled_hypercube(std::size_t n) {
  if (n < 1 || n > 24) throw InputDomainError("uniform_scaled_hypercube: n must be in [1, 24]");
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<Point> pts;
  pts.reserve(count);
  for (std::uint64_t p = 0; p < count; ++p) pts.push_back(scaled_hypercube_point(n, p));
  return FiniteDistribution(std::move(pts), std::vector<double>(count, 1.0 / static_cast<double>(count)));
}

FiniteDistribution product_scaled_hypercube(std::span<const double> bit_probs) {
  const std::size_t n = bit_probs.size();
  if (n < 1 || n > 24) throw InputDomainError("product_scaled_hypercube: n must be in [1, 24]");
  for (double q : bit_probs)
    if (!(q >= 0.0 && q <= 1.0)) throw InputDomainError("product_scaled_hypercube: bit probability outside [0,1]");
  std::vector<Point> pts;
  std::vector<double> probs;
  for (std::uint64_t p = 0; p < (std::uint64_t{1} << n); ++p) {
    double mass = 1.0;
    for (std::size_t i = 0; i < n; ++i) mass *= ((p >> i) & 1U) ? bit_probs[i] : 1.0 - bit_probs[i];
    if (mass <= 0.0) continue;
    pts.push_back(scaled_hypercube_point(n, p));
    probs.push_back(mass);
  }
  // Renormalize away the rounding in the products.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& q : probs) q /= total;
  return FiniteDistribution(std::move(pts), std::move(probs));
}

}  // namespace evolvesim
