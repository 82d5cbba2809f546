#include "evolvesim/csq_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "evolvesim/errors.hpp"
#include "evolvesim/rng.hpp"

namespace evolvesim::csq {

namespace {

constexpr double kNormSlack = 1e-12;

std::size_t dim_of_table(std::size_t size) {
  if (size == 0 || !std::has_single_bit(size)) throw InputDomainError("table size must be a power of two");
  const auto n = static_cast<std::size_t>(std::countr_zero(size));
  if (n > kMaxDenseDim) throw ResourceError("dense table above 2^" + std::to_string(kMaxDenseDim), double(size));
  return n;
}

void butterflies(std::vector<double>& v) {
  for (std::size_t h = 1; h < v.size(); h <<= 1)
    for (std::size_t i = 0; i < v.size(); i += h << 1)
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j], b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
}

void require_bounded(std::span<const double> g) {
  for (double v : g)
    if (!(std::abs(v) <= 1.0 + kNormSlack)) throw InputDomainError("query out of range: |g(x)| > 1");
}

double binomial(std::size_t n, std::size_t r) {
  double c = 1.0;
  for (std::size_t i = 1; i <= r; ++i) c = c * static_cast<double>(n - r + i) / static_cast<double>(i);
  return c;
}

}  // namespace

IndexSet index_set(std::span<const int> elems) {
  IndexSet s = 0;
  for (int e : elems) {
    if (e < 1 || e > 64) throw InputDomainError("index " + std::to_string(e) + " outside [1, 64]");
    const IndexSet bit = IndexSet{1} << (e - 1);
    if (s & bit) throw InputDomainError("duplicate index " + std::to_string(e));
    s |= bit;
  }
  return s;
}

std::vector<int> elements(IndexSet s) {
  std::vector<int> out;
  for (int i = 0; i < 64; ++i)
    if (s >> i & 1) out.push_back(i + 1);
  return out;
}

std::size_t cardinality(IndexSet s) { return static_cast<std::size_t>(std::popcount(s)); }

int parity(IndexSet I, std::uint64_t x) { return std::popcount(I & x) % 2 == 0 ? 1 : -1; }

std::vector<double> walsh_hadamard(std::span<const double> table) {
  dim_of_table(table.size());
  std::vector<double> v(table.begin(), table.end());
  butterflies(v);
  const double scale = 1.0 / static_cast<double>(v.size());
  for (double& c : v) c *= scale;
  return v;
}

std::vector<double> inverse_walsh_hadamard(std::span<const double> coeffs) {
  dim_of_table(coeffs.size());
  std::vector<double> v(coeffs.begin(), coeffs.end());
  butterflies(v);
  return v;
}

FourierSpectrum FourierSpectrum::from_table(std::span<const double> table, double drop) {
  const std::vector<double> c = walsh_hadamard(table);
  FourierSpectrum out;
  for (std::size_t I = 0; I < c.size(); ++I)
    if (std::abs(c[I]) > drop) out.coeffs_.emplace(I, c[I]);
  return out;
}

double FourierSpectrum::operator[](IndexSet I) const {
  const auto it = coeffs_.find(I);
  return it == coeffs_.end() ? 0.0 : it->second;
}

void FourierSpectrum::set(IndexSet I, double value) {
  if (value == 0.0)
    coeffs_.erase(I);
  else
    coeffs_[I] = value;
}

double FourierSpectrum::squared_norm() const {
  double s = 0.0;
  for (const auto& [I, c] : coeffs_) s += c * c;
  return s;
}

std::vector<double> FourierSpectrum::to_table(std::size_t n) const {
  if (n > kMaxDenseDim) throw ResourceError("dense table above 2^" + std::to_string(kMaxDenseDim), double(n));
  std::vector<double> dense(std::size_t{1} << n, 0.0);
  for (const auto& [I, c] : coeffs_) {
    if (n < 64 && (I >> n) != 0) throw InputDomainError("spectrum has a set outside [n]");
    dense[I] = c;
  }
  return inverse_walsh_hadamard(dense);
}

double squared_norm_u(std::span<const double> table) {
  double s = 0.0;
  for (double v : table) s += v * v;
  return s / static_cast<double>(table.size());
}

FourierSpectrum conj_fourier(IndexSet S) {
  const std::size_t k = cardinality(S);
  if (k < 1) throw InputDomainError("conj_fourier: S must be nonempty");
  const double c = std::ldexp(1.0, 1 - static_cast<int>(k));
  FourierSpectrum out;
  out.set(0, -1.0 + c);
  for (IndexSet I = S; I != 0; I = (I - 1) & S) out.set(I, c);
  return out;
}

int conjunction(IndexSet S, std::uint64_t x) { return (x & S) == 0 ? 1 : -1; }

// ---------------------------------------------------------------------------

std::uint64_t ConjDistPair::pattern_of(std::uint64_t x) const {
  std::uint64_t p = 0;
  int j = 0;
  for (IndexSet rest = S; rest != 0; rest &= rest - 1, ++j)
    if (x & (rest & -rest)) p |= std::uint64_t{1} << j;
  return p;
}

double ConjDistPair::density(std::uint64_t x, std::size_t n) const {
  return mass[pattern_of(x)] * std::ldexp(1.0, -static_cast<int>(n - k));
}

double ConjDistPair::density_ratio(std::uint64_t x) const { return mass[pattern_of(x)] * std::ldexp(1.0, k); }

ConjDistPair build_pair(IndexSet S, std::size_t k) {
  if (cardinality(S) != k) throw InputDomainError("build_pair: |S| must equal k");
  if (k < 6 || k % 3 != 0) throw InputDomainError("build_pair: k must be a multiple of 3 and at least 6");
  if (k > 20) throw ResourceError("build_pair: k above 20", double(k));

  const std::size_t patterns = std::size_t{1} << k;
  const double c = std::ldexp(1.0, 1 - static_cast<int>(k));
  const std::size_t band = k / 3;

  ConjDistPair out;
  out.S = S;
  out.k = k;
  out.t.resize(patterns);
  out.phi.resize(patterns);
  for (std::uint64_t p = 0; p < patterns; ++p) {
    out.t[p] = p == 0 ? 1 : -1;
    double low = 0.0;
    for (std::uint64_t J = 1; J < patterns; ++J)
      if (cardinality(J) <= band) low += parity(J, p);
    out.phi[p] = out.t[p] - c * low;
  }

  out.sign_margin = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::uint64_t p = 0; p < patterns; ++p) {
    if (!(out.phi[p] * out.t[p] > 0.0))
      throw ConstructionError("build_pair: phi_S changes sign at pattern " + std::to_string(p) + " (k = " +
                              std::to_string(k) + ")");
    out.sign_margin = std::min(out.sign_margin, std::abs(out.phi[p]));
    total += std::abs(out.phi[p]);
  }
  out.l1 = total / static_cast<double>(patterns);
  out.alpha_scale = 1.0 / out.l1;
  out.theta.resize(patterns);
  out.mass.resize(patterns);
  for (std::uint64_t p = 0; p < patterns; ++p) {
    out.theta[p] = out.phi[p] / out.l1;
    out.mass[p] = std::abs(out.phi[p]) / out.l1 / static_cast<double>(patterns);
  }
  return out;
}

bool PairCheck::ok() const {
  return bridge_error <= 1e-12 && mass_error <= 1e-10 && min_ratio >= 1.0 / 3.0 && max_ratio <= 3.0 &&
         hidden_band <= 1e-12 && alpha_scale >= 2.0 / 3.0 && alpha_scale <= 2.0;
}

PairCheck check_pair(const ConjDistPair& pair) {
  const std::size_t patterns = pair.mass.size();
  const double u = 1.0 / static_cast<double>(patterns);
  PairCheck r;
  r.alpha_scale = pair.alpha_scale;
  r.min_ratio = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t p = 0; p < patterns; ++p) {
    r.bridge_error = std::max(r.bridge_error, std::abs(pair.mass[p] * pair.t[p] - u * pair.theta[p]));
    sum += pair.mass[p];
    const double ratio = pair.mass[p] / u;
    r.min_ratio = std::min(r.min_ratio, ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
  }
  r.mass_error = std::abs(sum - 1.0);
  const std::vector<double> spectrum = walsh_hadamard(pair.theta);
  for (std::size_t J = 1; J < patterns; ++J)
    if (cardinality(J) <= pair.k / 3) r.hidden_band = std::max(r.hidden_band, std::abs(spectrum[J]));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct Greedy {
  std::size_t n, k, m;
  std::unordered_set<IndexSet> covered;  // every m-subset of an accepted set
  std::vector<IndexSet> accepted;
  std::vector<int> chosen;

  // True if some (m-1)-subset of `chosen` plus e is covered.
  bool blocked(int e) const {
    std::vector<int> pick;
    return blocked_from(0, IndexSet{1} << e, pick, e);
  }
  bool blocked_from(std::size_t start, IndexSet base, std::vector<int>& pick, int e) const {
    if (pick.size() + 1 == m) return covered.contains(base);
    for (std::size_t i = start; i < chosen.size(); ++i) {
      if (chosen.size() - i < m - 1 - pick.size()) break;
      pick.push_back(chosen[i]);
      const bool hit = blocked_from(i + 1, base | (IndexSet{1} << chosen[i]), pick, e);
      pick.pop_back();
      if (hit) return true;
    }
    return false;
  }

  // True if some m-subset of `chosen` is covered.
  bool prefix_covered() const {
    if (chosen.size() < m) return false;
    IndexSet all = 0;
    for (int e : chosen) all |= IndexSet{1} << e;
    for (IndexSet sub : subsets(all)) if (covered.contains(sub)) return true;
    return false;
  }

  std::vector<IndexSet> subsets(IndexSet s) const {
    std::vector<IndexSet> out;
    std::vector<int> e;
    for (int i = 0; i < 64; ++i)
      if (s >> i & 1) e.push_back(i);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    while (true) {
      IndexSet sub = 0;
      for (std::size_t i : idx) sub |= IndexSet{1} << e[i];
      out.push_back(sub);
      std::size_t i = m;
      while (i > 0 && idx[i - 1] == e.size() - m + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
  }

  void cover(IndexSet s) {
    for (IndexSet sub : subsets(s)) covered.insert(sub);
  }

  void search(int next) {
    if (chosen.size() == k) {
      IndexSet s = 0;
      for (int e : chosen) s |= IndexSet{1} << e;
      accepted.push_back(s);
      cover(s);
      return;
    }
    const int last = static_cast<int>(n - (k - chosen.size()));
    for (int e = next; e <= last; ++e) {
      // An acceptance below this prefix may have covered it.
      if (e != next && prefix_covered()) return;
      if (chosen.size() + 1 >= m && blocked(e)) continue;
      chosen.push_back(e);
      search(e + 1);
      chosen.pop_back();
    }
  }
};

}  // namespace

std::vector<IndexSet> greedy_disjoint_sets(std::size_t n, std::size_t k) {
  if (n > 64) throw InputDomainError("greedy_disjoint_sets: n must be at most 64");
  if (k < 6 || k % 3 != 0 || 2 * k > n)
    throw InputDomainError("greedy_disjoint_sets: need k a multiple of 3 with 6 <= k <= n/2");
  Greedy g{n, k, k / 3 + 1, {}, {}, {}};
  g.search(0);
  return g.accepted;
}

double greedy_size_bound(std::size_t n, std::size_t k) {
  return std::pow(static_cast<double>(n) / (8.0 * static_cast<double>(k)), static_cast<double>(k) / 3.0) + 1.0;
}

DeviationReport deviation_report(std::size_t k) {
  if (k < 3 || k % 3 != 0) throw InputDomainError("deviation_report: k must be a positive multiple of 3");
  DeviationReport r;
  r.k = k;
  double removed = 0.0;
  for (std::size_t i = 1; i <= k / 3; ++i) removed += binomial(k, i);
  r.removed = static_cast<std::size_t>(removed);
  r.short_count = static_cast<std::size_t>(binomial(k, k / 3)) - 1;
  const double c = std::ldexp(1.0, 1 - static_cast<int>(k));
  r.deviation_bound = removed * c;
  r.short_bound = static_cast<double>(r.short_count) * c;
  if (k <= 15) {
    const std::size_t patterns = std::size_t{1} << k;
    for (std::uint64_t p = 0; p < patterns; ++p) {
      double low = 0.0;
      for (std::uint64_t J = 1; J < patterns; ++J)
        if (cardinality(J) <= k / 3) low += parity(J, p);
      r.max_deviation = std::max(r.max_deviation, std::abs(c * low));
    }
  }
  return r;
}

std::size_t smallest_k_with_half_bound(std::size_t k_max) {
  for (std::size_t k = 6; k <= k_max; k += 3) {
    double removed = 0.0;
    for (std::size_t i = 1; i <= k / 3; ++i) removed += binomial(k, i);
    if (removed * std::ldexp(1.0, 1 - static_cast<int>(k)) < 0.5) return k;
  }
  return 0;
}

// ---------------------------------------------------------------------------

double csq_oracle(std::span<const double> f, std::span<const double> d_prime, std::span<const double> g, double tau,
                  OracleMode mode, double reference) {
  if (f.size() != g.size() || d_prime.size() != g.size()) throw DimensionMismatch(g.size(), f.size());
  if (!(tau > 0.0 && tau <= 1.0)) throw InputDomainError("tau must lie in (0, 1]");
  require_bounded(g);
  double exact = 0.0;
  for (std::size_t x = 0; x < g.size(); ++x) exact += d_prime[x] * f[x] * g[x];
  switch (mode) {
    case OracleMode::exact: return exact;
    case OracleMode::adversarial_plus: return exact + tau;
    case OracleMode::adversarial_minus: return exact - tau;
    case OracleMode::toward_reference: return std::clamp(reference, exact - tau, exact + tau);
  }
  return exact;
}

std::size_t heavy_coefficient_count(std::span<const double> g, double tau) {
  if (!(tau > 0.0)) throw InputDomainError("tau must be positive");
  if (squared_norm_u(g) > 1.0 + kNormSlack) throw InputDomainError("norm violation: ||g||_U > 1");
  const std::vector<double> c = walsh_hadamard(g);
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [tau](double v) { return std::abs(v) >= tau / 4.0; }));
}

Disagreement disagreement(const ConjDistPair& pair, std::span<const double> h, std::size_t n) {
  if (h.size() != (std::size_t{1} << n)) throw DimensionMismatch(std::size_t{1} << n, h.size());
  Disagreement d;
  const double u = 1.0 / static_cast<double>(h.size());
  for (std::uint64_t x = 0; x < h.size(); ++x) {
    if (h[x] != 1.0 && h[x] != -1.0) throw InputDomainError("hypothesis must be +-1 valued");
    if (h[x] != conjunction(pair.S, x)) {
      d.uniform += u;
      d.pair += pair.density(x, n);
    }
  }
  return d;
}

std::size_t close_pairs(std::span<const ConjDistPair> pairs, std::span<const double> h, std::size_t n, double epsilon) {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [&](const ConjDistPair& p) {
    return disagreement(p, h, n).pair <= epsilon;
  }));
}

bool AuditReport::ok() const {
  return witnesses_distinct && witnesses_heavy && heavy_bound && count_bound && max_identity_error <= 1e-10;
}

AuditReport distinguishing_audit(std::size_t n, std::span<const ConjDistPair> pairs,
                                 std::span<const std::vector<double>> queries, double tau, double epsilon,
                                 std::optional<double> reference_alpha) {
  if (pairs.empty()) throw InputDomainError("distinguishing_audit: no pairs");
  if (n > kMaxDenseDim) throw ResourceError("distinguishing_audit: n above " + std::to_string(kMaxDenseDim), double(n));
  if (!(tau > 0.0 && tau <= 1.0)) throw InputDomainError("tau must lie in (0, 1]");
  const std::size_t k = pairs.front().k;
  const IndexSet universe = n == 64 ? ~IndexSet{0} : (IndexSet{1} << n) - 1;
  for (const ConjDistPair& p : pairs) {
    if (p.k != k) throw InputDomainError("distinguishing_audit: pairs must share k");
    if (p.S & ~universe) throw InputDomainError("distinguishing_audit: pair set outside [n]");
  }

  AuditReport r;
  r.n = n;
  r.k = k;
  r.tau = tau;
  r.epsilon = epsilon;
  r.reference_alpha = reference_alpha.value_or(pairs.front().alpha_scale);
  for (const ConjDistPair& p : pairs) r.alpha_spread = std::max(r.alpha_spread, std::abs(p.alpha_scale - r.reference_alpha));

  const double base = -1.0 + std::ldexp(1.0, 1 - static_cast<int>(k));
  const std::size_t size = std::size_t{1} << n;
  const double u = 1.0 / static_cast<double>(size);
  const double heavy_cap = 16.0 / (tau * tau);

  for (std::size_t a = 0; a < pairs.size(); ++a)
    for (std::size_t b = a + 1; b < pairs.size(); ++b) {
      const std::size_t joint = cardinality(pairs[a].S | pairs[b].S);
      const double pr = 2.0 * std::ldexp(1.0, -static_cast<int>(k)) - 2.0 * std::ldexp(1.0, -static_cast<int>(joint));
      r.min_pair_disagreement = std::min(r.min_pair_disagreement, pr);
    }
  r.unique_closeness = 6.0 * epsilon < r.min_pair_disagreement;

  for (const std::vector<double>& g : queries) {
    if (g.size() != size) throw DimensionMismatch(size, g.size());
    require_bounded(g);
    const std::vector<double> spectrum = walsh_hadamard(g);

    QueryReport q;
    q.reference_answer = r.reference_alpha * base * spectrum[0];
    q.heavy = static_cast<std::size_t>(
        std::count_if(spectrum.begin(), spectrum.end(), [tau](double v) { return std::abs(v) >= tau / 4.0; }));
    if (static_cast<double>(q.heavy) > heavy_cap) r.heavy_bound = false;

    std::vector<std::size_t> per_pair;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const ConjDistPair& p = pairs[i];
      double answer = 0.0, via_uniform = 0.0;
      for (std::uint64_t x = 0; x < size; ++x) {
        const std::uint64_t pat = p.pattern_of(x);
        answer += p.mass[pat] * std::ldexp(1.0, -static_cast<int>(n - k)) * p.t[pat] * g[x];
        via_uniform += u * p.theta[pat] * g[x];
      }
      q.identity_error = std::max(q.identity_error, std::abs(answer - via_uniform));

      if (std::abs(answer - p.alpha_scale * base * spectrum[0]) > tau) per_pair.push_back(i);
      if (std::abs(answer - q.reference_answer) <= tau) continue;

      IndexSet witness = 0;
      double best = -1.0;
      for (IndexSet I = 1; I <= p.S; ++I) {
        if ((I & ~p.S) || cardinality(I) <= k / 3) continue;
        if (std::abs(spectrum[I]) > best) {
          best = std::abs(spectrum[I]);
          witness = I;
        }
      }
      if (best < tau / 4.0) q.witnesses_heavy = false;
      q.distinguished.push_back(i);
      q.witnesses.push_back(witness);
    }
    q.distinguished_per_pair = per_pair.size();
    if (per_pair != q.distinguished) ++r.reading_disagreements;

    const std::set<IndexSet> unique(q.witnesses.begin(), q.witnesses.end());
    if (unique.size() != q.witnesses.size()) r.witnesses_distinct = false;
    if (!q.witnesses_heavy) r.witnesses_heavy = false;
    if (q.distinguished.size() > q.heavy) r.count_bound = false;
    r.max_identity_error = std::max(r.max_identity_error, q.identity_error);
    r.queries.push_back(std::move(q));
  }
  return r;
}

std::vector<std::vector<double>> audit_queries(std::size_t n, std::span<const ConjDistPair> pairs,
                                               std::size_t random_count, std::uint64_t seed,
                                               std::optional<double> reference_alpha) {
  if (n > kMaxDenseDim) throw ResourceError("audit_queries: n above " + std::to_string(kMaxDenseDim), double(n));
  const std::size_t size = std::size_t{1} << n;
  std::vector<std::vector<double>> out;
  out.reserve(random_count + pairs.size());
  for (std::size_t q = 0; q < random_count; ++q) {
    Stream s(seed, {q});
    std::vector<double> g(size);
    for (double& v : g) v = (s.next() >> 63) ? 1.0 : -1.0;
    out.push_back(std::move(g));
  }
  if (pairs.empty()) return out;
  const double alpha = reference_alpha.value_or(pairs.front().alpha_scale);
  const double psi = alpha * (-1.0 + std::ldexp(1.0, 1 - static_cast<int>(pairs.front().k)));
  for (const ConjDistPair& p : pairs) {
    std::vector<double> g(size);
    for (std::uint64_t x = 0; x < size; ++x) g[x] = p.theta[p.pattern_of(x)] - psi >= 0.0 ? 1.0 : -1.0;
    out.push_back(std::move(g));
  }
  return out;
}

std::string AuditReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["k"] = k;
  j["tau"] = tau;
  j["epsilon"] = epsilon;
  j["reference_alpha"] = reference_alpha;
  j["alpha_spread"] = alpha_spread;
  j["heavy_cap"] = 16.0 / (tau * tau);
  j["witnesses_distinct"] = witnesses_distinct;
  j["witnesses_heavy"] = witnesses_heavy;
  j["heavy_bound"] = heavy_bound;
  j["count_bound"] = count_bound;
  j["reading_disagreements"] = reading_disagreements;
  j["max_identity_error"] = max_identity_error;
  j["min_pair_disagreement"] = min_pair_disagreement;
  j["unique_closeness"] = unique_closeness;
  j["ok"] = ok();
  nlohmann::ordered_json qs = nlohmann::ordered_json::array();
  for (const QueryReport& q : queries) {
    nlohmann::ordered_json e;
    e["reference_answer"] = q.reference_answer;
    e["heavy"] = q.heavy;
    e["distinguished"] = q.distinguished;
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (IndexSet I : q.witnesses) w.push_back(elements(I));
    e["witnesses"] = std::move(w);
    e["distinguished_per_pair"] = q.distinguished_per_pair;
    qs.push_back(std::move(e));
  }
  j["queries"] = std::move(qs);
  return j.dump(2);
}

}  // namespace evolvesim::csq
