#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evolvesim::csq {

/// Subset of [n], n <= 64: bit i - 1 holds element i. Boolean patterns
/// x in {0,1}^n use the same layout.
using IndexSet = std::uint64_t;

/// Largest n for which dense tables over {0,1}^n are built.
inline constexpr std::size_t kMaxDenseDim = 24;

IndexSet index_set(std::span<const int> elements);  // 1-based
std::vector<int> elements(IndexSet s);               // ascending, 1-based
std::size_t cardinality(IndexSet s);

/// chi_I(x) = prod_{i in I} (1 - 2 x_i).
int parity(IndexSet I, std::uint64_t x);

/// ghat(I) = E_U[g chi_I] for every I, indexed by mask. Table size must be 2^n.
std::vector<double> walsh_hadamard(std::span<const double> table);
/// g(x) = sum_I ghat(I) chi_I(x).
std::vector<double> inverse_walsh_hadamard(std::span<const double> coeffs);

/// Sparse spectrum; absent sets have coefficient 0.
class FourierSpectrum {
 public:
  FourierSpectrum() = default;
  /// Keeps coefficients with |ghat(I)| > drop.
  static FourierSpectrum from_table(std::span<const double> table, double drop = 0.0);

  double operator[](IndexSet I) const;
  void set(IndexSet I, double value);
  const std::map<IndexSet, double>& coefficients() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  /// sum_I ghat(I)^2
  double squared_norm() const;
  /// Pointwise table over {0,1}^n.
  std::vector<double> to_table(std::size_t n) const;

 private:
  std::map<IndexSet, double> coeffs_;
};

/// E_U[g^2] for a table over {0,1}^n.
double squared_norm_u(std::span<const double> table);

/// t_S = -1 + 2^{-|S|+1} sum_{I subset of S} chi_I: +1 exactly when every bit in S is 0.
FourierSpectrum conj_fourier(IndexSet S);
int conjunction(IndexSet S, std::uint64_t x);

/// Exact tables over the 2^k patterns of the S-coordinates. Pattern bit j is
/// the bit of the j-th smallest element of S; the other coordinates are uniform.
struct ConjDistPair {
  IndexSet S = 0;
  std::size_t k = 0;
  std::vector<int> t;          // t_S
  std::vector<double> phi;     // phi_S
  std::vector<double> theta;   // phi_S / L1
  std::vector<double> mass;    // D_S on S-patterns, sums to 1
  double l1 = 0.0;             // E_U |phi_S|
  double alpha_scale = 0.0;    // 1 / l1
  double sign_margin = 0.0;    // min |phi_S|

  std::uint64_t pattern_of(std::uint64_t x) const;
  /// D_S(x) on {0,1}^n.
  double density(std::uint64_t x, std::size_t n) const;
  /// D_S(x) / U(x)
  double density_ratio(std::uint64_t x) const;
};

/// phi_S = t_S minus the parities of S-subsets of size 1..k/3, D_S = U |phi_S| / L1,
/// theta_S = phi_S / L1. Throws InputDomainError unless |S| = k, 3 | k, k >= 6;
/// throws ConstructionError if sign(phi_S) != t_S at some pattern.
ConjDistPair build_pair(IndexSet S, std::size_t k);

struct PairCheck {
  double bridge_error = 0.0;     // max |D_S t_S - U theta_S| over patterns
  double mass_error = 0.0;       // |sum D_S - 1|
  double min_ratio = 0.0;        // min D_S / U
  double max_ratio = 0.0;
  double hidden_band = 0.0;      // max |theta_hat(I)| over 1 <= |I| <= k/3
  double alpha_scale = 0.0;
  bool ok() const;
};
PairCheck check_pair(const ConjDistPair& pair);

/// Greedy over k-subsets of [n] in lexicographic order; a set is accepted iff it
/// shares at most k/3 elements with every accepted set. Requires 3 | k,
/// 6 <= k <= n/2, n <= 64.
std::vector<IndexSet> greedy_disjoint_sets(std::size_t n, std::size_t k);
/// (n / 8k)^{k/3} + 1
double greedy_size_bound(std::size_t n, std::size_t k);

/// Removed-parity count against the |t_S - phi_S| < 1/2 argument.
struct DeviationReport {
  std::size_t k = 0;
  std::size_t removed = 0;         // sum_{i=1}^{k/3} C(k, i)
  std::size_t short_count = 0;     // C(k, k/3) - 1
  double deviation_bound = 0.0;    // removed * 2^{-k+1}
  double short_bound = 0.0;        // short_count * 2^{-k+1}
  double max_deviation = 0.0;      // exact max |t_S - phi_S| (0 when not enumerated)
};
DeviationReport deviation_report(std::size_t k);
/// Smallest k (multiple of 3, >= 6) whose removed-parity bound is below 1/2.
std::size_t smallest_k_with_half_bound(std::size_t k_max = 60);

enum class OracleMode { exact, adversarial_plus, adversarial_minus, toward_reference };

/// Answer to the correlation query <f, g>_{D'} with tolerance tau. Tables are
/// over {0,1}^n; D' is a probability table. toward_reference returns the value
/// within tau of the exact answer closest to `reference`.
double csq_oracle(std::span<const double> f, std::span<const double> d_prime, std::span<const double> g, double tau,
                  OracleMode mode, double reference = 0.0);

/// |{I : |ghat(I)| >= tau / 4}|. Throws InputDomainError if ||g||_U > 1.
std::size_t heavy_coefficient_count(std::span<const double> g, double tau);

/// Pr_U[t_S != h] and Pr_{D_S}[t_S != h] for a +-1 table h over {0,1}^n.
struct Disagreement {
  double uniform = 0.0;
  double pair = 0.0;
};
Disagreement disagreement(const ConjDistPair& pair, std::span<const double> h, std::size_t n);

struct QueryReport {
  double reference_answer = 0.0;       // <psi, g>_U
  std::size_t heavy = 0;               // |{I : |ghat(I)| >= tau/4}|
  std::vector<std::size_t> distinguished;  // pair indices, fixed reference
  std::vector<IndexSet> witnesses;         // aligned with distinguished
  std::size_t distinguished_per_pair = 0;  // count under the per-pair reference
  double identity_error = 0.0;  // max |<t_S, g>_{D_S} - <theta_S, g>_U|
  bool witnesses_heavy = true;
};

struct AuditReport {
  std::size_t n = 0;
  std::size_t k = 0;
  double tau = 0.0;
  double epsilon = 0.0;
  double reference_alpha = 0.0;
  double alpha_spread = 0.0;  // max |alpha_S - reference_alpha|
  std::vector<QueryReport> queries;
  bool witnesses_distinct = true;   // per query, distinct pairs have distinct witnesses
  bool witnesses_heavy = true;
  bool heavy_bound = true;          // heavy <= 16 / tau^2
  bool count_bound = true;          // distinguished <= heavy
  std::size_t reading_disagreements = 0;  // queries where the two references differ
  double max_identity_error = 0.0;
  /// min over distinct pairs of Pr_U[t_S != t_T]; with the x3 density band a
  /// hypothesis epsilon-close to two pairs forces this below 6 epsilon.
  double min_pair_disagreement = 1.0;
  bool unique_closeness = true;  // 6 epsilon < min_pair_disagreement

  bool ok() const;
  std::string to_json() const;
};

/// For every query g, the pairs whose exact answer <t_S, g>_{D_S} lies more than
/// tau from the reference answer alpha (-1 + 2^{-k+1}) E_U[g], with the
/// witnessing heaviest I subset of S, |I| > k/3. reference_alpha defaults to the
/// first pair's alpha_scale; the per-pair reading is counted alongside.
AuditReport distinguishing_audit(std::size_t n, std::span<const ConjDistPair> pairs,
                                 std::span<const std::vector<double>> queries, double tau, double epsilon,
                                 std::optional<double> reference_alpha = std::nullopt);

/// `random_count` uniform +-1 tables over {0,1}^n drawn from the seed, then one
/// planted query sign(theta_S - psi) per pair (sign 0 maps to +1), psi the
/// reference constant at reference_alpha.
std::vector<std::vector<double>> audit_queries(std::size_t n, std::span<const ConjDistPair> pairs,
                                               std::size_t random_count, std::uint64_t seed,
                                               std::optional<double> reference_alpha = std::nullopt);

/// Number of pairs with Pr_{D_S}[t_S != h] <= epsilon.
std::size_t close_pairs(std::span<const ConjDistPair> pairs, std::span<const double> h, std::size_t n, double epsilon);

}  // namespace evolvesim::csq
