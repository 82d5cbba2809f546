// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--out DIR] [--only N]

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "evolvesim/csq_lab.hpp"
#include "evolvesim/driver.hpp"
#include "evolvesim/harness.hpp"
#include "evolvesim/loss.hpp"
#include "evolvesim/mutation.hpp"

using namespace evolvesim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------- 1 to 3

LabeledDistribution random_instance(Stream& rng, std::size_t n, std::size_t m) {
  for (;;) {
    std::vector<Point> pts;
    std::vector<double> probs;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> v(n);
      double sq = 0.0;
      for (double& x : v) {
        x = rng.normal();
        sq += x * x;
      }
      const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(n)) / std::sqrt(sq);
      for (double& x : v) x *= r;
      pts.emplace_back(v);
      probs.push_back(rng.uniform() + 1e-3);
    }
    double total = 0.0;
    for (double p : probs) total += p;
    for (double& p : probs) p /= total;
    std::vector<double> w(n);
    double wn = 0.0;
    for (double& x : w) {
      x = rng.normal();
      wn += x * x;
    }
    const Halfspace f = Halfspace::normalized(w, rng.uniform(-0.3, 0.3) * std::sqrt(wn));
    FiniteDistribution d(std::move(pts), std::move(probs));
    bool on_boundary = false;
    for (const Point& x : d.support()) on_boundary |= f.linear_form(x) == 0.0;
    if (!on_boundary) return LabeledDistribution(f, std::move(d));
  }
}

struct SuiteCounts {
  int instances = 0;
  int quad_fail = 0;
  int power_checks = 0;
  int power_fail = 0;
  int witness_checks = 0;
  int witness_fail = 0;
  double seconds = 0.0;
};

SuiteCounts run_neighborhood_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const double eps = 0.1;
  const Loss q = unscaled_quadratic();
  const LossBounds qb = quadratic_witness_bounds();
  std::vector<Loss> powers;
  std::vector<LossBounds> bounds;
  for (double c : {2.0, 3.0, 4.0}) {
    powers.push_back(power_loss(c));
    bounds.push_back(std::get<Certificate>(verify_well_behaved(powers.back())).bounds);
  }
  SuiteCounts s;
  Stream rng(42);
  for (int it = 0; it < 1000; ++it) {
    const std::size_t n = 2 + rng.below(7);
    const LabeledDistribution task = random_instance(rng, n, 1 + rng.below(64));
    const double gamma = margin(task.target(), task.dist());
    std::vector<double> a(n + 1);
    for (double& x : a) x = rng.uniform(-1.5, 1.5);
    Hypothesis phi{BoundedLinearRep(a)};
    const std::uint64_t extra = rng.below(4);
    for (std::uint64_t k = 0; k < extra; ++k) phi = phi.extended(static_cast<int>(rng.below(n + 1)), rng.uniform(-0.8, 0.8));
    ++s.instances;

    const NeighborhoodAudit r = audit_neighborhood(task, phi, q, qb, true, eps, gamma);
    s.quad_fail += !r.holds;
    s.witness_checks += r.witness_applies;
    s.witness_fail += !r.witness_holds;
    for (std::size_t c = 0; c < powers.size(); ++c) {
      const NeighborhoodAudit w = audit_neighborhood(task, phi, powers[c], bounds[c], false, eps, gamma);
      ++s.power_checks;
      s.power_fail += !w.holds;
      s.witness_checks += w.witness_applies;
      s.witness_fail += !w.witness_holds;
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

// ---------------------------------------------------------------- 4

Outcome criterion4() {
  bool ok = true;
  std::string detail;
  const Verification v2 = verify_well_behaved(power_loss(2.0));
  if (const auto* c = std::get_if<Certificate>(&v2)) {
    const LossBounds& b = c->bounds;
    const bool near = std::abs(b.a - 0.5) <= 0.005 && std::abs(b.A - std::sqrt(2.0)) <= 0.01 * std::sqrt(2.0) &&
                      std::abs(b.B - 1.0) <= 0.01;
    ok &= near;
    detail += format("power(2) a=%.6g A=%.6g B=%.6g", b.a, b.A, b.B);
  } else {
    ok = false;
    detail += "power(2) rejected";
  }
  const Verification vl = verify_well_behaved(linear_loss());
  const auto* viol = std::get_if<Violation>(&vl);
  ok &= viol != nullptr && viol->condition == 4;
  detail += viol ? format("; linear rejected on condition %d", viol->condition) : "; linear accepted";

  double worst = 0.0;
  for (const Loss& l : {power_loss(2.0), power_loss(3.0), power_loss(4.0), unscaled_quadratic(), linear_loss()}) {
    const DerivativeAudit d = finite_difference_audit(l, 401);
    worst = std::max({worst, d.max_d1_error, d.max_d2_error});
  }
  ok &= worst <= 1e-6;
  detail += format("; worst finite-difference error %.3g", worst);
  return {ok, detail};
}

// ---------------------------------------------------------------- 5 and 10

ExperimentConfig majority_config(const fs::path& out, const std::string& start) {
  nlohmann::json seeds = nlohmann::json::array();
  for (int s = 1; s <= 20; ++s) seeds.push_back(s);
  const nlohmann::json j{{"n", 5},
                         {"target", "majority"},
                         {"distribution", "scaled-hypercube-uniform"},
                         {"loss", {{"family", "quadratic"}}},
                         {"epsilon", 0.25},
                         {"seeds", seeds},
                         {"budget", {{"max_evaluations", 1e9}, {"policy", "shrink"}}},
                         {"start", start},
                         {"output_dir", out.string()}};
  return parse_config(j);
}

Outcome criterion5(const fs::path& out) {
  bool ok = true;
  std::string detail;
  for (const std::string start : {"zero", "ones"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunBundle b = run_experiment(majority_config(out / ("majority_" + start), start));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string bad;
    for (const Trajectory& t : b.runs)
      if (t.verdict.converged && !t.verdict.monotone) bad += " " + std::to_string(t.verdict.seed);
    const bool pass = b.summary.converged_fraction >= 0.8 && b.summary.converged_monotone_fraction == 1.0 && secs < 600.0;
    ok &= pass;
    if (!detail.empty()) detail += "; ";
    detail += format("r0=%s converged %.2f, monotone among converged %.2f, %.0fs", start.c_str(),
                     b.summary.converged_fraction, b.summary.converged_monotone_fraction, secs);
    if (!bad.empty()) detail += ", non-monotone seeds" + bad;
    if (start == "zero" && b.params.budget.capped)
      detail += format(" (budget capped: s=%zu g=%zu)", b.params.selection.samples, b.params.generations);
  }
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion10(const fs::path& out) {
  // Repeat the zero-start run of criterion 5 and compare every file.
  const fs::path first = out / "majority_zero", again = out / "majority_zero_repeat";
  fs::remove_all(again);
  run_experiment(majority_config(again, "zero"));
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(first)) {
    ++files;
    const fs::path other = again / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
  }
  std::size_t other_files = 0;
  for (const auto& e : fs::directory_iterator(again)) other_files += e.is_regular_file();
  const bool ok = files > 0 && differing == 0 && other_files == files;
  return {ok, format("%zu files compared, %zu differ", files, differing + (other_files != files))};
}

// ---------------------------------------------------------------- 6

Outcome criterion6() {
  int runs = 0, fails = 0;
  std::size_t max_gen = 0;
  const EvolveOptions exact{FitnessMode::exact, PoolMode::enumerated, true};
  for (std::size_t n = 3; n <= 8; ++n)
    for (int inst = 0; inst < 20; ++inst) {
      Stream rng(1000 * n + static_cast<std::uint64_t>(inst));
      std::vector<double> w(n, 1.0);
      double theta = 0.0;
      FiniteDistribution d = uniform_scaled_hypercube(n);
      if (inst > 0) {
        for (double& x : w) x = rng.normal();
        theta = rng.uniform(-0.5, 0.5);
        std::vector<double> bits(n);
        for (double& p : bits) p = rng.uniform(0.1, 0.9);
        d = product_scaled_hypercube(bits);
      }
      const Halfspace f = Halfspace::normalized(w, theta);
      double gamma = 0.0;
      try {
        gamma = margin(f, d);
      } catch (const std::exception&) {
        continue;  // a support point on the boundary
      }
      const LabeledDistribution task(f, d);
      // Exact fitness draws no samples: keep the derived g and let s shrink.
      EvolutionParams p =
          derive_params(n, 0.25, std::min(1.0, gamma), LossRegime::quadratic_loss(), {1e12, BudgetPolicy::shrink});
      p.generations = static_cast<std::size_t>(p.budget.derived_generations);
      std::vector<double> adv(n + 1);
      adv[0] = 3.0 * f.theta();
      for (std::size_t i = 0; i < n; ++i) adv[i + 1] = -3.0 * f.weights()[i];
      for (const BoundedLinearRep& r0 : {BoundedLinearRep::zero(n), BoundedLinearRep::constant_coeffs(n, 1.0),
                                         BoundedLinearRep(adv)}) {
        const Trajectory t = evolve(task, p, power_loss(2.0), r0, 7, exact);
        bool nondecreasing = true;
        for (std::size_t i = 1; i < t.records.size(); ++i)
          nondecreasing &= t.records[i].true_lperf >= t.records[i - 1].true_lperf;
        ++runs;
        fails += !(t.verdict.converged && nondecreasing && t.verdict.generations_used <= p.generations);
        max_gen = std::max(max_gen, t.verdict.generations_used);
      }
    }
  return {fails == 0 && runs > 0, format("%d runs at n=3..8, %d failures, at most %zu generations", runs, fails, max_gen)};
}

// ---------------------------------------------------------------- 7 to 9

// E_U|phi_S| straight from the definition over all 2^k patterns.
double l1_by_enumeration(std::size_t k) {
  double total = 0.0;
  const std::uint64_t patterns = std::uint64_t{1} << k;
  for (std::uint64_t x = 0; x < patterns; ++x) {
    double phi = x == 0 ? 1.0 : -1.0;
    for (std::uint64_t I = 1; I < patterns; ++I) {
      if (static_cast<std::size_t>(std::popcount(I)) > k / 3) continue;
      phi -= std::ldexp(1.0, 1 - static_cast<int>(k)) * (std::popcount(I & x) % 2 ? -1.0 : 1.0);
    }
    total += std::abs(phi);
  }
  return total / static_cast<double>(patterns);
}

Outcome criterion7() {
  bool ok = true;
  std::string detail;
  for (std::size_t k : {6, 9}) {
    const csq::ConjDistPair p = csq::build_pair((csq::IndexSet{1} << k) - 1, k);
    const csq::PairCheck c = csq::check_pair(p);
    bool pass = c.min_ratio >= 1.0 / 3.0 && c.max_ratio <= 3.0 && p.alpha_scale >= 2.0 / 3.0 && p.alpha_scale <= 2.0 &&
                c.mass_error <= 1e-10 && c.bridge_error <= 1e-12 && c.hidden_band <= 1e-12;
    // Hidden band from an independent transform of theta_S.
    const std::vector<double> th = csq::walsh_hadamard(p.theta);
    double band = 0.0;
    for (csq::IndexSet I = 1; I < th.size(); ++I)
      if (csq::cardinality(I) <= k / 3) band = std::max(band, std::abs(th[I]));
    pass &= band <= 1e-12;
    double l1_gap = 0.0;
    if (k == 6) {
      l1_gap = std::abs(p.l1 - l1_by_enumeration(6));
      pass &= l1_gap <= 1e-10;
    }
    ok &= pass;
    if (!detail.empty()) detail += "; ";
    detail += format("k=%zu ratio [%.4f, %.4f] alpha %.6f mass %.1e bridge %.1e band %.1e", k, c.min_ratio, c.max_ratio,
                     p.alpha_scale, c.mass_error, c.bridge_error, std::max(band, c.hidden_band));
    if (k == 6) detail += format(" L1 gap %.1e", l1_gap);
  }
  return {ok, detail};
}

Outcome criterion8() {
  bool ok = true;
  std::string detail;
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{48, 6}, {12, 6}, {27, 9}}) {
    const auto sets = csq::greedy_disjoint_sets(n, k);
    std::size_t worst = 0;
    bool sized = true;
    for (std::size_t a = 0; a < sets.size(); ++a) {
      sized &= csq::cardinality(sets[a]) == k;
      for (std::size_t b = a + 1; b < sets.size(); ++b) worst = std::max(worst, csq::cardinality(sets[a] & sets[b]));
    }
    const double bound = csq::greedy_size_bound(n, k);
    const bool pass = sized && worst <= k / 3 && static_cast<double>(sets.size()) >= bound;
    ok &= pass;
    if (!detail.empty()) detail += "; ";
    detail += format("(%zu,%zu) %zu sets >= %.4g, max overlap %zu", n, k, sets.size(), bound, worst);
  }
  return {ok, detail};
}

Outcome criterion9() {
  const std::size_t n = 12, k = 6;
  std::vector<csq::ConjDistPair> pairs;
  for (csq::IndexSet S : csq::greedy_disjoint_sets(n, k)) pairs.push_back(csq::build_pair(S, k));

  // Structural: no witness set I of S (|I| > k/3) lies inside another member.
  bool distinct_family = true;
  for (std::size_t a = 0; a < pairs.size(); ++a)
    for (csq::IndexSet I = 1; I <= pairs[a].S; ++I) {
      if ((I & ~pairs[a].S) || csq::cardinality(I) <= k / 3) continue;
      for (std::size_t b = 0; b < pairs.size(); ++b)
        if (b != a && (I & ~pairs[b].S) == 0) distinct_family = false;
    }

  bool ok = distinct_family;
  std::string detail = format("%zu pairs, witness sets %s", pairs.size(), distinct_family ? "distinct" : "shared");
  const auto queries = csq::audit_queries(n, pairs, 1000, 1);
  for (double tau : {0.05, 0.1}) {
    const csq::AuditReport r = csq::distinguishing_audit(n, pairs, queries, tau, 0.004);
    std::size_t max_heavy = 0;
    for (const csq::QueryReport& q : r.queries) max_heavy = std::max(max_heavy, q.heavy);
    const bool pass = r.witnesses_distinct && r.witnesses_heavy && r.heavy_bound && r.count_bound;
    ok &= pass;
    detail += format("; tau=%.2f %zu queries, max heavy %zu <= %.0f", tau, r.queries.size(), max_heavy, 16.0 / (tau * tau));
  }

  // Density band bridge: uniform and pair disagreement within a factor 3 of each other.
  Stream s(9);
  std::size_t bridge_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const csq::ConjDistPair& p = pairs[s.below(pairs.size())];
    std::vector<double> h(std::size_t{1} << n);
    const double flip = trial % 4 == 0 ? 0.5 : s.uniform(0.0, 0.3);
    for (std::uint64_t x = 0; x < h.size(); ++x) h[x] = s.uniform() < flip ? -csq::conjunction(p.S, x) : csq::conjunction(p.S, x);
    const csq::Disagreement d = csq::disagreement(p, h, n);
    bridge_fail += !(d.uniform <= 3.0 * d.pair + 1e-15 && d.pair <= 3.0 * d.uniform + 1e-15);
  }
  ok &= bridge_fail == 0;
  detail += format("; bridge failures %zu/1000", bridge_fail);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_out";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--out DIR] [--only N]\n");
      return 2;
    }
  }
  fs::create_directories(out);

  int failed = 0;
  const auto report = [&](int id, const Outcome& o) {
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  const auto want = [&](int id) { return only == 0 || only == id; };

  if (want(1) || want(2) || want(3)) {
    const SuiteCounts s = run_neighborhood_suite();
    if (want(1))
      report(1, {s.quad_fail == 0 && s.instances >= 1000 && s.seconds < 60.0,
                 format("%d instances, %d failures, %.1fs for suites 1-3", s.instances, s.quad_fail, s.seconds)});
    if (want(2)) report(2, {s.power_fail == 0, format("%d checks over c in {2,3,4}, %d failures", s.power_checks, s.power_fail)});
    if (want(3))
      report(3, {s.witness_fail == 0, format("%d applicable checks, %d failures", s.witness_checks, s.witness_fail)});
  }
  if (want(4)) report(4, criterion4());
  if (want(5) || want(10)) report(5, criterion5(out));
  if (want(6)) report(6, criterion6());
  if (want(7)) report(7, criterion7());
  if (want(8)) report(8, criterion8());
  if (want(9)) report(9, criterion9());
  if (want(10)) report(10, criterion10(out));
  return failed == 0 ? 0 : 1;
}
