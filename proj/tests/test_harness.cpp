#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evolvesim/errors.hpp"
#include "evolvesim/harness.hpp"

using namespace evolvesim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evolvesim_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json small_config(const fs::path& out) {
  return json{{"n", 3},
              {"target", "majority"},
              {"loss", {{"family", "power"}, {"c", 2}}},
              {"epsilon", 0.3},
              {"seeds", {1, 2, 3}},
              {"budget", {{"max_evaluations", 2e7}, {"policy", "shrink"}}},
              {"output_dir", out.string()}};
}

std::string field_of(const json& j, const fs::path& base = ".") {
  try {
    parse_config(j, base);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

Verdict verdict(bool converged, double lperf, std::size_t gens, bool monotone = true) {
  Verdict v;
  v.converged = converged;
  v.final_lperf = lperf;
  v.generations_used = gens;
  v.monotone = monotone;
  return v;
}

}  // namespace

TEST_CASE("config parsing") {
  const json ok = small_config("out");
  const ExperimentConfig c = parse_config(ok);
  CHECK(c.n == 3);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.budget.policy == BudgetPolicy::shrink);
  CHECK(c.loss.family == "power");
  CHECK_FALSE(c.gamma.has_value());

  json j = ok;
  j.erase("epsilon");
  CHECK(field_of(j) == "epsilon");
  j = ok;
  j["epsilon"] = 1.5;
  CHECK(field_of(j) == "epsilon");
  j = ok;
  j["seeds"] = json::array();
  CHECK(field_of(j) == "seeds");
  j = ok;
  j["seeds"] = "one";
  CHECK(field_of(j) == "seeds");
  j = ok;
  j["epsilonn"] = 0.1;
  CHECK(field_of(j) == "epsilonn");
  j = ok;
  j["target"] = {{"family", "parity"}};
  CHECK(field_of(j) == "target.family");
  j = ok;
  j["loss"] = {{"family", "power"}, {"c", "two"}};
  CHECK(field_of(j) == "loss.c");
  j = ok;
  j["budget"]["policy"] = "maybe";
  CHECK(field_of(j) == "budget.policy");
  j = ok;
  j["distribution"] = {{"file", "no_such_distribution.json"}};
  CHECK(field_of(j) == "distribution.file");
  j = ok;
  j["start"] = {{"file", "no_such_rep.json"}};
  CHECK(field_of(j) == "start.file");
}

TEST_CASE("malformed documents report line and column") {
  const fs::path dir = scratch("parse");
  std::ofstream(dir / "bad.json") << "{\n  \"n\": 3,\n  \"seeds\": [1,]\n}\n";
  try {
    load_config(dir / "bad.json");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(what.find("column") != std::string::npos);
  }
}

TEST_CASE("named targets") {
  // Conjunction of bits 1 and 3: +1 exactly when both are 1.
  const std::size_t n = 4;
  TargetSpec spec;
  spec.family = "conjunction";
  spec.variables = {1, 3};
  const Halfspace f = make_target(spec, n);
  for (std::uint64_t x = 0; x < 16; ++x) {
    const int want = (x & 0b101) == 0b101 ? 1 : -1;
    CHECK(f.eval(scaled_hypercube_point(n, x)) == want);
  }
  spec.variables = {1, 5};
  CHECK_THROWS_AS(make_target(spec, n), ConfigError);

  const Halfspace maj = make_target(TargetSpec{}, 5);
  CHECK(margin(maj, uniform_scaled_hypercube(5)) == doctest::Approx(0.2).epsilon(1e-14));

  // The adversarial start sits near -f.
  const LabeledDistribution task(maj, uniform_scaled_hypercube(5));
  StartSpec adv;
  adv.kind = "adversarial";
  CHECK(lperf_true(task, make_start(adv, maj), power_loss(2.0)) < -0.5);
}

TEST_CASE("json round trips are exact") {
  const FiniteDistribution d({Point({0.1, 1.0 / 3.0}), Point({-0.7, 0.2})}, {1.0 / 3.0, 2.0 / 3.0});
  const json dj = json::parse(distribution_to_json(d).dump());
  const FiniteDistribution d2 = distribution_from_json(dj);
  CHECK(d2.support() == d.support());
  CHECK(d2.probs() == d.probs());

  const Halfspace f = Halfspace::normalized({1.0, 3.0}, 0.7);
  const Halfspace f2 = halfspace_from_json(json::parse(halfspace_to_json(f).dump()));
  CHECK(f2.weights() == f.weights());
  CHECK(f2.theta() == f.theta());

  const BoundedLinearRep r({0.1, -2.0 / 7.0, 1e-17});
  CHECK(rep_from_json(json::parse(rep_to_json(r).dump())) == r);
  CHECK_THROWS_AS(distribution_from_json(json{{"n", 2}, {"support", {{0.1}}}, {"probs", {1.0}}}), DimensionMismatch);
}

TEST_CASE("summaries") {
  std::vector<Verdict> all(20, verdict(true, 0.8, 10));
  CHECK(summarize(all).converged_fraction == 1.0);
  for (int i = 0; i < 4; ++i) all[i].converged = false;
  CHECK(summarize(all).converged_fraction == 0.8);

  const Summary one = summarize({verdict(false, 0.625, 17)});
  CHECK(one.runs == 1);
  CHECK(one.mean_final_lperf == 0.625);
  CHECK(one.mean_generations == 17.0);
  CHECK(one.converged_monotone_fraction == 1.0);

  const Summary mixed = summarize({verdict(true, 1.0, 2, true), verdict(true, 0.5, 4, false), verdict(false, 0.0, 6)});
  CHECK(mixed.monotone_fraction == doctest::Approx(2.0 / 3.0));
  CHECK(mixed.converged_monotone_fraction == 0.5);
  CHECK(mixed.mean_final_lperf == 0.5);
  CHECK(mixed.mean_generations == 4.0);
  CHECK_THROWS_AS(summarize({}), InputDomainError);
}

TEST_CASE("batch run writes one trajectory per seed and is reproducible") {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  ExperimentConfig ca = parse_config(small_config(a));
  ExperimentConfig cb = parse_config(small_config(b));

  setenv("EVOLVESIM_WORKERS", "1", 1);
  CHECK(worker_count() == 1);
  const RunBundle ra = run_experiment(ca);
  setenv("EVOLVESIM_WORKERS", "3", 1);
  const RunBundle rb = run_experiment(cb);
  unsetenv("EVOLVESIM_WORKERS");

  std::size_t trajectories = 0, summaries = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const std::string name = e.path().filename().string();
    trajectories += name.rfind("trajectory_", 0) == 0;
    summaries += name == "summary.json";
  }
  CHECK(trajectories == 3);
  CHECK(summaries == 1);

  for (const auto& e : fs::directory_iterator(a)) CHECK(slurp(e.path()) == slurp(b / e.path().filename()));

  // The summary agrees with a recount of the verdict files.
  std::size_t converged = 0;
  for (std::uint64_t seed : ca.seeds) {
    const json v = json::parse(slurp(a / ("verdict_" + std::to_string(seed) + ".json")));
    converged += v.at("converged").get<bool>();
  }
  CHECK(ra.summary.converged_fraction == static_cast<double>(converged) / 3.0);
  CHECK(json::parse(slurp(a / "summary.json")).at("runs") == 3);
  CHECK(rb.summary.converged_fraction == ra.summary.converged_fraction);

  setenv("EVOLVESIM_WORKERS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), ConfigError);
  unsetenv("EVOLVESIM_WORKERS");
}

TEST_CASE("resource ceiling surfaces as an error") {
  const fs::path out = scratch("ceiling");
  json j = small_config(out);
  j["budget"] = {{"max_evaluations", 1e6}, {"policy", "error"}};
  CHECK_THROWS_AS(run_experiment(parse_config(j)), ResourceError);
}
