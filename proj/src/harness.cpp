#include "evolvesim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "evolvesim/errors.hpp"

namespace evolvesim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& require(const json& j, const std::string& key, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(field + key, "missing");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, std::string("wrong type (") + e.what() + ")");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field.empty() ? "config" : field, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.contains(key)) throw ConfigError(field + key, "unknown field");
}

fs::path existing_file(const json& j, const fs::path& base, const std::string& field) {
  fs::path p = get_as<std::string>(j, field);
  if (p.is_relative()) p = base / p;
  if (!fs::is_regular_file(p)) throw ConfigError(field, "file not found: " + p.string());
  return p;
}

TargetSpec parse_target(const json& j, const fs::path& base) {
  TargetSpec t;
  if (j.is_string()) {
    t.family = j.get<std::string>();
    if (t.family != "majority") throw ConfigError("target", "unknown family '" + t.family + "'");
    return t;
  }
  check_keys(j, {"family", "variables", "w", "theta", "file"}, "target.");
  if (j.contains("file")) {
    t.family = "file";
    t.path = existing_file(j.at("file"), base, "target.file");
    return t;
  }
  t.family = get_as<std::string>(require(j, "family", "target."), "target.family");
  if (t.family == "conjunction") {
    t.variables = get_as<std::vector<int>>(require(j, "variables", "target."), "target.variables");
  } else if (t.family == "halfspace") {
    t.w = get_as<std::vector<double>>(require(j, "w", "target."), "target.w");
    t.theta = get_as<double>(require(j, "theta", "target."), "target.theta");
  } else if (t.family != "majority") {
    throw ConfigError("target.family", "unknown family '" + t.family + "'");
  }
  return t;
}

DistributionSpec parse_distribution(const json& j, const fs::path& base) {
  DistributionSpec d;
  if (j.is_string()) {
    d.family = j.get<std::string>();
    if (d.family != "scaled-hypercube-uniform") throw ConfigError("distribution", "unknown family '" + d.family + "'");
    return d;
  }
  check_keys(j, {"family", "bit_probs", "file"}, "distribution.");
  if (j.contains("file")) {
    d.family = "file";
    d.path = existing_file(j.at("file"), base, "distribution.file");
    return d;
  }
  d.family = get_as<std::string>(require(j, "family", "distribution."), "distribution.family");
  if (d.family == "product") {
    d.bit_probs = get_as<std::vector<double>>(require(j, "bit_probs", "distribution."), "distribution.bit_probs");
  } else if (d.family != "scaled-hypercube-uniform") {
    throw ConfigError("distribution.family", "unknown family '" + d.family + "'");
  }
  return d;
}

LossSpec parse_loss(const json& j, const std::string& field) {
  LossSpec l;
  if (j.is_string()) {
    l.family = j.get<std::string>();
  } else {
    check_keys(j, {"family", "c", "parts", "weights"}, field + ".");
    l.family = get_as<std::string>(require(j, "family", field + "."), field + ".family");
    if (j.contains("c")) l.c = get_as<double>(j.at("c"), field + ".c");
    if (l.family == "mixture") {
      const json& parts = require(j, "parts", field + ".");
      if (!parts.is_array() || parts.empty()) throw ConfigError(field + ".parts", "expected a non-empty array");
      for (std::size_t i = 0; i < parts.size(); ++i)
        l.parts.push_back(parse_loss(parts[i], field + ".parts[" + std::to_string(i) + "]"));
      l.weights = get_as<std::vector<double>>(require(j, "weights", field + "."), field + ".weights");
    }
  }
  static const std::set<std::string> families{"power", "quadratic", "linear", "mixture"};
  if (!families.contains(l.family)) throw ConfigError(field + ".family", "unknown family '" + l.family + "'");
  return l;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base) {
  check_keys(j,
             {"experiment", "n", "target", "distribution", "loss", "loss_schedule", "epsilon", "gamma", "seeds",
              "budget", "start", "fitness", "pool", "stop_on_convergence", "output_dir"},
             "");
  ExperimentConfig c;
  if (j.contains("experiment")) c.experiment = get_as<std::string>(j.at("experiment"), "experiment");
  static const std::set<std::string> kinds{"evolve", "neighborhood-audit", "loss-check", "csq-lab"};
  if (!kinds.contains(c.experiment)) throw ConfigError("experiment", "unknown kind '" + c.experiment + "'");

  const auto n = get_as<long long>(require(j, "n", ""), "n");
  if (n < 1) throw ConfigError("n", "must be positive");
  c.n = static_cast<std::size_t>(n);
  if (j.contains("target")) c.target = parse_target(j.at("target"), base);
  if (j.contains("distribution")) c.distribution = parse_distribution(j.at("distribution"), base);
  if (j.contains("loss")) c.loss = parse_loss(j.at("loss"), "loss");
  if (j.contains("loss_schedule")) {
    const json& s = j.at("loss_schedule");
    if (!s.is_array() || s.empty()) throw ConfigError("loss_schedule", "expected a non-empty array");
    for (std::size_t i = 0; i < s.size(); ++i) c.schedule.push_back(parse_loss(s[i], "loss_schedule[" + std::to_string(i) + "]"));
  }

  c.epsilon = get_as<double>(require(j, "epsilon", ""), "epsilon");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw ConfigError("epsilon", "must lie in (0, 1)");
  if (j.contains("gamma")) {
    c.gamma = get_as<double>(j.at("gamma"), "gamma");
    if (!(*c.gamma > 0.0 && *c.gamma <= 1.0)) throw ConfigError("gamma", "must lie in (0, 1]");
  }

  c.seeds = get_as<std::vector<std::uint64_t>>(require(j, "seeds", ""), "seeds");
  if (c.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");

  if (j.contains("budget")) {
    const json& b = j.at("budget");
    check_keys(b, {"max_evaluations", "policy"}, "budget.");
    if (b.contains("max_evaluations")) {
      c.budget.max_evaluations = get_as<double>(b.at("max_evaluations"), "budget.max_evaluations");
      if (!(c.budget.max_evaluations > 0.0)) throw ConfigError("budget.max_evaluations", "must be positive");
    }
    if (b.contains("policy")) {
      const auto p = get_as<std::string>(b.at("policy"), "budget.policy");
      if (p == "error")
        c.budget.policy = BudgetPolicy::error;
      else if (p == "shrink")
        c.budget.policy = BudgetPolicy::shrink;
      else
        throw ConfigError("budget.policy", "expected 'error' or 'shrink'");
    }
  }

  if (j.contains("start")) {
    const json& s = j.at("start");
    if (s.is_object()) {
      check_keys(s, {"file"}, "start.");
      c.start.kind = "file";
      c.start.path = existing_file(require(s, "file", "start."), base, "start.file");
    } else {
      c.start.kind = get_as<std::string>(s, "start");
      if (c.start.kind != "zero" && c.start.kind != "ones" && c.start.kind != "adversarial")
        throw ConfigError("start", "expected zero, ones, adversarial or {\"file\": ...}");
    }
  }
  if (j.contains("fitness")) {
    const auto f = get_as<std::string>(j.at("fitness"), "fitness");
    if (f == "empirical")
      c.fitness = FitnessMode::empirical;
    else if (f == "exact")
      c.fitness = FitnessMode::exact;
    else
      throw ConfigError("fitness", "expected 'empirical' or 'exact'");
  }
  if (j.contains("pool")) {
    const auto p = get_as<std::string>(j.at("pool"), "pool");
    if (p == "sampled")
      c.pool = PoolMode::sampled;
    else if (p == "enumerated")
      c.pool = PoolMode::enumerated;
    else
      throw ConfigError("pool", "expected 'sampled' or 'enumerated'");
  }
  if (j.contains("stop_on_convergence")) c.stop_on_convergence = get_as<bool>(j.at("stop_on_convergence"), "stop_on_convergence");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j.at("output_dir"), "output_dir");
  return c;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_json_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

// ---------------------------------------------------------------------------

FiniteDistribution distribution_from_json(const json& j) {
  check_keys(j, {"n", "support", "probs"}, "distribution.");
  const auto n = get_as<std::size_t>(require(j, "n", "distribution."), "distribution.n");
  const auto rows = get_as<std::vector<std::vector<double>>>(require(j, "support", "distribution."), "distribution.support");
  const auto probs = get_as<std::vector<double>>(require(j, "probs", "distribution."), "distribution.probs");
  std::vector<Point> support;
  support.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionMismatch(n, r.size());
    support.emplace_back(r);
  }
  return FiniteDistribution(std::move(support), probs);
}

json distribution_to_json(const FiniteDistribution& d) {
  json support = json::array();
  for (const Point& p : d.support()) support.push_back(std::vector<double>(p.coords().begin(), p.coords().end()));
  return json{{"n", d.dim()}, {"support", std::move(support)}, {"probs", d.probs()}};
}

Halfspace halfspace_from_json(const json& j) {
  check_keys(j, {"w", "theta"}, "target.");
  return Halfspace::normalized(get_as<std::vector<double>>(require(j, "w", "target."), "target.w"),
                               get_as<double>(require(j, "theta", "target."), "target.theta"));
}

json halfspace_to_json(const Halfspace& f) { return json{{"w", f.weights()}, {"theta", f.theta()}}; }

BoundedLinearRep rep_from_json(const json& j) {
  check_keys(j, {"coeffs"}, "rep.");
  return BoundedLinearRep(get_as<std::vector<double>>(require(j, "coeffs", "rep."), "rep.coeffs"));
}

json rep_to_json(const BoundedLinearRep& r) { return json{{"coeffs", r.coeffs()}}; }

Halfspace make_target(const TargetSpec& spec, std::size_t n) {
  if (spec.family == "file") {
    Halfspace f = halfspace_from_json(read_json_file(spec.path));
    if (f.dim() != n) throw DimensionMismatch(n, f.dim());
    return f;
  }
  if (spec.family == "majority") return Halfspace::normalized(std::vector<double>(n, 1.0), 0.0);
  if (spec.family == "halfspace") {
    if (spec.w.size() != n) throw DimensionMismatch(n, spec.w.size());
    return Halfspace::normalized(spec.w, spec.theta);
  }
  if (spec.family == "conjunction") {
    // All listed bits at +1/sqrt(n): sum_V x_i - (|V| - 1)/sqrt(n) is +-1/sqrt(n).
    if (spec.variables.empty()) throw ConfigError("target.variables", "empty conjunction");
    std::vector<double> w(n, 0.0);
    for (int v : spec.variables) {
      if (v < 1 || static_cast<std::size_t>(v) > n) throw ConfigError("target.variables", "index out of range");
      if (w[v - 1] != 0.0) throw ConfigError("target.variables", "duplicate index");
      w[v - 1] = 1.0;
    }
    const double theta = (static_cast<double>(spec.variables.size()) - 1.0) / std::sqrt(static_cast<double>(n));
    return Halfspace::normalized(std::move(w), theta);
  }
  throw ConfigError("target.family", "unknown family '" + spec.family + "'");
}

FiniteDistribution make_distribution(const DistributionSpec& spec, std::size_t n) {
  if (spec.family == "file") {
    FiniteDistribution d = distribution_from_json(read_json_file(spec.path));
    if (d.dim() != n) throw DimensionMismatch(n, d.dim());
    return d;
  }
  if (spec.family == "scaled-hypercube-uniform") return uniform_scaled_hypercube(n);
  if (spec.family == "product") {
    if (spec.bit_probs.size() != n) throw DimensionMismatch(n, spec.bit_probs.size());
    return product_scaled_hypercube(spec.bit_probs);
  }
  throw ConfigError("distribution.family", "unknown family '" + spec.family + "'");
}

Loss make_loss(const LossSpec& spec) {
  if (spec.family == "power") return power_loss(spec.c);
  if (spec.family == "quadratic") return unscaled_quadratic();
  if (spec.family == "linear") return linear_loss();
  if (spec.family == "mixture") {
    std::vector<Loss> parts;
    for (const LossSpec& p : spec.parts) parts.push_back(make_loss(p));
    return convex_combination(parts, spec.weights);
  }
  throw ConfigError("loss.family", "unknown family '" + spec.family + "'");
}

BoundedLinearRep make_start(const StartSpec& spec, const Halfspace& target) {
  const std::size_t n = target.dim();
  if (spec.kind == "zero") return BoundedLinearRep::zero(n);
  if (spec.kind == "ones") return BoundedLinearRep::constant_coeffs(n, 1.0);
  if (spec.kind == "adversarial") {
    // -3 (<w, x> - theta): saturates at -f on most of the ball.
    std::vector<double> a(n + 1);
    a[0] = 3.0 * target.theta();
    for (std::size_t i = 0; i < n; ++i) a[i + 1] = -3.0 * target.weights()[i];
    return BoundedLinearRep(std::move(a));
  }
  if (spec.kind == "file") {
    BoundedLinearRep r = rep_from_json(read_json_file(spec.path));
    if (r.dim() != n) throw DimensionMismatch(n, r.dim());
    return r;
  }
  throw ConfigError("start", "unknown kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------

Summary summarize(const std::vector<Verdict>& verdicts) {
  if (verdicts.empty()) throw InputDomainError("summarize: no runs");
  Summary s;
  s.runs = verdicts.size();
  std::size_t conv = 0, mono = 0, conv_mono = 0;
  double lperf = 0.0, gens = 0.0;
  for (const Verdict& v : verdicts) {
    conv += v.converged;
    mono += v.monotone;
    conv_mono += v.converged && v.monotone;
    s.extinct += v.extinct;
    lperf += v.final_lperf;
    gens += static_cast<double>(v.generations_used);
  }
  const double runs = static_cast<double>(s.runs);
  s.converged_fraction = static_cast<double>(conv) / runs;
  s.monotone_fraction = static_cast<double>(mono) / runs;
  s.converged_monotone_fraction = conv == 0 ? 1.0 : static_cast<double>(conv_mono) / static_cast<double>(conv);
  s.mean_final_lperf = lperf / runs;
  s.mean_generations = gens / runs;
  return s;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("EVOLVESIM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("EVOLVESIM_WORKERS", "expected a positive integer");
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunBundle run_experiment(const ExperimentConfig& config, bool write_files) {
  if (config.experiment != "evolve") throw ConfigError("experiment", "run_experiment handles 'evolve' only");
  const Halfspace target = make_target(config.target, config.n);
  const LabeledDistribution task(target, make_distribution(config.distribution, config.n));
  const BoundedLinearRep r0 = make_start(config.start, target);

  std::vector<Loss> schedule;
  if (config.schedule.empty()) {
    schedule.push_back(make_loss(config.loss));
  } else {
    for (const LossSpec& s : config.schedule) schedule.push_back(make_loss(s));
  }

  RunBundle bundle;
  bundle.gamma = config.gamma.value_or(std::min(1.0, margin(target, task.dist())));
  LossRegime regime;
  if (config.schedule.empty()) {
    // An uncertified loss runs under the quadratic parameters with its verdict flagged.
    regime = regime_for(schedule.front()).value_or(LossRegime::quadratic_loss());
  } else {
    regime = LossRegime::well_behaved(common_bounds(schedule));
    if (std::all_of(schedule.begin(), schedule.end(), [](const Loss& l) { return l.quadratic_equivalent(); }))
      regime = LossRegime::quadratic_loss();
  }
  bundle.params = derive_params(config.n, config.epsilon, bundle.gamma, regime, config.budget);

  const EvolveOptions options{config.fitness, config.pool, config.stop_on_convergence};
  bundle.runs.resize(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < config.seeds.size();) {
      try {
        const std::uint64_t seed = config.seeds[i];
        bundle.runs[i] = config.schedule.empty()
                             ? evolve(task, bundle.params, schedule.front(), r0, seed, options)
                             : loss_schedule_evolve(task, bundle.params, schedule, r0, seed, options);
        if (write_files) {
          fs::create_directories(config.output_dir);
          std::ofstream csv(config.output_dir / ("trajectory_" + std::to_string(seed) + ".csv"), std::ios::binary);
          write_trajectory_csv(csv, bundle.runs[i]);
          std::ofstream vj(config.output_dir / ("verdict_" + std::to_string(seed) + ".json"), std::ios::binary);
          vj << verdict_json(bundle.runs[i].verdict) << '\n';
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(worker_count(), config.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Verdict> verdicts;
  for (const Trajectory& t : bundle.runs) verdicts.push_back(t.verdict);
  bundle.summary = summarize(verdicts);
  if (write_files) {
    fs::create_directories(config.output_dir);
    std::ofstream out(config.output_dir / "summary.json", std::ios::binary);
    out << summary_json(bundle) << '\n';
  }
  return bundle;
}

std::string summary_json(const RunBundle& b) {
  const Summary& s = b.summary;
  const EvolutionParams& p = b.params;
  nlohmann::ordered_json j;
  j["runs"] = s.runs;
  j["converged_fraction"] = s.converged_fraction;
  j["monotone_fraction"] = s.monotone_fraction;
  j["converged_monotone_fraction"] = s.converged_monotone_fraction;
  j["mean_final_lperf"] = s.mean_final_lperf;
  j["mean_generations"] = s.mean_generations;
  j["extinct"] = s.extinct;
  j["params"] = {{"gamma", b.gamma},
                 {"alpha", p.alpha},
                 {"step_gain", p.step_gain},
                 {"tolerance", p.selection.tolerance},
                 {"pool", p.selection.pool},
                 {"samples", p.selection.samples},
                 {"generations", p.generations},
                 {"alpha_levels", p.alpha_spec.alpha_levels()}};
  j["budget"] = {{"requested", p.budget.requested},
                 {"granted", p.budget.granted},
                 {"capped", p.budget.capped},
                 {"shrink_exponent", p.budget.shrink_exponent},
                 {"derived_samples", p.budget.derived_samples},
                 {"derived_generations", p.budget.derived_generations}};
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const Trajectory& t : b.runs) seeds.push_back(t.verdict.seed);
  j["seeds"] = std::move(seeds);
  return j.dump(2);
}

}  // namespace evolvesim
