// evolvesim command line.
//
//   evolvesim evolve -c config.json
//   evolvesim check-loss --family power --c 2
//   evolvesim neighborhood-audit --target f.json --dist d.json --rep r.json --epsilon 0.1
//   evolvesim csq-lab build-pair --n 12 --k 6 --set 1,2,3,4,5,6
//   evolvesim csq-lab greedy-sets --n 12 --k 6
//   evolvesim csq-lab audit --n 12 --k 6 --pairs greedy --queries 1000 --tau 0.05
//
// Exit status: 0 success, 1 failed check, 2 bad config or input, 3 resource ceiling.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evolvesim/csq_lab.hpp"
#include "evolvesim/errors.hpp"
#include "evolvesim/harness.hpp"
#include "evolvesim/loss.hpp"
#include "evolvesim/mutation.hpp"

using namespace evolvesim;
using nlohmann::ordered_json;

namespace {

int cmd_evolve(const std::string& config_path, bool quiet) {
  const ExperimentConfig config = load_config(config_path);
  const RunBundle bundle = run_experiment(config);
  if (!quiet) std::cout << summary_json(bundle) << '\n';
  return 0;
}

int cmd_check_loss(const LossSpec& spec, double grid_step) {
  const Loss loss = make_loss(spec);
  ordered_json j;
  j["loss"] = loss.name();
  const Verification v = verify_well_behaved(loss, grid_step);
  if (const auto* c = std::get_if<Certificate>(&v)) {
    j["certified"] = true;
    j["a"] = c->bounds.a;
    j["A"] = c->bounds.A;
    j["B"] = c->bounds.B;
    j["grid_step"] = c->grid_step;
  } else {
    const auto& bad = std::get<Violation>(v);
    j["certified"] = false;
    j["condition"] = bad.condition;
    j["witness_z"] = bad.witness_z;
    j["label"] = bad.label;
    j["detail"] = bad.detail;
  }
  const DerivativeAudit fd = finite_difference_audit(loss);
  j["derivative_audit"] = {{"max_d1_error", fd.max_d1_error}, {"max_d2_error", fd.max_d2_error}, {"worst_z", fd.worst_z}};
  std::cout << j.dump(2) << '\n';
  return std::holds_alternative<Certificate>(v) ? 0 : 1;
}

int cmd_neighborhood_audit(const std::string& target_path, const std::string& dist_path, const std::string& rep_path,
                           double epsilon, std::optional<double> gamma, const LossSpec& spec) {
  const Halfspace f = halfspace_from_json(read_json_file(target_path));
  const FiniteDistribution d = distribution_from_json(read_json_file(dist_path));
  const BoundedLinearRep r = rep_from_json(read_json_file(rep_path));
  const LabeledDistribution task(f, d);
  const double g = gamma.value_or(std::min(1.0, margin(f, d)));
  const Loss loss = make_loss(spec);

  NeighborhoodAudit audit;
  if (spec.family == "quadratic") {
    audit = audit_neighborhood(task, r, loss, quadratic_witness_bounds(), true, epsilon, g);
  } else {
    const Verification v = verify_well_behaved(loss);
    const auto* c = std::get_if<Certificate>(&v);
    if (!c) throw ConfigError("loss", "loss is not certified well-behaved: " + std::get<Violation>(v).detail);
    audit = audit_neighborhood(task, r, loss, c->bounds, false, epsilon, g);
  }
  std::cout << audit.to_json() << '\n';
  return audit.holds && audit.witness_holds ? 0 : 1;
}

std::vector<int> parse_set(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--set", "not an integer: '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

csq::IndexSet checked_set(const std::vector<int>& elems, std::size_t n, const std::string& field) {
  for (int e : elems)
    if (e < 1 || static_cast<std::size_t>(e) > n) throw ConfigError(field, "element " + std::to_string(e) + " outside [1.." + std::to_string(n) + "]");
  const csq::IndexSet S = csq::index_set(elems);
  if (csq::cardinality(S) != elems.size()) throw ConfigError(field, "repeated element");
  return S;
}

int cmd_build_pair(std::size_t n, std::size_t k, const std::string& set_text) {
  std::vector<int> elems;
  if (set_text.empty())
    for (std::size_t i = 1; i <= k; ++i) elems.push_back(static_cast<int>(i));
  else
    elems = parse_set(set_text);
  const csq::IndexSet S = checked_set(elems, n, "--set");
  const csq::ConjDistPair p = csq::build_pair(S, k);
  const csq::PairCheck c = csq::check_pair(p);
  ordered_json j;
  j["n"] = n;
  j["k"] = k;
  j["set"] = csq::elements(S);
  j["l1"] = p.l1;
  j["alpha_scale"] = p.alpha_scale;
  j["sign_margin"] = p.sign_margin;
  j["t"] = p.t;
  j["phi"] = p.phi;
  j["theta"] = p.theta;
  j["mass"] = p.mass;
  j["check"] = {{"bridge_error", c.bridge_error}, {"mass_error", c.mass_error}, {"min_ratio", c.min_ratio},
                {"max_ratio", c.max_ratio},       {"hidden_band", c.hidden_band}, {"ok", c.ok()}};
  std::cout << j.dump(2) << '\n';
  return c.ok() ? 0 : 1;
}

int cmd_greedy(std::size_t n, std::size_t k) {
  const std::vector<csq::IndexSet> sets = csq::greedy_disjoint_sets(n, k);
  ordered_json j;
  j["n"] = n;
  j["k"] = k;
  j["bound"] = csq::greedy_size_bound(n, k);
  j["size"] = sets.size();
  ordered_json list = ordered_json::array();
  for (csq::IndexSet S : sets) list.push_back(csq::elements(S));
  j["sets"] = std::move(list);
  std::cout << j.dump(2) << '\n';
  return 0;
}

std::vector<csq::IndexSet> load_pair_sets(const std::string& source, std::size_t n, std::size_t k) {
  if (source == "greedy") return csq::greedy_disjoint_sets(n, k);
  const nlohmann::json doc = read_json_file(source);
  const nlohmann::json& list = doc.is_object() && doc.contains("sets") ? doc.at("sets") : doc;
  if (!list.is_array()) throw ConfigError("--pairs", "expected a list of sets or {\"sets\": [...]}");
  std::vector<csq::IndexSet> out;
  for (const auto& s : list) {
    if (!s.is_array()) throw ConfigError("--pairs", "each set must be a list of integers");
    out.push_back(checked_set(s.get<std::vector<int>>(), n, "--pairs"));
  }
  return out;
}

int cmd_audit(std::size_t n, std::size_t k, const std::string& pairs_source, std::size_t queries, double tau,
              double epsilon, std::uint64_t seed, bool brief) {
  std::vector<csq::ConjDistPair> pairs;
  for (csq::IndexSet S : load_pair_sets(pairs_source, n, k)) pairs.push_back(csq::build_pair(S, k));
  const auto g = csq::audit_queries(n, pairs, queries, seed);
  const csq::AuditReport report = csq::distinguishing_audit(n, pairs, g, tau, epsilon);
  if (brief) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report.to_json());
    j.erase("queries");
    j["query_count"] = report.queries.size();
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << report.to_json() << '\n';
  }
  return report.ok() ? 0 : 1;
}

void add_loss_options(CLI::App* app, LossSpec& spec) {
  app->add_option("--family", spec.family, "power | quadratic | linear")
      ->check(CLI::IsMember({"power", "quadratic", "linear"}));
  app->add_option("--c", spec.c, "power exponent, c >= 2");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolvability simulator and CSQ laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* evolve_cmd = app.add_subcommand("evolve", "run a seeded batch from a JSON config");
  evolve_cmd->add_option("-c,--config", config_path, "config file")->required();
  evolve_cmd->add_flag("-q,--quiet", quiet, "do not print the summary");

  LossSpec check_spec;
  double grid_step = 1e-3;
  auto* check_cmd = app.add_subcommand("check-loss", "certify a loss as well-behaved");
  add_loss_options(check_cmd, check_spec);
  check_cmd->add_option("--grid-step", grid_step, "audit grid step in (0, 0.01]");

  std::string target_path, dist_path, rep_path;
  double epsilon = 0.1;
  std::optional<double> gamma;
  LossSpec audit_spec;
  audit_spec.family = "quadratic";
  auto* nb_cmd = app.add_subcommand("neighborhood-audit", "both sides of the beneficial-neighbor inequality");
  nb_cmd->add_option("--target", target_path, "halfspace JSON {w, theta}")->required()->check(CLI::ExistingFile);
  nb_cmd->add_option("--dist", dist_path, "distribution JSON {n, support, probs}")->required()->check(CLI::ExistingFile);
  nb_cmd->add_option("--rep", rep_path, "representation JSON {coeffs}")->required()->check(CLI::ExistingFile);
  nb_cmd->add_option("--epsilon", epsilon, "accuracy")->required();
  nb_cmd->add_option("--gamma", gamma, "margin (default: exact margin)");
  add_loss_options(nb_cmd, audit_spec);

  auto* csq_cmd = app.add_subcommand("csq-lab", "conjunction lower-bound construction");
  csq_cmd->require_subcommand(1);
  std::size_t n = 12, k = 6, queries = 1000;
  std::string set_text, pairs_source = "greedy";
  double tau = 0.05, csq_epsilon = 0.004;
  std::uint64_t seed = 1;
  bool brief = false;
  auto* bp_cmd = csq_cmd->add_subcommand("build-pair", "tables for one (t_S, D_S) pair");
  bp_cmd->add_option("--n", n)->required();
  bp_cmd->add_option("--k", k)->required();
  bp_cmd->add_option("--set", set_text, "comma-separated 1-based elements (default 1..k)");
  auto* gs_cmd = csq_cmd->add_subcommand("greedy-sets", "greedy family with pairwise overlap <= k/3");
  gs_cmd->add_option("--n", n)->required();
  gs_cmd->add_option("--k", k)->required();
  auto* au_cmd = csq_cmd->add_subcommand("audit", "distinguishing audit over a pair family");
  au_cmd->add_option("--n", n);
  au_cmd->add_option("--k", k);
  au_cmd->add_option("--pairs", pairs_source, "'greedy' or a JSON file of sets");
  au_cmd->add_option("--queries", queries, "random +-1 queries (one planted query per pair is added)");
  au_cmd->add_option("--tau", tau)->required();
  au_cmd->add_option("--epsilon", csq_epsilon, "closeness for the unique-closeness check");
  au_cmd->add_option("--seed", seed);
  au_cmd->add_flag("--brief", brief, "omit per-query records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*evolve_cmd) return cmd_evolve(config_path, quiet);
    if (*check_cmd) return cmd_check_loss(check_spec, grid_step);
    if (*nb_cmd) return cmd_neighborhood_audit(target_path, dist_path, rep_path, epsilon, gamma, audit_spec);
    if (*bp_cmd) return cmd_build_pair(n, k, set_text);
    if (*gs_cmd) return cmd_greedy(n, k);
    if (*au_cmd) return cmd_audit(n, k, pairs_source, queries, tau, csq_epsilon, seed, brief);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
