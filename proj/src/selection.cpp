#include "evolvesim/selection.hpp"

#include <cmath>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "evolvesim/errors.hpp"

namespace evolvesim {

void SelectionParams::validate() const {
  if (!(tolerance > 0.0 && tolerance < 2.0)) throw InputDomainError("selection tolerance must lie in (0, 2)");
  if (pool < 1) throw InputDomainError("selection pool size must be >= 1");
  if (samples < 1) throw InputDomainError("selection sample size must be >= 1");
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::beneficial: return "beneficial";
    case Classification::neutral: return "neutral";
    case Classification::deleterious: return "deleterious";
  }
  return "?";
}

const char* to_string(SelectionCase c) {
  switch (c) {
    case SelectionCase::beneficial: return "beneficial";
    case SelectionCase::neutral: return "neutral";
    case SelectionCase::extinct: return "extinct";
  }
  return "?";
}

Classification classify(double v_r, double v_cand, double t) {
  // |v_cand - v_r| < t written against the two thresholds, so both boundaries
  // round the same way.
  if (v_cand >= v_r + t) return Classification::beneficial;
  if (v_cand > v_r - t) return Classification::neutral;
  return Classification::deleterious;
}

std::string SelectionOutcome::to_json() const {
  nlohmann::json j;
  j["case"] = to_string(kind);
  j["v_current"] = v_current;
  j["bene_count"] = bene_count;
  j["neut_count"] = neut_count;
  j["draws"] = draws;
  nlohmann::json cands = nlohmann::json::array();
  for (const PoolEntry& e : pool) {
    cands.push_back({{"coord", e.candidate.step.coord},
                     {"sign", e.candidate.step.sign},
                     {"alpha", e.candidate.step.alpha},
                     {"count", e.count},
                     {"pr_z", draws ? static_cast<double>(e.count) / static_cast<double>(draws) : 0.0},
                     {"value", e.value},
                     {"class", to_string(e.cls)}});
  }
  j["candidates"] = std::move(cands);
  return j.dump();
}

FitnessFn empirical_fitness(const LabeledDistribution& task, const Loss& loss, std::size_t samples) {
  return [&task, &loss, samples](const Hypothesis& r, Stream& stream) {
    return lperf_empirical(task, r, loss, samples, stream);
  };
}

FitnessFn exact_fitness(const LabeledDistribution& task, const Loss& loss) {
  return [&task, &loss](const Hypothesis& r, Stream&) { return lperf_true(task, r, loss); };
}

SelectionOutcome select_from_pool(double v_current, std::vector<PoolEntry> pool, double tolerance,
                                  Stream& choice_stream) {
  SelectionOutcome out;
  out.v_current = v_current;
  std::uint64_t bene_weight = 0, neut_weight = 0;
  for (PoolEntry& e : pool) {
    out.draws += e.count;
    e.cls = classify(v_current, e.value, tolerance);
    if (e.cls == Classification::beneficial) {
      ++out.bene_count;
      bene_weight += e.count;
    } else if (e.cls == Classification::neutral) {
      ++out.neut_count;
      neut_weight += e.count;
    }
  }

  Classification wanted;
  std::uint64_t weight;
  if (bene_weight > 0) {
    out.kind = SelectionCase::beneficial;
    wanted = Classification::beneficial;
    weight = bene_weight;
  } else if (neut_weight > 0) {
    out.kind = SelectionCase::neutral;
    wanted = Classification::neutral;
    weight = neut_weight;
  } else {
    out.kind = SelectionCase::extinct;
    out.pool = std::move(pool);
    return out;
  }

  // Pr_Z(r1) / sum over the chosen class of Pr_Z.
  std::uint64_t ticket = choice_stream.below(weight);
  for (const PoolEntry& e : pool) {
    if (e.cls != wanted) continue;
    if (ticket < e.count) {
      out.result = e.candidate;
      break;
    }
    ticket -= e.count;
  }
  out.pool = std::move(pool);
  return out;
}

SelectionOutcome sel_nb(const Mutator& mutator, const Hypothesis& current, const SelectionParams& params,
                        const FitnessFn& fitness, std::uint64_t master, std::uint64_t step, PoolMode mode) {
  params.validate();
  if (current.dim() != mutator.dim()) throw DimensionMismatch(mutator.dim(), current.dim());

  std::vector<PoolEntry> pool;
  std::vector<std::size_t> slot(mutator.neighborhood_size(), SIZE_MAX);
  auto add = [&](std::size_t index) {
    if (slot[index] == SIZE_MAX) {
      slot[index] = pool.size();
      const MutationStep ms = mutator.step_at(index);
      pool.push_back(PoolEntry{Candidate{apply_step(current, ms), ms}, 0, 0.0, Classification::deleterious});
    }
    ++pool[slot[index]].count;
  };
  if (mode == PoolMode::enumerated) {
    for (std::size_t i = 0; i < mutator.neighborhood_size(); ++i) add(i);
  } else {
    Stream mutation_stream(master, {step, kSlotMutation});
    for (std::size_t i = 0; i < params.pool; ++i) add(mutator.draw_index(mutation_stream));
  }

  Stream current_stream(master, {step, kSlotCandidate});
  const double v_current = fitness(current, current_stream);
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (pool[j].candidate.step.stay()) {
      pool[j].value = v_current;
      continue;
    }
    Stream s(master, {step, kSlotCandidate + 1 + j});
    pool[j].value = fitness(pool[j].candidate.rep, s);
  }

  Stream choice_stream(master, {step, kSlotChoice});
  return select_from_pool(v_current, std::move(pool), params.tolerance, choice_stream);
}

}  // namespace evolvesim
