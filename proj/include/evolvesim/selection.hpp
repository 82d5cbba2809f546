#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evolvesim/domain.hpp"
#include "evolvesim/loss.hpp"
#include "evolvesim/mutation.hpp"
#include "evolvesim/rng.hpp"

namespace evolvesim {

/// Tolerance t in (0, 2), pool size p >= 1, sample size s >= 1.
struct SelectionParams {
  double tolerance = 0.0;
  std::size_t pool = 1;
  std::size_t samples = 1;

  void validate() const;
};

enum class Classification { beneficial, neutral, deleterious };
enum class SelectionCase { beneficial, neutral, extinct };

const char* to_string(Classification c);
const char* to_string(SelectionCase c);

/// beneficial iff v_cand >= v_r + t; neutral iff |v_cand - v_r| < t.
Classification classify(double v_r, double v_cand, double t);

/// One distinct member of the pool Z.
struct PoolEntry {
  Candidate candidate;
  std::size_t count = 0;  // multiplicity among the p draws
  double value = 0.0;     // v(r')
  Classification cls = Classification::deleterious;
};

struct SelectionOutcome {
  std::optional<Candidate> result;  // empty means bottom
  SelectionCase kind = SelectionCase::extinct;
  double v_current = 0.0;
  std::vector<PoolEntry> pool;
  std::size_t bene_count = 0;  // distinct members of Bene(Z)
  std::size_t neut_count = 0;
  std::size_t draws = 0;       // p

  /// Diagnostics as one JSON object (v(r), candidates with values and Pr_Z).
  std::string to_json() const;
};

/// Fitness used by selection: v(r') given the candidate's own substream.
using FitnessFn = std::function<double(const Hypothesis&, Stream&)>;

/// Empirical LPerf on `samples` fresh points per evaluation.
FitnessFn empirical_fitness(const LabeledDistribution& task, const Loss& loss, std::size_t samples);
/// Test hook: exact LPerf, ignores the stream.
FitnessFn exact_fitness(const LabeledDistribution& task, const Loss& loss);

/// Source of the multiset Z.
enum class PoolMode {
  sampled,    // p independent draws of the mutator
  enumerated  // test hook: every neighbor exactly once
};

/// Case analysis on already-evaluated pool members: classify each entry, then
/// draw frequency-weighted from Bene, else from Neut, else bottom. Only the
/// entries' count and value are read; cls and the counters are filled in.
SelectionOutcome select_from_pool(double v_current, std::vector<PoolEntry> pool, double tolerance,
                                  Stream& choice_stream);

/// SelNB[L, t, p, s] for one step. Pool members are identified by their
/// neighborhood position; stay-put is the current representation and shares
/// v(r). Streams are derived from (master, step): kSlotMutation for the pool,
/// kSlotCandidate for v(r), kSlotCandidate + 1 + j for distinct member j in
/// first-draw order, kSlotChoice for the survivor draw.
SelectionOutcome sel_nb(const Mutator& mutator, const Hypothesis& current, const SelectionParams& params,
                        const FitnessFn& fitness, std::uint64_t master, std::uint64_t step,
                        PoolMode mode = PoolMode::sampled);

}  // namespace evolvesim
