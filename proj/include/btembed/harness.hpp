#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "btembed/core.hpp"
#include "btembed/parse.hpp"
#include "btembed/rng.hpp"

namespace bt {

enum class SweepKind { Lists, Trees, Parse };

std::string_view to_string(SweepKind kind);
std::optional<SweepKind> sweep_kind_from_string(std::string_view name);

struct SweepSpec {
  SweepKind kind = SweepKind::Trees;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> sizes;  // nodes, list length, or string length
  std::size_t trials = 50;
  std::uint64_t seed = 42;
  std::size_t tokens = 100;  // content tokens (lists and trees)
  std::size_t attrs = 4;     // trees only; lists always use one attribute
  bool timing = false;       // fill wall_time_ms; otherwise it is 0
};

struct CellResult {
  std::size_t d = 0;
  std::size_t l = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double wall_time_ms = 0.0;
};

/// Rows come back in (dims order, sizes order) regardless of spec kind.
std::vector<CellResult> run_sweep(const SweepSpec& spec);
std::vector<CellResult> run_list_sweep(const SweepSpec& spec);
std::vector<CellResult> run_tree_sweep(const SweepSpec& spec);
std::vector<CellResult> run_parse_sweep(const SweepSpec& spec);

void write_csv(std::ostream& out, SweepKind kind,
               const std::vector<CellResult>& cells);

/// Per size, the smallest swept d whose rate, and the rate of every larger
/// swept d, is at least `rate`.
std::map<std::size_t, std::optional<std::size_t>> fit_boundaries(
    const std::vector<CellResult>& cells, double rate = 0.99);

/// Binary search over d in {d_lo, d_lo + step, ..., d_hi} for the smallest
/// dimension reaching `rate` at size `l`; assumes monotone success.
std::optional<std::size_t> estimate_boundary(const SweepSpec& base,
                                             std::size_t l, std::size_t d_lo,
                                             std::size_t d_hi,
                                             std::size_t step,
                                             double rate = 0.99);

// Trial-level seeds: derive_seed(base, {kind, d, l, trial}).
std::uint64_t trial_seed(const SweepSpec& spec, std::size_t d, std::size_t l,
                         std::size_t trial);

/// Grows a tree of exactly `nodes` nodes by picking uniform (node, unused
/// attribute) slots; labels uniform over tokens [0, label_tokens).
Tree random_tree(std::size_t nodes, std::size_t label_tokens,
                 std::size_t attrs, Rng& rng);

/// Uniform Dyck word of `length` (even) symbols via the cycle lemma:
/// true = open, false = close.
std::vector<bool> random_dyck(std::size_t length, Rng& rng);

/// Tokens L, R, E plus next, arg1, arg2, arg3 as attributes.
Schema balanced_parens_schema();
/// LR -> E, LER -> E, E E -> E, in that order.
Grammar balanced_parens_grammar(const Schema& s);
std::vector<TokenId> dyck_tokens(const std::vector<bool>& word, const Schema& s);

/// Symbol-level rewriting with the same scan policy as the vector parser.
/// Returns the final sentential form (one tree on success).
/// Throws StepBudgetExceeded like parse_vectors.
std::vector<Tree> symbolic_parse(std::span<const TokenId> inputs,
                                 const Grammar& grammar,
                                 std::span<const AttrId> arg_attrs,
                                 std::size_t max_steps);

struct SeparationReport {
  std::size_t d = 0;
  std::size_t depth = 0;
  std::size_t samples = 0;
  std::size_t pairs = 0;
  double max_abs_ip = 0.0;
  double mean_abs_ip = 0.0;
  double p50 = 0.0, p90 = 0.0, p99 = 0.0;
  double jl_bound = 0.0;       // 4 sqrt(log n / d)
  double doubled_bound = 0.0;  // sqrt(32 log n / d)
  std::size_t violations = 0;  // pairs above jl_bound
};

/// Samples distinct (token, word) pairs, word length uniform in [0, depth]
/// over the attribute matrices, and measures pairwise |inner product|.
SeparationReport run_separation_probe(std::size_t d, std::size_t depth,
                                      std::size_t tokens, std::size_t attrs,
                                      std::size_t samples, std::uint64_t seed);

void write_separation_csv(std::ostream& out, const SeparationReport& r);

}  // namespace bt
