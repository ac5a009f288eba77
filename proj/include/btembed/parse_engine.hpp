#pragma once

// Vector-space bottom-up rewriting. Everything here works from encoded
// inputs, compiled rules and the next/arg attribute matrices alone; this
// header and its implementation never see the schema or the full embedding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "btembed/vector.hpp"

namespace bt {

struct Rule {
  BTVector pattern;      // next-chained list of the pattern tokens
  BTVector replacement;  // single replacement token
  std::size_t arity = 0;
};

struct RuleSet {
  std::vector<Rule> rules;
  Eigen::MatrixXd next_mat;
  std::vector<Eigen::MatrixXd> arg_mats;  // arg_1 .. arg_m
  std::uint64_t fingerprint = 0;
};

struct ParseState {
  std::vector<BTVector> slots;
  std::size_t steps = 0;
};

/// round(|p|^2)
std::size_t pattern_arity(const BTVector& p);

/// <p, sum_k A_next^{k-1} x_{j+k-1}> > m - 1/2 over the m slots starting
/// at j.
bool match_window(const Rule& rule, const ParseState& state, std::size_t j,
                  const RuleSet& rules);

/// Inner product the match test compares against m - 1/2.
double window_score(const Rule& rule, const ParseState& state, std::size_t j,
                    const RuleSet& rules);

/// Replaces slots j..j+m-1 with r + sum_k A_arg_k x_{j+k-1}.
ParseState apply_replacement(const Rule& rule, const ParseState& state,
                             std::size_t j, const RuleSet& rules);

struct ParseTraceStep {
  std::size_t rule;
  std::size_t position;
  std::size_t slots_after;
};

struct ParseResult {
  BTVector vector;
  std::size_t steps = 0;
  std::vector<ParseTraceStep> trace;
};

std::size_t default_max_steps(std::size_t input_length);

/// Rewrites until no rule matches. Rules are tried in order, windows left to
/// right; the first match is applied and the scan restarts. Throws NoParse
/// if more than one slot survives, StepBudgetExceeded when `max_steps`
/// replacements have been applied and a rule still matches.
ParseResult parse_vectors(std::vector<BTVector> inputs, const RuleSet& rules,
                          std::size_t max_steps);

/// True when this library was compiled without access to the embedding.
bool parse_engine_isolated();

}  // namespace bt
