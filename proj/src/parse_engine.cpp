#include "btembed/parse_engine.hpp"

#include <cmath>
#include <string>

#include "btembed/error.hpp"

namespace bt {

namespace {

void require_fingerprint(const BTVector& v, const RuleSet& rules) {
  if (v.fingerprint != rules.fingerprint ||
      v.dim() != rules.next_mat.rows()) {
    throw Error(ErrorKind::SchemaMismatch,
                "input vector does not match the rule set's embedding");
  }
}

}  // namespace

std::size_t pattern_arity(const BTVector& p) {
  return static_cast<std::size_t>(std::llround(p.data.squaredNorm()));
}

double window_score(const Rule& rule, const ParseState& state, std::size_t j,
                    const RuleSet& rules) {
  const std::size_t m = rule.arity;
  // x = x_j + A_next (x_{j+1} + A_next (... x_{j+m-1}))
  Eigen::VectorXd x = state.slots[j + m - 1].data;
  for (std::size_t k = m - 1; k-- > 0;) {
    x = state.slots[j + k].data + rules.next_mat * x;
  }
  return rule.pattern.data.dot(x);
}

bool match_window(const Rule& rule, const ParseState& state, std::size_t j,
                  const RuleSet& rules) {
  if (rule.arity == 0 || j + rule.arity > state.slots.size()) return false;
  return window_score(rule, state, j, rules) >
         static_cast<double>(rule.arity) - 0.5;
}

ParseState apply_replacement(const Rule& rule, const ParseState& state,
                             std::size_t j, const RuleSet& rules) {
  const std::size_t m = rule.arity;
  Eigen::VectorXd merged = rule.replacement.data;
  for (std::size_t k = 0; k < m; ++k) {
    merged.noalias() += rules.arg_mats[k] * state.slots[j + k].data;
  }

  ParseState next;
  next.steps = state.steps + 1;
  next.slots.reserve(state.slots.size() - m + 1);
  next.slots.insert(next.slots.end(), state.slots.begin(),
                    state.slots.begin() + static_cast<std::ptrdiff_t>(j));
  next.slots.push_back({std::move(merged), rules.fingerprint});
  next.slots.insert(next.slots.end(),
                    state.slots.begin() + static_cast<std::ptrdiff_t>(j + m),
                    state.slots.end());
  return next;
}

std::size_t default_max_steps(std::size_t input_length) {
  return 4 * input_length * input_length;
}

ParseResult parse_vectors(std::vector<BTVector> inputs, const RuleSet& rules,
                          std::size_t max_steps) {
  if (inputs.empty()) {
    throw Error(ErrorKind::NoParse, "empty input");
  }
  for (const auto& v : inputs) require_fingerprint(v, rules);
  for (const auto& r : rules.rules) {
    if (r.arity > rules.arg_mats.size()) {
      throw Error(ErrorKind::ArityExceeded,
                  "rule arity " + std::to_string(r.arity) + " needs more arg "
                  "attributes than the rule set carries");
    }
  }

  ParseState state{std::move(inputs), 0};
  std::vector<ParseTraceStep> trace;
  for (;;) {
    bool applied = false;
    for (std::size_t i = 0; i < rules.rules.size() && !applied; ++i) {
      const Rule& rule = rules.rules[i];
      for (std::size_t j = 0; j + rule.arity <= state.slots.size(); ++j) {
        if (!match_window(rule, state, j, rules)) continue;
        if (state.steps >= max_steps) {
          throw Error(ErrorKind::StepBudgetExceeded,
                      "parse exceeded " + std::to_string(max_steps) + " steps");
        }
        state = apply_replacement(rule, state, j, rules);
        trace.push_back({i, j, state.slots.size()});
        applied = true;
        break;
      }
    }
    if (!applied) break;
  }

  if (state.slots.size() != 1) {
    throw Error(ErrorKind::NoParse,
                std::to_string(state.slots.size()) +
                    " slots remain and no rule matches");
  }
  return {std::move(state.slots.front()), state.steps, std::move(trace)};
}

bool parse_engine_isolated() {
#ifdef BT_FORBID_EMBEDDING
  return true;
#else
  return false;
#endif
}

}  // namespace bt
