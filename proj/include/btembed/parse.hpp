#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "btembed/embed.hpp"
#include "btembed/parse_engine.hpp"

namespace bt {

struct Production {
  std::vector<TokenId> pattern;
  TokenId replacement;
};

using Grammar = std::vector<Production>;

/// Encodes every pattern as a next-chained list and every replacement as a
/// single token vector; copies out A_next and A_arg_1..A_arg_m. Throws
/// ArityExceeded when a pattern is longer than `arg_attrs`.
RuleSet compile_rules(const Grammar& grammar, const Embedding& e, AttrId next,
                      std::span<const AttrId> arg_attrs);

/// Encodes each input token and runs the vector parser.
ParseResult parse(std::span<const TokenId> inputs, const RuleSet& rules,
                  const Embedding& e, std::size_t max_steps);

Grammar load_grammar(const std::string& file, const Schema& s);
Grammar grammar_from_json(const nlohmann::json& j, const Schema& s);

/// Whitespace-separated token names.
std::vector<TokenId> parse_token_string(std::string_view text, const Schema& s);

/// The distinguished arg attributes arg1..argN present in the schema, in
/// order, stopping at the first gap.
std::vector<AttrId> arg_attributes(const Schema& s);

}  // namespace bt
