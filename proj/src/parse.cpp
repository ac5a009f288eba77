#include "btembed/parse.hpp"

#include <fstream>
#include <sstream>

#include "btembed/error.hpp"

namespace bt {

RuleSet compile_rules(const Grammar& grammar, const Embedding& e, AttrId next,
                      std::span<const AttrId> arg_attrs) {
  const Schema& s = e.schema();
  if (!s.valid(next)) {
    throw Error(ErrorKind::SchemaMismatch, "next attribute outside schema");
  }
  RuleSet rules;
  rules.fingerprint = e.fingerprint();
  rules.next_mat = e.attr(next);
  for (AttrId a : arg_attrs) {
    if (!s.valid(a)) {
      throw Error(ErrorKind::SchemaMismatch, "arg attribute outside schema");
    }
    rules.arg_mats.push_back(e.attr(a));
  }
  for (const auto& prod : grammar) {
    if (prod.pattern.empty()) {
      throw Error(ErrorKind::InvalidSpec, "empty rule pattern");
    }
    if (prod.pattern.size() > arg_attrs.size()) {
      throw Error(ErrorKind::ArityExceeded,
                  "pattern of length " + std::to_string(prod.pattern.size()) +
                      " but only " + std::to_string(arg_attrs.size()) +
                      " arg attributes");
    }
    if (!s.valid(prod.replacement)) {
      throw Error(ErrorKind::SchemaMismatch, "replacement token outside schema");
    }
    Rule r;
    r.pattern = encode_list(prod.pattern, e, next);
    r.replacement = {e.token(prod.replacement).transpose(), e.fingerprint()};
    r.arity = prod.pattern.size();
    rules.rules.push_back(std::move(r));
  }
  return rules;
}

ParseResult parse(std::span<const TokenId> inputs, const RuleSet& rules,
                  const Embedding& e, std::size_t max_steps) {
  if (rules.fingerprint != e.fingerprint()) {
    throw Error(ErrorKind::SchemaMismatch,
                "rule set was compiled against another embedding");
  }
  std::vector<BTVector> encoded;
  encoded.reserve(inputs.size());
  for (TokenId t : inputs) {
    if (!e.schema().valid(t)) {
      throw Error(ErrorKind::SchemaMismatch, "input token outside schema");
    }
    encoded.push_back({e.token(t).transpose(), e.fingerprint()});
  }
  return parse_vectors(std::move(encoded), rules, max_steps);
}

namespace {

TokenId token_named(const Schema& s, const std::string& name) {
  auto t = s.find_token(name);
  if (!t) throw Error(ErrorKind::SchemaMismatch, "unknown token '" + name + "'");
  return *t;
}

}  // namespace

Grammar grammar_from_json(const nlohmann::json& j, const Schema& s) {
  if (!j.is_array()) throw Error(ErrorKind::Format, "rules file must be a list");
  Grammar g;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("pattern") ||
        !item.contains("replacement")) {
      throw Error(ErrorKind::Format,
                  "each rule needs a pattern and a replacement");
    }
    Production p;
    try {
      for (const auto& name : item["pattern"].get<std::vector<std::string>>()) {
        p.pattern.push_back(token_named(s, name));
      }
      p.replacement = token_named(s, item["replacement"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, e.what());
    }
    g.push_back(std::move(p));
  }
  return g;
}

Grammar load_grammar(const std::string& file, const Schema& s) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file);
  try {
    return grammar_from_json(nlohmann::json::parse(in), s);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Format, file + ": " + e.what());
  }
}

std::vector<TokenId> parse_token_string(std::string_view text,
                                        const Schema& s) {
  std::istringstream in{std::string(text)};
  std::vector<TokenId> out;
  std::string name;
  while (in >> name) out.push_back(token_named(s, name));
  return out;
}

std::vector<AttrId> arg_attributes(const Schema& s) {
  std::vector<AttrId> out;
  for (std::size_t k = 1;; ++k) {
    auto a = s.find_attribute("arg" + std::to_string(k));
    if (!a) break;
    out.push_back(*a);
  }
  return out;
}

}  // namespace bt
