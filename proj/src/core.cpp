#include "btembed/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "btembed/error.hpp"

namespace bt {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

void require_distinct(const std::vector<std::string>& names,
                      std::string_view what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw Error(ErrorKind::DuplicateName,
                  std::string(what) + " '" + n + "' listed twice");
    }
  }
}

template <typename Id>
std::optional<Id> find_name(const std::vector<std::string>& names,
                            std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<Id>(it - names.begin());
}

}  // namespace

std::optional<TokenId> Schema::find_token(std::string_view name) const {
  return find_name<TokenId>(tokens_, name);
}

std::optional<AttrId> Schema::find_attribute(std::string_view name) const {
  return find_name<AttrId>(attributes_, name);
}

std::uint64_t Schema::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens_) {
    fnv_mix(h, t);
    fnv_mix(h, std::string_view("\0", 1));
  }
  fnv_mix(h, std::string_view("\x1e", 1));
  for (const auto& a : attributes_) {
    fnv_mix(h, a);
    fnv_mix(h, std::string_view("\0", 1));
  }
  return h;
}

Schema validate_schema(SchemaDescription raw) {
  if (raw.tokens.empty() || raw.attributes.empty()) {
    throw Error(ErrorKind::EmptyAlphabet,
                "schema needs at least one token and one attribute");
  }
  require_distinct(raw.tokens, "token");
  require_distinct(raw.attributes, "attribute");

  Schema s;
  s.tokens_ = std::move(raw.tokens);
  s.attributes_ = std::move(raw.attributes);
  for (const auto& a : s.attributes_) {
    auto t = s.find_token(a);
    if (!t) {
      throw Error(ErrorKind::NonReflexive,
                  "attribute '" + a + "' is not a token");
    }
    s.attr_tokens_.push_back(*t);
  }
  return s;
}

Schema generated_schema(std::size_t tokens, std::size_t attrs) {
  SchemaDescription raw;
  for (std::size_t i = 0; i < tokens; ++i) {
    raw.tokens.push_back("t" + std::to_string(i));
  }
  for (std::size_t i = 0; i < attrs; ++i) {
    raw.attributes.push_back(i == 0 ? "next" : "arg" + std::to_string(i));
  }
  raw.tokens.insert(raw.tokens.end(), raw.attributes.begin(),
                    raw.attributes.end());
  return validate_schema(std::move(raw));
}

// ---------------------------------------------------------------------------
// Tree

Tree::Tree(TokenId label, std::vector<Child> children)
    : label_(label), children_(std::move(children)) {
  std::sort(children_.begin(), children_.end(),
            [](const Child& a, const Child& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < children_.size(); ++i) {
    if (children_[i].first == children_[i - 1].first) {
      throw Error(ErrorKind::InvalidTree,
                  "two children under attribute index " +
                      std::to_string(index(children_[i].first)));
    }
  }
}

const Tree* Tree::child(AttrId a) const {
  for (const auto& [attr, sub] : children_) {
    if (attr == a) return &sub;
  }
  return nullptr;
}

Tree Tree::attached(const Path& at, AttrId a, Tree subtree) const {
  if (at.empty()) {
    if (child(a)) {
      throw Error(ErrorKind::InvalidTree, "attachment slot already occupied");
    }
    auto kids = children_;
    kids.emplace_back(a, std::move(subtree));
    return Tree(label_, std::move(kids));
  }
  auto kids = children_;
  for (auto& [attr, sub] : kids) {
    if (attr == at.front()) {
      Path rest(at.begin() + 1, at.end());
      sub = sub.attached(rest, a, std::move(subtree));
      return Tree(label_, std::move(kids));
    }
  }
  throw Error(ErrorKind::InvalidTree, "attachment path does not exist");
}

std::size_t node_count(const Tree& t) {
  std::size_t n = 1;
  for (const auto& c : t.children()) n += node_count(c.second);
  return n;
}

std::size_t depth(const Tree& t) {
  std::size_t d = 0;
  for (const auto& c : t.children()) d = std::max(d, 1 + depth(c.second));
  return d;
}

std::optional<TokenId> node_at(const Tree& t, const Path& p) {
  const Tree* cur = &t;
  for (AttrId a : p) {
    cur = cur->child(a);
    if (!cur) return std::nullopt;
  }
  return cur->label();
}

namespace {

void enumerate_into(const Tree& t, Path& prefix,
                    std::vector<std::pair<Path, TokenId>>& out) {
  out.emplace_back(prefix, t.label());
  for (const auto& [a, sub] : t.children()) {
    prefix.push_back(a);
    enumerate_into(sub, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<std::pair<Path, TokenId>> enumerate_nodes(const Tree& t) {
  std::vector<std::pair<Path, TokenId>> out;
  Path prefix;
  enumerate_into(t, prefix, out);
  return out;
}

void check_bound(const Tree& t, const Schema& s) {
  if (!s.valid(t.label())) {
    throw Error(ErrorKind::SchemaMismatch,
                "token index " + std::to_string(index(t.label())) +
                    " outside schema");
  }
  for (const auto& [a, sub] : t.children()) {
    if (!s.valid(a)) {
      throw Error(ErrorKind::SchemaMismatch,
                  "attribute index " + std::to_string(index(a)) +
                      " outside schema");
    }
    check_bound(sub, s);
  }
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json schema_to_json(const Schema& s) {
  nlohmann::ordered_json j;
  j["tokens"] = s.tokens();
  j["attributes"] = s.attributes();
  return j;
}

Schema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tokens") || !j.contains("attributes")) {
    throw Error(ErrorKind::Format,
                "schema must be an object with tokens and attributes");
  }
  SchemaDescription raw;
  try {
    raw.tokens = j.at("tokens").get<std::vector<std::string>>();
    raw.attributes = j.at("attributes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, e.what());
  }
  return validate_schema(std::move(raw));
}

nlohmann::ordered_json tree_to_json(const Tree& t, const Schema& s) {
  nlohmann::ordered_json j;
  j["label"] = s.name(t.label());
  nlohmann::ordered_json kids = nlohmann::ordered_json::object();
  for (const auto& [a, sub] : t.children()) {
    kids[s.name(a)] = tree_to_json(sub, s);
  }
  j["children"] = std::move(kids);
  return j;
}

Tree tree_from_json(const nlohmann::json& j, const Schema& s) {
  if (!j.is_object() || !j.contains("label") || !j["label"].is_string()) {
    throw Error(ErrorKind::Format, "tree node needs a string label");
  }
  const auto label_name = j["label"].get<std::string>();
  auto label = s.find_token(label_name);
  if (!label) {
    throw Error(ErrorKind::SchemaMismatch, "unknown token '" + label_name + "'");
  }
  std::vector<Tree::Child> kids;
  if (j.contains("children")) {
    const auto& c = j["children"];
    if (!c.is_object()) {
      throw Error(ErrorKind::Format, "children must be an object");
    }
    for (const auto& [name, sub] : c.items()) {
      auto a = s.find_attribute(name);
      if (!a) {
        throw Error(ErrorKind::SchemaMismatch,
                    "unknown attribute '" + name + "'");
      }
      kids.emplace_back(*a, tree_from_json(sub, s));
    }
  }
  return Tree(*label, std::move(kids));
}

Path parse_path(std::string_view csv, const Schema& s) {
  Path p;
  if (csv.empty()) return p;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    auto name = csv.substr(start, end - start);
    auto a = s.find_attribute(name);
    if (!a) {
      throw Error(ErrorKind::SchemaMismatch,
                  "unknown attribute '" + std::string(name) + "'");
    }
    p.push_back(*a);
    start = end + 1;
  }
  return p;
}

std::string format_path(const Path& p, const Schema& s) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ',';
    out += s.name(p[i]);
  }
  return out;
}

namespace {

nlohmann::json read_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Format, file + ": " + e.what());
  }
}

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + file);
  out << text << '\n';
}

}  // namespace

Schema load_schema(const std::string& file) {
  return schema_from_json(read_json(file));
}

void save_schema(const Schema& s, const std::string& file) {
  write_text(file, schema_to_json(s).dump(2));
}

Tree load_tree(const std::string& file, const Schema& s) {
  return tree_from_json(read_json(file), s);
}

void save_tree(const Tree& t, const Schema& s, const std::string& file) {
  write_text(file, tree_to_json(t, s).dump(2));
}

}  // namespace bt
