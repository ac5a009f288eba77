#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace bt {

enum class TokenId : std::uint32_t {};
enum class AttrId : std::uint32_t {};

constexpr std::size_t index(TokenId t) { return static_cast<std::size_t>(t); }
constexpr std::size_t index(AttrId a) { return static_cast<std::size_t>(a); }

/// Root-first sequence of edge labels. Empty denotes the root.
using Path = std::vector<AttrId>;

/// Unvalidated schema contents, as read from a file or assembled by hand.
struct SchemaDescription {
  std::vector<std::string> tokens;
  std::vector<std::string> attributes;
};

/// A reflexive schema: distinct token names, distinct attribute names, and
/// every attribute also present as a token. Only obtainable through
/// validate_schema.
class Schema {
 public:
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& attributes() const { return attributes_; }
  std::size_t token_count() const { return tokens_.size(); }
  std::size_t attribute_count() const { return attributes_.size(); }

  std::optional<TokenId> find_token(std::string_view name) const;
  std::optional<AttrId> find_attribute(std::string_view name) const;

  /// Token carrying the same name as the attribute.
  TokenId token_of(AttrId a) const { return attr_tokens_.at(index(a)); }

  const std::string& name(TokenId t) const { return tokens_.at(index(t)); }
  const std::string& name(AttrId a) const { return attributes_.at(index(a)); }

  bool valid(TokenId t) const { return index(t) < tokens_.size(); }
  bool valid(AttrId a) const { return index(a) < attributes_.size(); }

  /// 64-bit FNV-1a over the ordered names.
  std::uint64_t hash() const;

  friend bool operator==(const Schema& a, const Schema& b) {
    return a.tokens_ == b.tokens_ && a.attributes_ == b.attributes_;
  }

 private:
  friend Schema validate_schema(SchemaDescription raw);
  Schema() = default;

  std::vector<std::string> tokens_;
  std::vector<std::string> attributes_;
  std::vector<TokenId> attr_tokens_;
};

Schema validate_schema(SchemaDescription raw);

/// Schema with tokens t0..t{n-1} followed by the attribute tokens
/// next, arg1, ..., arg{attrs-1}.
Schema generated_schema(std::size_t tokens, std::size_t attrs);

/// Finite rooted tree with token labels and attribute-labelled edges. At most
/// one child per attribute; children are kept sorted by attribute index.
class Tree {
 public:
  using Child = std::pair<AttrId, Tree>;

  explicit Tree(TokenId label) : label_(label) {}
  Tree(TokenId label, std::vector<Child> children);

  TokenId label() const { return label_; }
  std::span<const Child> children() const { return children_; }
  const Tree* child(AttrId a) const;

  /// New tree with `subtree` hung under attribute `a` of the node at `at`.
  /// Throws InvalidTree if `at` does not exist or the slot is taken.
  Tree attached(const Path& at, AttrId a, Tree subtree) const;

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  TokenId label_;
  std::vector<Child> children_;
};

std::size_t node_count(const Tree& t);
std::size_t depth(const Tree& t);
std::optional<TokenId> node_at(const Tree& t, const Path& p);

/// Every node paired with its path, depth-first with attributes in order.
std::vector<std::pair<Path, TokenId>> enumerate_nodes(const Tree& t);

/// Throws SchemaMismatch when any label or edge index is out of range.
void check_bound(const Tree& t, const Schema& s);

// Serialization boundary: names appear only here.
nlohmann::ordered_json schema_to_json(const Schema& s);
Schema schema_from_json(const nlohmann::json& j);
nlohmann::ordered_json tree_to_json(const Tree& t, const Schema& s);
Tree tree_from_json(const nlohmann::json& j, const Schema& s);
Path parse_path(std::string_view csv, const Schema& s);
std::string format_path(const Path& p, const Schema& s);

Schema load_schema(const std::string& file);
void save_schema(const Schema& s, const std::string& file);
Tree load_tree(const std::string& file, const Schema& s);
void save_tree(const Tree& t, const Schema& s, const std::string& file);

}  // namespace bt
