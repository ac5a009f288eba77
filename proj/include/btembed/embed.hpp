#pragma once

#ifdef BT_FORBID_EMBEDDING
#error "this translation unit must not depend on the full embedding"
#endif

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "btembed/core.hpp"
#include "btembed/rng.hpp"
#include "btembed/vector.hpp"

namespace bt {

/// Random data for one schema: a unit vector per token and a Haar
/// orthogonal matrix per attribute. Immutable once built; the same
/// (schema, dim, seed) always reproduces the same bits.
class Embedding {
 public:
  const Schema& schema() const { return schema_; }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(dim_); }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// |T| x d; row i is the vector for token i.
  const Eigen::MatrixXd& token_matrix() const { return tokens_; }
  auto token(TokenId t) const { return tokens_.row(index(t)); }
  const Eigen::MatrixXd& attr(AttrId a) const { return attrs_.at(index(a)); }
  std::span<const Eigen::MatrixXd> attr_matrices() const { return attrs_; }

  BTVector zero() const { return BTVector::zero(dim(), fingerprint_); }

  /// Throws SchemaMismatch unless `v` came from this embedding.
  void check(const BTVector& v) const;

 private:
  friend Embedding make_embedding(const Schema&, std::size_t, std::uint64_t);
  friend Embedding load_embedding(const std::string&);
  Embedding(Schema schema, std::size_t dim, std::uint64_t seed);

  Schema schema_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::uint64_t fingerprint_;
  Eigen::MatrixXd tokens_;
  std::vector<Eigen::MatrixXd> attrs_;
};

std::uint64_t embedding_fingerprint(const Schema& s, std::size_t dim,
                                    std::uint64_t seed);

/// Token i draws from stream derive_seed(seed, {0, i}), attribute j from
/// derive_seed(seed, {1, j}); the streams are independent of each other
/// and of the schema size.
Embedding make_embedding(const Schema& s, std::size_t dim, std::uint64_t seed);

/// Haar-distributed element of O(d): QR of a standard Gaussian matrix with
/// the columns of Q re-signed by sign(R_jj).
Eigen::MatrixXd haar_orthogonal(std::size_t d, Rng& rng);

/// Uniform point on S^{d-1}.
Eigen::VectorXd random_unit_vector(std::size_t d, Rng& rng);

BTVector bt_encode(const Tree& t, const Embedding& e);

/// round(|v|^2)
std::size_t cardinality_estimate(const BTVector& v);

/// Encoding of the tree obtained by hanging the tree of `v2` under attribute
/// `a` of the leaf at `leaf` in the tree of `v1`. Pure vector arithmetic.
BTVector attach(const BTVector& v1, const Path& leaf, AttrId a,
                const BTVector& v2, const Embedding& e);

/// sum_i A_next^{i-1} E(t_i)
BTVector encode_list(std::span<const TokenId> tokens, const Embedding& e,
                     AttrId next);

/// E(t) + A_next v
BTVector push(const BTVector& v, TokenId t, const Embedding& e, AttrId next);

// Binary files, little-endian float64 payloads.
void save_embedding(const Embedding& e, const std::string& file);
Embedding load_embedding(const std::string& file);
void save_vector(const BTVector& v, const std::string& file);
BTVector load_vector(const std::string& file);

}  // namespace bt
