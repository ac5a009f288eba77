#include "btembed/embed.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <Eigen/QR>

#include "btembed/error.hpp"

namespace bt {

namespace {

constexpr std::uint32_t kEmbeddingVersion = 1;

void require_attr(const Embedding& e, AttrId a) {
  if (!e.schema().valid(a)) {
    throw Error(ErrorKind::SchemaMismatch,
                "attribute index " + std::to_string(index(a)) +
                    " outside schema");
  }
}

void require_token(const Embedding& e, TokenId t) {
  if (!e.schema().valid(t)) {
    throw Error(ErrorKind::SchemaMismatch,
                "token index " + std::to_string(index(t)) + " outside schema");
  }
}

}  // namespace

std::uint64_t embedding_fingerprint(const Schema& s, std::size_t dim,
                                    std::uint64_t seed) {
  std::uint64_t h = s.hash();
  h = mix64(h ^ dim);
  h = mix64(h ^ seed);
  for (const char* c = Rng::kName; *c; ++c) h = mix64(h ^ static_cast<unsigned char>(*c));
  return h;
}

Embedding::Embedding(Schema schema, std::size_t dim, std::uint64_t seed)
    : schema_(std::move(schema)),
      dim_(dim),
      seed_(seed),
      fingerprint_(embedding_fingerprint(schema_, dim, seed)) {}

void Embedding::check(const BTVector& v) const {
  if (v.fingerprint != fingerprint_ || v.dim() != dim()) {
    throw Error(ErrorKind::SchemaMismatch,
                "vector was not produced by this embedding");
  }
}

Eigen::VectorXd random_unit_vector(std::size_t d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = rng.normal();
  v /= v.norm();
  return v;
}

Eigen::MatrixXd haar_orthogonal(std::size_t d, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

Embedding make_embedding(const Schema& s, std::size_t dim,
                         std::uint64_t seed) {
  if (dim < 2) {
    throw Error(ErrorKind::DimensionTooSmall,
                "embedding dimension must be at least 2");
  }
  Embedding e(s, dim, seed);
  e.tokens_.resize(static_cast<Eigen::Index>(s.token_count()),
                   static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < s.token_count(); ++i) {
    Rng rng(derive_seed(seed, {0, i}));
    e.tokens_.row(static_cast<Eigen::Index>(i)) =
        random_unit_vector(dim, rng).transpose();
  }
  e.attrs_.reserve(s.attribute_count());
  for (std::size_t j = 0; j < s.attribute_count(); ++j) {
    Rng rng(derive_seed(seed, {1, j}));
    e.attrs_.push_back(haar_orthogonal(dim, rng));
  }
  return e;
}

namespace {

Eigen::VectorXd encode_node(const Tree& t, const Embedding& e) {
  Eigen::VectorXd v = e.token(t.label()).transpose();
  for (const auto& [a, sub] : t.children()) {
    v.noalias() += e.attr(a) * encode_node(sub, e);
  }
  return v;
}

}  // namespace

BTVector bt_encode(const Tree& t, const Embedding& e) {
  check_bound(t, e.schema());
  return {encode_node(t, e), e.fingerprint()};
}

std::size_t cardinality_estimate(const BTVector& v) {
  return static_cast<std::size_t>(std::llround(v.data.squaredNorm()));
}

BTVector attach(const BTVector& v1, const Path& leaf, AttrId a,
                const BTVector& v2, const Embedding& e) {
  e.check(v1);
  e.check(v2);
  require_attr(e, a);
  for (AttrId p : leaf) require_attr(e, p);

  // A_{p1} ... A_{pk} A_a v2, applied right to left.
  Eigen::VectorXd w = e.attr(a) * v2.data;
  for (auto it = leaf.rbegin(); it != leaf.rend(); ++it) {
    w = e.attr(*it) * w;
  }
  return {v1.data + w, e.fingerprint()};
}

BTVector encode_list(std::span<const TokenId> tokens, const Embedding& e,
                     AttrId next) {
  require_attr(e, next);
  BTVector acc = e.zero();
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    acc = push(acc, *it, e, next);
  }
  return acc;
}

BTVector push(const BTVector& v, TokenId t, const Embedding& e, AttrId next) {
  e.check(v);
  require_token(e, t);
  require_attr(e, next);
  Eigen::VectorXd out = e.token(t).transpose();
  out.noalias() += e.attr(next) * v.data;
  return {std::move(out), e.fingerprint()};
}

// ---------------------------------------------------------------------------
// Binary IO

namespace {

class Writer {
 public:
  explicit Writer(const std::string& file)
      : file_(file), out_(file, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::Io, "cannot write " + file);
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    bytes(b, 8);
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix_rows(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }
  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorKind::Io, "write failed: " + file_);
  }

 private:
  std::string file_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& file)
      : file_(file), in_(file, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::Io, "cannot open " + file);
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorKind::Format, "truncated file " + file_);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= std::uint32_t{b[i]} << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t{b[i]} << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::string s(u32(), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  void magic(const char (&expect)[5]) {
    char m[4];
    bytes(m, 4);
    if (std::string_view(m, 4) != std::string_view(expect, 4)) {
      throw Error(ErrorKind::Format, file_ + " has the wrong magic");
    }
  }
  void matrix_rows(Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
  }
  const std::string& file() const { return file_; }

 private:
  std::string file_;
  std::ifstream in_;
};

}  // namespace

// Layout: "BTE1", u32 version, u64 d, u64 |T|, u64 |A|, u64 seed,
// str generator, u64 schema hash, str schema JSON, then the token matrix and
// each attribute matrix, row-major.
void save_embedding(const Embedding& e, const std::string& file) {
  Writer w(file);
  w.bytes("BTE1", 4);
  w.u32(kEmbeddingVersion);
  w.u64(static_cast<std::uint64_t>(e.dim()));
  w.u64(e.schema().token_count());
  w.u64(e.schema().attribute_count());
  w.u64(e.seed());
  w.str(Rng::kName);
  w.u64(e.schema().hash());
  w.str(schema_to_json(e.schema()).dump());
  w.matrix_rows(e.token_matrix());
  for (const auto& m : e.attr_matrices()) w.matrix_rows(m);
  w.finish();
}

Embedding load_embedding(const std::string& file) {
  Reader r(file);
  r.magic("BTE1");
  if (auto v = r.u32(); v != kEmbeddingVersion) {
    throw Error(ErrorKind::Format,
                "unsupported embedding version " + std::to_string(v));
  }
  const auto dim = r.u64();
  const auto ntok = r.u64();
  const auto nattr = r.u64();
  const auto seed = r.u64();
  if (auto gen = r.str(); gen != Rng::kName) {
    throw Error(ErrorKind::Format, "unknown generator " + gen);
  }
  const auto schema_hash = r.u64();
  Schema schema = [&] {
    const auto text = r.str();
    try {
      return schema_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::Format, ex.what());
    }
  }();
  if (schema.hash() != schema_hash || schema.token_count() != ntok ||
      schema.attribute_count() != nattr || dim < 2) {
    throw Error(ErrorKind::Format, file + " header is inconsistent");
  }

  Embedding e(std::move(schema), dim, seed);
  const auto d = static_cast<Eigen::Index>(dim);
  e.tokens_.resize(static_cast<Eigen::Index>(ntok), d);
  r.matrix_rows(e.tokens_);
  e.attrs_.reserve(nattr);
  for (std::uint64_t j = 0; j < nattr; ++j) {
    Eigen::MatrixXd m(d, d);
    r.matrix_rows(m);
    e.attrs_.push_back(std::move(m));
  }
  return e;
}

void save_vector(const BTVector& v, const std::string& file) {
  Writer w(file);
  w.bytes("BTV1", 4);
  w.u64(static_cast<std::uint64_t>(v.dim()));
  w.u64(v.fingerprint);
  for (Eigen::Index i = 0; i < v.dim(); ++i) w.f64(v.data[i]);
  w.finish();
}

BTVector load_vector(const std::string& file) {
  Reader r(file);
  r.magic("BTV1");
  const auto d = static_cast<Eigen::Index>(r.u64());
  BTVector v;
  v.fingerprint = r.u64();
  v.data.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) v.data[i] = r.f64();
  return v;
}

}  // namespace bt
