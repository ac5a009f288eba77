#include "btembed/transformer.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "btembed/decode.hpp"
#include "btembed/error.hpp"
#include "json.hpp"

namespace bt {

double max_overlap(const Eigen::MatrixXd& codes) {
  const Eigen::MatrixXd g = codes.transpose() * codes;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      if (i != j) worst = std::max(worst, std::abs(g(i, j)));
    }
  }
  return worst;
}

PositionCodes build_position_codes(std::size_t n, std::size_t k, Rng& rng,
                                   double bound, std::size_t max_retries) {
  if (k < 2 || n < 1) {
    throw Error(ErrorKind::InvalidSpec, "position codes need k >= 2, n >= 1");
  }
  const auto kk = static_cast<Eigen::Index>(k);
  for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
    PositionCodes codes;
    codes.z = haar_orthogonal(k, rng);
    codes.p.resize(kk, static_cast<Eigen::Index>(n));
    codes.p.col(0) = random_unit_vector(k, rng);
    for (Eigen::Index i = 1; i < codes.p.cols(); ++i) {
      codes.p.col(i) = codes.z * codes.p.col(i - 1);
    }
    codes.max_overlap = max_overlap(codes.p);
    if (codes.max_overlap < bound) return codes;
  }
  throw Error(ErrorKind::SeparationUnachievable,
              "no position codes with overlap below " + std::to_string(bound) +
                  " for n=" + std::to_string(n) + ", k=" + std::to_string(k) +
                  " after " + std::to_string(max_retries) + " draws");
}

// ---------------------------------------------------------------------------
// Weight blocks

void WeightBlock::apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const {
  auto dst = out.middleRows(row, rows);
  const auto src = in.middleRows(col, cols);
  switch (kind) {
    case Kind::Dense:
      if (transposed) {
        dst.noalias() += scale * (matrix->transpose() * src);
      } else {
        dst.noalias() += scale * (*matrix * src);
      }
      break;
    case Kind::Identity:
      dst += scale * src;
      break;
    case Kind::Outer:
      dst.noalias() += (scale * u) * (v.transpose() * src);
      break;
  }
}

Eigen::MatrixXd WeightBlock::materialize() const {
  switch (kind) {
    case Kind::Dense:
      return transposed ? Eigen::MatrixXd(scale * matrix->transpose())
                        : Eigen::MatrixXd(scale * *matrix);
    case Kind::Identity:
      return scale * Eigen::MatrixXd::Identity(rows, cols);
    case Kind::Outer:
      return scale * u * v.transpose();
  }
  return {};
}

Eigen::MatrixXd AffineMap::apply(const Eigen::MatrixXd& in) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(out_dim, in.cols());
  for (const auto& b : blocks) b.apply(in, out);
  if (bias.size() > 0) out.colwise() += bias;
  return out;
}

Eigen::MatrixXd AffineMap::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(out_dim, in_dim);
  for (const auto& b : blocks) {
    m.block(b.row, b.col, b.rows, b.cols) += b.materialize();
  }
  return m;
}

Eigen::MatrixXd FeedForward::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = expand.apply(x).cwiseMax(0.0);
  return x + contract.apply(h);
}

Eigen::MatrixXd AttentionHead::weights(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd q = query.apply(x);
  const Eigen::MatrixXd k = key.apply(x);
  const Eigen::MatrixXd logits = q.transpose() * k;
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) {
    const double top = logits.row(i).head(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      w(i, j) = std::exp(logits(i, j) - top);
      total += w(i, j);
    }
    w.row(i).head(i) /= total;
  }
  return w;
}

Eigen::MatrixXd AttentionHead::apply(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd vals = value.apply(x);
  return x + vals * weights(x).transpose();
}

// ---------------------------------------------------------------------------
// PathDecoder

namespace {

WeightBlock identity(std::string name, Eigen::Index row, Eigen::Index col,
                     Eigen::Index size, double scale) {
  WeightBlock b;
  b.name = std::move(name);
  b.kind = WeightBlock::Kind::Identity;
  b.row = row;
  b.col = col;
  b.rows = b.cols = size;
  b.scale = scale;
  return b;
}

WeightBlock dense(std::string name, Eigen::Index row, Eigen::Index col,
                  std::shared_ptr<const Eigen::MatrixXd> m, bool transposed,
                  double scale) {
  WeightBlock b;
  b.name = std::move(name);
  b.kind = WeightBlock::Kind::Dense;
  b.row = row;
  b.col = col;
  b.rows = transposed ? m->cols() : m->rows();
  b.cols = transposed ? m->rows() : m->cols();
  b.matrix = std::move(m);
  b.transposed = transposed;
  b.scale = scale;
  return b;
}

WeightBlock outer(std::string name, Eigen::Index row, Eigen::Index col,
                  Eigen::VectorXd u, Eigen::VectorXd v, double scale) {
  WeightBlock b;
  b.name = std::move(name);
  b.kind = WeightBlock::Kind::Outer;
  b.row = row;
  b.col = col;
  b.rows = u.size();
  b.cols = v.size();
  b.u = std::move(u);
  b.v = std::move(v);
  b.scale = scale;
  return b;
}

}  // namespace

PathDecoder::PathDecoder(const Embedding& e, AttrId next, std::size_t capacity,
                         XfConfig cfg)
    : e_(e), next_(next), cfg_(cfg) {
  if (!e.schema().valid(next)) {
    throw Error(ErrorKind::SchemaMismatch, "next attribute outside schema");
  }
  if (!(cfg.attn_sharpness > 0 && cfg.gate_constant > 0 && cfg.k > 0)) {
    throw Error(ErrorKind::InvalidSpec, "transformer config must be positive");
  }
  Rng rng(derive_seed(cfg.seed, {2}));
  codes_ = build_position_codes(capacity, cfg.k, rng, cfg.position_bound,
                                cfg.position_retries);
  build_attention();
  build_ffn1();
  build_ffn2();
}

void PathDecoder::build_attention() {
  const auto k = static_cast<Eigen::Index>(cfg_.k);
  const auto d = e_.dim();
  const Eigen::Index width = k + 4 * d;
  const SeqState layout(1, cfg_.k, d);
  const auto V = layout.offset(SeqState::V);
  const auto W = layout.offset(SeqState::W);
  const auto R = layout.offset(SeqState::R);

  // Q = Z^{-1} p = Z^T p, scaled by the sharpness; K = p.
  attn_.query = {"attn.query", width, k, {}, {}};
  attn_.query.blocks.push_back(
      dense("Wq", 0, 0, std::make_shared<const Eigen::MatrixXd>(codes_.z),
            true, cfg_.attn_sharpness));
  attn_.key = {"attn.key", width, k, {}, {}};
  attn_.key.blocks.push_back(identity("Wk", 0, 0, k, 1.0));

  // V(x) = (0, w, 0, M_next^{-1} r, 0)
  attn_.value = {"attn.value", width, width, {}, {}};
  attn_.value.blocks.push_back(identity("Wv.w_to_v", V, W, d, 1.0));
  attn_.value.blocks.push_back(
      dense("Wv.r_shift", R, R,
            std::make_shared<const Eigen::MatrixXd>(e_.attr(next_)), true,
            1.0));
}

void PathDecoder::build_ffn1() {
  const auto k = static_cast<Eigen::Index>(cfg_.k);
  const auto d = e_.dim();
  const Eigen::Index width = k + 4 * d;
  const SeqState layout(1, cfg_.k, d);
  const auto V = layout.offset(SeqState::V);
  const auto W = layout.offset(SeqState::W);
  const auto R = layout.offset(SeqState::R);
  const double C = cfg_.gate_constant;
  const auto nattr = static_cast<Eigen::Index>(e_.schema().attribute_count());

  // Hidden units: relu(v), relu(-v), per attribute j the d gated units
  // relu(y_j + M_j^T v - v), per attribute the scalar relu(y_j), then
  // relu(w), relu(-w).
  const Eigen::Index pos_v = 0, neg_v = d, gated = 2 * d;
  const Eigen::Index gate = gated + nattr * d;
  const Eigen::Index pos_w = gate + nattr, neg_w = pos_w + d;
  const Eigen::Index hidden = neg_w + d;

  auto& ex = ffn1_.expand;
  ex = {"ffn1.expand", width, hidden, {}, Eigen::VectorXd::Zero(hidden)};
  auto& ct = ffn1_.contract;
  ct = {"ffn1.contract", hidden, width, {}, {}};

  ex.blocks.push_back(identity("relu_v", pos_v, V, d, 1.0));
  ex.blocks.push_back(identity("relu_neg_v", neg_v, V, d, -1.0));
  ct.blocks.push_back(identity("relu_v", W, pos_v, d, 1.0));
  ct.blocks.push_back(identity("relu_neg_v", W, neg_v, d, -1.0));

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
  for (Eigen::Index j = 0; j < nattr; ++j) {
    const auto a = static_cast<AttrId>(j);
    const std::string tag = "attr." + e_.schema().name(a);
    const Eigen::VectorXd head = e_.token(e_.schema().token_of(a)).transpose();
    const Eigen::Index g = gated + j * d;

    ex.blocks.push_back(dense(tag + ".inverse", g, V,
                              std::make_shared<const Eigen::MatrixXd>(e_.attr(a)),
                              true, 1.0));
    ex.blocks.push_back(identity(tag + ".minus_v", g, V, d, -1.0));
    ex.blocks.push_back(outer(tag + ".gate_broadcast", g, R, ones, head, C));
    ex.bias.segment(g, d).setConstant(-C / 2);

    ex.blocks.push_back(outer(tag + ".gate", gate + j, R,
                              Eigen::VectorXd::Ones(1), head, C));
    ex.bias[gate + j] = -C / 2;

    ct.blocks.push_back(identity(tag + ".gated", W, g, d, 1.0));
    ct.blocks.push_back(outer(tag + ".gate", W, gate + j, ones,
                              Eigen::VectorXd::Ones(1), -1.0));
  }

  ex.blocks.push_back(identity("relu_w", pos_w, W, d, 1.0));
  ex.blocks.push_back(identity("relu_neg_w", neg_w, W, d, -1.0));
  ct.blocks.push_back(identity("relu_w", W, pos_w, d, -1.0));
  ct.blocks.push_back(identity("relu_neg_w", W, neg_w, d, 1.0));
}

void PathDecoder::build_ffn2() {
  const auto k = static_cast<Eigen::Index>(cfg_.k);
  const auto d = e_.dim();
  const Eigen::Index width = k + 4 * d;
  const SeqState layout(1, cfg_.k, d);
  const auto V = layout.offset(SeqState::V);
  const auto W = layout.offset(SeqState::W);
  const auto T = layout.offset(SeqState::T);
  const double C = cfg_.gate_constant;
  const auto tokens = std::make_shared<const Eigen::MatrixXd>(e_.token_matrix());
  const Eigen::Index ntok = tokens->rows();

  // Hidden units: relu(z + 1), relu(z) with z = C (E w - 1/2), then relu(v),
  // relu(-v).
  const Eigen::Index z_plus = 0, z = ntok, pos_v = 2 * ntok, neg_v = pos_v + d;
  const Eigen::Index hidden = neg_v + d;

  auto& ex = ffn2_.expand;
  ex = {"ffn2.expand", width, hidden, {}, Eigen::VectorXd::Zero(hidden)};
  ex.blocks.push_back(dense("z_plus_one", z_plus, W, tokens, false, C));
  ex.blocks.push_back(dense("z", z, W, tokens, false, C));
  ex.bias.segment(z_plus, ntok).setConstant(-C / 2 + 1);
  ex.bias.segment(z, ntok).setConstant(-C / 2);
  ex.blocks.push_back(identity("relu_v", pos_v, V, d, 1.0));
  ex.blocks.push_back(identity("relu_neg_v", neg_v, V, d, -1.0));

  auto& ct = ffn2_.contract;
  ct = {"ffn2.contract", hidden, width, {}, {}};
  ct.blocks.push_back(dense("z_plus_one", T, z_plus, tokens, true, 1.0));
  ct.blocks.push_back(dense("z", T, z, tokens, true, -1.0));
  ct.blocks.push_back(identity("relu_v", V, pos_v, d, -1.0));
  ct.blocks.push_back(identity("relu_neg_v", V, neg_v, d, 1.0));
}

SeqState PathDecoder::initial_state(const BTVector& v, const Path& path) const {
  e_.check(v);
  const std::size_t n = path.size() + 1;
  if (n > capacity()) {
    throw Error(ErrorKind::PathTooLong,
                "path of length " + std::to_string(path.size()) +
                    " exceeds capacity " + std::to_string(capacity() - 1));
  }
  std::vector<TokenId> path_tokens;
  for (AttrId a : path) {
    if (!e_.schema().valid(a)) {
      throw Error(ErrorKind::SchemaMismatch, "path attribute outside schema");
    }
    path_tokens.push_back(e_.schema().token_of(a));
  }
  const BTVector r = path_tokens.empty()
                         ? e_.zero()
                         : encode_list(path_tokens, e_, next_);

  SeqState s(n, cfg_.k, e_.dim());
  for (std::size_t i = 0; i < n; ++i) {
    s.segment(SeqState::P, i) = codes_.p.col(static_cast<Eigen::Index>(i));
  }
  s.segment(SeqState::V, 0) = v.data;
  s.segment(SeqState::R, 0) = e_.attr(next_) * r.data;
  return s;
}

SeqState PathDecoder::attention_step(const SeqState& s) const {
  SeqState out = s;
  out.matrix() = attn_.apply(s.matrix());
  return out;
}

SeqState PathDecoder::apply_ffn1(const SeqState& s) const {
  SeqState out = s;
  out.matrix() = ffn1_.apply(s.matrix());
  return out;
}

SeqState PathDecoder::apply_ffn2(const SeqState& s) const {
  SeqState out = s;
  out.matrix() = ffn2_.apply(s.matrix());
  return out;
}

SeqState PathDecoder::block(const SeqState& s) const {
  return apply_ffn2(apply_ffn1(attention_step(s)));
}

LabelSequence PathDecoder::run(const BTVector& v, const Path& path,
                               const BlockObserver& observe) const {
  SeqState s = initial_state(v, path);
  // The first feed-forward pass decodes the root in slot 1; each block after
  // it moves one step further along the path.
  s = apply_ffn2(apply_ffn1(s));
  if (observe) observe(0, s);
  for (std::size_t b = 1; b < s.slots(); ++b) {
    s = block(s);
    if (observe) observe(b, s);
  }
  LabelSequence labels;
  for (std::size_t i = 0; i < s.slots(); ++i) {
    labels.push_back(
        decode_token(s.segment(SeqState::T, i), e_.token_matrix(), 0.5));
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Weight export

namespace {

class TensorSink {
 public:
  explicit TensorSink(const std::string& file) : out_(file, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::Io, "cannot write " + file);
  }

  nlohmann::ordered_json put(const std::string& role, const Eigen::MatrixXd& m) {
    nlohmann::ordered_json j;
    j["role"] = role;
    j["shape"] = {m.rows(), m.cols()};
    j["offset"] = offset_;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
    return j;
  }

  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorKind::Io, "weight dump failed");
  }

 private:
  void f64(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(bits >> (8 * i));
    out_.write(b, 8);
    offset_ += 8;
  }

  std::ofstream out_;
  std::uint64_t offset_ = 0;
};

nlohmann::ordered_json export_map(const AffineMap& m, TensorSink& sink) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["in_dim"] = m.in_dim;
  j["out_dim"] = m.out_dim;
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : m.blocks) {
    nlohmann::ordered_json bj;
    bj["name"] = b.name;
    bj["row"] = b.row;
    bj["col"] = b.col;
    bj["rows"] = b.rows;
    bj["cols"] = b.cols;
    switch (b.kind) {
      case WeightBlock::Kind::Dense:
        bj["kind"] = "dense";
        bj["tensors"] = {sink.put("matrix", b.materialize())};
        break;
      case WeightBlock::Kind::Identity:
        bj["kind"] = "scaled_identity";
        bj["tensors"] = {sink.put("scale", Eigen::MatrixXd::Constant(1, 1, b.scale))};
        break;
      case WeightBlock::Kind::Outer:
        bj["kind"] = "outer";
        bj["tensors"] = {sink.put("u", (b.scale * b.u).transpose()),
                         sink.put("v", b.v.transpose())};
        break;
    }
    j["blocks"].push_back(std::move(bj));
  }
  if (m.bias.size() > 0) j["bias"] = sink.put("bias", m.bias.transpose());
  return j;
}

}  // namespace

void PathDecoder::export_weights(const std::string& prefix) const {
  TensorSink sink(prefix + ".bin");
  nlohmann::ordered_json manifest;
  manifest["format"] = "float64-le";
  manifest["tensor_file"] = prefix + ".bin";
  manifest["k"] = cfg_.k;
  manifest["d"] = e_.dim();
  manifest["slot_layout"] = {"p", "v", "w", "r", "t"};
  manifest["attention"] = "single head, strictly causal, softmax(q.k)";
  manifest["feed_forward"] = "x + contract(relu(expand(x)))";
  manifest["positions"] = sink.put("positions", codes_.p.transpose());
  manifest["layers"] = nlohmann::ordered_json::array();
  for (const AffineMap* m : {&attn_.query, &attn_.key, &attn_.value,
                             &ffn1_.expand, &ffn1_.contract, &ffn2_.expand,
                             &ffn2_.contract}) {
    manifest["layers"].push_back(export_map(*m, sink));
  }
  sink.finish();
  std::ofstream out(prefix + ".json");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + prefix + ".json");
  out << manifest.dump(2) << '\n';
}

LabelSequence run_decoder(const BTVector& v, const Path& path,
                          const Embedding& e, AttrId next,
                          const XfConfig& cfg) {
  PathDecoder dec(e, next, path.size() + 1, cfg);
  return dec.run(v, path);
}

}  // namespace bt
