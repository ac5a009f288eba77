#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "btembed/embed.hpp"

namespace bt {

struct XfConfig {
  std::size_t k = 64;              // position code dimension
  double attn_sharpness = 100.0;   // multiplier on attention logits
  double gate_constant = 1e4;      // C in the feed-forward gates
  double position_bound = 0.1;     // max |<p_i, p_j>|, i != j
  std::size_t position_retries = 1000;
  std::uint64_t seed = 1;          // position code stream
};

/// p_i = Z^{i-1} p_1 for i = 1..n, stored as the columns of `p`.
struct PositionCodes {
  Eigen::MatrixXd p;
  Eigen::MatrixXd z;
  double max_overlap = 0.0;

  std::size_t length() const { return static_cast<std::size_t>(p.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(p.rows()); }
};

double max_overlap(const Eigen::MatrixXd& codes);

/// Draws (p_1, Z) until the pairwise bound holds; SeparationUnachievable
/// after `max_retries` draws.
PositionCodes build_position_codes(std::size_t n, std::size_t k, Rng& rng,
                                   double bound = 0.1,
                                   std::size_t max_retries = 1000);

/// Slot layout (p, v, w, r, t): widths k, d, d, d, d. Column i is slot i.
class SeqState {
 public:
  SeqState(std::size_t n, std::size_t k, Eigen::Index d)
      : k_(static_cast<Eigen::Index>(k)),
        d_(d),
        x_(Eigen::MatrixXd::Zero(k_ + 4 * d, static_cast<Eigen::Index>(n))) {}

  std::size_t slots() const { return static_cast<std::size_t>(x_.cols()); }
  Eigen::Index k() const { return k_; }
  Eigen::Index d() const { return d_; }
  Eigen::Index width() const { return x_.rows(); }

  Eigen::MatrixXd& matrix() { return x_; }
  const Eigen::MatrixXd& matrix() const { return x_; }

  enum Segment { P = 0, V = 1, W = 2, R = 3, T = 4 };
  Eigen::Index offset(Segment s) const { return s == P ? 0 : k_ + (s - 1) * d_; }
  Eigen::Index size(Segment s) const { return s == P ? k_ : d_; }

  auto segment(Segment s, std::size_t slot) {
    return x_.col(static_cast<Eigen::Index>(slot)).segment(offset(s), size(s));
  }
  auto segment(Segment s, std::size_t slot) const {
    return x_.col(static_cast<Eigen::Index>(slot)).segment(offset(s), size(s));
  }

 private:
  Eigen::Index k_;
  Eigen::Index d_;
  Eigen::MatrixXd x_;
};

/// One named sub-block of an affine map: out[row.., :] += B * in[col.., :].
/// Dense blocks may reference a shared matrix (optionally transposed);
/// identity and rank-one blocks keep the large structured pieces compact.
struct WeightBlock {
  enum class Kind { Dense, Identity, Outer };

  std::string name;
  Kind kind = Kind::Dense;
  Eigen::Index row = 0, col = 0, rows = 0, cols = 0;
  double scale = 1.0;
  std::shared_ptr<const Eigen::MatrixXd> matrix;  // Dense
  bool transposed = false;                        // Dense
  Eigen::VectorXd u, v;                           // Outer: scale * u v^T

  void apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const;
  Eigen::MatrixXd materialize() const;
};

struct AffineMap {
  std::string name;
  Eigen::Index in_dim = 0, out_dim = 0;
  std::vector<WeightBlock> blocks;
  Eigen::VectorXd bias;  // empty means zero

  Eigen::MatrixXd apply(const Eigen::MatrixXd& in) const;
  Eigen::MatrixXd dense() const;  // for inspection at small d
};

/// x + M1 relu(M2 x + b2)
struct FeedForward {
  AffineMap expand;
  AffineMap contract;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Single head, strictly causal (slot i sees slots j < i); slot 1 receives
/// the zero vector.
struct AttentionHead {
  AffineMap query, key, value;

  Eigen::MatrixXd weights(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;  // x + A(x)
};

/// Labels along a path, one per slot; absent where no token clears 1/2.
using LabelSequence = std::vector<std::optional<TokenId>>;

/// Called after the initial feed-forward pass (block 0) and after every
/// decoding block.
using BlockObserver = std::function<void(std::size_t block, const SeqState&)>;

/// Closed-form decoder-only transformer that reads the labels along a path
/// out of an encoding. Weights are fixed at construction from the embedding.
class PathDecoder {
 public:
  /// `capacity` is the largest slot count n (path length + 1) supported.
  PathDecoder(const Embedding& e, AttrId next, std::size_t capacity,
              XfConfig cfg = {});

  std::size_t capacity() const { return codes_.length(); }
  const PositionCodes& codes() const { return codes_; }
  const XfConfig& config() const { return cfg_; }
  const AttentionHead& attention() const { return attn_; }
  const FeedForward& ffn1() const { return ffn1_; }
  const FeedForward& ffn2() const { return ffn2_; }

  SeqState initial_state(const BTVector& v, const Path& path) const;

  SeqState attention_step(const SeqState& s) const;
  SeqState apply_ffn1(const SeqState& s) const;
  SeqState apply_ffn2(const SeqState& s) const;
  SeqState block(const SeqState& s) const;

  LabelSequence run(const BTVector& v, const Path& path,
                    const BlockObserver& observe = {}) const;

  /// Little-endian float64 tensors in `prefix.bin`, manifest in
  /// `prefix.json`.
  void export_weights(const std::string& prefix) const;

 private:
  void build_attention();
  void build_ffn1();
  void build_ffn2();

  const Embedding& e_;
  AttrId next_;
  XfConfig cfg_;
  PositionCodes codes_;
  AttentionHead attn_;
  FeedForward ffn1_;
  FeedForward ffn2_;
};

/// One-shot form: builds a decoder sized for `path` and runs it.
LabelSequence run_decoder(const BTVector& v, const Path& path,
                          const Embedding& e, AttrId next,
                          const XfConfig& cfg = {});

}  // namespace bt
