#pragma once

#include <cstddef>
#include <optional>

#include "btembed/embed.hpp"

namespace bt {

struct DecodeConfig {
  double threshold = 0.5;
  std::size_t max_depth = 64;
  std::size_t max_nodes = 4096;
};

/// Per-node record of the winning and runner-up inner products.
struct NodeMargin {
  Path path;
  TokenId token;
  double best;
  double runner_up;
};

struct DecodeReport {
  std::optional<Tree> tree;
  std::size_t probes = 0;  // token inner products evaluated
  std::size_t candidates = 0;
  std::vector<NodeMargin> margins;
};

/// Recursive nearest-token decoding. Accepts the argmax token at a path when
/// its inner product exceeds the threshold, then descends through A_j^T for
/// every attribute j in schema order. Throws BudgetExceeded when max_depth
/// or max_nodes is hit.
std::optional<Tree> decode(const BTVector& v, const Embedding& e,
                           const DecodeConfig& cfg = {});

DecodeReport decode_report(const BTVector& v, const Embedding& e,
                           const DecodeConfig& cfg = {});

/// Single non-recursive probe. Ties go to the lowest token index.
std::optional<TokenId> decode_token(const BTVector& v, const Embedding& e,
                                    double threshold = 0.5);

/// Same probe on a raw vector, for callers that hold slot contents rather
/// than tagged encodings.
std::optional<TokenId> decode_token(const Eigen::Ref<const Eigen::VectorXd>& v,
                                    const Eigen::MatrixXd& token_matrix,
                                    double threshold = 0.5);

}  // namespace bt
