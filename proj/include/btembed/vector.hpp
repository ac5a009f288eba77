#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace bt {

/// A d-dimensional encoding tagged with the fingerprint of the embedding
/// that produced it. Vectors from different embeddings never mix.
struct BTVector {
  Eigen::VectorXd data;
  std::uint64_t fingerprint = 0;

  Eigen::Index dim() const { return data.size(); }

  static BTVector zero(Eigen::Index dim, std::uint64_t fingerprint) {
    return {Eigen::VectorXd::Zero(dim), fingerprint};
  }
};

}  // namespace bt
