#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace seqtok {

// All training-time numerics run in double precision so that fixed-seed runs
// are bitwise reproducible and finite-difference checks are meaningful.
using Scalar = double;

template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Mat = MatrixX<Scalar>;
using Vec = VectorX<Scalar>;
using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Rng = std::mt19937_64;

// Sequence tensors B x T x C are stored as (B*T) x C matrices, batch-major:
// row(b, t) = b*T + t. Images B x H x W x C use the same scheme with the
// spatial grid flattened row-major: row = b*H*W + y*W + x.
inline Eigen::Index seq_row(Eigen::Index b, Eigen::Index t, Eigen::Index tokens_per_item) {
  return b * tokens_per_item + t;
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class S>
MatrixX<S> randn(Eigen::Index rows, Eigen::Index cols, Rng& rng, S stddev = S(1)) {
  std::normal_distribution<S> dist(S(0), S(1));
  MatrixX<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = dist(rng) * stddev;
    }
  }
  return m;
}

template <class S>
MatrixX<S> rand_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, S lo = S(0), S hi = S(1)) {
  std::uniform_real_distribution<S> dist(lo, hi);
  MatrixX<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = dist(rng);
    }
  }
  return m;
}

}  // namespace seqtok
