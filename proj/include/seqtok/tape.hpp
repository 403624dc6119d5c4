#pragma once

#include "seqtok/types.hpp"

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace seqtok {

// A learnable tensor. Gradients accumulate across tape passes until zeroed by
// the optimizer.
struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Mat v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Dynamic reverse-mode tape over dense Eigen matrices. One tape per training
// step; nodes are created in topological order by construction, so backward
// is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var input(Mat v);           // constant, no gradient
  Var param(Param& p);        // learnable leaf; repeated calls return the same node
  Var zeros(Eigen::Index rows, Eigen::Index cols);

  // Linear algebra.
  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T

  // Elementwise and broadcasting arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  Var scale(Var a, Scalar s);
  Var add_const(Var a, Mat c);    // value shift, identity gradient
  Var add_rowvec(Var a, Var v);   // v is 1 x C, broadcast over rows

  // Block / sequence structure. tokens_per_item is the T of the (B*T) x C layout.
  Var tile_block(Var block, Eigen::Index copies);                    // stack `copies` copies of a T x C block
  Var add_block(Var a, Var block, Eigen::Index tokens_per_item);     // add a T x C block to every batch item
  Var slice_tokens(Var a, Eigen::Index tokens_per_item, Eigen::Index t0, Eigen::Index t1);
  Var concat_tokens(Var a, Eigen::Index ta, Var b, Eigen::Index tb);
  Var vstack(Var a, Var b);                                          // batch concatenation
  Var rows_slice(Var a, Eigen::Index r0, Eigen::Index r1);
  Var cols_slice(Var a, Eigen::Index c0, Eigen::Index c1);
  Var mean_tokens(Var a, Eigen::Index tokens_per_item);              // (B*T) x C -> B x C
  Var row_broadcast_mul(Var a, Var s, Eigen::Index tokens_per_item); // s is B x C, one row per item
  Var row_broadcast_add(Var a, Var s, Eigen::Index tokens_per_item);
  Var embedding_rows(Var table, const std::vector<int>& ids);

  // Nonlinearities and normalization.
  Var silu(Var a);
  Var tanh_op(Var a);
  Var leaky_relu(Var a, Scalar slope);
  Var xlogx(Var a);  // x*ln(x), 0 at 0
  Var rms_norm(Var a, Var gain, Scalar eps = 1e-6);
  Var l2_normalize_rows(Var a);  // throws DegenerateInputError on zero-norm rows
  Var softmax_rows(Var a);

  // Attention over (B*T) x (H*dh) tensors; `allow` is a T x T mask shared by
  // all batch items and heads.
  Var attention(Var q, Var k, Var v, const MaskMat& allow, Eigen::Index batch, Eigen::Index heads);

  // Convolution on (B*H*W) x Cin image tensors; weight is (k*k*Cin) x Cout,
  // bias 1 x Cout, zero padding.
  Var conv2d(Var x, Var weight, Var bias, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
             Eigen::Index ksize, Eigen::Index stride, Eigen::Index pad);

  // Patch rearrangement between (B*H*W) x C images and (B*N) x (P*P*C)
  // patch-major tensors. Patch n = py*(W/P)+px; within-patch column
  // (dy*P+dx)*C + c.
  Var patchify_gather(Var img, Eigen::Index batch, Eigen::Index h, Eigen::Index w, Eigen::Index patch);
  Var unpatchify_scatter(Var patches, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
                         Eigen::Index channels, Eigen::Index patch);

  // Reductions and losses (all produce 1x1 nodes).
  Var mean_all(Var a);
  Var mean_rows(Var a);  // (R x C) -> 1 x C
  Var mse(Var a, Var b);
  Var cross_entropy_mean(Var logits, const std::vector<int>& targets);
  Var cosine_rows_mean(Var a, Var b, Scalar eps = 1e-12);

  Var detach(Var a);

  // Seeds `loss` (1x1) with gradient 1 and sweeps the tape. Parameter
  // gradients accumulate into Param::grad.
  void backward(Var loss);

  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;  // lazily allocated
    std::function<void()> backward;
    bool requires_grad = false;
  };

  int push(Mat value, bool requires_grad, std::function<void()> back = nullptr);
  Mat& grad_ref(int id);
  void accum(int id, const Mat& g);
  bool wants(int id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }

}  // namespace seqtok
