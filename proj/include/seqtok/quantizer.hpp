#pragma once

#include "seqtok/nn.hpp"

#include <utility>
#include <vector>

namespace seqtok {

// Bundle produced by one quantization pass over a (B*L) x d latent tensor.
// `ind` carries the straight-through soft one-hot: its value is exactly
// onehot(ids) while its gradient follows the softmax path.
struct QuantizedLatent {
  Var z;
  Var logits;
  Var p;
  Var ind;
  Var z_q;
  std::vector<int> ids;
};

// Straight-through selection: value(ind) = onehot(argmax p) exactly,
// gradient of ind equals gradient of p. Ties break toward the lowest index.
std::pair<Var, std::vector<int>> straight_through_onehot(Tape& t, Var p);

// Cosine-similarity quantizer over a learnable codebook with softmax indices
// backpropagated straight through the hard selection.
class Quantizer {
 public:
  Quantizer(ParamSet& ps, Eigen::Index codebook_size, Eigen::Index code_dim, Scalar temperature,
            Rng& rng);

  // z is (B*L) x d. logits_k = cos(z_row, C_k) / tau.
  QuantizedLatent quantize(Tape& t, Var z) const;

  // mean((z - stopgrad(z_q))^2); gradient reaches z only.
  static Var commitment_loss(Tape& t, Var z, Var z_q);

  // E[H(p_row)] - H(mean_row(p)): low per-token entropy, high aggregate
  // diversity. Zero for uniform rows and for identical one-hots; -ln K when
  // rows are distinct one-hots covering the codebook.
  static Var entropy_loss(Tape& t, Var p);

  Param& codebook() { return *codebook_; }
  const Param& codebook() const { return *codebook_; }
  Eigen::Index codebook_size() const { return codebook_->value.rows(); }
  Eigen::Index code_dim() const { return codebook_->value.cols(); }
  Scalar temperature() const { return tau_; }

 private:
  Param* codebook_ = nullptr;
  Scalar tau_;
};

// Fraction of the K codes whose empirical frequency in `ids` exceeds 0.05/K.
Scalar code_usage(const std::vector<int>& ids, Eigen::Index k);
Scalar code_usage_from_counts(const std::vector<long long>& counts, long long total);

}  // namespace seqtok
