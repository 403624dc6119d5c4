#pragma once

#include "seqtok/masks.hpp"
#include "seqtok/nn.hpp"
#include "seqtok/quantizer.hpp"

#include <string>
#include <vector>

namespace seqtok {

struct ARConfig {
  Eigen::Index layers = 3;
  Eigen::Index heads = 4;
  Eigen::Index width = 128;       // D_ar
  Eigen::Index vocab = 64;        // K, must equal quantizer codebook size
  Eigen::Index seq_len = 16;      // L
  Eigen::Index num_classes = 8;   // class index num_classes is the null class
  Eigen::Index code_dim = 16;     // d, for pred_z_q

  void validate() const;
};

// Transformer block with shared global AdaLN modulation: the conditioning
// signal supplies (shift, scale, gate) pairs for both sublayers; each block
// adds its own learnable bias to the shared signal. Gates are zero at init so
// blocks start as identities.
struct ArBlock {
  RmsNorm norm1, norm2;
  MultiheadAttention attn;
  SwiGluMlp mlp;
  Param* ada_bias = nullptr;  // 1 x 6D

  static ArBlock create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                        Eigen::Index heads, Rng& rng);
  // mod_shared is B x 6D (one conditioning row per batch item).
  Var apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch, Var mod_shared,
            Eigen::Index tokens_per_item) const;
};

struct ARForward {
  Var logits;    // (B*L) x K, position t predicts token t
  Var ind_hat;   // straight-through soft one-hot over codes
  Var pred_z_q;  // (B*L) x d
  std::vector<int> pred_ids;
};

// Class-conditioned causal transformer over code indices. Teacher-forcing
// input is [class start token, soft_embed(Ind)[0..L-2]]; conditioning flows
// through both the start token and the AdaLN modulation.
class ARModel {
 public:
  ARModel(ParamSet& ps, const std::string& prefix, const ARConfig& config, Rng& rng);

  // ind: (B*L) x K soft one-hots (straight-through or plain probabilities).
  Var teacher_logits(Tape& t, Var ind, const std::vector<int>& labels) const;
  ARForward forward_teacher_forcing(Tape& t, Var ind, const std::vector<int>& labels,
                                    Param& codebook) const;

  const ARConfig& config() const { return config_; }

  // Exposed for the inference-path sampler.
  const Param& embed() const { return *embed_; }
  const Param& class_emb() const { return *class_emb_; }
  const Param& pos() const { return *pos_; }
  const Linear& adaln() const { return adaln_; }
  const std::vector<ArBlock>& blocks() const { return blocks_; }
  const RmsNorm& final_norm() const { return final_norm_; }
  const Linear& head() const { return head_; }

  void check_labels(const std::vector<int>& labels) const;

 private:
  ARConfig config_;
  Param* embed_ = nullptr;      // K x D
  Param* class_emb_ = nullptr;  // (num_classes+1) x D
  Param* pos_ = nullptr;        // L x D
  Linear adaln_;                // D -> 6D, zero-init
  std::vector<ArBlock> blocks_;
  RmsNorm final_norm_;
  Linear head_;  // D -> K
};

// Mean cross-entropy of logits[t] against ids[t]; the NTP objective.
Var ntp_loss(Tape& t, Var logits, const std::vector<int>& ids);

// ell_u + s * (ell_c - ell_u).
Mat guidance_combine(const Mat& ell_u, const Mat& ell_c, Scalar s);

// Fraction of positions where argmax(logits[t]) == ids[t].
Scalar ar_accuracy(const Mat& logits, const std::vector<int>& ids);

}  // namespace seqtok
