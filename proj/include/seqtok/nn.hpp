#pragma once

#include "seqtok/tape.hpp"

#include <memory>
#include <string>
#include <vector>

namespace seqtok {

// Owns the parameters of one model component. Registration order is stable
// and defines the checkpoint layout.
class ParamSet {
 public:
  Param* add(const std::string& name, Mat init);
  Param* find(const std::string& name);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  void collect(std::vector<Param*>& out) const;
  Eigen::Index total_size() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

struct Linear {
  Param* w = nullptr;
  Param* b = nullptr;

  static Linear create(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                       Rng& rng, bool zero_init = false);
  Var apply(Tape& t, Var x) const;
  Mat apply_eval(const Mat& x) const;  // inference path, no tape
};

struct RmsNorm {
  Param* gain = nullptr;

  static RmsNorm create(ParamSet& ps, const std::string& name, Eigen::Index dim);
  Var apply(Tape& t, Var x) const;
  Mat apply_eval(const Mat& x) const;
};

struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  Eigen::Index heads = 1;

  static MultiheadAttention create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                                   Eigen::Index heads, Rng& rng);
  Var apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch) const;
};

// Pre-norm ViT block: x += attn(norm(x)); x += mlp(norm(x)) with a SiLU MLP.
struct ViTBlock {
  RmsNorm norm1, norm2;
  MultiheadAttention attn;
  Linear fc1, fc2;

  static ViTBlock create(ParamSet& ps, const std::string& name, Eigen::Index dim, Eigen::Index heads,
                         Eigen::Index mlp_hidden, Rng& rng);
  Var apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch) const;
};

struct SwiGluMlp {
  Linear gate, up, down;

  static SwiGluMlp create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                          Eigen::Index hidden, Rng& rng);
  Var apply(Tape& t, Var x) const;
  Mat apply_eval(const Mat& x) const;
};

struct Conv2dLayer {
  Param* w = nullptr;
  Param* b = nullptr;
  Eigen::Index ksize = 3, stride = 1, pad = 1;

  static Conv2dLayer create(ParamSet& ps, const std::string& name, Eigen::Index cin, Eigen::Index cout,
                            Eigen::Index ksize, Eigen::Index stride, Eigen::Index pad, Rng& rng);
  Var apply(Tape& t, Var x, Eigen::Index batch, Eigen::Index h, Eigen::Index w) const;
  Eigen::Index out_h(Eigen::Index h) const { return (h + 2 * pad - ksize) / stride + 1; }
  Eigen::Index out_w(Eigen::Index w) const { return (w + 2 * pad - ksize) / stride + 1; }
};

// Three-layer MLP with SiLU, used by the alignment projectors.
struct Mlp3 {
  Linear l1, l2, l3;

  static Mlp3 create(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                     Eigen::Index out, Rng& rng);
  Var apply(Tape& t, Var x) const;
};

}  // namespace seqtok
