#pragma once

#include "seqtok/nn.hpp"

#include <string>
#include <utility>

namespace seqtok {

enum class AlignMode { none, direct, substitution, implicit };

AlignMode parse_align_mode(const std::string& name);
std::string align_mode_name(AlignMode mode);

// Frozen deterministic feature provider: a small randomly-initialized ViT
// whose parameters are fixed at construction and never optimized. Output is
// one feature row per patch on a square grid.
class FrozenFeatureProvider {
 public:
  FrozenFeatureProvider(Eigen::Index image_size, Eigen::Index channels, Eigen::Index grid_side,
                        Eigen::Index feat_dim, uint64_t seed);

  // pixels: (B*H*W) x C. Returns (B*N_f) x D_f; no gradients attach.
  Mat extract(const Mat& pixels, Eigen::Index batch) const;

  Eigen::Index grid_side() const { return grid_side_; }
  Eigen::Index n_patches() const { return grid_side_ * grid_side_; }
  Eigen::Index feat_dim() const { return feat_dim_; }
  // Fingerprint of the frozen weights, for the gradient-isolation check.
  Scalar weight_checksum() const;

 private:
  Eigen::Index image_size_, channels_, grid_side_, patch_, feat_dim_, width_;
  ParamSet ps_;
  Linear patch_embed_;
  Param* pos_ = nullptr;
  std::vector<ViTBlock> blocks_;
  RmsNorm norm_;
  Linear proj_;
};

// Near-square factorization a*b = l with a <= b and a maximal. Throws
// ConfigError when l is prime (1 x l is not a usable grid) unless l <= 3.
std::pair<Eigen::Index, Eigen::Index> near_square_factor(Eigen::Index l);

// Bilinear resample of a (gh x gw) feature grid to (th x tw), align-corners
// convention, applied per batch item. y is (B*gh*gw) x D_f row-major per
// grid; output is (B*th*tw) x D_f.
Mat interpolate_grid(const Mat& y, Eigen::Index batch, Eigen::Index gh, Eigen::Index gw,
                     Eigen::Index th, Eigen::Index tw);

// Square-grid features resampled to an L-token sequence via the near-square
// factorization of L.
Mat interpolate_grid_to_sequence(const Mat& y, Eigen::Index batch, Eigen::Index grid_side,
                                 Eigen::Index l);

// All three cosine alignment losses share this form:
// -mean over rows of cos(proj(h_row), y_row).
Var alignment_cosine_loss(Tape& t, const Mlp3& projector, Var hidden, const Mat& target);

// Direct substitution: learnable MLP mapping frozen features to patch tokens,
// used in place of the pixel patch embedding.
Var substitute_patches(Tape& t, const Mlp3& mlp, const Mat& y);

// Per-image feature vector: provider features mean-pooled over the grid.
// Returns B x D_f; used by the Frechet-style image set distances.
Mat pooled_features(const FrozenFeatureProvider& provider, const Mat& pixels, Eigen::Index batch);

}  // namespace seqtok
