#include "seqtok/alignment.hpp"

#include "seqtok/masks.hpp"

#include <cmath>

namespace seqtok {

AlignMode parse_align_mode(const std::string& name) {
  if (name == "none") return AlignMode::none;
  if (name == "direct") return AlignMode::direct;
  if (name == "substitution") return AlignMode::substitution;
  if (name == "implicit") return AlignMode::implicit;
  throw ConfigError("unknown alignment mode '" + name +
                    "' (expected none|direct|substitution|implicit)");
}

std::string align_mode_name(AlignMode mode) {
  switch (mode) {
    case AlignMode::none: return "none";
    case AlignMode::direct: return "direct";
    case AlignMode::substitution: return "substitution";
    case AlignMode::implicit: return "implicit";
  }
  return "none";
}

FrozenFeatureProvider::FrozenFeatureProvider(Eigen::Index image_size, Eigen::Index channels,
                                             Eigen::Index grid_side, Eigen::Index feat_dim,
                                             uint64_t seed)
    : image_size_(image_size),
      channels_(channels),
      grid_side_(grid_side),
      patch_(image_size / grid_side),
      feat_dim_(feat_dim),
      width_(64) {
  if (grid_side < 1 || image_size % grid_side != 0) {
    throw ConfigError("feature provider: image size not divisible into the grid");
  }
  Rng rng(seed);
  const Eigen::Index patch_dim = patch_ * patch_ * channels_;
  patch_embed_ = Linear::create(ps_, "vfm.patch_embed", patch_dim, width_, rng);
  pos_ = ps_.add("vfm.pos", randn<Scalar>(n_patches(), width_, rng, 0.02));
  for (int i = 0; i < 2; ++i) {
    blocks_.push_back(ViTBlock::create(ps_, "vfm.blk" + std::to_string(i), width_, 4, 2 * width_,
                                       rng));
  }
  norm_ = RmsNorm::create(ps_, "vfm.norm", width_);
  proj_ = Linear::create(ps_, "vfm.proj", width_, feat_dim_, rng);
}

Mat FrozenFeatureProvider::extract(const Mat& pixels, Eigen::Index batch) const {
  if (pixels.rows() != batch * image_size_ * image_size_ || pixels.cols() != channels_) {
    throw DimensionError("feature provider: pixel shape mismatch");
  }
  // Runs on a private tape; values only, backward is never invoked, so the
  // provider can never receive gradients.
  Tape t;
  Var img = t.input(pixels);
  Var patches = t.patchify_gather(img, batch, image_size_, image_size_, patch_);
  Var x = patch_embed_.apply(t, patches);
  x = t.add_block(x, t.input(pos_->value), n_patches());
  const MaskMat allow = MaskMat::Constant(n_patches(), n_patches(), true);
  for (const auto& block : blocks_) x = block.apply(t, x, allow, batch);
  x = norm_.apply(t, x);
  return proj_.apply(t, x).value();
}

Scalar FrozenFeatureProvider::weight_checksum() const {
  Scalar sum = 0;
  for (const auto& p : ps_.all()) sum += p->value.array().abs().sum();
  return sum;
}

std::pair<Eigen::Index, Eigen::Index> near_square_factor(Eigen::Index l) {
  if (l < 1) throw ConfigError("near_square_factor: length must be positive");
  for (Eigen::Index a = static_cast<Eigen::Index>(std::sqrt(static_cast<double>(l))); a >= 1;
       --a) {
    if (l % a == 0) {
      if (a == 1 && l > 3) {
        throw ConfigError("sequence length " + std::to_string(l) +
                          " is prime; direct alignment needs a near-square grid");
      }
      return {a, l / a};
    }
  }
  return {1, l};
}

Mat interpolate_grid(const Mat& y, Eigen::Index batch, Eigen::Index gh, Eigen::Index gw,
                     Eigen::Index th, Eigen::Index tw) {
  if (y.rows() != batch * gh * gw) throw DimensionError("interpolate_grid: row count mismatch");
  const Eigen::Index dim = y.cols();
  Mat out(batch * th * tw, dim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index ty = 0; ty < th; ++ty) {
      // align-corners: endpoints map to endpoints
      const Scalar sy = th == 1 ? 0 : static_cast<Scalar>(ty) * (gh - 1) / (th - 1);
      const Eigen::Index y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(sy), gh - 1);
      const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, gh - 1);
      const Scalar fy = sy - static_cast<Scalar>(y0);
      for (Eigen::Index tx = 0; tx < tw; ++tx) {
        const Scalar sx = tw == 1 ? 0 : static_cast<Scalar>(tx) * (gw - 1) / (tw - 1);
        const Eigen::Index x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(sx), gw - 1);
        const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, gw - 1);
        const Scalar fx = sx - static_cast<Scalar>(x0);
        const auto row = [&](Eigen::Index yy, Eigen::Index xx) {
          return y.row(b * gh * gw + yy * gw + xx);
        };
        out.row(b * th * tw + ty * tw + tx) =
            (1 - fy) * ((1 - fx) * row(y0, x0) + fx * row(y0, x1)) +
            fy * ((1 - fx) * row(y1, x0) + fx * row(y1, x1));
      }
    }
  }
  return out;
}

Mat interpolate_grid_to_sequence(const Mat& y, Eigen::Index batch, Eigen::Index grid_side,
                                 Eigen::Index l) {
  auto [th, tw] = near_square_factor(l);
  return interpolate_grid(y, batch, grid_side, grid_side, th, tw);
}

Var alignment_cosine_loss(Tape& t, const Mlp3& projector, Var hidden, const Mat& target) {
  if (hidden.rows() != target.rows()) {
    throw DimensionError("alignment loss: row count mismatch between hidden states and features");
  }
  Var projected = projector.apply(t, hidden);
  return t.scale(t.cosine_rows_mean(projected, t.input(target)), -1.0);
}

Var substitute_patches(Tape& t, const Mlp3& mlp, const Mat& y) {
  return mlp.apply(t, t.input(y));
}

Mat pooled_features(const FrozenFeatureProvider& provider, const Mat& pixels, Eigen::Index batch) {
  const Mat y = provider.extract(pixels, batch);
  const Eigen::Index n = provider.n_patches();
  Mat pooled(batch, y.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    pooled.row(b) = y.middleRows(b * n, n).colwise().mean();
  }
  return pooled;
}

}  // namespace seqtok
