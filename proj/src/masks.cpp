#include "seqtok/masks.hpp"

namespace seqtok {

MaskMat build_hybrid_mask(Eigen::Index n_patches, Eigen::Index n_queries, MaskSide side) {
  if (n_patches < 1 || n_queries < 1) {
    throw DimensionError("build_hybrid_mask: sizes must be positive");
  }
  const Eigen::Index n = n_patches, l = n_queries, total = n + l;
  MaskMat allow = MaskMat::Constant(total, total, false);
  if (side == MaskSide::encoder) {
    // order [patches, queries]
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) allow(r, c) = true;
    }
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index c = 0; c < n; ++c) allow(n + i, c) = true;
      for (Eigen::Index j = 0; j <= i; ++j) allow(n + i, n + j) = true;
    }
  } else {
    // order [queries, patches]
    for (Eigen::Index i = 0; i < l; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) allow(i, j) = true;
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < total; ++c) allow(l + r, c) = true;
    }
  }
  return allow;
}

MaskMat causal_mask(Eigen::Index t) {
  if (t < 1) throw DimensionError("causal_mask: size must be positive");
  MaskMat allow = MaskMat::Constant(t, t, false);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) allow(i, j) = true;
  }
  return allow;
}

}  // namespace seqtok
