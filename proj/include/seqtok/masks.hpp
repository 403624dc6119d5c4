#pragma once

#include "seqtok/types.hpp"

namespace seqtok {

enum class MaskSide { encoder, decoder };

// Attention layout for the hybrid sequence: bidirectional among patch tokens,
// causal along query tokens.
//   encoder order [patches, queries]: patch rows attend only patch columns;
//     query row i attends all patch columns and query columns j <= i.
//   decoder order [queries, patches]: query row i attends query columns j <= i
//     only; patch rows attend everything.
MaskMat build_hybrid_mask(Eigen::Index n_patches, Eigen::Index n_queries, MaskSide side);

// Strictly causal T x T mask: row t attends columns <= t.
MaskMat causal_mask(Eigen::Index t);

}  // namespace seqtok
