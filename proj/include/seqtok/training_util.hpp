#pragma once

#include "seqtok/types.hpp"

#include <vector>

namespace seqtok {

// lr_min + 0.5*(lr0 - lr_min)*(1 + cos(pi*step/total)).
Scalar cosine_lr(long long step, long long total_steps, Scalar lr0, Scalar lr_min);

// With probability 1 - p_apply keep the full length L; otherwise draw the
// prefix uniformly from {1..L}.
Eigen::Index nested_dropout_sample(Eigen::Index l, Scalar p_apply, Rng& rng);

// Independently replace each label by `null_class` with probability `ratio`.
std::vector<int> class_dropout(const std::vector<int>& labels, Scalar ratio, int null_class,
                               Rng& rng);

// Deterministic per-step RNG: training-time randomness is a pure function of
// (seed, step, stream tag), so resume-from-checkpoint needs no RNG state.
Rng step_rng(uint64_t seed, long long step, uint64_t stream);

}  // namespace seqtok
