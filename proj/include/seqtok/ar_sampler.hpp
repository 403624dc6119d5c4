#pragma once

#include "seqtok/ar_model.hpp"

namespace seqtok {

struct GuidanceSpec {
  enum class Kind { none, cfg, autoguide };
  Kind kind = Kind::none;
  Scalar scale = 1.0;
  const ARModel* aux = nullptr;  // required for autoguide
};

struct SampleOptions {
  Scalar temperature = 1.0;
  bool greedy = false;
  GuidanceSpec guidance;
  uint64_t seed = 0;
};

// Left-to-right sampling with a per-session KV cache. Returns ids flattened
// batch-major: ids[b*L + t]. One uniform draw per (step, item) in that order;
// greedy mode draws nothing.
std::vector<int> sample_ids(const ARModel& model, const std::vector<int>& labels,
                            const SampleOptions& options);

// Reference path: full forward recomputation at every step, no cache. Must
// match sample_ids token-for-token.
std::vector<int> sample_ids_uncached(const ARModel& model, const std::vector<int>& labels,
                                     const SampleOptions& options);

// Teacher-forcing logits for hard ids without a tape (inference path); ids
// are batch-major (B*L). Used by evaluation and by the uncached sampler.
Mat ar_eval_teacher_logits(const ARModel& model, const std::vector<int>& ids,
                           const std::vector<int>& labels);

}  // namespace seqtok
