#include "seqtok/training_util.hpp"

#include <cmath>

namespace seqtok {

Scalar cosine_lr(long long step, long long total_steps, Scalar lr0, Scalar lr_min) {
  if (step < 0 || step > total_steps || total_steps <= 0) {
    throw ConfigError("cosine_lr: step out of range");
  }
  const Scalar phase = M_PI * static_cast<Scalar>(step) / static_cast<Scalar>(total_steps);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

Eigen::Index nested_dropout_sample(Eigen::Index l, Scalar p_apply, Rng& rng) {
  if (l < 1) throw ConfigError("nested_dropout_sample: L must be positive");
  if (p_apply < 0 || p_apply > 1) throw ConfigError("nested_dropout_sample: p outside [0,1]");
  std::uniform_real_distribution<Scalar> coin(0.0, 1.0);
  if (coin(rng) >= p_apply) return l;
  std::uniform_int_distribution<Eigen::Index> pick(1, l);
  return pick(rng);
}

std::vector<int> class_dropout(const std::vector<int>& labels, Scalar ratio, int null_class,
                               Rng& rng) {
  if (ratio < 0 || ratio > 1) throw ConfigError("class_dropout: ratio outside [0,1]");
  std::uniform_real_distribution<Scalar> coin(0.0, 1.0);
  std::vector<int> out = labels;
  for (int& label : out) {
    // ratio 0 must never substitute, ratio 1 always must; coin < ratio gives both.
    if (coin(rng) < ratio) label = null_class;
  }
  return out;
}

Rng step_rng(uint64_t seed, long long step, uint64_t stream) {
  // splitmix64 over the packed identity gives independent, reproducible streams
  uint64_t x = seed * 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(step) * 0xBF58476D1CE4E5B9ull +
               stream * 0x94D049BB133111EBull + 0xA24BAED4963EE407ull;
  auto mix = [](uint64_t v) {
    v ^= v >> 30;
    v *= 0xBF58476D1CE4E5B9ull;
    v ^= v >> 27;
    v *= 0x94D049BB133111EBull;
    v ^= v >> 31;
    return v;
  };
  return Rng(mix(mix(x)));
}

}  // namespace seqtok
