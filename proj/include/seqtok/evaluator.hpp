#pragma once

#include "seqtok/ar_sampler.hpp"
#include "seqtok/metrics.hpp"
#include "seqtok/trainer.hpp"

namespace seqtok {

struct ReconMetrics {
  Scalar psnr = 0;
  Scalar ssim = 0;
  Scalar perceptual = 0;
  Scalar rfid = 0;  // Frechet distance, real vs reconstructed frozen features
  bool regularized = false;
};

struct GenMetrics {
  Scalar gfid = 0;  // Frechet distance, real vs sampled frozen features
  Scalar class_coverage = 0;
  std::vector<long long> class_counts;  // nearest-centroid assignments per class
  bool regularized = false;
};

struct PrefixCurve {
  std::vector<Eigen::Index> prefixes;  // 1..L
  std::vector<Scalar> psnr;
  std::vector<Scalar> mse;
};

// Held-out evaluation passes. All methods are read-only over the bundle:
// forward tapes only, no backward, no parameter writes.
class Evaluator {
 public:
  explicit Evaluator(const TrainConfig& cfg);

  ReconMetrics eval_reconstruction(const ModelBundle& bundle, const Dataset& ds) const;

  // Samples cfg.fid_samples sequences round-robin over classes, decodes them,
  // and scores against real validation features. Coverage assigns each sample
  // to the nearest real class centroid in feature space.
  GenMetrics eval_generation(const ModelBundle& bundle, const Dataset& ds,
                             GuidanceSpec guidance, uint64_t seed) const;

  // Reconstruction quality decoded from every prefix length 1..L.
  PrefixCurve prefix_sweep(const ModelBundle& bundle, const Dataset& ds,
                           Eigen::Index max_items) const;

  CollapseReport collapse(const ModelBundle& bundle, const Dataset& ds) const;

  const FrozenFeatureProvider& extractor() const { return extractor_; }

 private:
  TrainConfig cfg_;
  FrozenFeatureProvider extractor_;
  PerceptualNet perceptual_;
};

}  // namespace seqtok
