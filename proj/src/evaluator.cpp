#include "seqtok/evaluator.hpp"

#include <algorithm>
#include <cmath>

namespace seqtok {

Evaluator::Evaluator(const TrainConfig& cfg)
    : cfg_(cfg),
      extractor_(cfg.image_size, cfg.channels, cfg.image_size / cfg.patch_size, cfg.feat_dim,
                 static_cast<uint64_t>(cfg.extractor_seed)),
      perceptual_(cfg.channels, static_cast<uint64_t>(cfg.perceptual_seed)) {}

ReconMetrics Evaluator::eval_reconstruction(const ModelBundle& bundle, const Dataset& ds) const {
  const Eigen::Index h = cfg_.image_size;
  const Eigen::Index chunk = cfg_.eval_batch;
  const Eigen::Index count = ds.val_size();

  ReconMetrics rm;
  FeatureStatistics real_stats(extractor_.feat_dim()), fake_stats(extractor_.feat_dim());
  Scalar psnr_sum = 0, ssim_sum = 0, perc_sum = 0;
  for (Eigen::Index start = 0; start < count; start += chunk) {
    const Eigen::Index take = std::min(chunk, count - start);
    const ImageBatch b = ds.val_batch(start, take);
    auto [ids, z] = bundle.encode_ids(b.pixels, take);
    const Mat recon = bundle.decode_ids(ids, take);

    psnr_sum += psnr(recon, b.pixels) * Scalar(take);
    ssim_sum += ssim(recon, b.pixels, take, h, h) * Scalar(take);
    {
      Tape t;
      Var d = perceptual_.distance(t, t.input(recon), t.input(b.pixels), take, h, h);
      perc_sum += d.value()(0, 0) * Scalar(take);
    }
    real_stats.add_rows(pooled_features(extractor_, b.pixels, take));
    fake_stats.add_rows(pooled_features(extractor_, recon, take));
  }
  rm.psnr = psnr_sum / Scalar(count);
  rm.ssim = ssim_sum / Scalar(count);
  rm.perceptual = perc_sum / Scalar(count);
  const FrechetResult fr = frechet_distance(real_stats, fake_stats);
  rm.rfid = fr.distance;
  rm.regularized = fr.regularized;
  return rm;
}

GenMetrics Evaluator::eval_generation(const ModelBundle& bundle, const Dataset& ds,
                                      GuidanceSpec guidance, uint64_t seed) const {
  if (guidance.kind == GuidanceSpec::Kind::autoguide && guidance.aux == nullptr) {
    guidance.aux = bundle.aux.get();
  }
  const Eigen::Index chunk = cfg_.eval_batch;
  const Eigen::Index classes = cfg_.num_classes;
  const Eigen::Index dim = extractor_.feat_dim();

  // Real-side statistics and per-class centroids.
  FeatureStatistics real_stats(dim);
  Mat centroid_sum = Mat::Zero(classes, dim);
  std::vector<long long> centroid_n(static_cast<size_t>(classes), 0);
  for (Eigen::Index start = 0; start < ds.val_size(); start += chunk) {
    const Eigen::Index take = std::min(chunk, ds.val_size() - start);
    const ImageBatch b = ds.val_batch(start, take);
    const Mat f = pooled_features(extractor_, b.pixels, take);
    real_stats.add_rows(f);
    for (Eigen::Index i = 0; i < take; ++i) {
      centroid_sum.row(b.labels[i]) += f.row(i);
      ++centroid_n[b.labels[i]];
    }
  }
  Mat centroids(classes, dim);
  for (Eigen::Index c = 0; c < classes; ++c) {
    centroids.row(c) = centroid_n[c] > 0 ? Mat(centroid_sum.row(c) / Scalar(centroid_n[c]))
                                         : Mat(Mat::Zero(1, dim));
  }

  GenMetrics gm;
  gm.class_counts.assign(static_cast<size_t>(classes), 0);
  FeatureStatistics fake_stats(dim);
  const Eigen::Index samples = cfg_.fid_samples;
  Eigen::Index done = 0;
  while (done < samples) {
    const Eigen::Index take = std::min(chunk, samples - done);
    std::vector<int> labels(static_cast<size_t>(take));
    for (Eigen::Index i = 0; i < take; ++i) labels[i] = static_cast<int>((done + i) % classes);
    SampleOptions opts;
    opts.guidance = guidance;
    opts.seed = seed + static_cast<uint64_t>(done);
    const std::vector<int> ids = sample_ids(*bundle.ar, labels, opts);
    const Mat pixels = bundle.decode_ids(ids, take);
    const Mat f = pooled_features(extractor_, pixels, take);
    fake_stats.add_rows(f);
    for (Eigen::Index i = 0; i < take; ++i) {
      Eigen::Index best = 0;
      Scalar best_d = (f.row(i) - centroids.row(0)).squaredNorm();
      for (Eigen::Index c = 1; c < classes; ++c) {
        const Scalar d = (f.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      ++gm.class_counts[best];
    }
    done += take;
  }
  const FrechetResult fr = frechet_distance(real_stats, fake_stats);
  gm.gfid = fr.distance;
  gm.regularized = fr.regularized;
  long long covered = 0;
  for (long long n : gm.class_counts) covered += (n > 0) ? 1 : 0;
  gm.class_coverage = Scalar(covered) / Scalar(classes);
  return gm;
}

PrefixCurve Evaluator::prefix_sweep(const ModelBundle& bundle, const Dataset& ds,
                                    Eigen::Index max_items) const {
  const Eigen::Index l = bundle.tokenizer->config().num_queries;
  const Eigen::Index take = std::min(max_items, ds.val_size());
  const ImageBatch b = ds.val_batch(0, take);
  auto [ids, z] = bundle.encode_ids(b.pixels, take);

  PrefixCurve curve;
  for (Eigen::Index prefix = 1; prefix <= l; ++prefix) {
    const Mat recon = bundle.decode_ids(ids, take, prefix);
    curve.prefixes.push_back(prefix);
    curve.psnr.push_back(psnr(recon, b.pixels));
    curve.mse.push_back((recon - b.pixels).array().square().mean());
  }
  return curve;
}

CollapseReport Evaluator::collapse(const ModelBundle& bundle, const Dataset& ds) const {
  const Eigen::Index chunk = cfg_.eval_batch;
  const Eigen::Index count = ds.val_size();
  std::vector<int> all_ids;
  Mat latents;
  Eigen::Index latent_rows = 0;
  const Eigen::Index max_latent_rows = 1024;
  for (Eigen::Index start = 0; start < count; start += chunk) {
    const Eigen::Index take = std::min(chunk, count - start);
    const ImageBatch b = ds.val_batch(start, take);
    auto [ids, z] = bundle.encode_ids(b.pixels, take);
    all_ids.insert(all_ids.end(), ids.begin(), ids.end());
    if (latent_rows < max_latent_rows) {
      const Eigen::Index keep = std::min(z.rows(), max_latent_rows - latent_rows);
      latents.conservativeResize(latent_rows + keep, z.cols());
      latents.bottomRows(keep) = z.topRows(keep);
      latent_rows += keep;
    }
  }
  return build_collapse_report(all_ids, bundle.quantizer->codebook().value, latents);
}

}  // namespace seqtok
