#pragma once

#include "seqtok/types.hpp"

#include <vector>

namespace seqtok {

// Order-independent streaming mean/covariance accumulator (unbiased).
class FeatureStatistics {
 public:
  explicit FeatureStatistics(Eigen::Index dim);

  void add(const Vec& x);
  void add_rows(const Mat& rows);  // one sample per row

  Eigen::Index dim() const { return dim_; }
  long long count() const { return count_; }
  Vec mean() const;
  Mat covariance() const;  // unbiased; requires count >= 2

 private:
  Eigen::Index dim_;
  long long count_ = 0;
  Vec sum_;
  Mat outer_sum_;
};

struct FrechetResult {
  Scalar distance = 0;
  bool regularized = false;  // true when the sqrt needed an eps*I fallback
};

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2*sqrt(sqrt(S1) S2 sqrt(S1))).
// Negative eigenvalues are clipped at 0; a failed eigensolve retries with
// eps*I (eps = 1e-6) added to both covariances and sets `regularized`.
FrechetResult frechet_distance(const Vec& mu1, const Mat& sigma1, const Vec& mu2,
                               const Mat& sigma2);
FrechetResult frechet_distance(const FeatureStatistics& a, const FeatureStatistics& b);

// Pixels in [-1, 1]: PSNR = 10*log10(4 / MSE), capped at 100 dB.
Scalar psnr(const Mat& a, const Mat& b);

// Mean SSIM over valid (un-padded) windows with uniform weighting, averaged
// over channels and batch items. Images are (B*H*W) x C.
Scalar ssim(const Mat& a, const Mat& b, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
            Eigen::Index window = 7);

// Principal-component projection: rows of x are centered and projected onto
// the top `k` eigenvectors of their covariance (descending eigenvalue order,
// sign fixed so each component's largest-magnitude loading is positive).
Mat pca_project(const Mat& x, Eigen::Index k);

struct CollapseReport {
  std::vector<long long> histogram;  // K bins, sums to total token count
  long long total_tokens = 0;
  Scalar usage = 0;       // fraction of codes above the 5%/K frequency threshold
  Scalar top1_share = 0;  // frequency of the most common code
  Mat codebook_pca;       // K x 3, from l2-normalized codebook rows
  Mat latent_pca;         // sampled latent tokens in the same basis
};

CollapseReport build_collapse_report(const std::vector<int>& ids, const Mat& codebook,
                                     const Mat& latent_sample);

}  // namespace seqtok
