#include "seqtok/metrics.hpp"

#include "seqtok/quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace seqtok {

namespace {

// Eigendecomposition of a symmetric matrix with negative eigenvalues clipped
// to zero. Returns false when the solver does not converge.
bool eigh_clipped(const Mat& m, Vec& evals, Mat& evecs) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(m);
  if (solver.info() != Eigen::Success) return false;
  evals = solver.eigenvalues().cwiseMax(0.0);
  evecs = solver.eigenvectors();
  return evals.allFinite() && evecs.allFinite();
}

bool sqrtm_psd(const Mat& m, Mat& out) {
  Vec evals;
  Mat evecs;
  if (!eigh_clipped(m, evals, evecs)) return false;
  out = evecs * evals.cwiseSqrt().asDiagonal() * evecs.transpose();
  return true;
}

// Trace of the PSD square root, i.e. the sum of clipped sqrt-eigenvalues.
bool trace_sqrtm(const Mat& m, Scalar& out) {
  Vec evals;
  Mat evecs;
  if (!eigh_clipped(m, evals, evecs)) return false;
  out = evals.cwiseSqrt().sum();
  return true;
}

bool frechet_attempt(const Vec& mu1, const Mat& s1, const Vec& mu2, const Mat& s2, Scalar& out) {
  Mat a;
  if (!sqrtm_psd(s1, a)) return false;
  Scalar tr_cross;
  if (!trace_sqrtm(a * s2 * a, tr_cross)) return false;
  out = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_cross;
  return std::isfinite(out);
}

}  // namespace

FeatureStatistics::FeatureStatistics(Eigen::Index dim)
    : dim_(dim), sum_(Vec::Zero(dim)), outer_sum_(Mat::Zero(dim, dim)) {
  if (dim < 1) throw DimensionError("FeatureStatistics: dim must be positive");
}

void FeatureStatistics::add(const Vec& x) {
  if (x.size() != dim_) throw DimensionError("FeatureStatistics: sample dim mismatch");
  sum_ += x;
  outer_sum_ += x * x.transpose();
  ++count_;
}

void FeatureStatistics::add_rows(const Mat& rows) {
  if (rows.cols() != dim_) throw DimensionError("FeatureStatistics: sample dim mismatch");
  sum_ += rows.colwise().sum().transpose();
  outer_sum_ += rows.transpose() * rows;
  count_ += rows.rows();
}

Vec FeatureStatistics::mean() const {
  if (count_ < 1) throw DegenerateInputError("FeatureStatistics: no samples");
  return sum_ / static_cast<Scalar>(count_);
}

Mat FeatureStatistics::covariance() const {
  if (count_ < 2) throw DegenerateInputError("FeatureStatistics: need >= 2 samples");
  const Scalar n = static_cast<Scalar>(count_);
  Vec mu = mean();
  Mat cov = (outer_sum_ - n * mu * mu.transpose()) / (n - 1.0);
  return 0.5 * (cov + cov.transpose());  // enforce exact symmetry
}

FrechetResult frechet_distance(const Vec& mu1, const Mat& sigma1, const Vec& mu2,
                               const Mat& sigma2) {
  if (mu1.size() != mu2.size() || sigma1.rows() != sigma2.rows()) {
    throw DimensionError("frechet_distance: dimension mismatch");
  }
  FrechetResult result;
  if (frechet_attempt(mu1, sigma1, mu2, sigma2, result.distance)) {
    result.distance = std::max(result.distance, Scalar(0));
    return result;
  }
  const Scalar eps = 1e-6;
  Mat eye = Mat::Identity(sigma1.rows(), sigma1.cols());
  result.regularized = true;
  if (frechet_attempt(mu1, sigma1 + eps * eye, mu2, sigma2 + eps * eye, result.distance)) {
    result.distance = std::max(result.distance, Scalar(0));
    return result;
  }
  throw DegenerateInputError("frechet_distance: square root failed even with regularization");
}

FrechetResult frechet_distance(const FeatureStatistics& a, const FeatureStatistics& b) {
  return frechet_distance(a.mean(), a.covariance(), b.mean(), b.covariance());
}

Scalar psnr(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("psnr: shape mismatch");
  }
  const Scalar mse = (a - b).squaredNorm() / static_cast<Scalar>(a.size());
  if (mse <= 0) return 100.0;
  return std::min(Scalar(100), Scalar(10) * std::log10(Scalar(4) / mse));
}

Scalar ssim(const Mat& a, const Mat& b, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
            Eigen::Index window) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("ssim: shape mismatch");
  if (a.rows() != batch * h * w) throw DimensionError("ssim: rows != batch*h*w");
  if (window > h || window > w) throw DimensionError("ssim: window larger than image");
  const Eigen::Index channels = a.cols();
  const Scalar c1 = 4e-4;    // (0.01 * range)^2, range = 2
  const Scalar c2 = 3.6e-3;  // (0.03 * range)^2
  const Scalar n = static_cast<Scalar>(window * window);

  Scalar total = 0;
  long long windows = 0;
  for (Eigen::Index item = 0; item < batch; ++item) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      for (Eigen::Index y0 = 0; y0 + window <= h; ++y0) {
        for (Eigen::Index x0 = 0; x0 + window <= w; ++x0) {
          Scalar sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
          for (Eigen::Index dy = 0; dy < window; ++dy) {
            for (Eigen::Index dx = 0; dx < window; ++dx) {
              const Eigen::Index row = item * h * w + (y0 + dy) * w + (x0 + dx);
              const Scalar va = a(row, c), vb = b(row, c);
              sa += va;
              sb += vb;
              saa += va * va;
              sbb += vb * vb;
              sab += va * vb;
            }
          }
          const Scalar mu_a = sa / n, mu_b = sb / n;
          const Scalar var_a = (saa - n * mu_a * mu_a) / (n - 1);
          const Scalar var_b = (sbb - n * mu_b * mu_b) / (n - 1);
          const Scalar cov = (sab - n * mu_a * mu_b) / (n - 1);
          const Scalar score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
          total += score;
          ++windows;
        }
      }
    }
  }
  return total / static_cast<Scalar>(windows);
}

namespace {

// Basis of the top-k principal components of the rows of x.
void pca_basis(const Mat& x, Eigen::Index k, Vec& col_mean, Mat& basis) {
  col_mean = x.colwise().mean().transpose();
  Mat centered = x.rowwise() - col_mean.transpose();
  Mat cov = centered.transpose() * centered / std::max<Scalar>(1, static_cast<Scalar>(x.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateInputError("pca: eigensolver failed");
  basis = Mat::Zero(x.cols(), k);
  const Eigen::Index avail = std::min(k, x.cols());
  for (Eigen::Index j = 0; j < avail; ++j) {
    // eigenvalues ascend; take from the back
    Vec v = solver.eigenvectors().col(x.cols() - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(j) = v;
  }
}

Mat l2_normalized_rows(const Mat& x) {
  Mat out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Scalar norm = out.row(r).norm();
    if (norm > 1e-12) out.row(r) /= norm;
  }
  return out;
}

}  // namespace

Mat pca_project(const Mat& x, Eigen::Index k) {
  if (x.rows() < 2) throw DegenerateInputError("pca_project: need >= 2 rows");
  Vec mean;
  Mat basis;
  pca_basis(x, k, mean, basis);
  return (x.rowwise() - mean.transpose()) * basis;
}

CollapseReport build_collapse_report(const std::vector<int>& ids, const Mat& codebook,
                                     const Mat& latent_sample) {
  CollapseReport report;
  const Eigen::Index k = codebook.rows();
  report.histogram.assign(static_cast<std::size_t>(k), 0);
  for (int id : ids) {
    if (id < 0 || id >= k) throw DimensionError("collapse report: id out of range");
    ++report.histogram[static_cast<std::size_t>(id)];
  }
  report.total_tokens = static_cast<long long>(ids.size());
  report.usage = code_usage_from_counts(report.histogram, report.total_tokens);
  long long top = 0;
  for (long long c : report.histogram) top = std::max(top, c);
  report.top1_share = static_cast<Scalar>(top) / static_cast<Scalar>(report.total_tokens);

  // One shared basis (from the normalized codebook) so code and latent clouds
  // are comparable in the same coordinates.
  Mat cb_norm = l2_normalized_rows(codebook);
  Vec mean;
  Mat basis;
  pca_basis(cb_norm, 3, mean, basis);
  report.codebook_pca = (cb_norm.rowwise() - mean.transpose()) * basis;
  if (latent_sample.rows() > 0) {
    Mat lat_norm = l2_normalized_rows(latent_sample);
    report.latent_pca = (lat_norm.rowwise() - mean.transpose()) * basis;
  }
  return report;
}

}  // namespace seqtok
