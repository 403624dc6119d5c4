#include "seqtok/quantizer.hpp"

namespace seqtok {

std::pair<Var, std::vector<int>> straight_through_onehot(Tape& t, Var p) {
  const Mat& pm = p.value();
  const Eigen::Index rows = pm.rows(), k = pm.cols();
  std::vector<int> ids(static_cast<std::size_t>(rows));
  Mat onehot = Mat::Zero(rows, k);
  for (Eigen::Index r = 0; r < rows; ++r) {
    // explicit scan: ties resolve to the lowest index
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < k; ++c) {
      if (pm(r, c) > pm(r, best)) best = c;
    }
    ids[static_cast<std::size_t>(r)] = static_cast<int>(best);
    onehot(r, best) = 1.0;
  }
  Var ind = t.add_const(t.sub(p, t.detach(p)), std::move(onehot));
  return {ind, std::move(ids)};
}

Quantizer::Quantizer(ParamSet& ps, Eigen::Index codebook_size, Eigen::Index code_dim,
                     Scalar temperature, Rng& rng)
    : tau_(temperature) {
  if (temperature <= 0) throw ConfigError("quantizer temperature must be positive");
  Mat c = randn<Scalar>(codebook_size, code_dim, rng);
  for (Eigen::Index r = 0; r < codebook_size; ++r) c.row(r).normalize();
  codebook_ = ps.add("quantizer.codebook", std::move(c));
}

QuantizedLatent Quantizer::quantize(Tape& t, Var z) const {
  if (z.cols() != code_dim()) {
    throw DimensionError("quantize: latent dim does not match codebook dim");
  }
  Var c = t.param(*codebook_);
  Var zn = t.l2_normalize_rows(z);  // throws DegenerateInputError on zero rows
  Var cn = t.l2_normalize_rows(c);
  Var logits = t.scale(t.matmul_nt(zn, cn), Scalar(1) / tau_);
  Var p = t.softmax_rows(logits);
  auto [ind, ids] = straight_through_onehot(t, p);
  Var z_q = t.matmul(ind, c);
  return {z, logits, p, ind, z_q, std::move(ids)};
}

Var Quantizer::commitment_loss(Tape& t, Var z, Var z_q) {
  return t.mse(z, t.detach(z_q));
}

Var Quantizer::entropy_loss(Tape& t, Var p) {
  const Scalar k = static_cast<Scalar>(p.cols());
  Var per_token = t.scale(t.mean_all(t.xlogx(p)), -k);          // E[H(p_row)]
  Var aggregate = t.scale(t.mean_all(t.xlogx(t.mean_rows(p))), -k);  // H(mean p)
  return t.sub(per_token, aggregate);
}

Scalar code_usage(const std::vector<int>& ids, Eigen::Index k) {
  if (ids.empty()) throw DegenerateInputError("code_usage: empty id stream");
  std::vector<long long> counts(static_cast<std::size_t>(k), 0);
  for (int id : ids) {
    if (id < 0 || id >= k) throw DimensionError("code_usage: id out of range");
    ++counts[static_cast<std::size_t>(id)];
  }
  return code_usage_from_counts(counts, static_cast<long long>(ids.size()));
}

Scalar code_usage_from_counts(const std::vector<long long>& counts, long long total) {
  if (total <= 0) throw DegenerateInputError("code_usage: empty id stream");
  const Scalar k = static_cast<Scalar>(counts.size());
  const Scalar threshold = Scalar(0.05) / k;
  Eigen::Index active = 0;
  for (long long c : counts) {
    if (static_cast<Scalar>(c) / static_cast<Scalar>(total) > threshold) ++active;
  }
  return static_cast<Scalar>(active) / k;
}

}  // namespace seqtok
