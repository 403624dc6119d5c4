#include "seqtok/ar_model.hpp"

namespace seqtok {

void ARConfig::validate() const {
  if (layers < 1 || heads < 1 || width < 1 || vocab < 2 || seq_len < 1 || num_classes < 1 ||
      code_dim < 1) {
    throw ConfigError("ar model: sizes must be positive");
  }
  if (width % heads != 0) throw ConfigError("ar model: width not divisible by heads");
}

ArBlock ArBlock::create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                        Eigen::Index heads, Rng& rng) {
  ArBlock b;
  b.norm1 = RmsNorm::create(ps, name + ".norm1", dim);
  b.norm2 = RmsNorm::create(ps, name + ".norm2", dim);
  b.attn = MultiheadAttention::create(ps, name + ".attn", dim, heads, rng);
  b.mlp = SwiGluMlp::create(ps, name + ".mlp", dim, 2 * dim, rng);
  b.ada_bias = ps.add(name + ".ada_bias", Mat::Zero(1, 6 * dim));
  return b;
}

Var ArBlock::apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch, Var mod_shared,
                   Eigen::Index tokens_per_item) const {
  const Eigen::Index d = x.cols();
  Var mod = t.add_rowvec(mod_shared, t.param(*ada_bias));
  Var shift1 = t.cols_slice(mod, 0, d);
  Var scale1 = t.cols_slice(mod, d, 2 * d);
  Var gate1 = t.cols_slice(mod, 2 * d, 3 * d);
  Var shift2 = t.cols_slice(mod, 3 * d, 4 * d);
  Var scale2 = t.cols_slice(mod, 4 * d, 5 * d);
  Var gate2 = t.cols_slice(mod, 5 * d, 6 * d);
  const Mat ones = Mat::Ones(batch, d);

  Var h = norm1.apply(t, x);
  h = t.row_broadcast_mul(h, t.add_const(scale1, ones), tokens_per_item);
  h = t.row_broadcast_add(h, shift1, tokens_per_item);
  Var a = attn.apply(t, h, allow, batch);
  x = t.add(x, t.row_broadcast_mul(a, gate1, tokens_per_item));

  Var h2 = norm2.apply(t, x);
  h2 = t.row_broadcast_mul(h2, t.add_const(scale2, ones), tokens_per_item);
  h2 = t.row_broadcast_add(h2, shift2, tokens_per_item);
  Var m = mlp.apply(t, h2);
  return t.add(x, t.row_broadcast_mul(m, gate2, tokens_per_item));
}

ARModel::ARModel(ParamSet& ps, const std::string& prefix, const ARConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  const Eigen::Index d = config_.width;
  embed_ = ps.add(prefix + ".embed", randn<Scalar>(config_.vocab, d, rng, 0.02));
  class_emb_ = ps.add(prefix + ".class_emb", randn<Scalar>(config_.num_classes + 1, d, rng, 0.02));
  pos_ = ps.add(prefix + ".pos", randn<Scalar>(config_.seq_len, d, rng, 0.02));
  adaln_ = Linear::create(ps, prefix + ".adaln", d, 6 * d, rng, /*zero_init=*/true);
  for (Eigen::Index i = 0; i < config_.layers; ++i) {
    blocks_.push_back(ArBlock::create(ps, prefix + ".blk" + std::to_string(i), d, config_.heads,
                                      rng));
  }
  final_norm_ = RmsNorm::create(ps, prefix + ".final_norm", d);
  head_ = Linear::create(ps, prefix + ".head", d, config_.vocab, rng);
}

void ARModel::check_labels(const std::vector<int>& labels) const {
  for (int label : labels) {
    if (label < 0 || label > config_.num_classes) {
      throw DimensionError("ar model: label out of range");
    }
  }
}

Var ARModel::teacher_logits(Tape& t, Var ind, const std::vector<int>& labels) const {
  const auto& c = config_;
  check_labels(labels);
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  if (ind.rows() != batch * c.seq_len || ind.cols() != c.vocab) {
    throw DimensionError("ar model: ind shape mismatch");
  }
  Var class_rows = t.embedding_rows(t.param(*class_emb_), labels);  // B x D
  Var mod_shared = adaln_.apply(t, t.silu(class_rows));             // B x 6D

  Var soft = t.matmul(ind, t.param(*embed_));  // (B*L) x D
  Var x;
  if (c.seq_len == 1) {
    x = class_rows;
  } else {
    Var prev = t.slice_tokens(soft, c.seq_len, 0, c.seq_len - 1);
    x = t.concat_tokens(class_rows, 1, prev, c.seq_len - 1);
  }
  x = t.add_block(x, t.param(*pos_), c.seq_len);

  const MaskMat allow = causal_mask(c.seq_len);
  for (const auto& block : blocks_) {
    x = block.apply(t, x, allow, batch, mod_shared, c.seq_len);
  }
  x = final_norm_.apply(t, x);
  return head_.apply(t, x);
}

ARForward ARModel::forward_teacher_forcing(Tape& t, Var ind, const std::vector<int>& labels,
                                           Param& codebook) const {
  if (codebook.value.rows() != config_.vocab || codebook.value.cols() != config_.code_dim) {
    throw DimensionError("ar model: codebook shape mismatch");
  }
  ARForward out;
  out.logits = teacher_logits(t, ind, labels);
  Var p_hat = t.softmax_rows(out.logits);
  auto [ind_hat, pred_ids] = straight_through_onehot(t, p_hat);
  out.ind_hat = ind_hat;
  out.pred_ids = std::move(pred_ids);
  out.pred_z_q = t.matmul(out.ind_hat, t.param(codebook));
  return out;
}

Var ntp_loss(Tape& t, Var logits, const std::vector<int>& ids) {
  return t.cross_entropy_mean(logits, ids);
}

Mat guidance_combine(const Mat& ell_u, const Mat& ell_c, Scalar s) {
  if (ell_u.rows() != ell_c.rows() || ell_u.cols() != ell_c.cols()) {
    throw DimensionError("guidance_combine: shape mismatch");
  }
  return ell_u + s * (ell_c - ell_u);
}

Scalar ar_accuracy(const Mat& logits, const std::vector<int>& ids) {
  if (logits.rows() != static_cast<Eigen::Index>(ids.size())) {
    throw DimensionError("ar_accuracy: row count mismatch");
  }
  long long hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    if (static_cast<int>(best) == ids[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(logits.rows());
}

}  // namespace seqtok
