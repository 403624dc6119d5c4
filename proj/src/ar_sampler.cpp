#include "seqtok/ar_sampler.hpp"

#include <cmath>
#include <memory>

namespace seqtok {

namespace {

Mat silu_mat(const Mat& x) {
  return x.array() / (1.0 + (-x.array()).exp());
}

// Shared-AdaLN conditioning rows for a label set: B x 6D.
Mat eval_modulation(const ARModel& m, const std::vector<int>& labels) {
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index d = m.config().width;
  Mat class_rows(batch, d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    class_rows.row(b) = m.class_emb().value.row(labels[static_cast<std::size_t>(b)]);
  }
  return m.adaln().apply_eval(silu_mat(class_rows));
}

struct ModSlices {
  Mat shift1, scale1, gate1, shift2, scale2, gate2;  // each B x D
};

ModSlices slice_mod(const Mat& mod, const Mat& bias_row, Eigen::Index d) {
  Mat full = mod.rowwise() + bias_row.row(0);
  ModSlices s;
  s.shift1 = full.middleCols(0, d);
  s.scale1 = full.middleCols(d, d);
  s.gate1 = full.middleCols(2 * d, d);
  s.shift2 = full.middleCols(3 * d, d);
  s.scale2 = full.middleCols(4 * d, d);
  s.gate2 = full.middleCols(5 * d, d);
  return s;
}

// One incremental decode session over a model with a private KV cache.
// Cache rows are step-major: row t*B + b.
class CachedSession {
 public:
  CachedSession(const ARModel& m, const std::vector<int>& labels)
      : m_(m),
        batch_(static_cast<Eigen::Index>(labels.size())),
        labels_(labels),
        mod_(eval_modulation(m, labels)),
        kcache_(static_cast<std::size_t>(m.config().layers)),
        vcache_(static_cast<std::size_t>(m.config().layers)) {}

  // Input embedding for position t given the previously sampled ids.
  Mat input_rows(Eigen::Index t, const std::vector<int>& flat_ids) const {
    const Eigen::Index d = m_.config().width;
    const Eigen::Index l = m_.config().seq_len;
    Mat x(batch_, d);
    for (Eigen::Index b = 0; b < batch_; ++b) {
      if (t == 0) {
        x.row(b) = m_.class_emb().value.row(labels_[static_cast<std::size_t>(b)]);
      } else {
        x.row(b) = m_.embed().value.row(flat_ids[static_cast<std::size_t>(b * l + t - 1)]);
      }
    }
    x.rowwise() += m_.pos().value.row(t);
    return x;
  }

  // Advance the session by one position; x is B x D; returns logits B x K.
  Mat step(const Mat& x_in) {
    const auto& cfg = m_.config();
    const Eigen::Index d = cfg.width, heads = cfg.heads, dh = d / heads;
    const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));
    Mat x = x_in;
    for (std::size_t li = 0; li < m_.blocks().size(); ++li) {
      const ArBlock& blk = m_.blocks()[li];
      ModSlices ms = slice_mod(mod_, blk.ada_bias->value, d);

      Mat h = blk.norm1.apply_eval(x);
      h = h.cwiseProduct(Mat::Ones(batch_, d) + ms.scale1) + ms.shift1;
      Mat q = blk.attn.wq.apply_eval(h);
      Mat k_new = blk.attn.wk.apply_eval(h);
      Mat v_new = blk.attn.wv.apply_eval(h);
      append_rows(kcache_[li], k_new);
      append_rows(vcache_[li], v_new);
      const Eigen::Index t_now = kcache_[li].rows() / batch_;  // positions cached so far

      Mat attn_out(batch_, d);
      for (Eigen::Index b = 0; b < batch_; ++b) {
        for (Eigen::Index hd = 0; hd < heads; ++hd) {
          Vec scores(t_now);
          for (Eigen::Index tp = 0; tp < t_now; ++tp) {
            scores(tp) = scale * q.row(b).segment(hd * dh, dh)
                                     .dot(kcache_[li].row(tp * batch_ + b).segment(hd * dh, dh));
          }
          const Scalar mx = scores.maxCoeff();
          Vec e = (scores.array() - mx).exp();
          Vec w = e / e.sum();
          Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dh);
          for (Eigen::Index tp = 0; tp < t_now; ++tp) {
            acc += w(tp) * vcache_[li].row(tp * batch_ + b).segment(hd * dh, dh);
          }
          attn_out.row(b).segment(hd * dh, dh) = acc;
        }
      }
      x += blk.attn.wo.apply_eval(attn_out).cwiseProduct(ms.gate1);

      Mat h2 = blk.norm2.apply_eval(x);
      h2 = h2.cwiseProduct(Mat::Ones(batch_, d) + ms.scale2) + ms.shift2;
      x += blk.mlp.apply_eval(h2).cwiseProduct(ms.gate2);
    }
    return m_.head().apply_eval(m_.final_norm().apply_eval(x));
  }

 private:
  static void append_rows(Mat& cache, const Mat& rows) {
    const Eigen::Index old = cache.rows();
    cache.conservativeResize(old + rows.rows(), rows.cols());
    cache.bottomRows(rows.rows()) = rows;
  }

  const ARModel& m_;
  Eigen::Index batch_;
  std::vector<int> labels_;
  Mat mod_;
  std::vector<Mat> kcache_, vcache_;
};

// Full batch-major forward over T positions (reference path, Eigen matmuls).
Mat eval_full_logits(const ARModel& m, const Mat& x_in, const Mat& mod, Eigen::Index batch,
                     Eigen::Index t_len) {
  const auto& cfg = m.config();
  const Eigen::Index d = cfg.width, heads = cfg.heads, dh = d / heads;
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));
  const MaskMat allow = causal_mask(t_len);
  Mat x = x_in;
  for (const ArBlock& blk : m.blocks()) {
    ModSlices ms = slice_mod(mod, blk.ada_bias->value, d);

    Mat h = blk.norm1.apply_eval(x);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        h.row(b * t_len + t) =
            h.row(b * t_len + t).cwiseProduct(Mat::Ones(1, d) + ms.scale1.row(b)) + ms.shift1.row(b);
      }
    }
    Mat q = blk.attn.wq.apply_eval(h);
    Mat k = blk.attn.wk.apply_eval(h);
    Mat v = blk.attn.wv.apply_eval(h);
    Mat attn_out(batch * t_len, d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index hd = 0; hd < heads; ++hd) {
        auto qb = q.block(b * t_len, hd * dh, t_len, dh);
        auto kb = k.block(b * t_len, hd * dh, t_len, dh);
        auto vb = v.block(b * t_len, hd * dh, t_len, dh);
        Mat s = scale * (qb * kb.transpose());
        for (Eigen::Index i = 0; i < t_len; ++i) {
          for (Eigen::Index j = 0; j < t_len; ++j) {
            if (!allow(i, j)) s(i, j) = -1e30;
          }
        }
        Mat a(t_len, t_len);
        for (Eigen::Index i = 0; i < t_len; ++i) {
          const Scalar mx = s.row(i).maxCoeff();
          Eigen::ArrayXd e = (s.row(i).array() - mx).exp();
          a.row(i) = (e / e.sum()).matrix();
        }
        attn_out.block(b * t_len, hd * dh, t_len, dh) = a * vb;
      }
    }
    Mat proj = blk.attn.wo.apply_eval(attn_out);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        x.row(b * t_len + t) += proj.row(b * t_len + t).cwiseProduct(ms.gate1.row(b));
      }
    }

    Mat h2 = blk.norm2.apply_eval(x);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        h2.row(b * t_len + t) =
            h2.row(b * t_len + t).cwiseProduct(Mat::Ones(1, d) + ms.scale2.row(b)) + ms.shift2.row(b);
      }
    }
    Mat mo = blk.mlp.apply_eval(h2);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        x.row(b * t_len + t) += mo.row(b * t_len + t).cwiseProduct(ms.gate2.row(b));
      }
    }
  }
  return m.head().apply_eval(m.final_norm().apply_eval(x));
}

// Inputs for positions [0, t_len) given sampled prefix ids (batch-major).
Mat build_inputs(const ARModel& m, const std::vector<int>& flat_ids,
                 const std::vector<int>& labels, Eigen::Index t_len) {
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index d = m.config().width, l = m.config().seq_len;
  Mat x(batch * t_len, d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index t = 0; t < t_len; ++t) {
      Eigen::RowVectorXd row;
      if (t == 0) {
        row = m.class_emb().value.row(labels[static_cast<std::size_t>(b)]);
      } else {
        row = m.embed().value.row(flat_ids[static_cast<std::size_t>(b * l + t - 1)]);
      }
      x.row(b * t_len + t) = row + m.pos().value.row(t);
    }
  }
  return x;
}

int pick_token(const Eigen::RowVectorXd& logits, Scalar temperature, bool greedy, Rng& rng) {
  const Eigen::Index k = logits.size();
  if (greedy) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < k; ++c) {
      if (logits(c) > logits(best)) best = c;
    }
    return static_cast<int>(best);
  }
  Eigen::ArrayXd scaled = logits.transpose().array() / temperature;
  const Scalar mx = scaled.maxCoeff();
  Eigen::ArrayXd e = (scaled - mx).exp();
  Eigen::ArrayXd p = e / e.sum();
  std::uniform_real_distribution<Scalar> uniform(0.0, 1.0);
  const Scalar u = uniform(rng);
  Scalar cum = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    cum += p(c);
    if (u < cum) return static_cast<int>(c);
  }
  return static_cast<int>(k - 1);
}

void validate_sampling(const ARModel& model, const std::vector<int>& labels,
                       const SampleOptions& options) {
  model.check_labels(labels);
  if (labels.empty()) throw DimensionError("sample: empty label batch");
  if (options.temperature <= 0 && !options.greedy) {
    throw ConfigError("sample: temperature must be positive");
  }
  if (options.guidance.kind == GuidanceSpec::Kind::autoguide) {
    if (options.guidance.aux == nullptr) {
      throw ConfigError("sample: autoguide requested without an aux model");
    }
    const auto& a = options.guidance.aux->config();
    const auto& m = model.config();
    if (a.vocab != m.vocab || a.seq_len != m.seq_len || a.num_classes != m.num_classes) {
      throw ConfigError("sample: aux model shape mismatch");
    }
  }
}

}  // namespace

std::vector<int> sample_ids(const ARModel& model, const std::vector<int>& labels,
                            const SampleOptions& options) {
  validate_sampling(model, labels, options);
  const auto& cfg = model.config();
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index l = cfg.seq_len;
  Rng rng(options.seed);

  CachedSession cond(model, labels);
  std::unique_ptr<CachedSession> second;
  if (options.guidance.kind == GuidanceSpec::Kind::cfg) {
    std::vector<int> null_labels(labels.size(), static_cast<int>(cfg.num_classes));
    second = std::make_unique<CachedSession>(model, null_labels);
  } else if (options.guidance.kind == GuidanceSpec::Kind::autoguide) {
    second = std::make_unique<CachedSession>(*options.guidance.aux, labels);
  }

  std::vector<int> ids(static_cast<std::size_t>(batch * l), 0);
  for (Eigen::Index t = 0; t < l; ++t) {
    Mat ell = cond.step(cond.input_rows(t, ids));
    if (second) {
      Mat ell_u = second->step(second->input_rows(t, ids));
      ell = guidance_combine(ell_u, ell, options.guidance.scale);
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      ids[static_cast<std::size_t>(b * l + t)] =
          pick_token(ell.row(b), options.temperature, options.greedy, rng);
    }
  }
  return ids;
}

std::vector<int> sample_ids_uncached(const ARModel& model, const std::vector<int>& labels,
                                     const SampleOptions& options) {
  validate_sampling(model, labels, options);
  const auto& cfg = model.config();
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index l = cfg.seq_len;
  Rng rng(options.seed);

  Mat mod_cond = eval_modulation(model, labels);
  std::vector<int> null_labels(labels.size(), static_cast<int>(cfg.num_classes));
  Mat mod_null;
  Mat mod_aux;
  if (options.guidance.kind == GuidanceSpec::Kind::cfg) {
    mod_null = eval_modulation(model, null_labels);
  } else if (options.guidance.kind == GuidanceSpec::Kind::autoguide) {
    mod_aux = eval_modulation(*options.guidance.aux, labels);
  }

  std::vector<int> ids(static_cast<std::size_t>(batch * l), 0);
  for (Eigen::Index t = 0; t < l; ++t) {
    const Eigen::Index t_len = t + 1;
    auto last_rows = [&](const Mat& logits_all) {
      Mat out(batch, cfg.vocab);
      for (Eigen::Index b = 0; b < batch; ++b) out.row(b) = logits_all.row(b * t_len + t);
      return out;
    };
    Mat ell = last_rows(eval_full_logits(
        model, build_inputs(model, ids, labels, t_len), mod_cond, batch, t_len));
    if (options.guidance.kind == GuidanceSpec::Kind::cfg) {
      Mat ell_u = last_rows(eval_full_logits(
          model, build_inputs(model, ids, null_labels, t_len), mod_null, batch, t_len));
      ell = guidance_combine(ell_u, ell, options.guidance.scale);
    } else if (options.guidance.kind == GuidanceSpec::Kind::autoguide) {
      const ARModel& aux = *options.guidance.aux;
      Mat ell_u = last_rows(eval_full_logits(
          aux, build_inputs(aux, ids, labels, t_len), mod_aux, batch, t_len));
      ell = guidance_combine(ell_u, ell, options.guidance.scale);
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      ids[static_cast<std::size_t>(b * l + t)] =
          pick_token(ell.row(b), options.temperature, options.greedy, rng);
    }
  }
  return ids;
}

Mat ar_eval_teacher_logits(const ARModel& model, const std::vector<int>& ids,
                           const std::vector<int>& labels) {
  model.check_labels(labels);
  const auto& cfg = model.config();
  const Eigen::Index batch = static_cast<Eigen::Index>(labels.size());
  if (static_cast<Eigen::Index>(ids.size()) != batch * cfg.seq_len) {
    throw DimensionError("ar_eval_teacher_logits: id count mismatch");
  }
  Mat x = build_inputs(model, ids, labels, cfg.seq_len);
  Mat mod = eval_modulation(model, labels);
  return eval_full_logits(model, x, mod, batch, cfg.seq_len);
}

}  // namespace seqtok
