#include "seqtok/trainer.hpp"

#include "seqtok/ar_sampler.hpp"
#include "seqtok/metrics.hpp"
#include "seqtok/training_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace seqtok {

namespace {

std::vector<Param*> collect_set(const ParamSet& ps) {
  std::vector<Param*> out;
  ps.collect(out);
  return out;
}

bool is_decoder_name(const std::string& name) {
  return name.rfind("tok.dec", 0) == 0 || name.rfind("tok.mask_token", 0) == 0 ||
         name.rfind("tok.out_conv", 0) == 0;
}

std::vector<Param*> filter_by_prefix(const ParamSet& ps, const std::string& prefix) {
  std::vector<Param*> out;
  for (const auto& p : ps.all()) {
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
  }
  return out;
}

void pack_adam(Archive& a, const std::string& tag, Adam& opt) {
  a.meta[tag + ".t"] = std::to_string(opt.steps_taken());
  for (size_t i = 0; i < opt.params().size(); ++i) {
    const std::string& name = opt.params()[i]->name;
    a.mats["adam.m." + name] = opt.m()[i];
    a.mats["adam.v." + name] = opt.v()[i];
  }
}

void unpack_adam(const Archive& a, const std::string& tag, Adam& opt) {
  opt.t() = a.integer(tag + ".t");
  for (size_t i = 0; i < opt.params().size(); ++i) {
    const std::string& name = opt.params()[i]->name;
    const Mat& m = a.mat("adam.m." + name);
    const Mat& v = a.mat("adam.v." + name);
    if (m.rows() != opt.m()[i].rows() || m.cols() != opt.m()[i].cols()) {
      throw CheckpointError("checkpoint: moment shape mismatch for '" + name + "'");
    }
    opt.m()[i] = m;
    opt.v()[i] = v;
  }
}

}  // namespace

ModelBundle ModelBundle::build(const TrainConfig& cfg) {
  cfg.validate();
  ModelBundle b;
  b.cfg = cfg;
  b.align_mode = parse_align_mode(cfg.align_mode);

  Rng rng(static_cast<uint64_t>(cfg.seed));
  const TokenizerConfig tok_cfg = cfg.tokenizer_config();
  b.tokenizer = std::make_unique<Tokenizer>(b.tokenizer_ps, tok_cfg, rng);
  b.quantizer = std::make_unique<Quantizer>(b.tokenizer_ps, cfg.codebook_size, cfg.latent_dim,
                                            cfg.temperature, rng);

  const Eigen::Index df = cfg.feat_dim;
  if (b.align_mode == AlignMode::direct || b.align_mode == AlignMode::implicit) {
    const Eigen::Index in = b.align_mode == AlignMode::direct ? tok_cfg.latent_dim : tok_cfg.width;
    b.proj_enc = Mlp3::create(b.tokenizer_ps, "proj_enc", in, std::max(in, df), df, rng);
  }
  if (cfg.decoder_align) {
    b.proj_dec =
        Mlp3::create(b.tokenizer_ps, "proj_dec", tok_cfg.width, std::max(tok_cfg.width, df), df, rng);
  }
  if (b.align_mode == AlignMode::substitution) {
    b.subst_mlp =
        Mlp3::create(b.tokenizer_ps, "subst", df, std::max(df, tok_cfg.width), tok_cfg.width, rng);
  }
  if (b.align_mode == AlignMode::direct) {
    near_square_factor(tok_cfg.num_queries);  // fail at build time if L has no usable grid
  }

  b.ar = std::make_unique<ARModel>(b.ar_ps, "ar", cfg.ar_config(), rng);
  b.aux = std::make_unique<ARModel>(b.ar_ps, "aux", cfg.aux_config(), rng);
  b.disc = std::make_unique<Discriminator>(b.disc_ps, tok_cfg.channels, tok_cfg.image_size,
                                           cfg.disc_base, rng);
  b.perceptual = std::make_unique<PerceptualNet>(tok_cfg.channels, cfg.perceptual_seed);
  if (b.align_mode != AlignMode::none || cfg.decoder_align) {
    b.provider = std::make_unique<FrozenFeatureProvider>(tok_cfg.image_size, tok_cfg.channels,
                                                         tok_cfg.image_size / tok_cfg.patch, df,
                                                         static_cast<uint64_t>(cfg.provider_seed));
  }
  return b;
}

std::vector<Param*> ModelBundle::generator_params() const {
  std::vector<Param*> out;
  tokenizer_ps.collect(out);
  ar_ps.collect(out);
  return out;
}

std::vector<Param*> ModelBundle::encoder_params() const {
  std::vector<Param*> out;
  for (const auto& p : tokenizer_ps.all()) {
    if (p->name.rfind("tok.", 0) == 0 && !is_decoder_name(p->name)) out.push_back(p.get());
  }
  return out;
}

std::vector<Param*> ModelBundle::decoder_params() const {
  std::vector<Param*> out;
  for (const auto& p : tokenizer_ps.all()) {
    if (is_decoder_name(p->name)) out.push_back(p.get());
  }
  return out;
}

std::vector<Param*> ModelBundle::ar_main_params() const { return filter_by_prefix(ar_ps, "ar."); }
std::vector<Param*> ModelBundle::proj_enc_params() const {
  return filter_by_prefix(tokenizer_ps, "proj_enc.");
}
std::vector<Param*> ModelBundle::proj_dec_params() const {
  return filter_by_prefix(tokenizer_ps, "proj_dec.");
}

std::pair<std::vector<int>, Mat> ModelBundle::encode_ids(const Mat& pixels,
                                                         Eigen::Index batch) const {
  Tape t;
  std::optional<Var> subst;
  if (align_mode == AlignMode::substitution) {
    const Mat y = provider->extract(pixels, batch);
    subst = substitute_patches(t, *subst_mlp, y);
  }
  EncodeOutput enc = tokenizer->encode(t, pixels, batch, subst);
  QuantizedLatent q = quantizer->quantize(t, enc.z);
  return {q.ids, enc.z.value()};
}

Mat ModelBundle::decode_ids(const std::vector<int>& ids, Eigen::Index batch,
                            Eigen::Index prefix) const {
  const Eigen::Index l = tokenizer->config().num_queries;
  if (static_cast<Eigen::Index>(ids.size()) != batch * l) {
    throw DimensionError("decode_ids: id count does not match batch * L");
  }
  const Mat& cb = quantizer->codebook().value;
  Mat zq(batch * l, cb.cols());
  for (Eigen::Index i = 0; i < zq.rows(); ++i) {
    if (ids[i] < 0 || ids[i] >= cb.rows()) throw DimensionError("decode_ids: id out of range");
    zq.row(i) = cb.row(ids[i]);
  }
  Tape t;
  DecodeOutput dec = tokenizer->decode(t, t.input(zq), batch, prefix < 0 ? l : prefix);
  return dec.pixels.value();
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      bundle_(ModelBundle::build(cfg)),
      dataset_(cfg.dataset_spec()),
      opt_tok_(collect_set(bundle_.tokenizer_ps), cfg.beta1, cfg.beta2_tokenizer),
      opt_ar_(collect_set(bundle_.ar_ps), cfg.beta1, cfg.beta2_ar),
      opt_disc_(collect_set(bundle_.disc_ps), cfg.beta1, cfg.beta2_tokenizer),
      ema_(bundle_.generator_params()) {}

bool Trainer::gan_active(long long step) const {
  const long long warm = static_cast<long long>(std::llround(cfg_.gan_warmup * double(cfg_.steps)));
  return cfg_.lambda_gan > 0 && step >= warm;
}

StepOutput Trainer::forward_backward(const ImageBatch& batch, long long step, Tape& t, Var& total) {
  const TokenizerConfig& tok_cfg = bundle_.tokenizer->config();
  const Eigen::Index bsz = batch.batch;
  const Eigen::Index l = tok_cfg.num_queries;
  const Eigen::Index n = tok_cfg.n_patches();
  const Eigen::Index hw = tok_cfg.image_size * tok_cfg.image_size;

  Rng drop_rng = step_rng(static_cast<uint64_t>(cfg_.seed), step, /*stream=*/1);
  StepOutput out;
  out.prefix = nested_dropout_sample(l, cfg_.nested_dropout, drop_rng);
  const std::vector<int> labels =
      class_dropout(batch.labels, cfg_.class_dropout, static_cast<int>(cfg_.num_classes), drop_rng);

  Mat y;
  if (bundle_.provider) y = bundle_.provider->extract(batch.pixels, bsz);

  std::optional<Var> subst;
  if (bundle_.align_mode == AlignMode::substitution) {
    subst = substitute_patches(t, *bundle_.subst_mlp, y);
  }
  EncodeOutput enc = bundle_.tokenizer->encode(t, batch.pixels, bsz, subst);
  QuantizedLatent q = bundle_.quantizer->quantize(t, enc.z);
  out.ids = q.ids;

  const LossWeights w = cfg_.loss_weights();
  const bool apr_on = w.apr_l2 > 0 || w.apr_perc > 0;
  const bool ar_on = w.ntp > 0 || apr_on;

  Var ind_for_ar = cfg_.ntp_backprop ? q.ind : t.detach(q.ind);
  ARForward arf;
  if (ar_on) {
    arf = bundle_.ar->forward_teacher_forcing(t, ind_for_ar, labels, bundle_.quantizer->codebook());
    out.ar_acc = ar_accuracy(arf.logits.value(), q.ids);
  }

  // One decoder pass covers both branches so they share the same prefix draw.
  Var recon, apr_recon, h_dec;
  if (apr_on) {
    Var z_all = t.vstack(q.z_q, arf.pred_z_q);
    DecodeOutput dec = bundle_.tokenizer->decode(t, z_all, 2 * bsz, out.prefix);
    recon = t.rows_slice(dec.pixels, 0, bsz * hw);
    apr_recon = t.rows_slice(dec.pixels, bsz * hw, 2 * bsz * hw);
    h_dec = t.rows_slice(dec.h_dec_k, 0, bsz * n);
  } else {
    DecodeOutput dec = bundle_.tokenizer->decode(t, q.z_q, bsz, out.prefix);
    recon = dec.pixels;
    h_dec = dec.h_dec_k;
  }
  last_recon_ = recon.value();

  Var x_in = t.input(batch.pixels);
  std::vector<WeightedTerm> terms;
  terms.push_back({"l2", w.recon_l2, t.mse(recon, x_in)});
  if (w.recon_perc > 0) {
    terms.push_back({"lpips", w.recon_perc,
                     bundle_.perceptual->distance(t, recon, x_in, bsz, tok_cfg.image_size,
                                                  tok_cfg.image_size)});
  }
  terms.push_back({"reg", w.reg, Quantizer::commitment_loss(t, enc.z, q.z_q)});
  terms.push_back({"entropy", w.entropy, Quantizer::entropy_loss(t, q.p)});
  if (w.ntp > 0) terms.push_back({"ntp", w.ntp, ntp_loss(t, arf.logits, q.ids)});
  if (apr_on) {
    terms.push_back({"apr_l2", w.apr_l2, t.mse(apr_recon, x_in)});
    if (w.apr_perc > 0) {
      terms.push_back({"apr_lpips", w.apr_perc,
                       bundle_.perceptual->distance(t, apr_recon, x_in, bsz, tok_cfg.image_size,
                                                    tok_cfg.image_size)});
    }
  }
  if (gan_active(step)) {
    Var fake_scores = bundle_.disc->apply(t, recon, bsz);
    terms.push_back({"gan_g", w.gan, t.scale(t.mean_all(fake_scores), -1.0)});
  }
  if (bundle_.align_mode == AlignMode::direct && w.sem > 0) {
    const Mat target = interpolate_grid_to_sequence(y, bsz, bundle_.provider->grid_side(), l);
    terms.push_back({"sem", w.sem, alignment_cosine_loss(t, *bundle_.proj_enc, enc.z, target)});
  } else if (bundle_.align_mode == AlignMode::implicit && w.sem > 0) {
    terms.push_back({"sem", w.sem, alignment_cosine_loss(t, *bundle_.proj_enc, enc.h_enc, y)});
  }
  if (cfg_.decoder_align && w.sem_dec > 0) {
    terms.push_back({"sem_dec", w.sem_dec, alignment_cosine_loss(t, *bundle_.proj_dec, h_dec, y)});
  }
  if (w.aux_ntp > 0) {
    // The guidance model trains on detached indices; it never shapes the tokenizer.
    Var aux_logits = bundle_.aux->teacher_logits(t, t.detach(q.ind), labels);
    terms.push_back({"aux_ntp", w.aux_ntp, ntp_loss(t, aux_logits, q.ids)});
  }
  total = assemble_total(t, terms, out.losses);
  return out;
}

void Trainer::discriminator_phase(const ImageBatch& batch, const Mat& fake_pixels, StepOutput& out) {
  Tape t;
  Var real = bundle_.disc->apply(t, t.input(batch.pixels), batch.batch);
  Var fake = bundle_.disc->apply(t, t.input(fake_pixels), batch.batch);
  GanLosses gl = gan_losses(t, real, fake, lecam_);
  LossBundle dlog;
  std::vector<WeightedTerm> terms;
  terms.push_back({"d_hinge", 1.0, gl.d_loss});
  terms.push_back({"d_lecam", cfg_.lambda_lecam, gl.lecam});
  Var d_total = assemble_total(t, terms, dlog);
  t.backward(d_total);
  clip_grad_norm(opt_disc_.params(), cfg_.grad_clip);
  opt_disc_.step(cfg_.disc_lr);
  opt_disc_.zero_grad();
  lecam_.update(gl.mean_real, gl.mean_fake);
  out.losses.components["d_hinge"] = dlog.get("d_hinge");
  out.losses.components["d_lecam"] = dlog.get("d_lecam");
}

StepOutput Trainer::train_step() {
  const long long step = step_;
  const ImageBatch batch = dataset_.train_batch(cfg_.batch_size, step);
  StepOutput out;
  {
    Tape t;
    Var total;
    out = forward_backward(batch, step, t, total);
    t.backward(total);
  }  // drop the generator graph before the discriminator pass
  out.grad_norm = clip_grad_norm(bundle_.generator_params(), cfg_.grad_clip);
  out.lr = cosine_lr(step, cfg_.steps, cfg_.lr, cfg_.lr_min);
  opt_tok_.step(out.lr);
  opt_ar_.step(out.lr);
  opt_tok_.zero_grad();
  opt_ar_.zero_grad();
  opt_disc_.zero_grad();  // the generator pass deposits gradients in the discriminator too

  if (gan_active(step)) discriminator_phase(batch, last_recon_, out);
  ema_.update(cfg_.ema_decay);
  ++step_;
  return out;
}

Archive Trainer::make_checkpoint() const {
  Archive a;
  a.meta["kind"] = "seqtok-train";
  a.meta["config"] = cfg_.to_json_string();
  a.meta["step"] = std::to_string(step_);
  a.put_scalar("lecam_real", lecam_.ema_real);
  a.put_scalar("lecam_fake", lecam_.ema_fake);
  pack_params(a, bundle_.tokenizer_ps);
  pack_params(a, bundle_.ar_ps);
  pack_params(a, bundle_.disc_ps);
  // const_cast: moment accessors are non-const but packing only reads them
  Trainer& self = const_cast<Trainer&>(*this);
  pack_adam(a, "adam_tok", self.opt_tok_);
  pack_adam(a, "adam_ar", self.opt_ar_);
  pack_adam(a, "adam_disc", self.opt_disc_);
  const std::vector<Param*>& gen = ema_.params();
  for (size_t i = 0; i < gen.size(); ++i) {
    a.mats["ema." + gen[i]->name] = self.ema_.shadows()[i];
  }
  return a;
}

void Trainer::save_checkpoint(const std::string& path) const { make_checkpoint().save(path); }

void Trainer::load_checkpoint(const std::string& path) {
  Archive a = Archive::load(path);
  if (a.text("kind") != "seqtok-train") {
    throw CheckpointError("checkpoint: unexpected kind '" + a.text("kind") + "'");
  }
  unpack_params(a, bundle_.tokenizer_ps);
  unpack_params(a, bundle_.ar_ps);
  unpack_params(a, bundle_.disc_ps);
  unpack_adam(a, "adam_tok", opt_tok_);
  unpack_adam(a, "adam_ar", opt_ar_);
  unpack_adam(a, "adam_disc", opt_disc_);
  const std::vector<Param*>& gen = ema_.params();
  for (size_t i = 0; i < gen.size(); ++i) {
    const Mat& s = a.mat("ema." + gen[i]->name);
    if (s.rows() != gen[i]->value.rows() || s.cols() != gen[i]->value.cols()) {
      throw CheckpointError("checkpoint: EMA shape mismatch for '" + gen[i]->name + "'");
    }
    ema_.shadows()[i] = s;
  }
  lecam_.ema_real = a.scalar("lecam_real");
  lecam_.ema_fake = a.scalar("lecam_fake");
  step_ = a.integer("step");
}

TrainConfig Trainer::config_from_checkpoint(const std::string& path) {
  Archive a = Archive::load(path);
  return TrainConfig::from_json_string(a.text("config"));
}

std::vector<int> make_order_permutation(const std::string& order, Eigen::Index l,
                                        uint64_t perm_seed) {
  std::vector<int> perm(static_cast<size_t>(l));
  std::iota(perm.begin(), perm.end(), 0);
  if (order == "original") return perm;
  if (order == "reversed") {
    std::reverse(perm.begin(), perm.end());
    return perm;
  }
  if (order == "random") {
    Rng rng(0x9e3779b97f4a7c15ull ^ perm_seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
  }
  throw ConfigError("unknown ordering '" + order + "' (expected original, reversed, or random)");
}

OrderingResult run_ordering_experiment(const TrainConfig& cfg, const std::string& ckpt_path,
                                       const std::string& order, uint64_t perm_seed,
                                       long long ar_steps,
                                       const std::function<void(long long, Scalar)>& on_step) {
  const Eigen::Index l = cfg.num_tokens;
  const Eigen::Index k = cfg.codebook_size;
  const std::vector<int> perm = make_order_permutation(order, l, perm_seed);

  ModelBundle bundle = ModelBundle::build(cfg);
  Archive a = Archive::load(ckpt_path);
  unpack_params(a, bundle.tokenizer_ps);  // tokenizer + codebook frozen below

  Dataset ds(cfg.dataset_spec());
  const Eigen::Index chunk = cfg.eval_batch;

  auto encode_corpus = [&](bool val) {
    std::pair<std::vector<int>, std::vector<int>> out;  // ids, labels
    const Eigen::Index count = val ? ds.val_size() : ds.train_size();
    for (Eigen::Index start = 0; start < count; start += chunk) {
      const Eigen::Index take = std::min(chunk, count - start);
      const ImageBatch b = val ? ds.val_batch(start, take) : ds.train_slice(start, take);
      auto [ids, z] = bundle.encode_ids(b.pixels, b.batch);
      out.first.insert(out.first.end(), ids.begin(), ids.end());
      out.second.insert(out.second.end(), b.labels.begin(), b.labels.end());
    }
    return out;
  };
  auto [train_ids, train_labels] = encode_corpus(false);
  auto [val_ids, val_labels] = encode_corpus(true);

  auto permute_ids = [&](const std::vector<int>& ids, Eigen::Index item) {
    std::vector<int> out(static_cast<size_t>(l));
    for (Eigen::Index i = 0; i < l; ++i) out[i] = ids[item * l + perm[i]];
    return out;
  };

  // Fresh AR model; identical init for every ordering so only the order varies.
  ParamSet ar_ps;
  Rng ar_rng(static_cast<uint64_t>(cfg.seed) * 7919u + 13u);
  ARModel ar(ar_ps, "ar", cfg.ar_config(), ar_rng);
  Adam opt(collect_set(ar_ps), cfg.beta1, cfg.beta2_ar);
  std::vector<Param*> ar_params = collect_set(ar_ps);

  const long long steps = ar_steps > 0 ? ar_steps : cfg.steps;
  const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, ds.train_size());
  const Eigen::Index items = ds.train_size();
  const Eigen::Index bpe = std::max<Eigen::Index>(1, items / bsz);

  OrderingResult result;
  result.order = order;
  result.permutation = perm;

  for (long long step = 0; step < steps; ++step) {
    const long long epoch = step / bpe;
    const Eigen::Index pos = static_cast<Eigen::Index>(step % bpe);
    std::vector<Eigen::Index> shuffle_idx(static_cast<size_t>(items));
    std::iota(shuffle_idx.begin(), shuffle_idx.end(), 0);
    Rng epoch_rng = step_rng(static_cast<uint64_t>(cfg.seed), epoch, /*stream=*/11);
    std::shuffle(shuffle_idx.begin(), shuffle_idx.end(), epoch_rng);

    Mat ind = Mat::Zero(bsz * l, k);
    std::vector<int> targets(static_cast<size_t>(bsz * l));
    std::vector<int> labels(static_cast<size_t>(bsz));
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const Eigen::Index item = shuffle_idx[pos * bsz + b];
      const std::vector<int> pids = permute_ids(train_ids, item);
      for (Eigen::Index i = 0; i < l; ++i) {
        ind(b * l + i, pids[i]) = 1.0;
        targets[b * l + i] = pids[i];
      }
      labels[b] = train_labels[item];
    }
    Rng drop_rng = step_rng(static_cast<uint64_t>(cfg.seed), step, /*stream=*/12);
    const std::vector<int> labels_d =
        class_dropout(labels, cfg.class_dropout, static_cast<int>(cfg.num_classes), drop_rng);

    Tape t;
    Var logits = ar.teacher_logits(t, t.input(ind), labels_d);
    Var loss = ntp_loss(t, logits, targets);
    result.ntp_final = loss.value()(0, 0);
    t.backward(loss);
    clip_grad_norm(ar_params, cfg.grad_clip);
    opt.step(cosine_lr(step, steps, cfg.lr, cfg.lr_min));
    opt.zero_grad();
    if (on_step) on_step(step, result.ntp_final);
  }

  // Teacher-forcing accuracy on permuted validation sequences.
  {
    long long hits = 0, total = 0;
    const Eigen::Index val_items = ds.val_size();
    for (Eigen::Index start = 0; start < val_items; start += chunk) {
      const Eigen::Index take = std::min(chunk, val_items - start);
      std::vector<int> ids(static_cast<size_t>(take * l));
      std::vector<int> labels(val_labels.begin() + start, val_labels.begin() + start + take);
      for (Eigen::Index b = 0; b < take; ++b) {
        const std::vector<int> pids = permute_ids(val_ids, start + b);
        std::copy(pids.begin(), pids.end(), ids.begin() + b * l);
      }
      const Mat logits = ar_eval_teacher_logits(ar, ids, labels);
      const Scalar acc = ar_accuracy(logits, ids);
      hits += static_cast<long long>(std::llround(acc * double(take * l)));
      total += take * l;
    }
    result.ar_acc = total > 0 ? Scalar(hits) / Scalar(total) : 0;
  }

  // Generate through the inverse permutation and decode with the frozen
  // tokenizer; score against real validation images in frozen feature space.
  {
    FrozenFeatureProvider extractor(cfg.image_size, cfg.channels, cfg.image_size / cfg.patch_size,
                                    cfg.feat_dim, static_cast<uint64_t>(cfg.extractor_seed));
    FeatureStatistics real_stats(extractor.feat_dim()), fake_stats(extractor.feat_dim());
    const Eigen::Index val_items = ds.val_size();
    for (Eigen::Index start = 0; start < val_items; start += chunk) {
      const Eigen::Index take = std::min(chunk, val_items - start);
      const ImageBatch b = ds.val_batch(start, take);
      real_stats.add_rows(pooled_features(extractor, b.pixels, take));
    }
    const Eigen::Index samples = cfg.fid_samples;
    Eigen::Index done = 0;
    while (done < samples) {
      const Eigen::Index take = std::min(chunk, samples - done);
      std::vector<int> labels(static_cast<size_t>(take));
      for (Eigen::Index i = 0; i < take; ++i) {
        labels[i] = static_cast<int>((done + i) % cfg.num_classes);
      }
      SampleOptions opts;
      opts.seed = static_cast<uint64_t>(cfg.seed) + 900u + static_cast<uint64_t>(done);
      std::vector<int> sampled = sample_ids(ar, labels, opts);
      std::vector<int> decoded_ids(static_cast<size_t>(take * l));
      for (Eigen::Index b = 0; b < take; ++b) {
        for (Eigen::Index i = 0; i < l; ++i) {
          decoded_ids[b * l + perm[i]] = sampled[b * l + i];
        }
      }
      const Mat pixels = bundle.decode_ids(decoded_ids, take);
      fake_stats.add_rows(pooled_features(extractor, pixels, take));
      done += take;
    }
    result.distance = frechet_distance(real_stats, fake_stats).distance;
  }
  return result;
}

}  // namespace seqtok
