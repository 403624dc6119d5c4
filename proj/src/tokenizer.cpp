#include "seqtok/tokenizer.hpp"

namespace seqtok {

Eigen::Index TokenizerConfig::n_patches() const {
  return (image_size / patch) * (image_size / patch);
}

void TokenizerConfig::validate() const {
  if (image_size <= 0 || channels <= 0 || patch <= 0) {
    throw ConfigError("tokenizer: sizes must be positive");
  }
  if (image_size % patch != 0) {
    throw DimensionError("tokenizer: image size not divisible by patch size");
  }
  if (width % heads != 0) throw ConfigError("tokenizer: width not divisible by heads");
  if (num_queries < 1 || latent_dim < 1) throw ConfigError("tokenizer: latent shape invalid");
  if (align_layer < 1 || align_layer > dec_layers) {
    throw ConfigError("tokenizer: align_layer outside decoder depth");
  }
}

Tokenizer::Tokenizer(ParamSet& ps, const TokenizerConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const Eigen::Index n = config_.n_patches(), l = config_.num_queries, d = config_.width;
  const Eigen::Index patch_dim = config_.patch * config_.patch * config_.channels;

  patch_embed_ = Linear::create(ps, "tok.patch_embed", patch_dim, d, rng);
  patch_pos_ = ps.add("tok.patch_pos", randn<Scalar>(n, d, rng, 0.02));
  query_tokens_ = ps.add("tok.query_tokens", randn<Scalar>(l, d, rng, 0.02));
  query_pos_ = ps.add("tok.query_pos", randn<Scalar>(l, d, rng, 0.02));
  for (Eigen::Index i = 0; i < config_.enc_layers; ++i) {
    enc_blocks_.push_back(
        ViTBlock::create(ps, "tok.enc" + std::to_string(i), d, config_.heads, 4 * d, rng));
  }
  enc_norm_ = RmsNorm::create(ps, "tok.enc_norm", d);
  enc_proj_ = Linear::create(ps, "tok.enc_proj", d, config_.latent_dim, rng);

  dec_embed_ = Linear::create(ps, "tok.dec_embed", config_.latent_dim, d, rng);
  dec_query_pos_ = ps.add("tok.dec_query_pos", randn<Scalar>(l, d, rng, 0.02));
  mask_token_ = ps.add("tok.mask_token", randn<Scalar>(1, d, rng, 0.02));
  dec_patch_pos_ = ps.add("tok.dec_patch_pos", randn<Scalar>(n, d, rng, 0.02));
  for (Eigen::Index i = 0; i < config_.dec_layers; ++i) {
    dec_blocks_.push_back(
        ViTBlock::create(ps, "tok.dec" + std::to_string(i), d, config_.heads, 4 * d, rng));
  }
  dec_norm_ = RmsNorm::create(ps, "tok.dec_norm", d);
  dec_unembed_ = Linear::create(ps, "tok.dec_unembed", d,
                                config_.patch * config_.patch * config_.conv_channels, rng);
  out_conv_ = Conv2dLayer::create(ps, "tok.out_conv", config_.conv_channels, config_.channels, 3,
                                  1, 1, rng);
}

Var Tokenizer::embed_patches(Tape& t, const Mat& pixels, Eigen::Index batch) const {
  const auto& c = config_;
  if (pixels.rows() != batch * c.image_size * c.image_size || pixels.cols() != c.channels) {
    throw DimensionError("encode: pixel tensor shape mismatch");
  }
  Var img = t.input(pixels);
  Var patches = t.patchify_gather(img, batch, c.image_size, c.image_size, c.patch);
  return patch_embed_.apply(t, patches);
}

Var Tokenizer::run_encoder(Tape& t, Var patch_tokens, Eigen::Index batch) const {
  const auto& c = config_;
  const Eigen::Index n = c.n_patches(), l = c.num_queries;
  Var x_patch = t.add_block(patch_tokens, t.param(*patch_pos_), n);
  Var queries = t.add(t.param(*query_tokens_), t.param(*query_pos_));
  Var x_query = t.tile_block(queries, batch);
  Var x = t.concat_tokens(x_patch, n, x_query, l);
  const MaskMat allow = build_hybrid_mask(n, l, MaskSide::encoder);
  for (const auto& block : enc_blocks_) x = block.apply(t, x, allow, batch);
  return enc_norm_.apply(t, x);
}

EncodeOutput Tokenizer::encode(Tape& t, const Mat& pixels, Eigen::Index batch,
                               std::optional<Var> substitute) const {
  const auto& c = config_;
  const Eigen::Index n = c.n_patches(), l = c.num_queries;
  Var patch_tokens = substitute ? *substitute : embed_patches(t, pixels, batch);
  if (patch_tokens.rows() != batch * n || patch_tokens.cols() != c.width) {
    throw DimensionError("encode: patch token shape mismatch");
  }
  Var x = run_encoder(t, patch_tokens, batch);
  Var h_enc = t.slice_tokens(x, n + l, 0, n);
  Var z = enc_proj_.apply(t, t.slice_tokens(x, n + l, n, n + l));
  return {h_enc, z};
}

DecodeOutput Tokenizer::decode(Tape& t, Var z_q, Eigen::Index batch, Eigen::Index prefix_len) const {
  const auto& c = config_;
  const Eigen::Index n = c.n_patches(), l = c.num_queries;
  if (prefix_len < 1 || prefix_len > l) throw DimensionError("decode: prefix_len out of range");
  if (z_q.rows() != batch * l || z_q.cols() != c.latent_dim) {
    throw DimensionError("decode: latent shape mismatch");
  }
  Var kept = prefix_len == l ? z_q : t.slice_tokens(z_q, l, 0, prefix_len);
  Var x_query = dec_embed_.apply(t, kept);
  Var qpos = prefix_len == l ? t.param(*dec_query_pos_)
                             : t.rows_slice(t.param(*dec_query_pos_), 0, prefix_len);
  x_query = t.add_block(x_query, qpos, prefix_len);

  Var masks = t.tile_block(t.param(*mask_token_), batch * n);
  Var x_patch = t.add_block(masks, t.param(*dec_patch_pos_), n);

  Var x = t.concat_tokens(x_query, prefix_len, x_patch, n);
  const MaskMat allow = build_hybrid_mask(n, prefix_len, MaskSide::decoder);
  Var h_dec_k;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(dec_blocks_.size()); ++i) {
    x = dec_blocks_[static_cast<std::size_t>(i)].apply(t, x, allow, batch);
    if (i + 1 == c.align_layer) {
      h_dec_k = t.slice_tokens(x, prefix_len + n, prefix_len, prefix_len + n);
    }
  }
  x = dec_norm_.apply(t, x);
  Var patch_states = t.slice_tokens(x, prefix_len + n, prefix_len, prefix_len + n);
  Var patch_pix = dec_unembed_.apply(t, patch_states);
  Var img = t.unpatchify_scatter(patch_pix, batch, c.image_size, c.image_size, c.conv_channels,
                                 c.patch);
  img = out_conv_.apply(t, img, batch, c.image_size, c.image_size);
  return {t.tanh_op(img), h_dec_k};
}

}  // namespace seqtok
