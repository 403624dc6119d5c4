#pragma once

#include "seqtok/masks.hpp"
#include "seqtok/nn.hpp"

#include <optional>
#include <vector>

namespace seqtok {

struct TokenizerConfig {
  Eigen::Index image_size = 32;  // H = W
  Eigen::Index channels = 3;
  Eigen::Index patch = 8;        // P
  Eigen::Index width = 96;       // D
  Eigen::Index latent_dim = 16;  // d
  Eigen::Index num_queries = 16; // L
  Eigen::Index enc_layers = 3;
  Eigen::Index dec_layers = 3;
  Eigen::Index heads = 4;
  Eigen::Index align_layer = 2;  // decoder layer whose patch states feed alignment (1-based)
  Eigen::Index conv_channels = 8;

  Eigen::Index n_patches() const;  // N = (H/P)^2
  void validate() const;
};

struct EncodeOutput {
  Var h_enc;  // (B*N) x D hidden patch states
  Var z;      // (B*L) x d continuous latent
};

struct DecodeOutput {
  Var pixels;   // (B*H*W) x C in [-1, 1]
  Var h_dec_k;  // (B*N) x D mask-token states at the alignment layer
};

// 1D query-token ViT autoencoder. The encoder runs over [patches, queries]
// under the hybrid encoder mask and reads the latent off the query positions;
// the decoder runs over [query latents, mask tokens] under the hybrid decoder
// mask and reads pixels off the mask-token positions.
class Tokenizer {
 public:
  Tokenizer(ParamSet& ps, const TokenizerConfig& config, Rng& rng);

  // pixels: (B*H*W) x C constant input. When `substitute` is set, it replaces
  // the pixel patch embedding entirely (direct-substitution alignment); the
  // learnable positional embedding is still added on top.
  EncodeOutput encode(Tape& t, const Mat& pixels, Eigen::Index batch,
                      std::optional<Var> substitute = std::nullopt) const;

  // z_q: (B*L) x d. Only the first prefix_len latent tokens are presented to
  // the decoder; the rest are dropped from the sequence entirely.
  DecodeOutput decode(Tape& t, Var z_q, Eigen::Index batch, Eigen::Index prefix_len) const;

  // Patchified pixels through the patch-embedding projection, before the
  // positional embedding (added inside the encoder for both the plain and the
  // substituted path). Exposed so substitution mode can bypass it explicitly.
  Var embed_patches(Tape& t, const Mat& pixels, Eigen::Index batch) const;

  const TokenizerConfig& config() const { return config_; }

 private:
  Var run_encoder(Tape& t, Var patch_tokens, Eigen::Index batch) const;

  TokenizerConfig config_;
  Linear patch_embed_;
  Param* patch_pos_ = nullptr;  // N x D
  Param* query_tokens_ = nullptr;  // L x D
  Param* query_pos_ = nullptr;     // L x D
  std::vector<ViTBlock> enc_blocks_;
  RmsNorm enc_norm_;
  Linear enc_proj_;  // D -> d

  Linear dec_embed_;  // d -> D
  Param* dec_query_pos_ = nullptr;  // L x D
  Param* mask_token_ = nullptr;     // 1 x D
  Param* dec_patch_pos_ = nullptr;  // N x D
  std::vector<ViTBlock> dec_blocks_;
  RmsNorm dec_norm_;
  Linear dec_unembed_;  // D -> P*P*conv_channels
  Conv2dLayer out_conv_;
};

}  // namespace seqtok
