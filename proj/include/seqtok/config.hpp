#pragma once

#include "seqtok/alignment.hpp"
#include "seqtok/ar_model.hpp"
#include "seqtok/dataset.hpp"
#include "seqtok/objectives.hpp"
#include "seqtok/tokenizer.hpp"

#include <string>
#include <vector>

namespace seqtok {

// Flat run configuration. Resolution order: preset defaults < config file <
// command-line overrides; unknown keys are rejected with a nearest-key hint.
struct TrainConfig {
  long long seed = 1;

  // tokenizer
  long long image_size = 32;
  long long channels = 3;
  long long patch_size = 8;
  long long enc_layers = 3;
  long long dec_layers = 3;
  long long tokenizer_width = 96;
  long long tokenizer_heads = 4;
  long long latent_dim = 16;
  long long num_tokens = 16;  // L
  long long conv_channels = 8;

  // quantizer
  long long codebook_size = 64;  // K
  double temperature = 1.0;

  // AR generator + auxiliary guidance model
  long long ar_layers = 3;
  long long ar_heads = 4;
  long long ar_width = 128;
  long long aux_layers = 2;
  long long aux_heads = 4;
  long long aux_width = 64;

  // data
  std::string data_source = "synthetic";  // synthetic | directory
  std::string data_path;
  long long num_classes = 8;
  long long train_count = 512;
  long long val_count = 128;
  double val_fraction = 0.2;

  // training
  long long batch_size = 16;
  long long steps = 600;
  double lr = 1e-3;
  double lr_min = 1e-5;
  double beta1 = 0.9;
  double beta2_tokenizer = 0.999;
  double beta2_ar = 0.95;
  double disc_lr = 1e-4;
  long long disc_base = 32;
  double ema_decay = 0.99;
  double grad_clip = 1.0;
  double nested_dropout = 0.5;
  double class_dropout = 0.1;
  double gan_warmup = 0.1;   // fraction of steps with the GAN term disabled
  bool ntp_backprop = true;  // when false, NTP gradients stop at the quantizer

  // loss weights (generator-side names mirror the published table)
  double lambda_l2 = 1.0;
  double lambda_lpips = 1.0;
  double lambda_gan = 0.1;
  double lambda_lecam = 0.05;
  double lambda_reg = 1e-3;
  double lambda_entropy = 0.01;
  double lambda_ntp = 0.1;
  double lambda_apr_l2 = 1.0;
  double lambda_apr_lpips = 1.0;
  double lambda_sem = 1.0;
  double lambda_sem_decoder = 1.0;
  double lambda_aux_ntp = 0.1;

  // alignment
  std::string align_mode = "none";  // none | direct | substitution | implicit
  bool decoder_align = false;
  long long align_layer = 2;  // decoder layer k (1-based)
  long long provider_seed = 1234;
  long long feat_dim = 32;

  // evaluation
  long long perceptual_seed = 77;
  long long extractor_seed = 99;
  long long fid_samples = 128;
  long long eval_batch = 32;

  void validate() const;

  TokenizerConfig tokenizer_config() const;
  ARConfig ar_config() const;
  ARConfig aux_config() const;
  DatasetSpec dataset_spec() const;
  LossWeights loss_weights() const;

  std::string to_json_string(int indent = 2) const;

  static TrainConfig preset(const std::string& name);  // desk | S | B | L | H
  static std::vector<std::string> preset_names();
  static std::vector<std::string> key_names();

  // Layered load; `path` may be empty (preset only). Overrides are
  // "key=value" strings.
  static TrainConfig load(const std::string& preset_name, const std::string& path,
                          const std::vector<std::string>& overrides);
  static TrainConfig from_json_string(const std::string& text);

  void apply_json_text(const std::string& text);
  void apply_override(const std::string& key_equals_value);
};

}  // namespace seqtok
