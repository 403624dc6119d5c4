#pragma once

#include "seqtok/checkpoint.hpp"
#include "seqtok/config.hpp"
#include "seqtok/dataset.hpp"
#include "seqtok/optimizer.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace seqtok {

// Everything the joint training loop owns. Parameter groups:
//   tokenizer_ps: encoder phi, decoder psi, codebook C, projectors, subst MLP
//   ar_ps:        generator theta plus the auxiliary guidance model
//   disc_ps:      discriminator
// The perceptual net and feature provider are frozen (not ParamSets that any
// optimizer sees).
struct ModelBundle {
  TrainConfig cfg;
  AlignMode align_mode = AlignMode::none;

  ParamSet tokenizer_ps, ar_ps, disc_ps;
  std::unique_ptr<Tokenizer> tokenizer;
  std::unique_ptr<Quantizer> quantizer;
  std::unique_ptr<ARModel> ar;
  std::unique_ptr<ARModel> aux;
  std::unique_ptr<Discriminator> disc;
  std::unique_ptr<PerceptualNet> perceptual;
  std::unique_ptr<FrozenFeatureProvider> provider;
  std::optional<Mlp3> proj_enc;   // omega_1: direct/implicit alignment site
  std::optional<Mlp3> proj_dec;   // omega_2: decoder alignment site
  std::optional<Mlp3> subst_mlp;  // direct substitution input map

  static ModelBundle build(const TrainConfig& cfg);

  std::vector<Param*> generator_params() const;  // tokenizer_ps + ar_ps
  std::vector<Param*> encoder_params() const;    // phi
  std::vector<Param*> decoder_params() const;    // psi
  std::vector<Param*> ar_main_params() const;    // theta (main AR only)
  std::vector<Param*> proj_enc_params() const;
  std::vector<Param*> proj_dec_params() const;

  // Encode + quantize a pixel batch without gradients; returns hard ids
  // (batch-major) and the continuous latent values.
  std::pair<std::vector<int>, Mat> encode_ids(const Mat& pixels, Eigen::Index batch) const;
  // Decode hard ids to pixels (inference); prefix < 0 means the full length.
  Mat decode_ids(const std::vector<int>& ids, Eigen::Index batch, Eigen::Index prefix = -1) const;
};

struct StepOutput {
  LossBundle losses;
  std::vector<int> ids;      // quantizer code ids for the batch
  Scalar ar_acc = 0;         // teacher-forcing top-1 accuracy
  Eigen::Index prefix = 0;   // nested-dropout draw
  Scalar lr = 0;
  Scalar grad_norm = 0;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  StepOutput train_step();  // runs step `step()`, then advances the counter
  long long step() const { return step_; }
  long long total_steps() const { return cfg_.steps; }

  ModelBundle& bundle() { return bundle_; }
  const Dataset& dataset() const { return dataset_; }
  EmaShadow& ema() { return ema_; }
  LeCamState& lecam() { return lecam_; }

  Archive make_checkpoint() const;
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);
  static TrainConfig config_from_checkpoint(const std::string& path);

 private:
  StepOutput forward_backward(const ImageBatch& batch, long long step, Tape& t, Var& total);
  void discriminator_phase(const ImageBatch& batch, const Mat& fake_pixels, StepOutput& out);
  bool gan_active(long long step) const;

  TrainConfig cfg_;
  ModelBundle bundle_;
  Dataset dataset_;
  Adam opt_tok_, opt_ar_, opt_disc_;
  EmaShadow ema_;
  LeCamState lecam_;
  Mat last_recon_;  // reconstruction values from the generator pass
  long long step_ = 0;
};

struct OrderingResult {
  std::string order;
  std::vector<int> permutation;
  Scalar distance = 0;   // generation feature distance vs the real val set
  Scalar ar_acc = 0;     // teacher-forcing accuracy on permuted val ids
  Scalar ntp_final = 0;  // final training NTP loss
};

// Position permutation for the ordering experiment.
std::vector<int> make_order_permutation(const std::string& order, Eigen::Index l,
                                        uint64_t perm_seed);

// Freeze the tokenizer from a trained checkpoint, encode the corpus, train a
// fresh AR model on permuted id sequences, and score generation through the
// inverse permutation. `ar_steps` <= 0 uses cfg.steps.
OrderingResult run_ordering_experiment(const TrainConfig& cfg, const std::string& ckpt_path,
                                       const std::string& order, uint64_t perm_seed,
                                       long long ar_steps,
                                       const std::function<void(long long, Scalar)>& on_step = {});

}  // namespace seqtok
