#pragma once

#include "seqtok/nn.hpp"

#include <map>
#include <string>
#include <vector>

namespace seqtok {

// Frozen multi-layer convolutional feature stack; the perceptual distance is
// the summed MSE of the stage activations. Weights are constants on the tape,
// so gradients reach only the compared images.
class PerceptualNet {
 public:
  PerceptualNet(Eigen::Index channels, uint64_t seed);

  Var distance(Tape& t, Var a, Var b, Eigen::Index batch, Eigen::Index h, Eigen::Index w) const;

 private:
  struct Stage {
    Mat w;  // (k*k*cin) x cout
    Mat b;  // 1 x cout
    Eigen::Index cin, cout, stride;
  };
  std::vector<Var> features(Tape& t, Var x, Eigen::Index batch, Eigen::Index h,
                            Eigen::Index w) const;
  std::vector<Stage> stages_;
};

// Strided convolutional discriminator emitting one scalar per image.
class Discriminator {
 public:
  Discriminator(ParamSet& ps, Eigen::Index channels, Eigen::Index image_size, Eigen::Index base,
                Rng& rng);

  Var apply(Tape& t, Var pixels, Eigen::Index batch) const;  // B x 1 scores

 private:
  std::vector<Conv2dLayer> convs_;
  Linear head_;
  Eigen::Index image_size_;
  Eigen::Index final_spatial_ = 1;
};

// EMA anchors of discriminator outputs for the LeCam penalty.
struct LeCamState {
  Scalar ema_real = 0;
  Scalar ema_fake = 0;
  Scalar decay = 0.99;

  void update(Scalar mean_real, Scalar mean_fake);
};

struct GanLosses {
  Var d_loss;   // hinge discriminator loss
  Var g_loss;   // generator adversarial term (-mean D(fake))
  Var lecam;    // mean((D(real)-ema_fake)^2) + mean((D(fake)-ema_real)^2)
  Scalar mean_real = 0;  // detached means, for EMA updates
  Scalar mean_fake = 0;
};

// scores_* are B x 1 discriminator outputs.
GanLosses gan_losses(Tape& t, Var scores_real, Var scores_fake, const LeCamState& lecam);

struct LossWeights {
  Scalar recon_l2 = 1.0;
  Scalar recon_perc = 1.0;
  Scalar gan = 0.1;
  Scalar lecam = 0.05;
  Scalar reg = 1e-3;       // commitment
  Scalar entropy = 0.01;
  Scalar ntp = 0.1;
  Scalar apr_l2 = 1.0;
  Scalar apr_perc = 1.0;
  Scalar sem = 1.0;        // encoder-side alignment
  Scalar sem_dec = 1.0;    // decoder-side alignment
  Scalar aux_ntp = 0.1;    // auxiliary guidance model

  void validate() const;
};

// Named component values plus the weighted total; every component is logged.
struct LossBundle {
  std::map<std::string, Scalar> components;  // raw (unweighted) values
  Scalar total = 0;

  Scalar get(const std::string& name) const;
};

// total = sum_i weight_i * component_i over `weighted` (name -> (weight, var));
// throws DegenerateInputError naming the first non-finite component.
struct WeightedTerm {
  std::string name;
  Scalar weight;
  Var value;
};

Var assemble_total(Tape& t, const std::vector<WeightedTerm>& terms, LossBundle& bundle);

}  // namespace seqtok
