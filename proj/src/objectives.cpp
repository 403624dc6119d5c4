#include "seqtok/objectives.hpp"

#include <cmath>

namespace seqtok {

PerceptualNet::PerceptualNet(Eigen::Index channels, uint64_t seed) {
  Rng rng(seed);
  auto make = [&](Eigen::Index cin, Eigen::Index cout, Eigen::Index stride) {
    Stage s;
    s.cin = cin;
    s.cout = cout;
    s.stride = stride;
    const Scalar std = 1.0 / std::sqrt(static_cast<Scalar>(9 * cin));
    s.w = randn<Scalar>(9 * cin, cout, rng, std);
    s.b = Mat::Zero(1, cout);
    return s;
  };
  stages_.push_back(make(channels, 16, 1));
  stages_.push_back(make(16, 32, 2));
  stages_.push_back(make(32, 64, 2));
}

std::vector<Var> PerceptualNet::features(Tape& t, Var x, Eigen::Index batch, Eigen::Index h,
                                         Eigen::Index w) const {
  std::vector<Var> feats;
  Var cur = x;
  Eigen::Index ch = h, cw = w;
  for (const Stage& s : stages_) {
    cur = t.conv2d(cur, t.input(s.w), t.input(s.b), batch, ch, cw, 3, s.stride, 1);
    cur = t.silu(cur);
    ch = (ch + 2 - 3) / s.stride + 1;
    cw = (cw + 2 - 3) / s.stride + 1;
    feats.push_back(cur);
  }
  return feats;
}

Var PerceptualNet::distance(Tape& t, Var a, Var b, Eigen::Index batch, Eigen::Index h,
                            Eigen::Index w) const {
  std::vector<Var> fa = features(t, a, batch, h, w);
  std::vector<Var> fb = features(t, b, batch, h, w);
  Var total;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    Var d = t.mse(fa[i], fb[i]);
    total = i == 0 ? d : t.add(total, d);
  }
  return total;
}

Discriminator::Discriminator(ParamSet& ps, Eigen::Index channels, Eigen::Index image_size,
                             Eigen::Index base, Rng& rng)
    : image_size_(image_size) {
  Eigen::Index cin = channels, cout = base, spatial = image_size;
  for (int i = 0; i < 4; ++i) {
    convs_.push_back(
        Conv2dLayer::create(ps, "disc.conv" + std::to_string(i), cin, cout, 3, 2, 1, rng));
    spatial = (spatial + 2 - 3) / 2 + 1;
    cin = cout;
    cout = std::min<Eigen::Index>(2 * cout, 4 * base);
  }
  final_spatial_ = spatial;
  if (spatial < 1) throw ConfigError("discriminator: image too small for 4 strided blocks");
  head_ = Linear::create(ps, "disc.head", cin, 1, rng);
}

Var Discriminator::apply(Tape& t, Var pixels, Eigen::Index batch) const {
  Var x = pixels;
  Eigen::Index h = image_size_, w = image_size_;
  for (const auto& conv : convs_) {
    x = conv.apply(t, x, batch, h, w);
    x = t.leaky_relu(x, 0.2);
    h = conv.out_h(h);
    w = conv.out_w(w);
  }
  Var pooled = t.mean_tokens(x, h * w);  // B x C
  return head_.apply(t, pooled);
}

void LeCamState::update(Scalar mean_real, Scalar mean_fake) {
  ema_real = decay * ema_real + (1.0 - decay) * mean_real;
  ema_fake = decay * ema_fake + (1.0 - decay) * mean_fake;
}

GanLosses gan_losses(Tape& t, Var scores_real, Var scores_fake, const LeCamState& lecam) {
  GanLosses out;
  const Eigen::Index b = scores_real.rows();
  Mat ones = Mat::Ones(b, 1);
  // hinge: relu(1 - D(real)) + relu(1 + D(fake))
  Var real_term = t.mean_all(t.leaky_relu(t.add_const(t.scale(scores_real, -1.0), ones), 0.0));
  Var fake_term = t.mean_all(t.leaky_relu(t.add_const(scores_fake, ones), 0.0));
  out.d_loss = t.add(real_term, fake_term);
  out.g_loss = t.scale(t.mean_all(scores_fake), -1.0);

  Mat anchor_fake = Mat::Constant(b, 1, -lecam.ema_fake);
  Mat anchor_real = Mat::Constant(b, 1, -lecam.ema_real);
  Var dr = t.add_const(scores_real, anchor_fake);
  Var df = t.add_const(scores_fake, anchor_real);
  out.lecam = t.add(t.mean_all(t.cmul(dr, dr)), t.mean_all(t.cmul(df, df)));

  out.mean_real = scores_real.value().mean();
  out.mean_fake = scores_fake.value().mean();
  return out;
}

void LossWeights::validate() const {
  const Scalar vals[] = {recon_l2, recon_perc, gan, lecam, reg, entropy, ntp,
                         apr_l2, apr_perc, sem, sem_dec, aux_ntp};
  for (Scalar v : vals) {
    if (!(v >= 0) || !std::isfinite(v)) {
      throw ConfigError("loss weights must be finite and nonnegative");
    }
  }
}

Scalar LossBundle::get(const std::string& name) const {
  auto it = components.find(name);
  if (it == components.end()) throw ConfigError("loss bundle: unknown component '" + name + "'");
  return it->second;
}

Var assemble_total(Tape& t, const std::vector<WeightedTerm>& terms, LossBundle& bundle) {
  Var total;
  bool first = true;
  Scalar total_value = 0;
  for (const WeightedTerm& term : terms) {
    const Scalar raw = term.value.value()(0, 0);
    if (!std::isfinite(raw)) {
      throw DegenerateInputError("non-finite loss component: " + term.name);
    }
    bundle.components[term.name] = raw;
    if (term.weight == 0) continue;
    Var scaled = t.scale(term.value, term.weight);
    total = first ? scaled : t.add(total, scaled);
    first = false;
    total_value += term.weight * raw;
  }
  if (first) total = t.input(Mat::Zero(1, 1));
  bundle.total = total_value;
  return total;
}

}  // namespace seqtok
