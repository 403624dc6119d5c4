#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seqtok/objectives.hpp"

#include <cmath>

using namespace seqtok;

TEST_CASE("perceptual distance is zero for identical images and positive otherwise") {
  const Eigen::Index image = 16, channels = 3;
  PerceptualNet net(channels, 99);
  Rng rng(81);
  const Mat a = rand_uniform<Scalar>(2 * image * image, channels, rng, -1.0, 1.0);
  Mat b = a;
  b.array() += 0.2;
  b = b.cwiseMin(1.0);

  Tape t;
  const Var same = net.distance(t, t.input(a), t.input(a), 2, image, image);
  CHECK(same.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  const Var diff = net.distance(t, t.input(a), t.input(b), 2, image, image);
  CHECK(diff.value()(0, 0) > 0.0);
}

TEST_CASE("perceptual distance is symmetric and deterministic across instances") {
  const Eigen::Index image = 16, channels = 3;
  PerceptualNet n1(channels, 7), n2(channels, 7), n3(channels, 8);
  Rng rng(82);
  const Mat a = rand_uniform<Scalar>(image * image, channels, rng, -1.0, 1.0);
  const Mat b = rand_uniform<Scalar>(image * image, channels, rng, -1.0, 1.0);
  Tape t;
  const Scalar ab = n1.distance(t, t.input(a), t.input(b), 1, image, image).value()(0, 0);
  const Scalar ba = n1.distance(t, t.input(b), t.input(a), 1, image, image).value()(0, 0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  const Scalar other = n2.distance(t, t.input(a), t.input(b), 1, image, image).value()(0, 0);
  CHECK(ab == other);
  const Scalar different_seed = n3.distance(t, t.input(a), t.input(b), 1, image, image).value()(0, 0);
  CHECK(ab != different_seed);
}

TEST_CASE("perceptual gradients reach the images, not hidden weights") {
  const Eigen::Index image = 16, channels = 3;
  PerceptualNet net(channels, 3);
  Rng rng(83);
  const Mat a = rand_uniform<Scalar>(image * image, channels, rng, -1.0, 1.0);
  const Mat b = rand_uniform<Scalar>(image * image, channels, rng, -1.0, 1.0);
  Param pa("a", a);
  Tape t;
  const Var d = net.distance(t, t.param(pa), t.input(b), 1, image, image);
  t.backward(d);
  CHECK(pa.grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("hinge gan losses match hand-computed cases") {
  // real = [2, 0], fake = [-2, 0], anchors 0.
  Mat real(2, 1), fake(2, 1);
  real << 2, 0;
  fake << -2, 0;
  LeCamState anchors;
  anchors.ema_real = 0;
  anchors.ema_fake = 0;

  Tape t;
  const GanLosses g = gan_losses(t, t.input(real), t.input(fake), anchors);
  // d: mean(relu(1-real)) + mean(relu(1+fake)) = (0+1)/2 + (0+1)/2 = 1.
  CHECK(g.d_loss.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // g: -mean(fake) = 1.
  CHECK(g.g_loss.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // lecam: mean((real-0)^2) + mean((fake-0)^2) = 2 + 2 = 4.
  CHECK(g.lecam.value()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(g.mean_real == doctest::Approx(1.0));
  CHECK(g.mean_fake == doctest::Approx(-1.0));
}

TEST_CASE("lecam penalty at the anchor fixed point is zero") {
  Mat real(1, 1), fake(1, 1);
  real << 0.5;
  fake << -0.25;
  LeCamState anchors;
  anchors.ema_real = 0.5;   // anchors equal to the current scores
  anchors.ema_fake = -0.25;
  Tape t;
  const GanLosses g = gan_losses(t, t.input(real), t.input(fake), anchors);
  // mean((real - ema_fake)^2) + mean((fake - ema_real)^2)
  const Scalar expect = (0.5 + 0.25) * (0.5 + 0.25) + (-0.25 - 0.5) * (-0.25 - 0.5);
  CHECK(g.lecam.value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));

  // True fixed point: scores equal to the opposite anchors.
  Mat r2(1, 1), f2(1, 1);
  r2 << -0.25;
  f2 << 0.5;
  const GanLosses g2 = gan_losses(t, t.input(r2), t.input(f2), anchors);
  CHECK(g2.lecam.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("lecam penalty single-sample oracle") {
  // D(real) = 1, D(fake) = 0, anchors 0: (1-0)^2 + (0-0)^2 = 1.
  Mat real(1, 1), fake(1, 1);
  real << 1;
  fake << 0;
  LeCamState anchors;
  Tape t;
  const GanLosses g = gan_losses(t, t.input(real), t.input(fake), anchors);
  CHECK(g.lecam.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lecam ema update arithmetic") {
  LeCamState s;
  s.decay = 0.9;
  s.ema_real = 1.0;
  s.ema_fake = -1.0;
  s.update(2.0, 0.0);
  CHECK(s.ema_real == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0).epsilon(1e-12));
  CHECK(s.ema_fake == doctest::Approx(0.9 * -1.0 + 0.1 * 0.0).epsilon(1e-12));
}

TEST_CASE("discriminator emits one score per image") {
  const Eigen::Index image = 16, channels = 3;
  ParamSet ps;
  Rng rng(84);
  const Discriminator disc(ps, channels, image, 8, rng);
  const Mat pixels = rand_uniform<Scalar>(3 * image * image, channels, rng, -1.0, 1.0);
  Tape t;
  const Var scores = disc.apply(t, t.input(pixels), 3);
  CHECK(scores.rows() == 3);
  CHECK(scores.cols() == 1);
  t.backward(t.mean_all(scores));
  bool any = false;
  for (const auto& p : ps.all()) any = any || p->grad.cwiseAbs().maxCoeff() > 0;
  CHECK(any);
}

TEST_CASE("assemble_total computes the weighted sum and logs raw components") {
  Tape t;
  LossBundle bundle;
  std::vector<WeightedTerm> terms;
  terms.push_back({"a", 1.0, t.input(Mat::Constant(1, 1, 1.0))});
  terms.push_back({"b", 1.0, t.input(Mat::Constant(1, 1, 2.0))});
  terms.push_back({"c", 1.0, t.input(Mat::Constant(1, 1, 3.0))});
  const Var total = assemble_total(t, terms, bundle);
  CHECK(total.value()(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(bundle.total == doctest::Approx(6.0));
  CHECK(bundle.get("a") == doctest::Approx(1.0));
  CHECK(bundle.get("b") == doctest::Approx(2.0));
  CHECK(bundle.get("c") == doctest::Approx(3.0));
  CHECK_THROWS_AS(bundle.get("missing"), ConfigError);
}

TEST_CASE("assemble_total is linear in the weights") {
  Tape t;
  std::vector<WeightedTerm> base;
  base.push_back({"x", 0.25, t.input(Mat::Constant(1, 1, 2.0))});
  base.push_back({"y", 1.5, t.input(Mat::Constant(1, 1, -1.0))});
  LossBundle b1;
  const Scalar v1 = assemble_total(t, base, b1).value()(0, 0);

  std::vector<WeightedTerm> doubled = base;
  for (auto& term : doubled) term.weight *= 2;
  LossBundle b2;
  const Scalar v2 = assemble_total(t, doubled, b2).value()(0, 0);
  CHECK(v2 == doctest::Approx(2 * v1).epsilon(1e-12));
  // Raw component logs are weight-independent.
  CHECK(b1.get("x") == b2.get("x"));
  CHECK(b1.get("y") == b2.get("y"));
}

TEST_CASE("assemble_total: weight-zero terms are logged but excluded from the total") {
  Tape t;
  LossBundle bundle;
  std::vector<WeightedTerm> terms;
  terms.push_back({"live", 2.0, t.input(Mat::Constant(1, 1, 3.0))});
  terms.push_back({"dead", 0.0, t.input(Mat::Constant(1, 1, 1000.0))});
  const Var total = assemble_total(t, terms, bundle);
  CHECK(total.value()(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(bundle.get("dead") == doctest::Approx(1000.0));
}

TEST_CASE("assemble_total gradient splits by weight") {
  Param pa("a", Mat::Constant(1, 1, 1.0));
  Param pb("b", Mat::Constant(1, 1, 1.0));
  Tape t;
  std::vector<WeightedTerm> terms;
  terms.push_back({"a", 0.5, t.param(pa)});
  terms.push_back({"b", 2.0, t.param(pb)});
  LossBundle bundle;
  const Var total = assemble_total(t, terms, bundle);
  t.backward(total);
  CHECK(pa.grad(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pb.grad(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("assemble_total names the first non-finite component") {
  Tape t;
  LossBundle bundle;
  std::vector<WeightedTerm> terms;
  terms.push_back({"fine", 1.0, t.input(Mat::Constant(1, 1, 1.0))});
  terms.push_back({"broken_term", 1.0,
                   t.input(Mat::Constant(1, 1, std::numeric_limits<Scalar>::quiet_NaN()))});
  try {
    assemble_total(t, terms, bundle);
    FAIL("expected DegenerateInputError");
  } catch (const DegenerateInputError& e) {
    CHECK(std::string(e.what()).find("broken_term") != std::string::npos);
  }
}

TEST_CASE("loss weights reject negatives") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.ntp = -0.1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}
