#include "seqtok/nn.hpp"

#include <cmath>

namespace seqtok {

Param* ParamSet::add(const std::string& name, Mat init) {
  params_.push_back(std::make_unique<Param>(name, std::move(init)));
  return params_.back().get();
}

Param* ParamSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

void ParamSet::collect(std::vector<Param*>& out) const {
  for (auto& p : params_) out.push_back(p.get());
}

Eigen::Index ParamSet::total_size() const {
  Eigen::Index n = 0;
  for (auto& p : params_) n += p->size();
  return n;
}

Linear Linear::create(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                      Rng& rng, bool zero_init) {
  Linear l;
  const Scalar std = zero_init ? 0.0 : 1.0 / std::sqrt(static_cast<Scalar>(in));
  l.w = ps.add(name + ".w", zero_init ? Mat::Zero(in, out) : randn<Scalar>(in, out, rng, std));
  l.b = ps.add(name + ".b", Mat::Zero(1, out));
  return l;
}

Var Linear::apply(Tape& t, Var x) const { return t.add_rowvec(t.matmul(x, t.param(*w)), t.param(*b)); }

Mat Linear::apply_eval(const Mat& x) const {
  Mat out = x * w->value;
  out.rowwise() += b->value.row(0);
  return out;
}

RmsNorm RmsNorm::create(ParamSet& ps, const std::string& name, Eigen::Index dim) {
  RmsNorm n;
  n.gain = ps.add(name + ".gain", Mat::Ones(1, dim));
  return n;
}

Var RmsNorm::apply(Tape& t, Var x) const { return t.rms_norm(x, t.param(*gain)); }

Mat RmsNorm::apply_eval(const Mat& x) const {
  constexpr Scalar eps = 1e-6;
  Mat out(x.rows(), x.cols());
  const Scalar c = static_cast<Scalar>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar inv = 1.0 / std::sqrt(x.row(r).squaredNorm() / c + eps);
    out.row(r) = (x.row(r) * inv).cwiseProduct(gain->value.row(0));
  }
  return out;
}

MultiheadAttention MultiheadAttention::create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                                              Eigen::Index heads, Rng& rng) {
  if (dim % heads != 0) throw ConfigError(name + ": hidden dim not divisible by heads");
  MultiheadAttention a;
  a.heads = heads;
  a.wq = Linear::create(ps, name + ".wq", dim, dim, rng);
  a.wk = Linear::create(ps, name + ".wk", dim, dim, rng);
  a.wv = Linear::create(ps, name + ".wv", dim, dim, rng);
  a.wo = Linear::create(ps, name + ".wo", dim, dim, rng);
  return a;
}

Var MultiheadAttention::apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch) const {
  Var q = wq.apply(t, x);
  Var k = wk.apply(t, x);
  Var v = wv.apply(t, x);
  Var o = t.attention(q, k, v, allow, batch, heads);
  return wo.apply(t, o);
}

ViTBlock ViTBlock::create(ParamSet& ps, const std::string& name, Eigen::Index dim, Eigen::Index heads,
                          Eigen::Index mlp_hidden, Rng& rng) {
  ViTBlock b;
  b.norm1 = RmsNorm::create(ps, name + ".norm1", dim);
  b.norm2 = RmsNorm::create(ps, name + ".norm2", dim);
  b.attn = MultiheadAttention::create(ps, name + ".attn", dim, heads, rng);
  b.fc1 = Linear::create(ps, name + ".fc1", dim, mlp_hidden, rng);
  b.fc2 = Linear::create(ps, name + ".fc2", mlp_hidden, dim, rng);
  return b;
}

Var ViTBlock::apply(Tape& t, Var x, const MaskMat& allow, Eigen::Index batch) const {
  x = t.add(x, attn.apply(t, norm1.apply(t, x), allow, batch));
  Var h = fc2.apply(t, t.silu(fc1.apply(t, norm2.apply(t, x))));
  return t.add(x, h);
}

SwiGluMlp SwiGluMlp::create(ParamSet& ps, const std::string& name, Eigen::Index dim,
                            Eigen::Index hidden, Rng& rng) {
  SwiGluMlp m;
  m.gate = Linear::create(ps, name + ".gate", dim, hidden, rng);
  m.up = Linear::create(ps, name + ".up", dim, hidden, rng);
  m.down = Linear::create(ps, name + ".down", hidden, dim, rng);
  return m;
}

Var SwiGluMlp::apply(Tape& t, Var x) const {
  return down.apply(t, t.cmul(t.silu(gate.apply(t, x)), up.apply(t, x)));
}

Mat SwiGluMlp::apply_eval(const Mat& x) const {
  Mat g = gate.apply_eval(x);
  Mat sig = (1.0 + (-g.array()).exp()).inverse().matrix();
  Mat h = g.cwiseProduct(sig).cwiseProduct(up.apply_eval(x));
  return down.apply_eval(h);
}

Conv2dLayer Conv2dLayer::create(ParamSet& ps, const std::string& name, Eigen::Index cin,
                                Eigen::Index cout, Eigen::Index ksize, Eigen::Index stride,
                                Eigen::Index pad, Rng& rng) {
  Conv2dLayer c;
  c.ksize = ksize;
  c.stride = stride;
  c.pad = pad;
  const Scalar std = 1.0 / std::sqrt(static_cast<Scalar>(ksize * ksize * cin));
  c.w = ps.add(name + ".w", randn<Scalar>(ksize * ksize * cin, cout, rng, std));
  c.b = ps.add(name + ".b", Mat::Zero(1, cout));
  return c;
}

Var Conv2dLayer::apply(Tape& t, Var x, Eigen::Index batch, Eigen::Index h, Eigen::Index w) const {
  return t.conv2d(x, t.param(*this->w), t.param(*this->b), batch, h, w, ksize, stride, pad);
}

Mlp3 Mlp3::create(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                  Eigen::Index out, Rng& rng) {
  Mlp3 m;
  m.l1 = Linear::create(ps, name + ".l1", in, hidden, rng);
  m.l2 = Linear::create(ps, name + ".l2", hidden, hidden, rng);
  m.l3 = Linear::create(ps, name + ".l3", hidden, out, rng);
  return m;
}

Var Mlp3::apply(Tape& t, Var x) const {
  return l3.apply(t, t.silu(l2.apply(t, t.silu(l1.apply(t, x)))));
}

}  // namespace seqtok
