#include "seqtok/tape.hpp"

#include <cmath>
#include <memory>

namespace seqtok {

namespace {
constexpr Scalar kMaskedLogit = -1e30;
}

int Tape::push(Mat value, bool requires_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(back);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::accum(int id, const Mat& g) {
  if (!wants(id)) return;
  grad_ref(id) += g;
}

Var Tape::input(Mat v) { return {this, push(std::move(v), false)}; }

Var Tape::zeros(Eigen::Index rows, Eigen::Index cols) {
  return {this, push(Mat::Zero(rows, cols), false)};
}

Var Tape::param(Param& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {this, it->second};
  Param* pp = &p;
  int id = push(p.value, true);
  nodes_[id].backward = [this, id, pp]() { pp->grad += nodes_[id].grad; };
  param_nodes_.emplace(pp, id);
  return {this, id};
}

Var Tape::matmul(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Mat v = nodes_[ia].value * nodes_[ib].value;
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib]() {
      const Mat& g = nodes_[id].grad;
      if (wants(ia)) accum(ia, g * nodes_[ib].value.transpose());
      if (wants(ib)) accum(ib, nodes_[ia].value.transpose() * g);
    };
  }
  return {this, id};
}

Var Tape::matmul_nt(Var a, Var b) {
  int ia = a.id, ib = b.id;
  Mat v = nodes_[ia].value * nodes_[ib].value.transpose();
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(v), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib]() {
      const Mat& g = nodes_[id].grad;
      if (wants(ia)) accum(ia, g * nodes_[ib].value);
      if (wants(ib)) accum(ib, g.transpose() * nodes_[ia].value);
    };
  }
  return {this, id};
}

Var Tape::add(Var a, Var b) {
  int ia = a.id, ib = b.id;
  bool rg = wants(ia) || wants(ib);
  int id = push(nodes_[ia].value + nodes_[ib].value, rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib]() {
      accum(ia, nodes_[id].grad);
      accum(ib, nodes_[id].grad);
    };
  }
  return {this, id};
}

Var Tape::sub(Var a, Var b) {
  int ia = a.id, ib = b.id;
  bool rg = wants(ia) || wants(ib);
  int id = push(nodes_[ia].value - nodes_[ib].value, rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib]() {
      accum(ia, nodes_[id].grad);
      if (wants(ib)) accum(ib, -nodes_[id].grad);
    };
  }
  return {this, id};
}

Var Tape::cmul(Var a, Var b) {
  int ia = a.id, ib = b.id;
  bool rg = wants(ia) || wants(ib);
  int id = push(nodes_[ia].value.cwiseProduct(nodes_[ib].value), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib]() {
      const Mat& g = nodes_[id].grad;
      if (wants(ia)) accum(ia, g.cwiseProduct(nodes_[ib].value));
      if (wants(ib)) accum(ib, g.cwiseProduct(nodes_[ia].value));
    };
  }
  return {this, id};
}

Var Tape::scale(Var a, Scalar s) {
  int ia = a.id;
  bool rg = wants(ia);
  int id = push(nodes_[ia].value * s, rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, s]() { accum(ia, nodes_[id].grad * s); };
  }
  return {this, id};
}

Var Tape::add_const(Var a, Mat c) {
  int ia = a.id;
  bool rg = wants(ia);
  int id = push(nodes_[ia].value + c, rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia]() { accum(ia, nodes_[id].grad); };
  }
  return {this, id};
}

Var Tape::add_rowvec(Var a, Var v) {
  int ia = a.id, iv = v.id;
  bool rg = wants(ia) || wants(iv);
  Mat out = nodes_[ia].value;
  out.rowwise() += nodes_[iv].value.row(0);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, iv]() {
      const Mat& g = nodes_[id].grad;
      accum(ia, g);
      if (wants(iv)) accum(iv, g.colwise().sum());
    };
  }
  return {this, id};
}

Var Tape::tile_block(Var block, Eigen::Index copies) {
  int ib = block.id;
  const Mat& bv = nodes_[ib].value;
  const Eigen::Index t = bv.rows(), c = bv.cols();
  Mat out(t * copies, c);
  for (Eigen::Index i = 0; i < copies; ++i) out.middleRows(i * t, t) = bv;
  bool rg = wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ib, copies, t]() {
      const Mat& g = nodes_[id].grad;
      Mat acc = Mat::Zero(t, g.cols());
      for (Eigen::Index i = 0; i < copies; ++i) acc += g.middleRows(i * t, t);
      accum(ib, acc);
    };
  }
  return {this, id};
}

Var Tape::add_block(Var a, Var block, Eigen::Index tokens_per_item) {
  int ia = a.id, ib = block.id;
  const Eigen::Index t = tokens_per_item;
  const Eigen::Index batch = nodes_[ia].value.rows() / t;
  Mat out = nodes_[ia].value;
  for (Eigen::Index b = 0; b < batch; ++b) out.middleRows(b * t, t) += nodes_[ib].value;
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib, batch, t]() {
      const Mat& g = nodes_[id].grad;
      accum(ia, g);
      if (wants(ib)) {
        Mat acc = Mat::Zero(t, g.cols());
        for (Eigen::Index b = 0; b < batch; ++b) acc += g.middleRows(b * t, t);
        accum(ib, acc);
      }
    };
  }
  return {this, id};
}

Var Tape::slice_tokens(Var a, Eigen::Index tokens_per_item, Eigen::Index t0, Eigen::Index t1) {
  int ia = a.id;
  const Eigen::Index t = tokens_per_item, len = t1 - t0;
  const Eigen::Index batch = nodes_[ia].value.rows() / t;
  const Eigen::Index c = nodes_[ia].value.cols();
  Mat out(batch * len, c);
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.middleRows(b * len, len) = nodes_[ia].value.middleRows(b * t + t0, len);
  }
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, batch, t, t0, len]() {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_ref(ia);
      for (Eigen::Index b = 0; b < batch; ++b) {
        da.middleRows(b * t + t0, len) += g.middleRows(b * len, len);
      }
    };
  }
  return {this, id};
}

Var Tape::concat_tokens(Var a, Eigen::Index ta, Var b, Eigen::Index tb) {
  int ia = a.id, ib = b.id;
  const Eigen::Index batch = nodes_[ia].value.rows() / ta;
  const Eigen::Index c = nodes_[ia].value.cols();
  const Eigen::Index t = ta + tb;
  Mat out(batch * t, c);
  for (Eigen::Index bi = 0; bi < batch; ++bi) {
    out.middleRows(bi * t, ta) = nodes_[ia].value.middleRows(bi * ta, ta);
    out.middleRows(bi * t + ta, tb) = nodes_[ib].value.middleRows(bi * tb, tb);
  }
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib, batch, ta, tb, t]() {
      const Mat& g = nodes_[id].grad;
      if (wants(ia)) {
        Mat& da = grad_ref(ia);
        for (Eigen::Index bi = 0; bi < batch; ++bi) {
          da.middleRows(bi * ta, ta) += g.middleRows(bi * t, ta);
        }
      }
      if (wants(ib)) {
        Mat& db = grad_ref(ib);
        for (Eigen::Index bi = 0; bi < batch; ++bi) {
          db.middleRows(bi * tb, tb) += g.middleRows(bi * t + ta, tb);
        }
      }
    };
  }
  return {this, id};
}

Var Tape::vstack(Var a, Var b) {
  int ia = a.id, ib = b.id;
  const Eigen::Index ra = nodes_[ia].value.rows(), rb = nodes_[ib].value.rows();
  Mat out(ra + rb, nodes_[ia].value.cols());
  out.topRows(ra) = nodes_[ia].value;
  out.bottomRows(rb) = nodes_[ib].value;
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib, ra, rb]() {
      const Mat& g = nodes_[id].grad;
      accum(ia, g.topRows(ra));
      accum(ib, g.bottomRows(rb));
    };
  }
  return {this, id};
}

Var Tape::rows_slice(Var a, Eigen::Index r0, Eigen::Index r1) {
  int ia = a.id;
  const Eigen::Index len = r1 - r0;
  bool rg = wants(ia);
  int id = push(nodes_[ia].value.middleRows(r0, len), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, r0, len]() {
      grad_ref(ia).middleRows(r0, len) += nodes_[id].grad;
    };
  }
  return {this, id};
}

Var Tape::cols_slice(Var a, Eigen::Index c0, Eigen::Index c1) {
  int ia = a.id;
  const Eigen::Index len = c1 - c0;
  bool rg = wants(ia);
  int id = push(nodes_[ia].value.middleCols(c0, len), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, c0, len]() {
      grad_ref(ia).middleCols(c0, len) += nodes_[id].grad;
    };
  }
  return {this, id};
}

Var Tape::mean_tokens(Var a, Eigen::Index tokens_per_item) {
  int ia = a.id;
  const Eigen::Index t = tokens_per_item;
  const Eigen::Index batch = nodes_[ia].value.rows() / t;
  Mat out(batch, nodes_[ia].value.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.row(b) = nodes_[ia].value.middleRows(b * t, t).colwise().mean();
  }
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, batch, t]() {
      const Mat& g = nodes_[id].grad;
      Mat& da = grad_ref(ia);
      for (Eigen::Index b = 0; b < batch; ++b) {
        da.middleRows(b * t, t).rowwise() += g.row(b) / Scalar(t);
      }
    };
  }
  return {this, id};
}

Var Tape::row_broadcast_mul(Var a, Var s, Eigen::Index tokens_per_item) {
  int ia = a.id, is = s.id;
  const Eigen::Index t = tokens_per_item;
  const Eigen::Index batch = nodes_[is].value.rows();
  Mat out = nodes_[ia].value;
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.middleRows(b * t, t).array().rowwise() *= nodes_[is].value.row(b).array();
  }
  bool rg = wants(ia) || wants(is);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, is, batch, t]() {
      const Mat& g = nodes_[id].grad;
      if (wants(ia)) {
        Mat da = g;
        for (Eigen::Index b = 0; b < batch; ++b) {
          da.middleRows(b * t, t).array().rowwise() *= nodes_[is].value.row(b).array();
        }
        accum(ia, da);
      }
      if (wants(is)) {
        Mat ds(batch, g.cols());
        for (Eigen::Index b = 0; b < batch; ++b) {
          ds.row(b) = g.middleRows(b * t, t)
                          .cwiseProduct(nodes_[ia].value.middleRows(b * t, t))
                          .colwise()
                          .sum();
        }
        accum(is, ds);
      }
    };
  }
  return {this, id};
}

Var Tape::row_broadcast_add(Var a, Var s, Eigen::Index tokens_per_item) {
  int ia = a.id, is = s.id;
  const Eigen::Index t = tokens_per_item;
  const Eigen::Index batch = nodes_[is].value.rows();
  Mat out = nodes_[ia].value;
  for (Eigen::Index b = 0; b < batch; ++b) {
    out.middleRows(b * t, t).rowwise() += nodes_[is].value.row(b);
  }
  bool rg = wants(ia) || wants(is);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, is, batch, t]() {
      const Mat& g = nodes_[id].grad;
      accum(ia, g);
      if (wants(is)) {
        Mat ds(batch, g.cols());
        for (Eigen::Index b = 0; b < batch; ++b) {
          ds.row(b) = g.middleRows(b * t, t).colwise().sum();
        }
        accum(is, ds);
      }
    };
  }
  return {this, id};
}

Var Tape::embedding_rows(Var table, const std::vector<int>& ids) {
  int it = table.id;
  Mat out(static_cast<Eigen::Index>(ids.size()), nodes_[it].value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = nodes_[it].value.row(ids[i]);
  bool rg = wants(it);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    auto idx = std::make_shared<std::vector<int>>(ids);
    nodes_[id].backward = [this, id, it, idx]() {
      const Mat& g = nodes_[id].grad;
      Mat& dt = grad_ref(it);
      for (std::size_t i = 0; i < idx->size(); ++i) dt.row((*idx)[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  }
  return {this, id};
}

Var Tape::silu(Var a) {
  int ia = a.id;
  Mat sig = (1.0 + (-nodes_[ia].value.array()).exp()).inverse().matrix();
  Mat out = nodes_[ia].value.cwiseProduct(sig);
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    auto s = std::make_shared<Mat>(std::move(sig));
    nodes_[id].backward = [this, id, ia, s]() {
      const Mat& g = nodes_[id].grad;
      Mat d = s->array() * (1.0 + nodes_[ia].value.array() * (1.0 - s->array()));
      accum(ia, g.cwiseProduct(d));
    };
  }
  return {this, id};
}

Var Tape::tanh_op(Var a) {
  int ia = a.id;
  Mat out = nodes_[ia].value.array().tanh().matrix();
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia]() {
      const Mat& g = nodes_[id].grad;
      const Mat& y = nodes_[id].value;
      accum(ia, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    };
  }
  return {this, id};
}

Var Tape::leaky_relu(Var a, Scalar slope) {
  int ia = a.id;
  Mat out = nodes_[ia].value.unaryExpr([slope](Scalar x) { return x > 0 ? x : slope * x; });
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, slope]() {
      const Mat& g = nodes_[id].grad;
      Mat d = nodes_[ia].value.unaryExpr([slope](Scalar x) { return x > 0 ? Scalar(1) : slope; });
      accum(ia, g.cwiseProduct(d));
    };
  }
  return {this, id};
}

Var Tape::xlogx(Var a) {
  constexpr Scalar eps = 1e-12;
  int ia = a.id;
  Mat out = nodes_[ia].value.unaryExpr([](Scalar x) { return x > eps ? x * std::log(x) : Scalar(0); });
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia]() {
      const Mat& g = nodes_[id].grad;
      Mat d = nodes_[ia].value.unaryExpr(
          [](Scalar x) { return x > eps ? std::log(x) + Scalar(1) : Scalar(0); });
      accum(ia, g.cwiseProduct(d));
    };
  }
  return {this, id};
}

Var Tape::rms_norm(Var a, Var gain, Scalar eps) {
  int ia = a.id, ig = gain.id;
  const Mat& x = nodes_[ia].value;
  const Eigen::Index c = x.cols();
  auto inv = std::make_shared<Vec>(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    (*inv)(r) = Scalar(1) / std::sqrt(x.row(r).squaredNorm() / Scalar(c) + eps);
  }
  Mat out = x;
  out.array().colwise() *= inv->array();
  out.array().rowwise() *= nodes_[ig].value.row(0).array();
  bool rg = wants(ia) || wants(ig);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ig, inv, c]() {
      const Mat& g = nodes_[id].grad;
      const Mat& x = nodes_[ia].value;
      const auto gain_row = nodes_[ig].value.row(0);
      if (wants(ig)) {
        Mat xn = x;
        xn.array().colwise() *= inv->array();
        accum(ig, g.cwiseProduct(xn).colwise().sum());
      }
      if (wants(ia)) {
        Mat u = g;
        u.array().rowwise() *= gain_row.array();
        Mat dx(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          const Scalar n = (*inv)(r);
          const Scalar dot = u.row(r).dot(x.row(r));
          dx.row(r) = n * u.row(r) - (n * n * n / Scalar(c)) * dot * x.row(r);
        }
        accum(ia, dx);
      }
    };
  }
  return {this, id};
}

Var Tape::l2_normalize_rows(Var a) {
  int ia = a.id;
  const Mat& x = nodes_[ia].value;
  auto norms = std::make_shared<Vec>(x.rows());
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar n = x.row(r).norm();
    if (!(n > 1e-30)) {
      throw DegenerateInputError("l2_normalize_rows: zero-norm row " + std::to_string(r));
    }
    (*norms)(r) = n;
    out.row(r) = x.row(r) / n;
  }
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, norms]() {
      const Mat& g = nodes_[id].grad;
      const Mat& y = nodes_[id].value;
      Mat dx(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        dx.row(r) = (g.row(r) - y.row(r) * y.row(r).dot(g.row(r))) / (*norms)(r);
      }
      accum(ia, dx);
    };
  }
  return {this, id};
}

Var Tape::softmax_rows(Var a) {
  int ia = a.id;
  const Mat& x = nodes_[ia].value;
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia]() {
      const Mat& g = nodes_[id].grad;
      const Mat& p = nodes_[id].value;
      Mat dx(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const Scalar dot = g.row(r).dot(p.row(r));
        dx.row(r) = p.row(r).array() * (g.row(r).array() - dot);
      }
      accum(ia, dx);
    };
  }
  return {this, id};
}

Var Tape::attention(Var q, Var k, Var v, const MaskMat& allow, Eigen::Index batch, Eigen::Index heads) {
  int iq = q.id, ik = k.id, iv = v.id;
  const Eigen::Index rows = nodes_[iq].value.rows();
  const Eigen::Index t = rows / batch;
  const Eigen::Index dh = nodes_[iq].value.cols() / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  if (allow.rows() != t || allow.cols() != t) {
    throw DimensionError("attention: mask shape does not match token count");
  }

  auto attns = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(batch * heads));
  Mat out(rows, nodes_[iq].value.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      auto qb = nodes_[iq].value.block(b * t, h * dh, t, dh);
      auto kb = nodes_[ik].value.block(b * t, h * dh, t, dh);
      auto vb = nodes_[iv].value.block(b * t, h * dh, t, dh);
      Mat s = scale * (qb * kb.transpose());
      for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index j = 0; j < t; ++j) {
          if (!allow(i, j)) s(i, j) = kMaskedLogit;
        }
      }
      Mat a(t, t);
      for (Eigen::Index i = 0; i < t; ++i) {
        const Scalar m = s.row(i).maxCoeff();
        Eigen::ArrayXd e = (s.row(i).array() - m).exp();
        a.row(i) = (e / e.sum()).matrix();
      }
      out.block(b * t, h * dh, t, dh) = a * vb;
      (*attns)[static_cast<std::size_t>(b * heads + h)] = std::move(a);
    }
  }

  bool rg = wants(iq) || wants(ik) || wants(iv);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, iq, ik, iv, attns, batch, heads, t, dh, scale]() {
      const Mat& g = nodes_[id].grad;
      const bool wq = wants(iq), wk = wants(ik), wv = wants(iv);
      Mat dq, dk, dv;
      if (wq) dq = Mat::Zero(g.rows(), g.cols());
      if (wk) dk = Mat::Zero(g.rows(), g.cols());
      if (wv) dv = Mat::Zero(g.rows(), g.cols());
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          const Mat& a = (*attns)[static_cast<std::size_t>(b * heads + h)];
          auto qb = nodes_[iq].value.block(b * t, h * dh, t, dh);
          auto kb = nodes_[ik].value.block(b * t, h * dh, t, dh);
          auto vb = nodes_[iv].value.block(b * t, h * dh, t, dh);
          auto gb = g.block(b * t, h * dh, t, dh);
          if (wv) dv.block(b * t, h * dh, t, dh) = a.transpose() * gb;
          if (wq || wk) {
            Mat da = gb * vb.transpose();
            Mat ds(t, t);
            for (Eigen::Index i = 0; i < t; ++i) {
              const Scalar dot = da.row(i).dot(a.row(i));
              ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
            }
            if (wq) dq.block(b * t, h * dh, t, dh) = scale * (ds * kb);
            if (wk) dk.block(b * t, h * dh, t, dh) = scale * (ds.transpose() * qb);
          }
        }
      }
      if (wq) accum(iq, dq);
      if (wk) accum(ik, dk);
      if (wv) accum(iv, dv);
    };
  }
  return {this, id};
}

Var Tape::conv2d(Var x, Var weight, Var bias, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
                 Eigen::Index ksize, Eigen::Index stride, Eigen::Index pad) {
  int ix = x.id, iw = weight.id, ib = bias.id;
  const Eigen::Index cin = nodes_[ix].value.cols();
  const Eigen::Index oh = (h + 2 * pad - ksize) / stride + 1;
  const Eigen::Index ow = (w + 2 * pad - ksize) / stride + 1;
  const Eigen::Index patch_cols = ksize * ksize * cin;

  auto col = std::make_shared<Mat>(Mat::Zero(batch * oh * ow, patch_cols));
  const Mat& xv = nodes_[ix].value;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index oy = 0; oy < oh; ++oy) {
      for (Eigen::Index ox = 0; ox < ow; ++ox) {
        const Eigen::Index r = b * oh * ow + oy * ow + ox;
        for (Eigen::Index ky = 0; ky < ksize; ++ky) {
          const Eigen::Index y = oy * stride - pad + ky;
          if (y < 0 || y >= h) continue;
          for (Eigen::Index kx = 0; kx < ksize; ++kx) {
            const Eigen::Index xx = ox * stride - pad + kx;
            if (xx < 0 || xx >= w) continue;
            col->block(r, (ky * ksize + kx) * cin, 1, cin) = xv.row(b * h * w + y * w + xx);
          }
        }
      }
    }
  }

  Mat out = (*col) * nodes_[iw].value;
  out.rowwise() += nodes_[ib].value.row(0);
  bool rg = wants(ix) || wants(iw) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ix, iw, ib, col, batch, h, w, ksize, stride, pad, cin, oh, ow]() {
      const Mat& g = nodes_[id].grad;
      if (wants(iw)) accum(iw, col->transpose() * g);
      if (wants(ib)) accum(ib, g.colwise().sum());
      if (wants(ix)) {
        Mat dcol = g * nodes_[iw].value.transpose();
        Mat& dx = grad_ref(ix);
        for (Eigen::Index b = 0; b < batch; ++b) {
          for (Eigen::Index oy = 0; oy < oh; ++oy) {
            for (Eigen::Index ox = 0; ox < ow; ++ox) {
              const Eigen::Index r = b * oh * ow + oy * ow + ox;
              for (Eigen::Index ky = 0; ky < ksize; ++ky) {
                const Eigen::Index y = oy * stride - pad + ky;
                if (y < 0 || y >= h) continue;
                for (Eigen::Index kx = 0; kx < ksize; ++kx) {
                  const Eigen::Index xx = ox * stride - pad + kx;
                  if (xx < 0 || xx >= w) continue;
                  dx.row(b * h * w + y * w + xx) += dcol.block(r, (ky * ksize + kx) * cin, 1, cin);
                }
              }
            }
          }
        }
      }
    };
  }
  return {this, id};
}

Var Tape::patchify_gather(Var img, Eigen::Index batch, Eigen::Index h, Eigen::Index w, Eigen::Index patch) {
  int ix = img.id;
  const Eigen::Index c = nodes_[ix].value.cols();
  const Eigen::Index gh = h / patch, gw = w / patch;
  const Eigen::Index n = gh * gw;
  Mat out(batch * n, patch * patch * c);
  const Mat& xv = nodes_[ix].value;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index py = 0; py < gh; ++py) {
      for (Eigen::Index px = 0; px < gw; ++px) {
        const Eigen::Index r = b * n + py * gw + px;
        for (Eigen::Index dy = 0; dy < patch; ++dy) {
          for (Eigen::Index dx = 0; dx < patch; ++dx) {
            out.block(r, (dy * patch + dx) * c, 1, c) =
                xv.row(b * h * w + (py * patch + dy) * w + px * patch + dx);
          }
        }
      }
    }
  }
  bool rg = wants(ix);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ix, batch, h, w, patch, c]() {
      const Eigen::Index gh = h / patch, gw = w / patch, n = gh * gw;
      const Mat& g = nodes_[id].grad;
      Mat& dx = grad_ref(ix);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index py = 0; py < gh; ++py) {
          for (Eigen::Index px = 0; px < gw; ++px) {
            const Eigen::Index r = b * n + py * gw + px;
            for (Eigen::Index dy = 0; dy < patch; ++dy) {
              for (Eigen::Index dxp = 0; dxp < patch; ++dxp) {
                dx.row(b * h * w + (py * patch + dy) * w + px * patch + dxp) +=
                    g.block(r, (dy * patch + dxp) * c, 1, c);
              }
            }
          }
        }
      }
    };
  }
  return {this, id};
}

Var Tape::unpatchify_scatter(Var patches, Eigen::Index batch, Eigen::Index h, Eigen::Index w,
                             Eigen::Index channels, Eigen::Index patch) {
  int ip = patches.id;
  const Eigen::Index c = channels;
  const Eigen::Index gh = h / patch, gw = w / patch, n = gh * gw;
  Mat out(batch * h * w, c);
  const Mat& pv = nodes_[ip].value;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index py = 0; py < gh; ++py) {
      for (Eigen::Index px = 0; px < gw; ++px) {
        const Eigen::Index r = b * n + py * gw + px;
        for (Eigen::Index dy = 0; dy < patch; ++dy) {
          for (Eigen::Index dx = 0; dx < patch; ++dx) {
            out.row(b * h * w + (py * patch + dy) * w + px * patch + dx) =
                pv.block(r, (dy * patch + dx) * c, 1, c);
          }
        }
      }
    }
  }
  bool rg = wants(ip);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ip, batch, h, w, patch, c]() {
      const Eigen::Index gh = h / patch, gw = w / patch, n = gh * gw;
      const Mat& g = nodes_[id].grad;
      Mat& dp = grad_ref(ip);
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index py = 0; py < gh; ++py) {
          for (Eigen::Index px = 0; px < gw; ++px) {
            const Eigen::Index r = b * n + py * gw + px;
            for (Eigen::Index dy = 0; dy < patch; ++dy) {
              for (Eigen::Index dx = 0; dx < patch; ++dx) {
                dp.block(r, (dy * patch + dx) * c, 1, c) +=
                    g.row(b * h * w + (py * patch + dy) * w + px * patch + dx);
              }
            }
          }
        }
      }
    };
  }
  return {this, id};
}

Var Tape::mean_all(Var a) {
  int ia = a.id;
  const Scalar n = static_cast<Scalar>(nodes_[ia].value.size());
  Mat out(1, 1);
  out(0, 0) = nodes_[ia].value.sum() / n;
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, n]() {
      const Scalar g = nodes_[id].grad(0, 0);
      grad_ref(ia).array() += g / n;
    };
  }
  return {this, id};
}

Var Tape::mean_rows(Var a) {
  int ia = a.id;
  const Scalar r = static_cast<Scalar>(nodes_[ia].value.rows());
  Mat out = nodes_[ia].value.colwise().mean();
  bool rg = wants(ia);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, r]() {
      grad_ref(ia).rowwise() += (nodes_[id].grad.row(0) / r);
    };
  }
  return {this, id};
}

Var Tape::mse(Var a, Var b) {
  int ia = a.id, ib = b.id;
  if (nodes_[ia].value.rows() != nodes_[ib].value.rows() ||
      nodes_[ia].value.cols() != nodes_[ib].value.cols()) {
    throw DimensionError("mse: shape mismatch");
  }
  const Scalar n = static_cast<Scalar>(nodes_[ia].value.size());
  Mat out(1, 1);
  out(0, 0) = (nodes_[ia].value - nodes_[ib].value).squaredNorm() / n;
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib, n]() {
      const Scalar g = nodes_[id].grad(0, 0);
      Mat d = (2.0 * g / n) * (nodes_[ia].value - nodes_[ib].value);
      if (wants(ia)) accum(ia, d);
      if (wants(ib)) accum(ib, -d);
    };
  }
  return {this, id};
}

Var Tape::cross_entropy_mean(Var logits, const std::vector<int>& targets) {
  int il = logits.id;
  const Mat& x = nodes_[il].value;
  const Eigen::Index r = x.rows();
  auto p = std::make_shared<Mat>(r, x.cols());
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    const Scalar m = x.row(i).maxCoeff();
    Eigen::ArrayXd e = (x.row(i).array() - m).exp();
    const Scalar z = e.sum();
    p->row(i) = (e / z).matrix();
    loss += m + std::log(z) - x(i, targets[static_cast<std::size_t>(i)]);
  }
  Mat out(1, 1);
  out(0, 0) = loss / static_cast<Scalar>(r);
  bool rg = wants(il);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    auto tg = std::make_shared<std::vector<int>>(targets);
    nodes_[id].backward = [this, id, il, p, tg, r]() {
      const Scalar g = nodes_[id].grad(0, 0) / static_cast<Scalar>(r);
      Mat d = *p;
      for (Eigen::Index i = 0; i < r; ++i) d(i, (*tg)[static_cast<std::size_t>(i)]) -= 1.0;
      accum(il, g * d);
    };
  }
  return {this, id};
}

Var Tape::cosine_rows_mean(Var a, Var b, Scalar eps) {
  int ia = a.id, ib = b.id;
  const Mat& av = nodes_[ia].value;
  const Mat& bv = nodes_[ib].value;
  const Eigen::Index r = av.rows();
  Scalar total = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    const Scalar na = std::max(av.row(i).norm(), eps);
    const Scalar nb = std::max(bv.row(i).norm(), eps);
    total += av.row(i).dot(bv.row(i)) / (na * nb);
  }
  Mat out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(r);
  bool rg = wants(ia) || wants(ib);
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].backward = [this, id, ia, ib, r, eps]() {
      const Scalar g = nodes_[id].grad(0, 0) / static_cast<Scalar>(r);
      const Mat& av = nodes_[ia].value;
      const Mat& bv = nodes_[ib].value;
      const bool wa = wants(ia), wb = wants(ib);
      Mat da, db;
      if (wa) da.setZero(av.rows(), av.cols());
      if (wb) db.setZero(bv.rows(), bv.cols());
      for (Eigen::Index i = 0; i < r; ++i) {
        const Scalar na = std::max(av.row(i).norm(), eps);
        const Scalar nb = std::max(bv.row(i).norm(), eps);
        const Scalar cos = av.row(i).dot(bv.row(i)) / (na * nb);
        if (wa) da.row(i) = g * (bv.row(i) / (na * nb) - cos * av.row(i) / (na * na));
        if (wb) db.row(i) = g * (av.row(i) / (na * nb) - cos * bv.row(i) / (nb * nb));
      }
      if (wa) accum(ia, da);
      if (wb) accum(ib, db);
    };
  }
  return {this, id};
}

Var Tape::detach(Var a) { return {this, push(a.value(), false)}; }

void Tape::backward(Var loss) {
  if (loss.value().rows() != 1 || loss.value().cols() != 1) {
    throw DimensionError("backward: loss must be 1x1");
  }
  if (!wants(loss.id)) return;
  grad_ref(loss.id).setConstant(1.0);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() != 0 && n.backward) n.backward();
  }
}

}  // namespace seqtok
