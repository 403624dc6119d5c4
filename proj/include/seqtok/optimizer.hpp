#pragma once

#include "seqtok/tape.hpp"

#include <vector>

namespace seqtok {

// Adam over an explicit parameter list. Learning rate is supplied per step
// (the schedule lives in the trainer); betas/eps are fixed per instance.
class Adam {
 public:
  Adam(std::vector<Param*> params, Scalar beta1, Scalar beta2, Scalar eps = 1e-8);

  void step(Scalar lr);
  void zero_grad();

  const std::vector<Param*>& params() const { return params_; }
  long long steps_taken() const { return t_; }

  // Moment access for checkpointing, aligned with params() order.
  std::vector<Mat>& m() { return m_; }
  std::vector<Mat>& v() { return v_; }
  long long& t() { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_, v_;
  Scalar beta1_, beta2_, eps_;
  long long t_ = 0;
};

// Global-norm gradient clipping across a parameter group; returns the
// pre-clip norm.
Scalar clip_grad_norm(const std::vector<Param*>& params, Scalar max_norm);

// EMA shadow values for a parameter group, stored in params() order.
class EmaShadow {
 public:
  explicit EmaShadow(std::vector<Param*> params);

  void update(Scalar decay);                 // shadow = decay*shadow + (1-decay)*value
  void swap_in();                            // exchange shadow and live values
  void swap_out() { swap_in(); }             // symmetric
  std::vector<Mat>& shadows() { return shadows_; }
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> shadows_;
};

}  // namespace seqtok
