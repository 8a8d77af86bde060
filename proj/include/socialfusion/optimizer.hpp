#pragma once

#include <cmath>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"

namespace socialfusion {

// Linear warmup from 0 to base_lr over warmup_steps, then cosine decay to 0
// at total_steps. lr(warmup_steps) == base_lr.
inline double lr_at_step(long step, double base_lr, long warmup_steps, long total_steps) {
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  double t = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  t = std::min(1.0, std::max(0.0, t));
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Decoupled-weight-decay Adam over a fixed parameter set.
class AdamW {
 public:
  AdamW(std::vector<ad::Parameter*> params, AdamWConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  // Consumes the accumulated gradients and zeroes them.
  void step(double lr) {
    ++t_;
    double scale = 1.0;
    if (cfg_.clip_norm > 0) {
      double norm2 = 0;
      for (auto* p : params_) norm2 += p->grad.squaredNorm();
      double norm = std::sqrt(norm2);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ad::Parameter* p = params_[i];
      Mat g = p->grad * scale;
      m_[i] = cfg_.beta1 * m_[i] + (1 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1 - cfg_.beta2) * g.cwiseProduct(g);
      Mat mhat = m_[i] / bc1;
      Mat vhat = v_[i] / bc2;
      p->value -= lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
      if (cfg_.weight_decay > 0) p->value -= lr * cfg_.weight_decay * p->value;
      p->zero_grad();
    }
  }

  long steps_taken() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

}  // namespace socialfusion
