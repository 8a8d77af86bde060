#pragma once

#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/rng.hpp"

namespace socialfusion {

struct LoRAConfig {
  int rank = 32;
  double alpha = -1.0;  // -1 means alpha = rank, i.e. scaling 1
  double dropout = 0.0;

  double scaling() const { return (alpha < 0 ? rank : alpha) / static_cast<double>(rank); }

  void validate() const {
    if (rank <= 0) throw ConfigError("lora: rank must be positive");
    if (dropout < 0 || dropout >= 1) throw ConfigError("lora: dropout must be in [0,1)");
  }
};

// Affine layer with frozen base weights and a trainable low-rank delta:
// y = x W^T + b + scaling * (x A^T) B^T.
class LoraLinear {
 public:
  LoraLinear() = default;

  LoraLinear(const std::string& name, int in_dim, int out_dim, const LoRAConfig& cfg, Rng& rng)
      : name_(name), scaling_(cfg.scaling()), dropout_(cfg.dropout) {
    w_ = Mat(out_dim, in_dim);
    double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int r = 0; r < out_dim; ++r)
      for (int c = 0; c < in_dim; ++c) w_(r, c) = rng.normal(0.0, s);
    b_ = Mat::Zero(1, out_dim);
    Mat a(cfg.rank, in_dim);
    for (int r = 0; r < cfg.rank; ++r)
      for (int c = 0; c < in_dim; ++c) a(r, c) = rng.normal(0.0, s);
    a_ = ad::Parameter(name + ".lora_a", std::move(a));
    // Zero-initialized B makes the adapter a no-op at step 0.
    b_mat_ = ad::Parameter(name + ".lora_b", Mat::Zero(out_dim, cfg.rank));
  }

  // x: (T x in) -> (T x out). dropout_rng enables the LoRA-path dropout mask
  // during training; pass nullptr for deterministic evaluation.
  ad::NodePtr apply(ad::NodePtr x, Rng* dropout_rng = nullptr) {
    using namespace ad;
    auto y = add_rowvec(matmul(x, constant(w_), false, true), constant(b_));
    NodePtr xin = x;
    if (dropout_ > 0 && dropout_rng) {
      Mat mask(x->value.rows(), x->value.cols());
      double keep = 1.0 - dropout_;
      for (Eigen::Index r = 0; r < mask.rows(); ++r)
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
          mask(r, c) = dropout_rng->uniform01() < keep ? 1.0 / keep : 0.0;
      xin = mul_mask(x, mask);
    }
    auto delta = matmul(matmul(xin, leaf(a_), false, true), leaf(b_mat_), false, true);
    return add(y, scale(delta, scaling_));
  }

  std::vector<ad::Parameter*> params() { return {&a_, &b_mat_}; }

  std::vector<std::pair<std::string, const Mat*>> frozen_tensors() const {
    return {{name_ + ".weight", &w_}, {name_ + ".bias", &b_}};
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Mat w_, b_;  // frozen base
  ad::Parameter a_, b_mat_;
  double scaling_ = 1.0;
  double dropout_ = 0.0;
};

}  // namespace socialfusion
