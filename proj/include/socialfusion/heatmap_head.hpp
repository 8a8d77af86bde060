#pragma once

#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/rng.hpp"

namespace socialfusion {

struct HeatmapHeadConfig {
  int gh = 0, gw = 0;   // visual grid feeding the head
  int h_out = 64, w_out = 64;
  int kernel = 4;
  int stride = 2;
  double sigma = 3.0;   // gaussian width of the synthesized targets, in output pixels

  void validate() const {
    if (gh <= 0 || gw <= 0 || h_out <= 0 || w_out <= 0)
      throw ConfigError("heatmap head: grid and output sizes must be positive");
    if (kernel <= 0 || stride <= 0) throw ConfigError("heatmap head: bad upsampler geometry");
    if (sigma <= 0) throw ConfigError("heatmap head: sigma must be > 0");
  }
};

// Per-patch affine projection to a scalar, one transposed convolution, then
// bilinear interpolation to the output grid. Emits pre-sigmoid scores.
class HeatmapHead {
 public:
  HeatmapHeadConfig config;

  HeatmapHead() = default;

  HeatmapHead(HeatmapHeadConfig cfg, int d_l, Rng& rng) : config(cfg) {
    config.validate();
    Mat pw(1, d_l);
    double s = 1.0 / std::sqrt(static_cast<double>(d_l));
    for (int c = 0; c < d_l; ++c) pw(0, c) = rng.normal(0.0, s);
    proj_w_ = ad::Parameter("heatmap.proj_w", std::move(pw));
    proj_b_ = ad::Parameter("heatmap.proj_b", Mat::Zero(1, 1));
    Mat k(cfg.kernel, cfg.kernel);
    double ks = 1.0 / (cfg.kernel * cfg.kernel);
    for (int r = 0; r < cfg.kernel; ++r)
      for (int c = 0; c < cfg.kernel; ++c) k(r, c) = ks + rng.normal(0.0, 0.05);
    conv_k_ = ad::Parameter("heatmap.conv_k", std::move(k));
    conv_b_ = ad::Parameter("heatmap.conv_b", Mat::Zero(1, 1));
  }

  // visual_hidden: (gh*gw x d_l) backbone output states at the visual
  // positions, row-major patches. Returns (h_out x w_out) scores.
  ad::NodePtr apply(ad::NodePtr visual_hidden) {
    using namespace ad;
    if (visual_hidden->value.rows() != config.gh * config.gw)
      throw InvalidInputError("heatmap head: expected " + std::to_string(config.gh * config.gw) +
                              " visual positions, got " + std::to_string(visual_hidden->value.rows()));
    auto per_patch = add_rowvec(matmul(visual_hidden, leaf(proj_w_), false, true), leaf(proj_b_));
    auto grid = reshape(per_patch, config.gh, config.gw);
    auto up = conv_transpose2d(grid, leaf(conv_k_), leaf(conv_b_), config.stride);
    return bilinear_resize(up, config.h_out, config.w_out);
  }

  std::vector<ad::Parameter*> params() { return {&proj_w_, &proj_b_, &conv_k_, &conv_b_}; }

 private:
  ad::Parameter proj_w_, proj_b_, conv_k_, conv_b_;
};

}  // namespace socialfusion
