#pragma once

#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/encoder.hpp"
#include "socialfusion/rng.hpp"

namespace socialfusion {

struct ConnectorConfig {
  int d_v = 0;
  int d_h = 4096;
  int d_l = 0;

  void validate() const {
    if (d_v <= 0 || d_h <= 0 || d_l <= 0) throw ConfigError("connector: dimensions must be positive");
  }
};

// Per-patch three-layer MLP: d_v -> d_h -> d_h -> d_l, ReLU between layers.
class Connector {
 public:
  ConnectorConfig config;

  Connector() = default;

  Connector(ConnectorConfig cfg, Rng& rng) : config(cfg) {
    config.validate();
    w1_ = ad::Parameter("connector.w1", init(cfg.d_h, cfg.d_v, rng));
    b1_ = ad::Parameter("connector.b1", Mat::Zero(1, cfg.d_h));
    w2_ = ad::Parameter("connector.w2", init(cfg.d_h, cfg.d_h, rng));
    b2_ = ad::Parameter("connector.b2", Mat::Zero(1, cfg.d_h));
    w3_ = ad::Parameter("connector.w3", init(cfg.d_l, cfg.d_h, rng));
    b3_ = ad::Parameter("connector.b3", Mat::Zero(1, cfg.d_l));
  }

  // x: (patches x d_v) -> (patches x d_l). Rows are independent.
  ad::NodePtr apply(ad::NodePtr x) {
    using namespace ad;
    if (x->value.cols() != config.d_v)
      throw ConfigError("connector: input dim " + std::to_string(x->value.cols()) +
                        " != configured d_v " + std::to_string(config.d_v));
    auto h1 = relu(add_rowvec(matmul(x, leaf(w1_), false, true), leaf(b1_)));
    auto h2 = relu(add_rowvec(matmul(h1, leaf(w2_), false, true), leaf(b2_)));
    return add_rowvec(matmul(h2, leaf(w3_), false, true), leaf(b3_));
  }

  std::vector<ad::Parameter*> params() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

 private:
  static Mat init(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    double s = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, s);
    return m;
  }

  ad::Parameter w1_, b1_, w2_, b2_, w3_, b3_;
};

// Pure functional form of the connector contract: preserves the spatial
// grid, maps the feature dim d_v -> d_l.
inline FeatureGrid connect(const FeatureGrid& z, Connector& connector) {
  require_finite(z.values, "connect input");
  ad::NoGradGuard ng;
  auto out = connector.apply(ad::constant(z.values));
  FeatureGrid g;
  g.gh = z.gh;
  g.gw = z.gw;
  g.values = out->value;
  return g;
}

}  // namespace socialfusion
