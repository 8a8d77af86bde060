#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "socialfusion/checksum.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/image.hpp"
#include "socialfusion/rng.hpp"

namespace socialfusion {

// Patch feature map: (gh*gw) x d, patches in row-major order. d is the
// encoder dimension before the connector and the backbone dimension after.
struct FeatureGrid {
  int gh = 0, gw = 0;
  Mat values;

  int patches() const { return gh * gw; }
  int dim() const { return static_cast<int>(values.cols()); }
};

struct VisualEncoderHandle {
  std::string name;
  int input_h = 0, input_w = 0;
  int patch_size = 0;
  int gh = 0, gw = 0;
  int feature_dim = 0;
  bool frozen = true;       // always true here; kept as part of the contract
  double norm_mean = 0.5;   // encoder-native preprocessing
  double norm_std = 0.5;

  void validate() const {
    if (patch_size <= 0 || input_h % patch_size != 0 || input_w % patch_size != 0)
      throw ConfigError("encoder '" + name + "': input size must be an exact multiple of patch size");
    if (gh != input_h / patch_size || gw != input_w / patch_size)
      throw ConfigError("encoder '" + name + "': grid does not match input/patch geometry");
  }
};

// Frozen feature extractor. Two backends:
//  - toy: a fixed random per-patch projection with tanh, fully self-contained;
//  - precomputed: shape descriptor only, features are loaded from .feat files
//    produced by an external encoder (e.g. real CLIP-336 activations).
class VisualEncoder {
 public:
  enum class Kind { Toy, Precomputed };

  VisualEncoderHandle handle;
  Kind kind = Kind::Toy;

  static VisualEncoder toy(const std::string& name, int input, int patch, int feature_dim,
                           std::uint64_t seed) {
    VisualEncoder e;
    e.kind = Kind::Toy;
    e.handle.name = name;
    e.handle.input_h = e.handle.input_w = input;
    e.handle.patch_size = patch;
    e.handle.gh = e.handle.gw = input / patch;
    e.handle.feature_dim = feature_dim;
    e.handle.validate();
    const int in_dim = patch * patch * 3;
    Rng rng(Rng::derive(seed, checksum(name)));
    e.weight_ = Mat(feature_dim, in_dim);
    double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int r = 0; r < feature_dim; ++r)
      for (int c = 0; c < in_dim; ++c) e.weight_(r, c) = rng.normal(0.0, s);
    e.bias_ = Mat(1, feature_dim);
    for (int c = 0; c < feature_dim; ++c) e.bias_(0, c) = rng.normal(0.0, 0.1);
    return e;
  }

  static VisualEncoder precomputed(const std::string& name, int input, int patch, int feature_dim) {
    VisualEncoder e;
    e.kind = Kind::Precomputed;
    e.handle.name = name;
    e.handle.input_h = e.handle.input_w = input;
    e.handle.patch_size = patch;
    e.handle.gh = e.handle.gw = input / patch;
    e.handle.feature_dim = feature_dim;
    e.handle.validate();
    return e;
  }

  // image must already be resized to the encoder input size.
  FeatureGrid encode(const ImageF& image) const {
    if (image.h != handle.input_h || image.w != handle.input_w)
      throw InvalidInputError("encode: image is " + std::to_string(image.h) + "x" +
                              std::to_string(image.w) + ", encoder '" + handle.name + "' expects " +
                              std::to_string(handle.input_h) + "x" + std::to_string(handle.input_w));
    if (kind != Kind::Toy)
      throw InvalidInputError("encoder '" + handle.name +
                              "' has no local weights; supply precomputed .feat files");
    const int p = handle.patch_size;
    FeatureGrid grid;
    grid.gh = handle.gh;
    grid.gw = handle.gw;
    grid.values = Mat(grid.patches(), handle.feature_dim);
    Vec x(p * p * 3);
    for (int gi = 0; gi < grid.gh; ++gi)
      for (int gj = 0; gj < grid.gw; ++gj) {
        int idx = 0;
        for (int r = 0; r < p; ++r)
          for (int c = 0; c < p; ++c)
            for (int k = 0; k < 3; ++k)
              x(idx++) = (image.ch[k](gi * p + r, gj * p + c) - handle.norm_mean) / handle.norm_std;
        grid.values.row(gi * grid.gw + gj) = (weight_ * x + bias_.transpose()).array().tanh();
      }
    require_finite(grid.values, "encode(" + handle.name + ")");
    return grid;
  }

  // Raw little-endian layout: i32 gh, i32 gw, i32 d, then gh*gw*d doubles
  // in row-major patch order.
  FeatureGrid load_features(const std::string& path) const {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read feature file: " + path);
    std::int32_t gh = 0, gw = 0, d = 0;
    f.read(reinterpret_cast<char*>(&gh), 4);
    f.read(reinterpret_cast<char*>(&gw), 4);
    f.read(reinterpret_cast<char*>(&d), 4);
    if (gh != handle.gh || gw != handle.gw || d != handle.feature_dim)
      throw InvalidInputError("feature file " + path + " is " + std::to_string(gh) + "x" +
                              std::to_string(gw) + "x" + std::to_string(d) + ", encoder expects " +
                              std::to_string(handle.gh) + "x" + std::to_string(handle.gw) + "x" +
                              std::to_string(handle.feature_dim));
    FeatureGrid grid;
    grid.gh = gh;
    grid.gw = gw;
    grid.values = Mat(gh * gw, d);
    for (int r = 0; r < gh * gw; ++r)
      for (int c = 0; c < d; ++c) {
        double v;
        f.read(reinterpret_cast<char*>(&v), 8);
        grid.values(r, c) = v;
      }
    if (!f) throw IoError("truncated feature file: " + path);
    require_finite(grid.values, "load_features(" + path + ")");
    return grid;
  }

  static void save_features(const std::string& path, const FeatureGrid& grid) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write feature file: " + path);
    std::int32_t gh = grid.gh, gw = grid.gw, d = grid.dim();
    f.write(reinterpret_cast<const char*>(&gh), 4);
    f.write(reinterpret_cast<const char*>(&gw), 4);
    f.write(reinterpret_cast<const char*>(&d), 4);
    for (int r = 0; r < grid.patches(); ++r)
      for (int c = 0; c < d; ++c) {
        double v = grid.values(r, c);
        f.write(reinterpret_cast<const char*>(&v), 8);
      }
  }

  std::vector<std::pair<std::string, const Mat*>> frozen_tensors() const {
    if (kind != Kind::Toy) return {};
    return {{"encoder.weight", &weight_}, {"encoder.bias", &bias_}};
  }

 private:
  Mat weight_;  // frozen
  Mat bias_;    // frozen
};

inline FeatureGrid encode_image(const ImageF& image, const VisualEncoder& encoder) {
  return encoder.encode(image);
}

}  // namespace socialfusion
