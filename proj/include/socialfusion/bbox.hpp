#pragma once

#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/encoder.hpp"

namespace socialfusion {

// Axis-aligned box in normalized image coordinates.
struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  void validate() const {
    if (!(x_min < x_max) || !(y_min < y_max))
      throw InvalidInputError("bbox: requires x_min < x_max and y_min < y_max");
    if (x_min < 0 || y_min < 0 || x_max > 1 || y_max > 1)
      throw InvalidInputError("bbox: coordinates must lie in [0,1]");
  }
};

using BBoxSet = std::vector<BBox>;

inline void validate_bboxes(const BBoxSet& boxes) {
  if (boxes.size() > 2) throw InvalidInputError("bbox: at most two boxes are supported");
  for (const auto& b : boxes) b.validate();
}

// Binary mask over the patch grid, row-major. A patch is flagged iff its
// normalized extent overlaps some box with positive area.
inline std::vector<std::uint8_t> bbox_patch_mask(const BBoxSet& boxes, int gh, int gw) {
  validate_bboxes(boxes);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(gh) * gw, 0);
  for (int i = 0; i < gh; ++i) {
    double y_lo = static_cast<double>(i) / gh;
    double y_hi = static_cast<double>(i + 1) / gh;
    for (int j = 0; j < gw; ++j) {
      double x_lo = static_cast<double>(j) / gw;
      double x_hi = static_cast<double>(j + 1) / gw;
      for (const auto& b : boxes) {
        if (b.x_min < x_hi && x_lo < b.x_max && b.y_min < y_hi && y_lo < b.y_max) {
          mask[static_cast<std::size_t>(i) * gw + j] = 1;
          break;
        }
      }
    }
  }
  return mask;
}

// z <- z + M (*) p_bbox. An empty box set is the identity.
inline ad::NodePtr embed_bboxes_node(ad::NodePtr z, const BBoxSet& boxes, ad::NodePtr p_bbox,
                                     int gh, int gw) {
  if (boxes.empty()) return z;
  return ad::add_rows_masked(z, p_bbox, bbox_patch_mask(boxes, gh, gw));
}

inline FeatureGrid embed_bboxes(const FeatureGrid& z, const BBoxSet& boxes, const Vec& p_bbox) {
  if (static_cast<Eigen::Index>(p_bbox.size()) != z.values.cols())
    throw InvalidInputError("embed_bboxes: p_bbox dimension mismatch");
  FeatureGrid out = z;
  if (boxes.empty()) return out;
  auto mask = bbox_patch_mask(boxes, z.gh, z.gw);
  for (int r = 0; r < z.patches(); ++r)
    if (mask[static_cast<std::size_t>(r)]) out.values.row(r) += p_bbox.transpose();
  return out;
}

}  // namespace socialfusion
