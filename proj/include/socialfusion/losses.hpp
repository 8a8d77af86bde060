#pragma once

#include <vector>

#include "socialfusion/common.hpp"

namespace socialfusion {

// Mean cross-entropy over target tokens. logits row r scores the r-th target
// token; prompt/image positions are already masked out by construction.
inline double loss_text(const Mat& logits, const std::vector<int>& target_tokens) {
  if (target_tokens.empty()) throw InvalidInputError("loss_text: no target tokens");
  if (logits.rows() != static_cast<Eigen::Index>(target_tokens.size()))
    throw InvalidInputError("loss_text: logits rows must match target count");
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Vec lp = log_softmax(logits.row(r).transpose());
    int t = target_tokens[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) throw InvalidInputError("loss_text: target id out of range");
    total -= lp(t);
  }
  return total / static_cast<double>(logits.rows());
}

// Mean per-pixel binary cross-entropy between sigmoid(scores) and soft
// targets in (0,1].
inline double loss_heatmap(const Mat& scores, const Mat& target) {
  if (scores.rows() != target.rows() || scores.cols() != target.cols())
    throw InvalidInputError("loss_heatmap: shape mismatch");
  const auto& s = scores.array();
  double total = (s.max(0.0) - s * target.array() + (-s.abs()).exp().log1p()).sum();
  return total / static_cast<double>(scores.size());
}

}  // namespace socialfusion
