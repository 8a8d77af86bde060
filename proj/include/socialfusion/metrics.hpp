#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "socialfusion/common.hpp"
#include "socialfusion/tasks.hpp"

namespace socialfusion {

struct ClassificationEval {
  Mat scores;               // N x C
  std::vector<int> labels;  // N, values in [0, C)
};

inline double accuracy(const ClassificationEval& eval) {
  if (eval.scores.rows() == 0) throw InvalidInputError("accuracy: empty eval");
  if (eval.scores.rows() != static_cast<Eigen::Index>(eval.labels.size()))
    throw InvalidInputError("accuracy: label count mismatch");
  long correct = 0;
  for (Eigen::Index r = 0; r < eval.scores.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < eval.scores.cols(); ++c)
      if (eval.scores(r, c) > eval.scores(r, best)) best = static_cast<int>(c);
    if (best == eval.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(eval.scores.rows());
}

// Average precision of a one-vs-rest ranking: mean of precision at each
// positive's rank, no interpolation. Ties rank by original sample order.
inline double average_precision(const std::vector<double>& scores, const std::vector<char>& positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0;
  long hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    if (positive[order[rank]]) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  return hits > 0 ? ap / static_cast<double>(hits) : 0.0;
}

struct MapResult {
  double map = 0;
  std::vector<double> per_class_ap;   // NaN for skipped classes
  std::vector<int> skipped_classes;   // classes with zero positives
};

inline MapResult mean_average_precision(const ClassificationEval& eval) {
  const Eigen::Index n = eval.scores.rows(), c = eval.scores.cols();
  if (n == 0) throw InvalidInputError("mAP: empty eval");
  MapResult res;
  res.per_class_ap.assign(static_cast<std::size_t>(c), std::numeric_limits<double>::quiet_NaN());
  double sum = 0;
  int counted = 0;
  for (Eigen::Index cls = 0; cls < c; ++cls) {
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<char> pos(static_cast<std::size_t>(n), 0);
    long positives = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      scores[static_cast<std::size_t>(r)] = eval.scores(r, cls);
      if (eval.labels[static_cast<std::size_t>(r)] == cls) {
        pos[static_cast<std::size_t>(r)] = 1;
        ++positives;
      }
    }
    if (positives == 0) {
      res.skipped_classes.push_back(static_cast<int>(cls));
      continue;
    }
    double ap = average_precision(scores, pos);
    res.per_class_ap[static_cast<std::size_t>(cls)] = ap;
    sum += ap;
    ++counted;
  }
  if (counted == 0) throw InvalidInputError("mAP: no class has positives");
  res.map = sum / counted;
  return res;
}

// ----- gaze metrics --------------------------------------------------------

// Argmax pixel as a normalized point; ties resolve to the lowest row-major
// index.
inline std::pair<double, double> heatmap_argmax_point(const Mat& heatmap) {
  Eigen::Index best_r = 0, best_c = 0;
  double best = heatmap(0, 0);
  for (Eigen::Index r = 0; r < heatmap.rows(); ++r)
    for (Eigen::Index c = 0; c < heatmap.cols(); ++c)
      if (heatmap(r, c) > best) {
        best = heatmap(r, c);
        best_r = r;
        best_c = c;
      }
  double x = heatmap.cols() > 1 ? static_cast<double>(best_c) / (heatmap.cols() - 1) : 0.0;
  double y = heatmap.rows() > 1 ? static_cast<double>(best_r) / (heatmap.rows() - 1) : 0.0;
  return {x, y};
}

struct GazeL2 {
  double min_l2 = 0;
  double avg_l2 = 0;
};

inline GazeL2 gaze_l2_sample(std::pair<double, double> prediction,
                             const std::vector<std::pair<double, double>>& annotations) {
  if (annotations.empty()) throw InvalidInputError("gaze_l2: no annotation points");
  GazeL2 out;
  out.min_l2 = std::numeric_limits<double>::infinity();
  for (const auto& [ax, ay] : annotations) {
    double d = std::hypot(prediction.first - ax, prediction.second - ay);
    out.min_l2 = std::min(out.min_l2, d);
    out.avg_l2 += d;
  }
  out.avg_l2 /= static_cast<double>(annotations.size());
  return out;
}

// ROC-AUC of heatmap values as confidence scores against a binary grid with
// ones at the quantized annotation pixels. Mann-Whitney rank statistic with
// average ranks for ties. Returns false for degenerate all-positive or
// all-negative grids.
inline bool gaze_auc_sample(const Mat& heatmap,
                            const std::vector<std::pair<double, double>>& annotations,
                            double* auc_out) {
  const Eigen::Index h = heatmap.rows(), w = heatmap.cols();
  std::set<std::pair<long, long>> positive_pixels;
  for (const auto& [x, y] : annotations) {
    auto [cx, cy] = quantize_point(x, y, static_cast<int>(w), static_cast<int>(h));
    positive_pixels.insert({cy, cx});
  }
  const std::size_t n = static_cast<std::size_t>(h * w);
  const std::size_t n_pos = positive_pixels.size();
  if (n_pos == 0 || n_pos == n) return false;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto score_of = [&heatmap, w](std::size_t flat) {
    return heatmap(static_cast<Eigen::Index>(flat) / w, static_cast<Eigen::Index>(flat) % w);
  };
  std::sort(order.begin(), order.end(),
            [&score_of](std::size_t a, std::size_t b) { return score_of(a) < score_of(b); });

  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score_of(order[j + 1]) == score_of(order[i])) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // 1-based
    for (std::size_t k = i; k <= j; ++k) {
      long r = static_cast<long>(order[k]) / w;
      long c = static_cast<long>(order[k]) % w;
      if (positive_pixels.count({r, c})) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  double n_neg = static_cast<double>(n - n_pos);
  *auc_out = (rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
             (static_cast<double>(n_pos) * n_neg);
  return true;
}

struct GazeSample {
  Mat heatmap;  // post-sigmoid, values in [0,1]
  std::vector<std::pair<double, double>> annotations;
};

struct GazeEvalResult {
  double min_l2 = 0, avg_l2 = 0, auc = 0;
  int auc_samples = 0;
  int auc_skipped = 0;
};

inline GazeEvalResult evaluate_gaze(const std::vector<GazeSample>& samples) {
  if (samples.empty()) throw InvalidInputError("evaluate_gaze: no samples");
  GazeEvalResult res;
  for (const auto& s : samples) {
    auto pred = heatmap_argmax_point(s.heatmap);
    auto l2 = gaze_l2_sample(pred, s.annotations);
    res.min_l2 += l2.min_l2;
    res.avg_l2 += l2.avg_l2;
    double auc;
    if (gaze_auc_sample(s.heatmap, s.annotations, &auc)) {
      res.auc += auc;
      ++res.auc_samples;
    } else {
      ++res.auc_skipped;
    }
  }
  res.min_l2 /= static_cast<double>(samples.size());
  res.avg_l2 /= static_cast<double>(samples.size());
  if (res.auc_samples > 0) res.auc /= res.auc_samples;
  return res;
}

}  // namespace socialfusion
