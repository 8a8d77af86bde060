#pragma once

// Independent brute-force oracles used by the unit and acceptance suites.
// They deliberately avoid the library's sorting-based implementations.

#include <cmath>
#include <set>
#include <vector>

#include "socialfusion/common.hpp"
#include "socialfusion/metrics.hpp"
#include "socialfusion/tasks.hpp"

namespace sftest {

using socialfusion::Mat;

// Accuracy by explicit loop and count.
inline double accuracy_oracle(const Mat& scores, const std::vector<int>& labels) {
  long ok = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = static_cast<int>(c);
    if (best == labels[static_cast<std::size_t>(r)]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(scores.rows());
}

// AP without sorting: the rank of each item is counted pairwise; ties rank by
// original order (stable).
inline double ap_oracle(const std::vector<double>& scores, const std::vector<char>& pos) {
  const std::size_t n = scores.size();
  double ap = 0;
  long n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pos[i]) continue;
    ++n_pos;
    long rank = 1;  // 1-based rank of item i under stable descending sort
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++rank;
    }
    long hits = 0;  // positives at rank <= rank(i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!pos[j]) continue;
      long rj = 1;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == j) continue;
        if (scores[k] > scores[j] || (scores[k] == scores[j] && k < j)) ++rj;
      }
      if (rj <= rank) ++hits;
    }
    ap += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return n_pos > 0 ? ap / static_cast<double>(n_pos) : 0.0;
}

// mAP over classes with >= 1 positive.
inline double map_oracle(const Mat& scores, const std::vector<int>& labels) {
  double sum = 0;
  int counted = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    std::vector<double> s(static_cast<std::size_t>(scores.rows()));
    std::vector<char> pos(static_cast<std::size_t>(scores.rows()), 0);
    long n_pos = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      s[static_cast<std::size_t>(r)] = scores(r, c);
      if (labels[static_cast<std::size_t>(r)] == c) {
        pos[static_cast<std::size_t>(r)] = 1;
        ++n_pos;
      }
    }
    if (n_pos == 0) continue;
    sum += ap_oracle(s, pos);
    ++counted;
  }
  return sum / counted;
}

// ROC-AUC by exhaustive positive/negative pair counting (Mann-Whitney).
inline bool auc_pair_oracle(const Mat& heatmap,
                            const std::vector<std::pair<double, double>>& annotations,
                            double* out) {
  std::set<std::pair<long, long>> pos;
  for (auto [x, y] : annotations) {
    auto [cx, cy] =
        socialfusion::quantize_point(x, y, static_cast<int>(heatmap.cols()), static_cast<int>(heatmap.rows()));
    pos.insert({cy, cx});
  }
  std::vector<double> p_scores, n_scores;
  for (Eigen::Index r = 0; r < heatmap.rows(); ++r)
    for (Eigen::Index c = 0; c < heatmap.cols(); ++c) {
      if (pos.count({r, c})) p_scores.push_back(heatmap(r, c));
      else n_scores.push_back(heatmap(r, c));
    }
  if (p_scores.empty() || n_scores.empty()) return false;
  double wins = 0;
  for (double sp : p_scores)
    for (double sn : n_scores) {
      if (sp > sn) wins += 1.0;
      else if (sp == sn) wins += 0.5;
    }
  *out = wins / (static_cast<double>(p_scores.size()) * static_cast<double>(n_scores.size()));
  return true;
}

inline std::pair<double, double> l2_oracle(std::pair<double, double> pred,
                                           const std::vector<std::pair<double, double>>& ann) {
  double mn = 1e300, sum = 0;
  for (auto [x, y] : ann) {
    double d = std::sqrt((pred.first - x) * (pred.first - x) + (pred.second - y) * (pred.second - y));
    mn = std::min(mn, d);
    sum += d;
  }
  return {mn, sum / static_cast<double>(ann.size())};
}

}  // namespace sftest
