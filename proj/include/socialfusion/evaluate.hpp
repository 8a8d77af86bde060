#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "socialfusion/manifest.hpp"
#include "socialfusion/metrics.hpp"
#include "socialfusion/model.hpp"
#include "socialfusion/sampler.hpp"

namespace socialfusion {

// Per-task metrics in the units used throughout the reports: mAP, accuracy
// and AUC as percentages, L2 distances in normalized coordinates.
inline nlohmann::json evaluate_tasks(Model& model, const DatasetStore& store,
                                     const std::vector<TaskId>& tasks, const std::string& split) {
  nlohmann::json out;
  BatchLoader loader(store, model, split);
  Model::ScoreSession session(model);
  for (TaskId task : tasks) {
    const auto& recs = store.records(task, split);
    if (recs.empty())
      throw ConfigError("evaluate: no records for " + to_string(task) + "/" + split);
    const TaskSpec& spec = model.registry().get(task);
    nlohmann::json m;
    if (spec.output_mode == OutputMode::Text) {
      ClassificationEval eval;
      eval.scores = Mat(static_cast<Eigen::Index>(recs.size()),
                        static_cast<Eigen::Index>(spec.labels.size()));
      eval.labels.resize(recs.size());
      for (std::size_t i = 0; i < recs.size(); ++i) {
        auto scores = session.score(task, loader.features(task, i), recs[i].bboxes);
        for (std::size_t c = 0; c < scores.size(); ++c)
          eval.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = scores[c];
        int label_idx = -1;
        for (std::size_t c = 0; c < spec.labels.size(); ++c)
          if (spec.labels[c] == *recs[i].target.class_label) label_idx = static_cast<int>(c);
        eval.labels[i] = label_idx;
      }
      auto map_res = mean_average_precision(eval);
      m["mAP"] = 100.0 * map_res.map;
      m["accuracy"] = 100.0 * accuracy(eval);
      if (!map_res.skipped_classes.empty()) {
        nlohmann::json skipped = nlohmann::json::array();
        for (int c : map_res.skipped_classes) skipped.push_back(spec.labels[static_cast<std::size_t>(c)]);
        m["mAP_skipped_classes"] = skipped;
      }
    } else {
      std::vector<GazeSample> samples;
      samples.reserve(recs.size());
      for (std::size_t i = 0; i < recs.size(); ++i)
        samples.push_back(
            {session.predict_heatmap(loader.features(task, i), recs[i].bboxes),
             recs[i].target.gaze_points});
      auto g = evaluate_gaze(samples);
      m["min_l2"] = g.min_l2;
      m["avg_l2"] = g.avg_l2;
      m["auc"] = 100.0 * g.auc;
      if (g.auc_skipped > 0) m["auc_skipped_samples"] = g.auc_skipped;
    }
    out[to_string(task)] = m;
  }
  return out;
}

// Mean regime loss over a split, used for best-checkpoint tracking.
inline double evaluate_loss(Model& model, const DatasetStore& store,
                            const std::vector<TaskId>& tasks, const std::string& split,
                            double lambda_heatmap) {
  ad::NoGradGuard ng;
  BatchLoader loader(store, model, split);
  double total = 0;
  long n = 0;
  for (TaskId task : tasks) {
    const auto& recs = store.records(task, split);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& rec = recs[i];
      if (model.registry().get(task).output_mode == OutputMode::Text) {
        std::vector<TextItem> one;
        one.push_back({task, loader.features(task, i), rec.bboxes,
                       model.label_tokens(task, *rec.target.class_label)});
        total += model.text_batch_loss(one)->scalar();
      } else {
        std::vector<HeatmapItem> one;
        one.push_back({task, loader.features(task, i), rec.bboxes,
                       synth_heatmap({rec.target.gaze_points.at(0)}, model.config.h_out,
                                     model.config.w_out, model.config.heatmap_sigma)});
        total += lambda_heatmap * model.heatmap_batch_loss(one)->scalar();
      }
      ++n;
    }
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

}  // namespace socialfusion
