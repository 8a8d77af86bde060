#pragma once

#include <map>
#include <vector>

#include "socialfusion/common.hpp"
#include "socialfusion/encoder.hpp"
#include "socialfusion/manifest.hpp"
#include "socialfusion/model.hpp"
#include "socialfusion/rng.hpp"
#include "socialfusion/tasks.hpp"

namespace socialfusion {

enum class BatchKind { Text, Heatmap };

struct PlannedBatch {
  BatchKind kind;
  std::vector<std::pair<TaskId, std::size_t>> items;  // (task, dataset index)
};

// One epoch of the joint protocol: every task undersampled to the common
// minimum, TEXT samples pooled and shuffled into mixed batches, heatmap
// batches interleaved at random schedule positions.
struct JointEpochPlan {
  std::size_t min_size = 0;
  std::map<TaskId, std::vector<std::size_t>> sampled;  // per-task chosen indices
  std::vector<PlannedBatch> batches;
};

inline JointEpochPlan plan_epoch(const std::map<TaskId, std::size_t>& train_sizes, int batch_size,
                                 std::uint64_t seed) {
  if (train_sizes.empty()) throw ConfigError("plan_epoch: no active tasks");
  if (batch_size < 1) throw ConfigError("plan_epoch: batch_size must be >= 1");
  for (const auto& [task, n] : train_sizes)
    if (n == 0) throw ConfigError("plan_epoch: task " + to_string(task) + " has an empty dataset");

  JointEpochPlan plan;
  plan.min_size = SIZE_MAX;
  for (const auto& [task, n] : train_sizes) plan.min_size = std::min(plan.min_size, n);

  Rng rng(seed);
  // Fresh uniform subsample without replacement per task, iterated in the
  // stable TaskId order of the map.
  for (const auto& [task, n] : train_sizes)
    plan.sampled[task] = rng.sample_without_replacement(n, plan.min_size);

  std::vector<std::pair<TaskId, std::size_t>> text_pool;
  std::vector<std::pair<TaskId, std::size_t>> heat_pool;
  for (const auto& [task, idx] : plan.sampled) {
    auto& pool = (task == TaskId::GAZEFOLLOW) ? heat_pool : text_pool;
    for (auto i : idx) pool.emplace_back(task, i);
  }
  rng.shuffle(text_pool);

  const std::size_t b = static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < text_pool.size(); i += b) {
    PlannedBatch batch;
    batch.kind = BatchKind::Text;
    for (std::size_t j = i; j < std::min(i + b, text_pool.size()); ++j)
      batch.items.push_back(text_pool[j]);
    plan.batches.push_back(std::move(batch));
  }
  // Heatmap batches carry the same per-epoch sample budget as one TEXT task
  // and land at uniformly random schedule positions.
  for (std::size_t i = 0; i < heat_pool.size(); i += b) {
    PlannedBatch batch;
    batch.kind = BatchKind::Heatmap;
    for (std::size_t j = i; j < std::min(i + b, heat_pool.size()); ++j)
      batch.items.push_back(heat_pool[j]);
    std::size_t pos = static_cast<std::size_t>(rng.bounded(plan.batches.size() + 1));
    plan.batches.insert(plan.batches.begin() + static_cast<std::ptrdiff_t>(pos), std::move(batch));
  }
  return plan;
}

// Model-ready collated batch.
struct Batch {
  BatchKind kind;
  std::vector<TextItem> text;
  std::vector<HeatmapItem> heat;
};

// Loads images, resizes to the encoder input, encodes with the frozen
// encoder (features are cached per record since they never change), and
// synthesizes heatmap targets.
class BatchLoader {
 public:
  BatchLoader(const DatasetStore& store, Model& model, std::string split = "train")
      : store_(&store), model_(&model), split_(std::move(split)) {}

  const FeatureGrid& features(TaskId task, std::size_t index) {
    auto key = std::make_pair(task, index);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto& recs = store_->records(task, split_);
    if (index >= recs.size())
      throw InvalidInputError("fetch: index " + std::to_string(index) + " out of range for " +
                              to_string(task) + "/" + split_);
    const ManifestRecord& rec = recs[index];
    FeatureGrid grid;
    const VisualEncoder& enc = model_->encoder;
    if (enc.kind == VisualEncoder::Kind::Precomputed) {
      grid = enc.load_features(rec.image_path + ".feat");
    } else {
      ImageU8 raw = read_ppm(rec.image_path);
      ImageF img = to_float(raw);
      if (img.h != enc.handle.input_h || img.w != enc.handle.input_w)
        img = resize_bilinear(img, enc.handle.input_h, enc.handle.input_w);
      grid = enc.encode(img);
    }
    return cache_.emplace(key, std::move(grid)).first->second;
  }

  const ManifestRecord& record(TaskId task, std::size_t index) const {
    return store_->records(task, split_).at(index);
  }

  Batch fetch(const JointEpochPlan& plan, std::size_t batch_index) {
    if (batch_index >= plan.batches.size())
      throw InvalidInputError("fetch: batch index out of range");
    const PlannedBatch& pb = plan.batches[batch_index];
    Batch out;
    out.kind = pb.kind;
    for (const auto& [task, idx] : pb.items) {
      const ManifestRecord& rec = record(task, idx);
      if (pb.kind == BatchKind::Text) {
        TextItem item;
        item.task = task;
        item.features = features(task, idx);
        item.boxes = rec.bboxes;
        item.target_tokens = model_->label_tokens(task, *rec.target.class_label);
        out.text.push_back(std::move(item));
      } else {
        HeatmapItem item;
        item.task = task;
        item.features = features(task, idx);
        item.boxes = rec.bboxes;
        // Training targets use the first annotation point.
        item.target = synth_heatmap({rec.target.gaze_points.at(0)}, model_->config.h_out,
                                    model_->config.w_out, model_->config.heatmap_sigma);
        out.heat.push_back(std::move(item));
      }
    }
    return out;
  }

 private:
  const DatasetStore* store_;
  Model* model_;
  std::string split_;
  std::map<std::pair<TaskId, std::size_t>, FeatureGrid> cache_;
};

}  // namespace socialfusion
