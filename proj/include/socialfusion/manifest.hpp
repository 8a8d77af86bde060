#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "socialfusion/bbox.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/tasks.hpp"

namespace socialfusion {

struct ManifestRecord {
  TaskId task;
  std::string image_path;  // resolved against the manifest directory
  BBoxSet bboxes;
  Target target;
  std::string split;  // train | val | test
};

// Line-delimited JSON, one record per line:
//   {"task":"LAM","image":"images/x.ppm","split":"train","label":"Yes"}
//   {"task":"GAZEFOLLOW","image":"i.ppm","split":"test",
//    "bboxes":[[x0,y0,x1,y1]],"points":[[x,y],...]}
// Image paths are relative to the manifest file's directory. Records are
// validated against the task registry; errors carry the line number. Image
// files are checked lazily at fetch time.
inline std::vector<ManifestRecord> load_manifest(const std::string& path,
                                                 const TaskRegistry& registry = default_registry()) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  std::filesystem::path root = std::filesystem::path(path).parent_path();
  std::vector<ManifestRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw InvalidInputError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("malformed record: ") + e.what());
    }
    ManifestRecord rec;
    try {
      rec.task = task_from_string(j.at("task").get<std::string>());
    } catch (const std::exception& e) {
      fail(e.what());
    }
    const TaskSpec& spec = registry.get(rec.task);
    if (!j.contains("image") || !j.at("image").is_string()) fail("missing image path");
    rec.image_path = (root / j.at("image").get<std::string>()).string();
    rec.split = j.value("split", "train");
    if (rec.split != "train" && rec.split != "val" && rec.split != "test")
      fail("split must be train, val, or test");

    if (j.contains("bboxes")) {
      for (const auto& b : j.at("bboxes")) {
        if (!b.is_array() || b.size() != 4) fail("bbox must be [x_min,y_min,x_max,y_max]");
        rec.bboxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                              b[3].get<double>()});
      }
    }
    if (static_cast<int>(rec.bboxes.size()) != spec.bbox_arity)
      fail(to_string(rec.task) + " requires " + std::to_string(spec.bbox_arity) +
           " bounding boxes, record has " + std::to_string(rec.bboxes.size()));
    try {
      validate_bboxes(rec.bboxes);
    } catch (const std::exception& e) {
      fail(e.what());
    }

    if (spec.output_mode == OutputMode::Text) {
      if (!j.contains("label") || !j.at("label").is_string()) fail("TEXT task record needs a label");
      std::string label = j.at("label").get<std::string>();
      bool known = false;
      for (const auto& l : spec.labels) known = known || l == label;
      if (!known) fail("label '" + label + "' not in " + to_string(rec.task) + " label set");
      rec.target.class_label = label;
    } else {
      if (!j.contains("points") || !j.at("points").is_array() || j.at("points").empty())
        fail("HEATMAP task record needs gaze points");
      for (const auto& pt : j.at("points")) {
        if (!pt.is_array() || pt.size() != 2) fail("gaze point must be [x,y]");
        double x = pt[0].get<double>(), y = pt[1].get<double>();
        if (x < 0 || x > 1 || y < 0 || y > 1) fail("gaze point outside [0,1]^2");
        rec.target.gaze_points.emplace_back(x, y);
      }
      if (rec.target.gaze_points.size() > 10) fail("at most 10 gaze annotations per sample");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// Records grouped by task and split.
class DatasetStore {
 public:
  void add_manifest(const std::string& path, const TaskRegistry& registry = default_registry()) {
    for (auto& rec : load_manifest(path, registry))
      by_task_split_[rec.task][rec.split].push_back(std::move(rec));
  }

  const std::vector<ManifestRecord>& records(TaskId task, const std::string& split) const {
    static const std::vector<ManifestRecord> empty;
    auto it = by_task_split_.find(task);
    if (it == by_task_split_.end()) return empty;
    auto jt = it->second.find(split);
    return jt == it->second.end() ? empty : jt->second;
  }

  std::size_t size(TaskId task, const std::string& split) const {
    return records(task, split).size();
  }

  std::vector<TaskId> tasks() const {
    std::vector<TaskId> out;
    for (const auto& [task, _] : by_task_split_) out.push_back(task);
    return out;
  }

 private:
  std::map<TaskId, std::map<std::string, std::vector<ManifestRecord>>> by_task_split_;
};

}  // namespace socialfusion
