#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "socialfusion/common.hpp"
#include "socialfusion/image.hpp"
#include "socialfusion/rng.hpp"
#include "socialfusion/tasks.hpp"

namespace socialfusion {

// Synthetic colored-shape proxies for the five tasks. Each class maps to a
// distinct dominant color so the datasets are separable from frozen toy
// encoder features; bbox tasks place blobs under the boxes and the gaze task
// places a bright dot in the target patch.
struct FixtureConfig {
  int image_size = 56;     // 4x4 patch grid at patch size 14
  int patch_size = 14;
  int train_per_task = 200;
  int val_per_task = 60;
  int hagrid_classes = 4;  // subset of the 33 gesture labels present in data
  std::uint64_t seed = 1;
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b) {
  double i = std::floor(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: *r = v; *g = t; *b = p; break;
    case 1: *r = q; *g = v; *b = p; break;
    case 2: *r = p; *g = v; *b = t; break;
    case 3: *r = p; *g = q; *b = v; break;
    case 4: *r = t; *g = p; *b = v; break;
    default: *r = v; *g = p; *b = q; break;
  }
}

inline ImageU8 base_image(int size, double r, double g, double b, Rng& rng, double noise = 0.03) {
  ImageU8 img;
  img.h = img.w = size;
  img.data.resize(static_cast<std::size_t>(size) * size * 3);
  double rgb[3] = {r, g, b};
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      for (int k = 0; k < 3; ++k) {
        double v = rgb[k] + rng.uniform(-noise, noise);
        v = std::min(1.0, std::max(0.0, v));
        img.at(i, j, k) = static_cast<std::uint8_t>(v * 255.0 + 0.5);
      }
  return img;
}

inline void fill_rect(ImageU8& img, int r0, int c0, int r1, int c1, double r, double g, double b) {
  for (int i = r0; i < r1; ++i)
    for (int j = c0; j < c1; ++j) {
      img.at(i, j, 0) = static_cast<std::uint8_t>(r * 255.0 + 0.5);
      img.at(i, j, 1) = static_cast<std::uint8_t>(g * 255.0 + 0.5);
      img.at(i, j, 2) = static_cast<std::uint8_t>(b * 255.0 + 0.5);
    }
}

inline void fill_circle(ImageU8& img, double cr, double cc, double rad, double r, double g, double b) {
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j)
      if ((i - cr) * (i - cr) + (j - cc) * (j - cc) <= rad * rad) {
        img.at(i, j, 0) = static_cast<std::uint8_t>(r * 255.0 + 0.5);
        img.at(i, j, 1) = static_cast<std::uint8_t>(g * 255.0 + 0.5);
        img.at(i, j, 2) = static_cast<std::uint8_t>(b * 255.0 + 0.5);
      }
}

}  // namespace detail

class FixtureWriter {
 public:
  FixtureWriter(const std::string& out_dir, const FixtureConfig& cfg)
      : dir_(out_dir), cfg_(cfg), rng_(cfg.seed) {
    std::filesystem::create_directories(dir_ / "images");
  }

  // Generates all six datasets; returns task -> manifest path.
  std::map<TaskId, std::string> generate() {
    std::map<TaskId, std::string> manifests;
    manifests[TaskId::LAM] = classification("lam", TaskId::LAM, 2, 0);
    manifests[TaskId::AFFECTNET] = classification("affectnet", TaskId::AFFECTNET, 8, 0);
    manifests[TaskId::HAGRIDV2] =
        classification("hagridv2", TaskId::HAGRIDV2, cfg_.hagrid_classes, 0);
    manifests[TaskId::PISC_DOMAIN] = classification("pisc_domain", TaskId::PISC_DOMAIN, 3, 2);
    manifests[TaskId::PISC_RELATION] = classification("pisc_relation", TaskId::PISC_RELATION, 6, 2);
    manifests[TaskId::GAZEFOLLOW] = gaze("gazefollow");
    return manifests;
  }

 private:
  int grid() const { return cfg_.image_size / cfg_.patch_size; }

  // Class identity encoded as the background hue; bbox tasks additionally get
  // dark blobs under the two boxes.
  std::string classification(const std::string& stem, TaskId task, int classes, int arity) {
    const auto& spec = default_registry().get(task);
    if (classes > static_cast<int>(spec.labels.size()))
      throw ConfigError("fixture: " + to_string(task) + " has only " +
                        std::to_string(spec.labels.size()) + " labels");
    auto manifest_path = dir_ / (stem + ".jsonl");
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("cannot write manifest: " + manifest_path.string());
    int total = cfg_.train_per_task + cfg_.val_per_task;
    for (int i = 0; i < total; ++i) {
      int cls = static_cast<int>(rng_.bounded(static_cast<std::uint64_t>(classes)));
      double r, g, b;
      // Offset per task so tasks are not trivially color-aliased.
      double hue = std::fmod((cls + 0.31 * static_cast<double>(task_hue_salt(task))) /
                                 static_cast<double>(classes),
                             1.0);
      detail::hsv_to_rgb(hue, 0.75, 0.85, &r, &g, &b);
      ImageU8 img = detail::base_image(cfg_.image_size, r, g, b, rng_);

      nlohmann::json rec;
      rec["task"] = to_string(task);
      rec["split"] = i < cfg_.train_per_task ? "train" : "val";
      rec["label"] = spec.labels[static_cast<std::size_t>(cls)];
      if (arity == 2) {
        int p1 = static_cast<int>(rng_.bounded(static_cast<std::uint64_t>(grid() * grid())));
        int p2 = static_cast<int>(rng_.bounded(static_cast<std::uint64_t>(grid() * grid() - 1)));
        if (p2 >= p1) ++p2;
        nlohmann::json boxes = nlohmann::json::array();
        for (int p : {p1, p2}) {
          int pr = p / grid(), pc = p % grid();
          int ps = cfg_.patch_size;
          detail::fill_circle(img, pr * ps + ps / 2.0, pc * ps + ps / 2.0, ps / 3.0, 0.15, 0.15,
                              0.2);
          double x0 = (pc + 0.15) / grid(), y0 = (pr + 0.15) / grid();
          double x1 = (pc + 0.85) / grid(), y1 = (pr + 0.85) / grid();
          boxes.push_back({x0, y0, x1, y1});
        }
        rec["bboxes"] = boxes;
      }
      std::string img_name = "images/" + stem + "_" + std::to_string(i) + ".ppm";
      write_ppm((dir_ / img_name).string(), img);
      rec["image"] = img_name;
      mf << rec.dump() << "\n";
    }
    return manifest_path.string();
  }

  // A gray head blob (boxed) plus a bright dot in the gaze-target patch; the
  // annotation is the dot patch center. Val samples carry ten jittered
  // annotator points.
  std::string gaze(const std::string& stem) {
    auto manifest_path = dir_ / (stem + ".jsonl");
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("cannot write manifest: " + manifest_path.string());
    int total = cfg_.train_per_task + cfg_.val_per_task;
    const int g = grid();
    const int ps = cfg_.patch_size;
    for (int i = 0; i < total; ++i) {
      ImageU8 img = detail::base_image(cfg_.image_size, 0.12, 0.12, 0.14, rng_);
      int head = static_cast<int>(rng_.bounded(static_cast<std::uint64_t>(g * g)));
      int dot = static_cast<int>(rng_.bounded(static_cast<std::uint64_t>(g * g - 1)));
      if (dot >= head) ++dot;
      int hr = head / g, hc = head % g;
      detail::fill_circle(img, hr * ps + ps / 2.0, hc * ps + ps / 2.0, ps / 2.5, 0.55, 0.45, 0.4);
      int dr = dot / g, dc = dot % g;
      detail::fill_rect(img, dr * ps + ps / 2 - 2, dc * ps + ps / 2 - 2, dr * ps + ps / 2 + 3,
                        dc * ps + ps / 2 + 3, 1.0, 1.0, 0.9);

      double px = (dc + 0.5) / g, py = (dr + 0.5) / g;
      nlohmann::json rec;
      rec["task"] = "GAZEFOLLOW";
      bool train = i < cfg_.train_per_task;
      rec["split"] = train ? "train" : "val";
      rec["bboxes"] = {{(hc + 0.1) / g, (hr + 0.1) / g, (hc + 0.9) / g, (hr + 0.9) / g}};
      nlohmann::json pts = nlohmann::json::array();
      if (train) {
        pts.push_back({px, py});
      } else {
        for (int a = 0; a < 10; ++a) {
          double jx = std::min(1.0, std::max(0.0, px + rng_.uniform(-0.015, 0.015)));
          double jy = std::min(1.0, std::max(0.0, py + rng_.uniform(-0.015, 0.015)));
          pts.push_back({jx, jy});
        }
      }
      rec["points"] = pts;
      std::string img_name = "images/" + stem + "_" + std::to_string(i) + ".ppm";
      write_ppm((dir_ / img_name).string(), img);
      rec["image"] = img_name;
      mf << rec.dump() << "\n";
    }
    return manifest_path.string();
  }

  static int task_hue_salt(TaskId task) {
    switch (task) {
      case TaskId::LAM: return 0;
      case TaskId::AFFECTNET: return 1;
      case TaskId::HAGRIDV2: return 2;
      case TaskId::PISC_DOMAIN: return 3;
      case TaskId::PISC_RELATION: return 4;
      case TaskId::GAZEFOLLOW: return 5;
    }
    return 0;
  }

  std::filesystem::path dir_;
  FixtureConfig cfg_;
  Rng rng_;
};

inline std::map<TaskId, std::string> generate_fixtures(const std::string& out_dir,
                                                       const FixtureConfig& cfg) {
  FixtureWriter w(out_dir, cfg);
  return w.generate();
}

}  // namespace socialfusion
