#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "socialfusion/common.hpp"
#include "socialfusion/tasks.hpp"

namespace socialfusion {

struct MetricKey {
  std::string task;
  std::string metric;
  bool higher_better = true;
  bool headline = false;  // one of the ten canonical transfer metrics
};

// The ten canonical metrics (two per task unit) used for the
// positive-transfer count, plus gaze AUC carried as a non-headline extra.
inline const std::vector<MetricKey>& transfer_metric_keys() {
  static const std::vector<MetricKey> keys = {
      {"HAGRIDV2", "mAP", true, true},        {"HAGRIDV2", "accuracy", true, true},
      {"PISC_DOMAIN", "mAP", true, true},     {"PISC_RELATION", "mAP", true, true},
      {"LAM", "mAP", true, true},             {"LAM", "accuracy", true, true},
      {"GAZEFOLLOW", "min_l2", false, true},  {"GAZEFOLLOW", "avg_l2", false, true},
      {"GAZEFOLLOW", "auc", true, false},     {"AFFECTNET", "mAP", true, true},
      {"AFFECTNET", "accuracy", true, true},
  };
  return keys;
}

struct TransferCell {
  std::string task, metric;
  bool higher_better = true;
  bool headline = false;
  bool available = false;
  double single_value = 0, joint_value = 0;
  // Sign-flipped for lower-is-better metrics so a positive delta always
  // means the joint run improved.
  double delta = 0;
  bool improved = false;
};

struct TransferReport {
  std::vector<TransferCell> cells;
  int improved = 0;       // over headline metrics
  int total = 0;          // headline metrics with both values available
  int unavailable = 0;
};

inline TransferReport transfer_report(const nlohmann::json& single_metrics,
                                      const nlohmann::json& joint_metrics) {
  TransferReport rep;
  for (const auto& key : transfer_metric_keys()) {
    TransferCell cell;
    cell.task = key.task;
    cell.metric = key.metric;
    cell.higher_better = key.higher_better;
    cell.headline = key.headline;
    bool have_single = single_metrics.contains(key.task) &&
                       single_metrics.at(key.task).contains(key.metric);
    bool have_joint = joint_metrics.contains(key.task) &&
                      joint_metrics.at(key.task).contains(key.metric);
    if (have_single && have_joint) {
      cell.available = true;
      cell.single_value = single_metrics.at(key.task).at(key.metric).get<double>();
      cell.joint_value = joint_metrics.at(key.task).at(key.metric).get<double>();
      double raw = cell.joint_value - cell.single_value;
      cell.delta = key.higher_better ? raw : -raw;
      cell.improved = cell.delta > 0;
      if (key.headline) {
        ++rep.total;
        if (cell.improved) ++rep.improved;
      }
    } else {
      ++rep.unavailable;
    }
    rep.cells.push_back(cell);
  }
  return rep;
}

inline void write_transfer_csv(const TransferReport& rep, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report: " + path);
  // delta is sign-flipped for lower-is-better metrics: positive always means
  // the joint run improved.
  f << "task,metric,higher_better,headline,single,joint,delta,improved\n";
  char buf[64];
  for (const auto& c : rep.cells) {
    if (!c.available) {
      f << c.task << "," << c.metric << "," << (c.higher_better ? 1 : 0) << ","
        << (c.headline ? 1 : 0) << ",,,,unavailable\n";
      continue;
    }
    f << c.task << "," << c.metric << "," << (c.higher_better ? 1 : 0) << ","
      << (c.headline ? 1 : 0) << ",";
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", c.single_value, c.joint_value, c.delta);
    f << buf << (c.improved ? 1 : 0) << "\n";
  }
  f << "# positive transfer: " << rep.improved << "/" << rep.total << " headline metrics improved\n";
}

inline nlohmann::json transfer_report_json(const TransferReport& rep) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : rep.cells) {
    nlohmann::json jc{{"task", c.task},
                      {"metric", c.metric},
                      {"higher_better", c.higher_better},
                      {"headline", c.headline},
                      {"available", c.available}};
    if (c.available) {
      jc["single"] = c.single_value;
      jc["joint"] = c.joint_value;
      jc["delta"] = c.delta;
      jc["improved"] = c.improved;
    }
    cells.push_back(jc);
  }
  return nlohmann::json{{"cells", cells},
                        {"improved", rep.improved},
                        {"total", rep.total},
                        {"delta_convention",
                         "delta = joint - single, sign-flipped for L2 metrics; positive means "
                         "improvement"}};
}

// Per-metric delta bar chart as a standalone SVG file.
inline void write_delta_chart_svg(const TransferReport& rep, const std::string& path) {
  std::vector<const TransferCell*> cells;
  for (const auto& c : rep.cells)
    if (c.available && c.headline) cells.push_back(&c);
  const int bar_w = 46, gap = 18, margin = 60, height = 320;
  const int width = margin * 2 + static_cast<int>(cells.size()) * (bar_w + gap);
  double max_abs = 1e-9;
  for (auto* c : cells) max_abs = std::max(max_abs, std::abs(c->delta));
  const double scale = 110.0 / max_abs;
  const int baseline = height / 2;

  std::ofstream f(path);
  if (!f) throw IoError("cannot write chart: " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
    << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<line x1='" << margin - 20 << "' y1='" << baseline << "' x2='" << width - margin + 20
    << "' y2='" << baseline << "' stroke='black'/>\n";
  f << "<text x='" << width / 2 << "' y='20' text-anchor='middle' font-size='14'>"
    << "Joint vs single deltas (positive = improvement): " << rep.improved << "/" << rep.total
    << " improved</text>\n";
  int x = margin;
  for (auto* c : cells) {
    double hpx = c->delta * scale;
    int y0 = hpx >= 0 ? baseline - static_cast<int>(hpx) : baseline;
    int hh = static_cast<int>(std::abs(hpx));
    f << "<rect x='" << x << "' y='" << y0 << "' width='" << bar_w << "' height='" << std::max(1, hh)
      << "' fill='" << (c->delta > 0 ? "#2a9d4e" : "#d0342c") << "'/>\n";
    f << "<text x='" << x + bar_w / 2 << "' y='" << height - 28
      << "' text-anchor='middle' font-size='9'>" << c->task << "</text>\n";
    f << "<text x='" << x + bar_w / 2 << "' y='" << height - 14
      << "' text-anchor='middle' font-size='9'>" << c->metric << "</text>\n";
    x += bar_w + gap;
  }
  f << "</svg>\n";
}

}  // namespace socialfusion
