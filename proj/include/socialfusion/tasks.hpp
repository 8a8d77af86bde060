#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "socialfusion/common.hpp"
#include "socialfusion/tokenizer.hpp"

namespace socialfusion {

enum class TaskId { LAM, AFFECTNET, HAGRIDV2, PISC_DOMAIN, PISC_RELATION, GAZEFOLLOW };
enum class OutputMode { Text, Heatmap };

inline std::string to_string(TaskId id) {
  switch (id) {
    case TaskId::LAM: return "LAM";
    case TaskId::AFFECTNET: return "AFFECTNET";
    case TaskId::HAGRIDV2: return "HAGRIDV2";
    case TaskId::PISC_DOMAIN: return "PISC_DOMAIN";
    case TaskId::PISC_RELATION: return "PISC_RELATION";
    case TaskId::GAZEFOLLOW: return "GAZEFOLLOW";
  }
  return "?";
}

inline const std::vector<TaskId>& all_task_ids() {
  static const std::vector<TaskId> ids = {TaskId::LAM,         TaskId::AFFECTNET,
                                          TaskId::HAGRIDV2,    TaskId::PISC_DOMAIN,
                                          TaskId::PISC_RELATION, TaskId::GAZEFOLLOW};
  return ids;
}

inline TaskId task_from_string(const std::string& s) {
  for (TaskId id : all_task_ids())
    if (to_string(id) == s) return id;
  throw ConfigError("unknown task id '" + s +
                    "'; valid: LAM, AFFECTNET, HAGRIDV2, PISC_DOMAIN, PISC_RELATION, GAZEFOLLOW");
}

// The five task units used for training regimes. PISC is one unit backed by
// two datasets (domain and relation class sets over the same benchmark).
enum class TaskUnit { LAM, AFFECTNET, HAGRIDV2, PISC, GAZEFOLLOW };

inline std::string to_string(TaskUnit u) {
  switch (u) {
    case TaskUnit::LAM: return "LAM";
    case TaskUnit::AFFECTNET: return "AFFECTNET";
    case TaskUnit::HAGRIDV2: return "HAGRIDV2";
    case TaskUnit::PISC: return "PISC";
    case TaskUnit::GAZEFOLLOW: return "GAZEFOLLOW";
  }
  return "?";
}

inline const std::vector<TaskUnit>& all_task_units() {
  static const std::vector<TaskUnit> units = {TaskUnit::LAM, TaskUnit::AFFECTNET,
                                              TaskUnit::HAGRIDV2, TaskUnit::PISC,
                                              TaskUnit::GAZEFOLLOW};
  return units;
}

inline TaskUnit unit_from_string(const std::string& s) {
  for (TaskUnit u : all_task_units())
    if (to_string(u) == s) return u;
  throw ConfigError("unknown task '" + s + "'; valid: LAM, AFFECTNET, HAGRIDV2, PISC, GAZEFOLLOW");
}

inline std::vector<TaskId> unit_datasets(TaskUnit u) {
  switch (u) {
    case TaskUnit::LAM: return {TaskId::LAM};
    case TaskUnit::AFFECTNET: return {TaskId::AFFECTNET};
    case TaskUnit::HAGRIDV2: return {TaskId::HAGRIDV2};
    case TaskUnit::PISC: return {TaskId::PISC_DOMAIN, TaskId::PISC_RELATION};
    case TaskUnit::GAZEFOLLOW: return {TaskId::GAZEFOLLOW};
  }
  return {};
}

inline TaskUnit unit_of(TaskId id) {
  switch (id) {
    case TaskId::PISC_DOMAIN:
    case TaskId::PISC_RELATION: return TaskUnit::PISC;
    case TaskId::LAM: return TaskUnit::LAM;
    case TaskId::AFFECTNET: return TaskUnit::AFFECTNET;
    case TaskId::HAGRIDV2: return TaskUnit::HAGRIDV2;
    case TaskId::GAZEFOLLOW: return TaskUnit::GAZEFOLLOW;
  }
  return TaskUnit::LAM;
}

struct TaskSpec {
  TaskId id;
  std::string prompt;
  OutputMode output_mode = OutputMode::Text;
  std::vector<std::string> labels;       // the strings the model must emit
  std::vector<std::string> class_names;  // human-readable, parallel to labels
  int bbox_arity = 0;
};

// Ground truth for one sample: exactly one variant populated.
struct Target {
  std::optional<std::string> class_label;
  std::vector<std::pair<double, double>> gaze_points;  // normalized (x, y)
};

namespace prompts {

inline constexpr const char* kAffectNet =
    R"(You will be given an image containing a person. You must identify the facial expression of this person. The following is a list of all possible expressions that you can choose from:

(a) neutral
(b) happiness
(c) sadness
(d) surprise
(e) fear
(f) disgust
(g) anger
(h) contempt

Identify the expression of the person in the image and respond directly with only the expression's lowercase label (e.g. 'a', 'c', 'h') with no additional text or reasoning.)";

inline constexpr const char* kGazeFollow =
    R"(You will be given an image containing at least one person. You will also be given a bounding box specifying a certain person's head. Your task is to predict where this person is looking. You are expected to identify the exact point they are looking at. Please provide your answer as a coordinate '(X,Y)', where both X and Y are in the range [0, 1000). For example, if the person appears to be looking at something exactly in the center of the image, the answer would be '(500,500)'. You must be as exact as possible. To repeat, please output ONLY '(X,Y)' with no other reasoning or explanation whatsoever.)";

inline constexpr const char* kPiscDomain =
    R"(You will be given an image containing several people and two bounding boxes around two of those people. Your task is to classify the nature of the social relationship between these two people. Your choices are

(a) intimate
(b) not intimate
(c) no relation

Your response should simply be your best estimate of the two individuals' social relation as a single letter (one of 'a', 'b', or 'c') with no additional text or reasoning.)";

inline constexpr const char* kPiscRelation =
    R"(You will be given an image containing several people and two bounding boxes around two of those people. Your task is to classify the specific social relationship between these two people. Your choices are

(a) friends
(b) family
(c) couple
(d) professional
(e) commercial
(f) no relation

Your response should simply be your best estimate of the two individuals' social relation as a single letter (e.g. 'a' or 'f') with no additional text or reasoning.)";

inline constexpr const char* kLam =
    R"(You will receive a single image with a cropped face. You must respond 'Yes' if the face in the image is looking at the camera wearer and 'No' otherwise. There will always be a face in the image, but since it is cropped from a larger image, it may be low resolution and unclear. Simply respond according to your best estimate. The only valid responses are 'Yes' and 'No', with no additional explanation.)";

inline constexpr const char* kHagridV2 =
    R"(You will be given an image containing a person. You must identify the gesture this person is performing. The following is a list of all possible gestures that you can choose from:

(a) phone gesture with only the thumb and pinkie out
(b) thumbs up gesture
(c) thumbs down gesture
(d) a closed fist gesture
(e) gesture with only the index finger out
(f) gesture with only the index, middle, and ring fingers out
(g) gesture with only the thumb, index, and middle fingers out
(h) gesture with only the index, middle, and pinkie fingers out
(i) gesture with all fingers except thumb out
(j) gesture with index finger over lips
(k) gesture with thumb and index touching and all other fingers out
(l) gesture with hand splayed out, exposing the palm
(m) gesture with only the index and middle fingers out, palm facing camera
(n) gesture with only the index and middle fingers out, back of hand facing camera
(o) gesture with only index and pinkie fingers out
(p) gesture with all fingers out and touching each other closely, palm facing camera
(q) gesture with all fingers out and touching each other closely, back of hand facing camera
(r) gesture with index and middle fingers out and touching each other closely, palm facing camera
(s) gesture with index and middle fingers out and touching each other closely, back of hand facing camera
(t) gesture with all fingers out in a claw form, as if grabbing something
(u) gesture with fingers arranged in a circle, as if gripping a pole
(v) gesture pointing with the index finger at the camera
(w) gesture with only the pinkie out
(x) gesture with only the middle finger out
(y) gesture with the index and middle fingers out and touching, and the thumb out perpendicular to them
(z) gesture with only the thumb and index fingers out perpendicular to each other
(aa) thumb index gesture with both hands at the same time
(ab) gesture with both hands pressed together, as if praying
(ac) gesture with both hands flat touching each other perpendicularly with one touching the other's palm
(ad) thumb index gesture with both hands touching each other in the form of a rectangle
(ae) both hands closed and arms crossed against each other
(af) both hands coming together in the shape of a heart with all fingers forming the shape
(ag) only thumb and index fingers of both hands forming the shape of a heart, with other fingers pointing up

Identify the gesture that the person is performing and respond directly with only the gesture's lowercase label (e.g. 'a', 'j', 'ag') with no additional text or reasoning.)";

}  // namespace prompts

class TaskRegistry {
 public:
  const TaskSpec& get(TaskId id) const {
    auto it = specs_.find(id);
    if (it == specs_.end()) throw ConfigError("task not registered: " + to_string(id));
    return it->second;
  }

  const std::map<TaskId, TaskSpec>& all() const { return specs_; }

  void put(TaskSpec spec) { specs_[spec.id] = std::move(spec); }

  std::vector<std::string> prompt_corpus() const {
    std::vector<std::string> corpus;
    for (const auto& [id, spec] : specs_) {
      corpus.push_back(spec.prompt);
      for (const auto& l : spec.labels) corpus.push_back(l);
    }
    return corpus;
  }

 private:
  std::map<TaskId, TaskSpec> specs_;
};

inline std::vector<std::string> letter_labels(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    std::string s;
    if (i < 26) s = std::string(1, static_cast<char>('a' + i));
    else s = std::string("a") + static_cast<char>('a' + (i - 26));
    out.push_back(s);
  }
  return out;
}

inline const TaskRegistry& default_registry() {
  static const TaskRegistry reg = [] {
    TaskRegistry r;
    r.put({TaskId::LAM, prompts::kLam, OutputMode::Text, {"Yes", "No"}, {}, 0});
    r.put({TaskId::AFFECTNET,
           prompts::kAffectNet,
           OutputMode::Text,
           letter_labels(8),
           {"neutral", "happiness", "sadness", "surprise", "fear", "disgust", "anger", "contempt"},
           0});
    r.put({TaskId::HAGRIDV2, prompts::kHagridV2, OutputMode::Text, letter_labels(33), {}, 0});
    r.put({TaskId::PISC_DOMAIN,
           prompts::kPiscDomain,
           OutputMode::Text,
           letter_labels(3),
           {"intimate", "not intimate", "no relation"},
           2});
    r.put({TaskId::PISC_RELATION,
           prompts::kPiscRelation,
           OutputMode::Text,
           letter_labels(6),
           {"friends", "family", "couple", "professional", "commercial", "no relation"},
           2});
    r.put({TaskId::GAZEFOLLOW, prompts::kGazeFollow, OutputMode::Heatmap, {}, {}, 1});
    return r;
  }();
  return reg;
}

// Deterministic tokenization of a task prompt, memoized per task.
class PromptTokenCache {
 public:
  explicit PromptTokenCache(const Tokenizer& tok) : tok_(&tok) {}

  const std::vector<int>& render(const TaskSpec& spec) {
    auto it = cache_.find(spec.id);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(spec.id, tok_->encode(spec.prompt)).first->second;
  }

 private:
  const Tokenizer* tok_;
  std::map<TaskId, std::vector<int>> cache_;
};

inline std::vector<int> render_prompt(const TaskSpec& spec, const Tokenizer& tok) {
  return tok.encode(spec.prompt);
}

// Argmax with ties broken toward the lowest label index.
inline int predict_index(const std::vector<double>& scores) {
  if (scores.empty()) throw InvalidInputError("predict_index: empty scores");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  return best;
}

// Single-token fast path: per-class scores are the labels' raw next-token
// logits. Rankings agree with full log-likelihood scoring because log-softmax
// is a monotone shift of the logits within one sample.
inline std::vector<double> score_labels(const Vec& next_token_logits, const TaskSpec& spec,
                                        const Tokenizer& tok) {
  if (spec.output_mode != OutputMode::Text)
    throw InvalidInputError("score_labels: " + to_string(spec.id) + " is not a TEXT task");
  std::vector<double> scores;
  scores.reserve(spec.labels.size());
  for (const auto& label : spec.labels) {
    auto ids = tok.encode(label);
    if (ids.size() != 1)
      throw InvalidInputError("score_labels(logits): label '" + label +
                              "' is not a single token; use the sequence-scoring path");
    scores.push_back(next_token_logits(ids[0]));
  }
  return scores;
}

inline std::pair<long, long> quantize_point(double x, double y, int w_out, int h_out) {
  long cx = round_half_away(x * (w_out - 1));
  long cy = round_half_away(y * (h_out - 1));
  return {cx, cy};
}

// Unnormalized Gaussian with peak value 1 at the quantized gaze pixel.
inline Mat synth_heatmap(const std::vector<std::pair<double, double>>& points, int h_out, int w_out,
                         double sigma) {
  if (sigma <= 0) throw InvalidInputError("synth_heatmap: sigma must be > 0");
  if (points.size() != 1)
    throw InvalidInputError("synth_heatmap: training targets carry exactly one gaze point");
  auto [x, y] = points[0];
  if (x < 0 || x > 1 || y < 0 || y > 1)
    throw InvalidInputError("synth_heatmap: gaze point outside [0,1]^2");
  auto [cx, cy] = quantize_point(x, y, w_out, h_out);
  Mat map(h_out, w_out);
  const double denom = 2.0 * sigma * sigma;
  for (int i = 0; i < h_out; ++i)
    for (int j = 0; j < w_out; ++j) {
      double d2 = static_cast<double>((i - cy) * (i - cy) + (j - cx) * (j - cx));
      map(i, j) = std::exp(-d2 / denom);
    }
  return map;
}

}  // namespace socialfusion
