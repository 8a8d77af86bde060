#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/backbone.hpp"
#include "socialfusion/bbox.hpp"
#include "socialfusion/checksum.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/connector.hpp"
#include "socialfusion/encoder.hpp"
#include "socialfusion/heatmap_head.hpp"
#include "socialfusion/tasks.hpp"
#include "socialfusion/tokenizer.hpp"

namespace socialfusion {

struct EncoderConfig {
  std::string kind = "toy";  // toy | precomputed
  std::string name = "toy-56";
  int input_size = 56;
  int patch_size = 14;
  int feature_dim = 16;
};

struct ModelConfig {
  EncoderConfig encoder;
  BackboneConfig backbone;
  int d_h = 4096;            // connector hidden dim
  LoRAConfig lora;           // rank 32 unless overridden
  int h_out = 64, w_out = 64;
  int conv_kernel = 4;
  int conv_stride = 2;
  double heatmap_sigma = 3.0;
  std::string tokenizer_mode = "word";  // word | char
  std::uint64_t seed = 7;
};

inline VisualEncoder make_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.name == "clip-vit-l-336")
    return VisualEncoder::precomputed(cfg.name, 336, 14, cfg.feature_dim > 0 ? cfg.feature_dim : 1024);
  if (cfg.kind == "toy")
    return VisualEncoder::toy(cfg.name, cfg.input_size, cfg.patch_size, cfg.feature_dim, seed);
  if (cfg.kind == "precomputed")
    return VisualEncoder::precomputed(cfg.name, cfg.input_size, cfg.patch_size, cfg.feature_dim);
  throw ConfigError("unknown encoder kind '" + cfg.kind + "' (want toy or precomputed)");
}

// One training sample prepared for the forward pass.
struct TextItem {
  TaskId task;
  FeatureGrid features;  // encoder output, (gh*gw x d_v)
  BBoxSet boxes;
  std::vector<int> target_tokens;
};

struct HeatmapItem {
  TaskId task;
  FeatureGrid features;
  BBoxSet boxes;
  Mat target;  // (h_out x w_out) soft targets in (0,1]
};

// The full SocialFusion assembly: frozen encoder -> connector -> bbox
// embedding -> LoRA-adapted backbone -> text logits / heatmap head.
class Model {
 public:
  ModelConfig config;
  VisualEncoder encoder;
  Tokenizer tokenizer;
  Connector connector;
  Backbone backbone;
  HeatmapHead head;

  explicit Model(const ModelConfig& cfg, const TaskRegistry& registry = default_registry())
      : config(cfg),
        encoder(make_encoder(cfg.encoder, cfg.seed)),
        tokenizer(Tokenizer::build(cfg.tokenizer_mode == "char" ? Tokenizer::Mode::Char
                                                                : Tokenizer::Mode::Word,
                                   registry.prompt_corpus())),
        registry_(&registry) {
    Rng rng(Rng::derive(cfg.seed, 0xa11c));
    backbone = Backbone(cfg.backbone, tokenizer.vocab_size(), cfg.lora, cfg.seed);
    connector = Connector({encoder.handle.feature_dim, cfg.d_h, cfg.backbone.d_l}, rng);
    // Zero init makes bbox injection a no-op at step 0.
    p_bbox_ = ad::Parameter("p_bbox", Mat::Zero(1, cfg.backbone.d_l));
    HeatmapHeadConfig hc;
    hc.gh = encoder.handle.gh;
    hc.gw = encoder.handle.gw;
    hc.h_out = cfg.h_out;
    hc.w_out = cfg.w_out;
    hc.kernel = cfg.conv_kernel;
    hc.stride = cfg.conv_stride;
    hc.sigma = cfg.heatmap_sigma;
    head = HeatmapHead(hc, cfg.backbone.d_l, rng);
    for (const auto& [id, spec] : registry.all()) prompt_tokens_[id] = tokenizer.encode(spec.prompt);
  }

  const TaskRegistry& registry() const { return *registry_; }
  const std::vector<int>& prompt_tokens(TaskId id) const { return prompt_tokens_.at(id); }
  ad::Parameter& p_bbox() { return p_bbox_; }

  std::vector<int> label_tokens(TaskId task, const std::string& label) const {
    auto ids = tokenizer.encode(label);
    if (ids.empty()) throw InvalidInputError("label '" + label + "' tokenizes to nothing");
    return ids;
  }

  // ----- parameter bookkeeping -------------------------------------------

  std::vector<ad::Parameter*> trainable_params() {
    std::vector<ad::Parameter*> out;
    for (auto* p : connector.params()) out.push_back(p);
    out.push_back(&p_bbox_);
    for (auto* p : backbone.params()) out.push_back(p);
    for (auto* p : head.params()) out.push_back(p);
    return out;
  }

  std::vector<std::pair<std::string, const Mat*>> frozen_tensors() const {
    auto out = encoder.frozen_tensors();
    for (auto& t : backbone.frozen_tensors()) out.push_back(t);
    return out;
  }

  std::uint64_t frozen_checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& [name, m] : frozen_tensors()) {
      h = checksum(name, h);
      h = checksum(*m, h);
    }
    return h;
  }

  std::uint64_t trainable_checksum() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto* p : trainable_params()) {
      h = checksum(p->name, h);
      h = checksum(p->value, h);
    }
    return h;
  }

  // Stable identifier of the trainable set (names + shapes); gradient
  // vectors are only comparable when fingerprints match.
  std::string param_fingerprint() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto* p : trainable_params()) {
      h = checksum(p->name, h);
      std::int64_t dims[2] = {p->value.rows(), p->value.cols()};
      h = fnv1a(dims, sizeof(dims), h);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  void zero_grads() {
    for (auto* p : trainable_params()) p->zero_grad();
  }

  // ----- graph building ---------------------------------------------------

  // Connector + bbox embedding + visual positional encoding; rows are ready
  // to enter the backbone at positions [prompt_len, prompt_len + patches).
  ad::NodePtr visual_tokens_node(const FeatureGrid& features, const BBoxSet& boxes,
                                 int prompt_len) {
    validate_features(features);
    auto vis = connector.apply(ad::constant(features.values));
    vis = embed_bboxes_node(vis, boxes, ad::leaf(p_bbox_), features.gh, features.gw);
    Mat pos = backbone.positional_rows(prompt_len, features.patches());
    return ad::add(vis, ad::constant(pos));
  }

  // Mean-over-samples of per-sample mean-token cross-entropy. Samples of the
  // same task share one prompt-prefix subgraph.
  ad::NodePtr text_batch_loss(const std::vector<TextItem>& items, Rng* dropout_rng = nullptr) {
    if (items.empty()) throw InvalidInputError("text_batch_loss: empty batch");
    std::map<TaskId, Backbone::Prefix> prefixes;
    ad::NodePtr total;
    for (const auto& item : items) {
      const auto& spec = registry_->get(item.task);
      if (spec.output_mode != OutputMode::Text)
        throw InvalidInputError("text_batch_loss: " + to_string(item.task) + " is not a TEXT task");
      if (item.target_tokens.empty())
        throw InvalidInputError("text_batch_loss: sample has no target tokens");
      auto [it, fresh] = prefixes.try_emplace(item.task);
      if (fresh) it->second = backbone.run_prefix(prompt_tokens_.at(item.task), dropout_rng);
      const Backbone::Prefix& pre = it->second;
      const int patches = item.features.patches();
      const int k = static_cast<int>(item.target_tokens.size());
      auto vis = visual_tokens_node(item.features, item.boxes, pre.len);
      ad::NodePtr suffix = vis;
      if (k > 1) {
        std::vector<int> teacher(item.target_tokens.begin(), item.target_tokens.end() - 1);
        Mat lab = backbone.embed_tokens(teacher, pre.len + patches);
        suffix = ad::concat_rows({vis, ad::constant(lab)});
      }
      auto hidden = backbone.run_suffix(pre, suffix, dropout_rng);
      auto pred_rows = ad::slice_rows(hidden, patches - 1, k);
      auto logits = backbone.lm_logits(pred_rows, dropout_rng);
      auto ce = ad::scale(ad::ce_sum(logits, item.target_tokens), 1.0 / k);
      total = total ? ad::add(total, ce) : ce;
    }
    return ad::scale(total, 1.0 / static_cast<double>(items.size()));
  }

  // Mean-over-samples of per-sample mean-pixel BCE-with-logits.
  ad::NodePtr heatmap_batch_loss(const std::vector<HeatmapItem>& items, Rng* dropout_rng = nullptr) {
    if (items.empty()) throw InvalidInputError("heatmap_batch_loss: empty batch");
    std::map<TaskId, Backbone::Prefix> prefixes;
    ad::NodePtr total;
    for (const auto& item : items) {
      auto [it, fresh] = prefixes.try_emplace(item.task);
      if (fresh) it->second = backbone.run_prefix(prompt_tokens_.at(item.task), dropout_rng);
      const Backbone::Prefix& pre = it->second;
      auto vis = visual_tokens_node(item.features, item.boxes, pre.len);
      auto hidden = backbone.run_suffix(pre, vis, dropout_rng);
      auto scores = head.apply(hidden);
      if (scores->value.rows() != item.target.rows() || scores->value.cols() != item.target.cols())
        throw InvalidInputError("heatmap_batch_loss: target shape mismatch");
      auto bce = ad::scale(ad::bce_logits_sum(scores, item.target),
                           1.0 / static_cast<double>(item.target.size()));
      total = total ? ad::add(total, bce) : bce;
    }
    return ad::scale(total, 1.0 / static_cast<double>(items.size()));
  }

  // ----- spec-level single-sample operations ------------------------------

  // [p, flatten(z)]: prompt token embeddings followed by the connected,
  // bbox-embedded patch rows. Positional encodings are added by the forward
  // passes, not here.
  Mat assemble_sequence(const std::vector<int>& prompt, const FeatureGrid& z_dl) {
    if (z_dl.dim() != config.backbone.d_l)
      throw InvalidInputError("assemble_sequence: grid dim must equal backbone d_l");
    Mat seq(static_cast<Eigen::Index>(prompt.size()) + z_dl.patches(), config.backbone.d_l);
    seq.topRows(static_cast<Eigen::Index>(prompt.size())) = backbone.token_rows(prompt);
    seq.bottomRows(z_dl.patches()) = z_dl.values;
    return seq;
  }

  // Next-token logits at the final sequence position.
  Vec forward_text(const Mat& sequence_embed) {
    ad::NoGradGuard ng;
    auto hidden = run_full_sequence(sequence_embed);
    auto logits = backbone.lm_logits(ad::slice_rows(hidden, hidden->value.rows() - 1, 1));
    require_finite(logits->value, "forward_text logits");
    return logits->value.row(0).transpose();
  }

  // Pre-sigmoid heatmap scores from the visual positions, which are the
  // trailing gh*gw rows of the assembled sequence.
  Mat forward_heatmap(const Mat& sequence_embed) {
    const int patches = encoder.handle.gh * encoder.handle.gw;
    if (sequence_embed.rows() < patches)
      throw InvalidInputError("forward_heatmap: sequence lacks the visual positions");
    ad::NoGradGuard ng;
    auto hidden = run_full_sequence(sequence_embed);
    auto scores = head.apply(ad::slice_rows(hidden, hidden->value.rows() - patches, patches));
    require_finite(scores->value, "forward_heatmap scores");
    return scores->value;
  }

  // ----- evaluation helpers ----------------------------------------------

  // Shares prompt prefixes across samples; valid while parameters are fixed.
  class ScoreSession {
   public:
    explicit ScoreSession(Model& m) : model_(&m) {}

    // Constrained sequence scoring: summed teacher-forced log-likelihood of
    // each label's token sequence. Reduces to next-token log-softmax when
    // every label is a single token.
    std::vector<double> score(TaskId task, const FeatureGrid& features, const BBoxSet& boxes) {
      ad::NoGradGuard ng;
      Model& m = *model_;
      const auto& spec = m.registry_->get(task);
      if (spec.output_mode != OutputMode::Text)
        throw InvalidInputError("score: " + to_string(task) + " is not a TEXT task");
      const Backbone::Prefix& pre = prefix(task);
      const int patches = features.patches();
      auto vis = m.visual_tokens_node(features, boxes, pre.len);
      auto hidden = m.backbone.run_suffix(pre, vis);
      auto last = m.backbone.lm_logits(ad::slice_rows(hidden, patches - 1, 1));
      Vec first_logp = log_softmax(last->value.row(0).transpose());
      std::vector<double> scores;
      scores.reserve(spec.labels.size());
      for (const auto& label : spec.labels) {
        auto ids = m.label_tokens(task, label);
        double s = first_logp(ids[0]);
        if (ids.size() > 1) {
          std::vector<int> teacher(ids.begin(), ids.end() - 1);
          Mat lab = m.backbone.embed_tokens(teacher, pre.len + patches);
          auto suffix = ad::concat_rows({vis, ad::constant(lab)});
          auto h2 = m.backbone.run_suffix(pre, suffix);
          auto rows = ad::slice_rows(h2, patches, static_cast<Eigen::Index>(ids.size()) - 1);
          auto lg = m.backbone.lm_logits(rows);
          for (std::size_t t = 1; t < ids.size(); ++t)
            s += log_softmax(lg->value.row(static_cast<Eigen::Index>(t - 1)).transpose())(ids[t]);
        }
        scores.push_back(s);
      }
      return scores;
    }

    // Post-sigmoid gaze probability map.
    Mat predict_heatmap(const FeatureGrid& features, const BBoxSet& boxes) {
      ad::NoGradGuard ng;
      Model& m = *model_;
      const Backbone::Prefix& pre = prefix(TaskId::GAZEFOLLOW);
      auto vis = m.visual_tokens_node(features, boxes, pre.len);
      auto hidden = m.backbone.run_suffix(pre, vis);
      auto scores = m.head.apply(hidden);
      return (1.0 / (1.0 + (-scores->value.array()).exp())).matrix();
    }

   private:
    const Backbone::Prefix& prefix(TaskId task) {
      auto it = prefixes_.find(task);
      if (it == prefixes_.end()) {
        ad::NoGradGuard ng;
        it = prefixes_.emplace(task, model_->backbone.run_prefix(model_->prompt_tokens_.at(task)))
                 .first;
      }
      return it->second;
    }

    Model* model_;
    std::map<TaskId, Backbone::Prefix> prefixes_;
  };

 private:
  void validate_features(const FeatureGrid& features) const {
    if (features.gh != encoder.handle.gh || features.gw != encoder.handle.gw ||
        features.dim() != encoder.handle.feature_dim)
      throw InvalidInputError("feature grid does not match encoder '" + encoder.handle.name + "'");
    require_finite(features.values, "feature grid");
  }

  ad::NodePtr run_full_sequence(const Mat& sequence_embed) {
    Backbone::Prefix empty = backbone.run_prefix({});
    Mat with_pos = sequence_embed;
    with_pos += backbone.positional_rows(0, static_cast<int>(sequence_embed.rows()));
    return backbone.run_suffix(empty, ad::constant(with_pos));
  }

  const TaskRegistry* registry_;
  ad::Parameter p_bbox_;
  std::map<TaskId, std::vector<int>> prompt_tokens_;
};

}  // namespace socialfusion
