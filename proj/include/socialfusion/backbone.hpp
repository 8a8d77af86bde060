#pragma once

#include <string>
#include <vector>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/checksum.hpp"
#include "socialfusion/common.hpp"
#include "socialfusion/lora.hpp"
#include "socialfusion/rng.hpp"
#include "socialfusion/tokenizer.hpp"

namespace socialfusion {

struct BackboneConfig {
  std::string name = "toy-lm";
  int d_l = 32;
  int layers = 1;
  int heads = 2;
  int ffn_mult = 4;
  int max_context = 1024;

  void validate() const {
    if (d_l <= 0 || layers <= 0 || heads <= 0 || ffn_mult <= 0 || max_context <= 0)
      throw ConfigError("backbone: dimensions must be positive");
    if (d_l % heads != 0) throw ConfigError("backbone: d_l must be divisible by heads");
  }
};

class ContextOverflowError : public InvalidInputError {
 public:
  explicit ContextOverflowError(const std::string& msg) : InvalidInputError(msg) {}
};

// Decoder-only transformer with frozen base weights. LoRA adapters sit on
// every affine layer (attention projections, MLP, LM head); they are the only
// trainable pieces inside the backbone.
class Backbone {
 public:
  // Per-layer keys/values of an already-processed prompt prefix. Within one
  // forward graph the prefix can be shared by every sample that uses the same
  // prompt; gradients accumulate through the shared nodes.
  struct Prefix {
    int len = 0;
    std::vector<ad::NodePtr> k, v;  // per layer, (len x d_l)
  };

  BackboneConfig config;

  Backbone() = default;

  Backbone(BackboneConfig cfg, int vocab, const LoRAConfig& lora, std::uint64_t seed)
      : config(cfg), vocab_(vocab) {
    config.validate();
    lora.validate();
    Rng rng(Rng::derive(seed, checksum(cfg.name)));
    const int d = cfg.d_l;
    tok_embed_ = Mat(vocab, d);
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (int r = 0; r < vocab; ++r)
      for (int c = 0; c < d; ++c) tok_embed_(r, c) = rng.normal(0.0, s);
    pos_enc_ = sinusoidal(cfg.max_context, d);
    blocks_.reserve(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
      Block blk;
      std::string p = "backbone.block" + std::to_string(l);
      blk.ln1_g = Mat::Ones(1, d);
      blk.ln1_b = Mat::Zero(1, d);
      blk.ln2_g = Mat::Ones(1, d);
      blk.ln2_b = Mat::Zero(1, d);
      blk.wq = LoraLinear(p + ".wq", d, d, lora, rng);
      blk.wk = LoraLinear(p + ".wk", d, d, lora, rng);
      blk.wv = LoraLinear(p + ".wv", d, d, lora, rng);
      blk.wo = LoraLinear(p + ".wo", d, d, lora, rng);
      blk.fc1 = LoraLinear(p + ".fc1", d, d * cfg.ffn_mult, lora, rng);
      blk.fc2 = LoraLinear(p + ".fc2", d * cfg.ffn_mult, d, lora, rng);
      blocks_.push_back(std::move(blk));
    }
    lnf_g_ = Mat::Ones(1, d);
    lnf_b_ = Mat::Zero(1, d);
    lm_head_ = LoraLinear("backbone.lm_head", d, vocab, lora, rng);
  }

  int vocab() const { return vocab_; }

  // Token embeddings without positions.
  Mat token_rows(const std::vector<int>& ids) const {
    Mat out(static_cast<Eigen::Index>(ids.size()), config.d_l);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= vocab_) throw InvalidInputError("embed_tokens: id out of vocab");
      out.row(static_cast<Eigen::Index>(i)) = tok_embed_.row(ids[i]);
    }
    return out;
  }

  // Token embeddings plus sinusoidal positions starting at pos_offset.
  Mat embed_tokens(const std::vector<int>& ids, int pos_offset) const {
    check_context(pos_offset + static_cast<int>(ids.size()));
    Mat out = token_rows(ids);
    out += pos_enc_.middleRows(pos_offset, out.rows());
    return out;
  }

  Mat positional_rows(int pos_offset, int n) const {
    check_context(pos_offset + n);
    return pos_enc_.middleRows(pos_offset, n);
  }

  Prefix run_prefix(const std::vector<int>& tokens, Rng* dropout_rng = nullptr) {
    Prefix pre;
    pre.len = static_cast<int>(tokens.size());
    pre.k.resize(blocks_.size());
    pre.v.resize(blocks_.size());
    if (tokens.empty()) {
      for (std::size_t l = 0; l < blocks_.size(); ++l) {
        pre.k[l] = ad::constant(Mat::Zero(0, config.d_l));
        pre.v[l] = ad::constant(Mat::Zero(0, config.d_l));
      }
      return pre;
    }
    auto h = ad::constant(embed_tokens(tokens, 0));
    run_blocks(h, nullptr, &pre, dropout_rng);
    return pre;
  }

  // suffix_embed must already contain positional encodings at offset
  // prefix.len. Returns post-final-norm hidden states for the suffix rows.
  ad::NodePtr run_suffix(const Prefix& prefix, ad::NodePtr suffix_embed,
                         Rng* dropout_rng = nullptr) {
    check_context(prefix.len + static_cast<int>(suffix_embed->value.rows()));
    auto h = run_blocks(suffix_embed, &prefix, nullptr, dropout_rng);
    return ad::layernorm_rows(h, lnf_g_, lnf_b_);
  }

  // Next-token logits for every suffix row.
  ad::NodePtr lm_logits(ad::NodePtr hidden, Rng* dropout_rng = nullptr) {
    return lm_head_.apply(hidden, dropout_rng);
  }

  std::vector<ad::Parameter*> params() {
    std::vector<ad::Parameter*> out;
    for (auto& blk : blocks_)
      for (LoraLinear* l : {&blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.fc1, &blk.fc2})
        for (auto* p : l->params()) out.push_back(p);
    for (auto* p : lm_head_.params()) out.push_back(p);
    return out;
  }

  std::vector<std::pair<std::string, const Mat*>> frozen_tensors() const {
    std::vector<std::pair<std::string, const Mat*>> out;
    out.push_back({"backbone.tok_embed", &tok_embed_});
    int l = 0;
    for (const auto& blk : blocks_) {
      std::string p = "backbone.block" + std::to_string(l++);
      out.push_back({p + ".ln1_g", &blk.ln1_g});
      out.push_back({p + ".ln1_b", &blk.ln1_b});
      out.push_back({p + ".ln2_g", &blk.ln2_g});
      out.push_back({p + ".ln2_b", &blk.ln2_b});
      for (const LoraLinear* ll : {&blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.fc1, &blk.fc2})
        for (auto& t : ll->frozen_tensors()) out.push_back(t);
    }
    out.push_back({"backbone.lnf_g", &lnf_g_});
    out.push_back({"backbone.lnf_b", &lnf_b_});
    for (auto& t : lm_head_.frozen_tensors()) out.push_back(t);
    return out;
  }

 private:
  struct Block {
    Mat ln1_g, ln1_b, ln2_g, ln2_b;  // frozen
    LoraLinear wq, wk, wv, wo, fc1, fc2;
  };

  void check_context(int len) const {
    if (len > config.max_context)
      throw ContextOverflowError("sequence length " + std::to_string(len) +
                                 " exceeds backbone context " + std::to_string(config.max_context));
  }

  static Mat sinusoidal(int n, int d) {
    Mat pe(n, d);
    for (int p = 0; p < n; ++p)
      for (int i = 0; i < d; ++i) {
        double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(d));
        pe(p, i) = (i % 2 == 0) ? std::sin(p * rate) : std::cos(p * rate);
      }
    return pe;
  }

  // Causal mask for suffix rows attending over [prefix | suffix].
  static Mat causal_mask(int prefix_len, int s) {
    Mat m = Mat::Zero(s, prefix_len + s);
    for (int i = 0; i < s; ++i)
      for (int j = prefix_len + i + 1; j < prefix_len + s; ++j) m(i, j) = -1e30;
    return m;
  }

  ad::NodePtr run_blocks(ad::NodePtr h, const Prefix* prefix, Prefix* collect,
                         Rng* dropout_rng) {
    using namespace ad;
    const int d = config.d_l;
    const int dh = d / config.heads;
    const int plen = prefix ? prefix->len : 0;
    const int s = static_cast<int>(h->value.rows());
    Mat mask = causal_mask(plen, s);
    double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      Block& blk = blocks_[l];
      auto x1 = layernorm_rows(h, blk.ln1_g, blk.ln1_b);
      auto q = blk.wq.apply(x1, dropout_rng);
      auto k_new = blk.wk.apply(x1, dropout_rng);
      auto v_new = blk.wv.apply(x1, dropout_rng);
      NodePtr k_all = k_new, v_all = v_new;
      if (prefix && prefix->len > 0) {
        k_all = concat_rows({prefix->k[l], k_new});
        v_all = concat_rows({prefix->v[l], v_new});
      }
      if (collect) {
        collect->k[l] = k_new;
        collect->v[l] = v_new;
      }
      std::vector<NodePtr> head_ctx;
      head_ctx.reserve(static_cast<std::size_t>(config.heads));
      for (int hd = 0; hd < config.heads; ++hd) {
        auto qh = slice_cols(q, hd * dh, dh);
        auto kh = slice_cols(k_all, hd * dh, dh);
        auto vh = slice_cols(v_all, hd * dh, dh);
        auto scores = add(scale(matmul(qh, kh, false, true), inv_sqrt_dh), constant(mask));
        head_ctx.push_back(matmul(softmax_rows(scores), vh));
      }
      auto ctx = config.heads == 1 ? head_ctx[0] : concat_cols(head_ctx);
      h = add(h, blk.wo.apply(ctx, dropout_rng));
      auto x2 = layernorm_rows(h, blk.ln2_g, blk.ln2_b);
      auto ff = blk.fc2.apply(relu(blk.fc1.apply(x2, dropout_rng)), dropout_rng);
      h = add(h, ff);
    }
    return h;
  }

  int vocab_ = 0;
  Mat tok_embed_;  // frozen
  Mat pos_enc_;    // deterministic, not a parameter
  std::vector<Block> blocks_;
  Mat lnf_g_, lnf_b_;  // frozen
  LoraLinear lm_head_;
};

}  // namespace socialfusion
