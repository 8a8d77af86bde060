#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "socialfusion/checkpoint.hpp"
#include "socialfusion/model.hpp"
#include "test_util.hpp"

using namespace socialfusion;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.encoder = {"toy", "toy-28", 28, 14, 8};  // 2x2 grid
  cfg.backbone.d_l = 16;
  cfg.backbone.layers = 1;
  cfg.backbone.heads = 2;
  cfg.backbone.ffn_mult = 2;
  cfg.backbone.max_context = 700;
  cfg.d_h = 12;
  cfg.lora.rank = 2;
  cfg.h_out = 16;
  cfg.w_out = 16;
  cfg.seed = 42;
  return cfg;
}

ImageF solid_image(int size, double r, double g, double b) {
  ImageF img;
  img.h = img.w = size;
  img.ch[0] = Mat::Constant(size, size, r);
  img.ch[1] = Mat::Constant(size, size, g);
  img.ch[2] = Mat::Constant(size, size, b);
  return img;
}

TEST(Encoder, GridShapeFollowsPatchArithmetic) {
  auto e336 = VisualEncoder::precomputed("clip-vit-l-336", 336, 14, 1024);
  EXPECT_EQ(e336.handle.gh, 24);
  EXPECT_EQ(e336.handle.gw, 24);

  auto toy = VisualEncoder::toy("toy-28", 28, 14, 8, 1);
  auto grid = encode_image(solid_image(28, 0.2, 0.4, 0.6), toy);
  EXPECT_EQ(grid.gh, 2);
  EXPECT_EQ(grid.gw, 2);
  EXPECT_EQ(grid.values.rows(), 4);
  EXPECT_EQ(grid.values.cols(), 8);
}

TEST(Encoder, ZeroImageGivesFiniteFeatures) {
  auto toy = VisualEncoder::toy("toy-28", 28, 14, 8, 1);
  auto grid = encode_image(solid_image(28, 0, 0, 0), toy);
  EXPECT_TRUE(grid.values.allFinite());
}

TEST(Encoder, SizeMismatchIsAnError) {
  auto toy = VisualEncoder::toy("toy-28", 28, 14, 8, 1);
  EXPECT_THROW(encode_image(solid_image(56, 0, 0, 0), toy), InvalidInputError);
}

TEST(Encoder, BadGeometryRejected) {
  EXPECT_THROW(VisualEncoder::toy("bad", 30, 14, 8, 1), ConfigError);
}

TEST(Connector, HandComputedThreeLayerChain) {
  // 4 -> 2 -> 2 -> 3 with hand-set weights on a single patch.
  Rng rng(1);
  Connector c({4, 2, 3}, rng);
  Mat w1(2, 4), w2(2, 2), w3(3, 2), b1(1, 2), b2(1, 2), b3(1, 3);
  w1 << 1, 0, -1, 2, 0, 1, 1, -1;
  b1 << 0.5, -0.25;
  w2 << 1, -1, 2, 0.5;
  b2 << 0, 1;
  w3 << 1, 2, -1, 0, 0.5, -0.5;
  b3 << 0.1, 0.2, 0.3;
  auto ps = c.params();
  ps[0]->value = w1;
  ps[1]->value = b1;
  ps[2]->value = w2;
  ps[3]->value = b2;
  ps[4]->value = w3;
  ps[5]->value = b3;

  FeatureGrid z;
  z.gh = z.gw = 1;
  z.values = Mat(1, 4);
  z.values << 1.0, -2.0, 0.5, 0.25;

  // By hand: h1 = relu(W1 x + b1), h2 = relu(W2 h1 + b2), y = W3 h2 + b3.
  Eigen::Vector4d x(1.0, -2.0, 0.5, 0.25);
  Eigen::Vector2d h1 = ((w1 * x) + b1.transpose()).cwiseMax(0.0);
  Eigen::Vector2d h2 = ((w2 * h1) + b2.transpose()).cwiseMax(0.0);
  Eigen::Vector3d y = (w3 * h2) + b3.transpose();

  auto out = connect(z, c);
  EXPECT_EQ(out.gh, 1);
  EXPECT_EQ(out.values.cols(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out.values(0, i), y(i), 1e-14);
}

TEST(Connector, ZeroWeightsGiveZeroOutput) {
  Rng rng(2);
  Connector c({4, 2, 3}, rng);
  for (auto* p : c.params()) p->value.setZero();
  FeatureGrid z;
  z.gh = 2;
  z.gw = 2;
  z.values = Mat::Random(4, 4);
  auto out = connect(z, c);
  EXPECT_EQ(out.values.rows(), 4);
  EXPECT_TRUE((out.values.array() == 0).all());
}

TEST(Connector, SpatialShapePreservedAndPatchesIndependent) {
  Rng rng(3);
  Connector c({6, 5, 7}, rng);
  FeatureGrid z;
  z.gh = 3;
  z.gw = 2;
  z.values = Mat::Random(6, 6);
  auto out = connect(z, c);
  EXPECT_EQ(out.gh, 3);
  EXPECT_EQ(out.gw, 2);

  // Permuting patches before commutes with permuting after.
  std::vector<int> perm = {3, 1, 4, 0, 5, 2};
  FeatureGrid zp = z;
  for (int r = 0; r < 6; ++r) zp.values.row(r) = z.values.row(perm[r]);
  auto outp = connect(zp, c);
  for (int r = 0; r < 6; ++r)
    EXPECT_TRUE(outp.values.row(r).isApprox(out.values.row(perm[r]), 1e-14));
}

TEST(Connector, DimMismatchRejected) {
  Rng rng(4);
  Connector c({4, 2, 3}, rng);
  FeatureGrid z;
  z.gh = z.gw = 1;
  z.values = Mat::Random(1, 5);
  EXPECT_THROW(connect(z, c), ConfigError);
}

// Brute-force rectangle-intersection oracle over all patches.
std::vector<std::uint8_t> mask_oracle(const BBoxSet& boxes, int gh, int gw) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(gh) * gw, 0);
  for (int i = 0; i < gh; ++i)
    for (int j = 0; j < gw; ++j)
      for (const auto& b : boxes) {
        double ix = std::min(b.x_max, (j + 1.0) / gw) - std::max(b.x_min, static_cast<double>(j) / gw);
        double iy = std::min(b.y_max, (i + 1.0) / gh) - std::max(b.y_min, static_cast<double>(i) / gh);
        if (ix > 0 && iy > 0) m[static_cast<std::size_t>(i) * gw + j] = 1;
      }
  return m;
}

TEST(BBox, EmptySetIsIdentity) {
  FeatureGrid z;
  z.gh = z.gw = 2;
  z.values = Mat::Random(4, 5);
  Vec p = Vec::Constant(5, 3.0);
  auto out = embed_bboxes(z, {}, p);
  EXPECT_TRUE(out.values.isApprox(z.values));
}

TEST(BBox, FullImageBoxFlagsEveryPatch) {
  auto mask = bbox_patch_mask({BBox{0, 0, 1, 1}}, 4, 4);
  for (auto b : mask) EXPECT_EQ(b, 1);
}

TEST(BBox, QuarterBoxMatchesOracleOn4x4) {
  BBoxSet boxes = {BBox{0.0, 0.0, 0.26, 0.26}};
  auto mask = bbox_patch_mask(boxes, 4, 4);
  auto oracle = mask_oracle(boxes, 4, 4);
  EXPECT_EQ(mask, oracle);
  int flagged = 0;
  for (auto b : mask) flagged += b;
  EXPECT_EQ(flagged, 4);  // patches (0,0),(0,1),(1,0),(1,1)
  EXPECT_EQ(mask[0], 1);
  EXPECT_EQ(mask[1], 1);
  EXPECT_EQ(mask[4], 1);
  EXPECT_EQ(mask[5], 1);
}

TEST(BBox, RandomBoxesMatchOracle) {
  Rng rng(77);
  for (int it = 0; it < 200; ++it) {
    int gh = 1 + static_cast<int>(rng.bounded(8));
    int gw = 1 + static_cast<int>(rng.bounded(8));
    BBoxSet boxes;
    int nb = 1 + static_cast<int>(rng.bounded(2));
    for (int b = 0; b < nb; ++b) {
      double x0 = rng.uniform01() * 0.9, y0 = rng.uniform01() * 0.9;
      double x1 = x0 + 0.01 + rng.uniform01() * (1.0 - x0 - 0.01);
      double y1 = y0 + 0.01 + rng.uniform01() * (1.0 - y0 - 0.01);
      boxes.push_back({x0, y0, x1, y1});
    }
    EXPECT_EQ(bbox_patch_mask(boxes, gh, gw), mask_oracle(boxes, gh, gw));
  }
}

TEST(BBox, UnflaggedPatchesBitIdentical) {
  Rng rng(78);
  FeatureGrid z;
  z.gh = z.gw = 4;
  z.values = Mat::Random(16, 6);
  Vec p(6);
  for (int i = 0; i < 6; ++i) p(i) = rng.normal();
  BBoxSet boxes = {BBox{0.3, 0.3, 0.6, 0.6}};
  auto out = embed_bboxes(z, boxes, p);
  auto mask = bbox_patch_mask(boxes, 4, 4);
  for (int r = 0; r < 16; ++r) {
    if (mask[static_cast<std::size_t>(r)])
      EXPECT_TRUE(out.values.row(r).isApprox(z.values.row(r) + p.transpose(), 1e-15));
    else
      EXPECT_TRUE((out.values.row(r).array() == z.values.row(r).array()).all());
  }
}

TEST(BBox, InvalidBoxRejected) {
  EXPECT_THROW(validate_bboxes({BBox{0.5, 0.2, 0.4, 0.6}}), InvalidInputError);
  EXPECT_THROW(validate_bboxes({BBox{0.1, 0.6, 0.4, 0.5}}), InvalidInputError);
}

TEST(Model, AssembleSequenceLengthAndOrder) {
  Model m(toy_config());
  FeatureGrid z;
  z.gh = z.gw = 2;
  z.values = Mat::Zero(4, 16);
  for (int r = 0; r < 4; ++r) z.values(r, 0) = r + 1.0;  // tag each patch

  auto prompt = m.prompt_tokens(TaskId::LAM);
  Mat seq = m.assemble_sequence(prompt, z);
  EXPECT_EQ(seq.rows(), static_cast<Eigen::Index>(prompt.size()) + 4);

  // Visual rows appear after the prompt in row-major patch order.
  for (int r = 0; r < 4; ++r)
    EXPECT_DOUBLE_EQ(seq(static_cast<Eigen::Index>(prompt.size()) + r, 0), r + 1.0);

  Mat seq_empty = m.assemble_sequence({}, z);
  EXPECT_EQ(seq_empty.rows(), 4);
  EXPECT_TRUE(seq_empty.isApprox(z.values));
}

TEST(Model, ForwardTextShapeAndDeterminism) {
  Model m(toy_config());
  FeatureGrid z;
  z.gh = z.gw = 2;
  z.values = Mat::Random(4, 16);
  Mat seq = m.assemble_sequence(m.prompt_tokens(TaskId::LAM), z);
  Vec l1 = m.forward_text(seq);
  Vec l2 = m.forward_text(seq);
  EXPECT_EQ(l1.size(), m.tokenizer.vocab_size());
  EXPECT_TRUE(l1.allFinite());
  EXPECT_TRUE(l1.isApprox(l2, 0.0));
}

TEST(Model, ContextOverflowRaises) {
  auto cfg = toy_config();
  cfg.backbone.max_context = 8;
  Model m(cfg);
  FeatureGrid z;
  z.gh = z.gw = 2;
  z.values = Mat::Random(4, 16);
  EXPECT_THROW(m.forward_text(m.assemble_sequence(m.prompt_tokens(TaskId::LAM), z)),
               ContextOverflowError);
}

TEST(Model, PrefixCachePathMatchesFullSequence) {
  // The shared prompt-prefix evaluation must be numerically identical to
  // running the whole assembled sequence in one pass.
  Model m(toy_config());
  auto enc = encode_image(solid_image(28, 0.3, 0.7, 0.1), m.encoder);

  ad::NoGradGuard ng;
  auto pre = m.backbone.run_prefix(m.prompt_tokens(TaskId::LAM));
  auto vis = m.visual_tokens_node(enc, {}, pre.len);
  auto hidden = m.backbone.run_suffix(pre, vis);
  auto logits_cached = m.backbone.lm_logits(ad::slice_rows(hidden, 3, 1));

  FeatureGrid z_dl;
  z_dl.gh = enc.gh;
  z_dl.gw = enc.gw;
  {
    auto v = m.connector.apply(ad::constant(enc.values));
    z_dl.values = v->value;
  }
  Mat seq = m.assemble_sequence(m.prompt_tokens(TaskId::LAM), z_dl);
  Vec logits_full = m.forward_text(seq);

  EXPECT_TRUE(logits_cached->value.row(0).transpose().isApprox(logits_full, 1e-12));
}

TEST(Model, ForwardHeatmapShapeAndConstantPropagation) {
  Model m(toy_config());
  FeatureGrid z;
  z.gh = z.gw = 2;
  z.values = Mat::Random(4, 16);
  Mat seq = m.assemble_sequence(m.prompt_tokens(TaskId::GAZEFOLLOW), z);
  Mat scores = m.forward_heatmap(seq);
  EXPECT_EQ(scores.rows(), 16);
  EXPECT_EQ(scores.cols(), 16);

  // Zero projection weights, bias b: the map is constant and depends only on
  // the bias chain through the upscaler.
  auto hp = m.head.params();
  hp[0]->value.setZero();    // proj_w
  hp[1]->value(0, 0) = 0.7;  // proj_b
  hp[3]->value(0, 0) = 0.1;  // conv_b
  Mat s2 = m.forward_heatmap(seq);
  FeatureGrid z3 = z;
  z3.values = Mat::Random(4, 16);
  Mat s3 = m.forward_heatmap(m.assemble_sequence(m.prompt_tokens(TaskId::GAZEFOLLOW), z3));
  EXPECT_TRUE(s2.isApprox(s3, 1e-12));  // independent of the input
}

TEST(Model, MissingVisualPositionsRaises) {
  Model m(toy_config());
  Mat seq = Mat::Random(2, 16);  // fewer rows than gh*gw = 4
  EXPECT_THROW(m.forward_heatmap(seq), InvalidInputError);
}

TEST(Model, ConnectorAndHeadGradientsMatchFiniteDifferences) {
  // Full-pipeline gradient check on the 2x2-grid toy model in double
  // precision.
  auto cfg = toy_config();
  Model m(cfg);
  auto enc = encode_image(solid_image(28, 0.6, 0.2, 0.4), m.encoder);

  std::vector<TextItem> titems;
  titems.push_back({TaskId::LAM, enc, {}, m.label_tokens(TaskId::LAM, "Yes")});
  auto text_loss = [&] { return m.text_batch_loss(titems); };
  std::vector<ad::Parameter*> conn = m.connector.params();
  double rel_text = sftest::grad_check(conn, text_loss, 1e-5);
  EXPECT_LT(rel_text, 1e-3);

  std::vector<HeatmapItem> hitems;
  Mat target = synth_heatmap({{0.5, 0.5}}, cfg.h_out, cfg.w_out, 3.0);
  hitems.push_back({TaskId::GAZEFOLLOW, enc, {BBox{0.1, 0.1, 0.4, 0.4}}, target});
  auto heat_loss = [&] { return m.heatmap_batch_loss(hitems); };
  double rel_head = sftest::grad_check(m.head.params(), heat_loss, 1e-5);
  EXPECT_LT(rel_head, 1e-3);

  // p_bbox gets gradient through the masked patches.
  double rel_bbox = sftest::grad_check({&m.p_bbox()}, heat_loss, 1e-5);
  EXPECT_LT(rel_bbox, 1e-3);
}

TEST(Model, CheckpointRoundTripAndFingerprint) {
  auto dir = std::filesystem::temp_directory_path() / "sf_ckpt_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "model.sfck").string();

  auto cfg = toy_config();
  Model m(cfg);
  // Make trainables distinctive.
  Rng rng(5);
  for (auto* p : m.trainable_params())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) p->value(r, c) = rng.normal();
  auto sum_before = m.trainable_checksum();
  save_checkpoint(m, path);

  Model m2(cfg);
  EXPECT_NE(m2.trainable_checksum(), sum_before);
  load_checkpoint(m2, path);
  EXPECT_EQ(m2.trainable_checksum(), sum_before);

  // Fingerprint mismatch is rejected.
  auto cfg3 = cfg;
  cfg3.d_h = cfg.d_h + 1;
  Model m3(cfg3);
  EXPECT_THROW(load_checkpoint(m3, path), InvalidInputError);
  std::filesystem::remove_all(dir);
}

TEST(Model, TrainableSetIsExactlyTheFourGroups) {
  Model m(toy_config());
  bool has_connector = false, has_pbbox = false, has_lora = false, has_head = false;
  for (auto* p : m.trainable_params()) {
    if (p->name.rfind("connector.", 0) == 0) has_connector = true;
    else if (p->name == "p_bbox") has_pbbox = true;
    else if (p->name.find(".lora_") != std::string::npos) has_lora = true;
    else if (p->name.rfind("heatmap.", 0) == 0) has_head = true;
    else FAIL() << "unexpected trainable parameter " << p->name;
  }
  EXPECT_TRUE(has_connector && has_pbbox && has_lora && has_head);
}

}  // namespace
