#include <gtest/gtest.h>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/rng.hpp"
#include "test_util.hpp"

using namespace socialfusion;
using namespace socialfusion::ad;

namespace {

Mat random_mat(Rng& rng, int r, int c, double s = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, s);
  return m;
}

TEST(Autodiff, MatmulAllTransposeVariants) {
  Rng rng(11);
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb) {
      Parameter a("a", ta ? random_mat(rng, 4, 3) : random_mat(rng, 3, 4));
      Parameter b("b", tb ? random_mat(rng, 5, 4) : random_mat(rng, 4, 5));
      auto build = [&] { return sum_all(tanh_op(matmul(leaf(a), leaf(b), ta, tb))); };
      EXPECT_LT(sftest::grad_check({&a, &b}, build), 1e-7) << "ta=" << ta << " tb=" << tb;
    }
}

TEST(Autodiff, EltwiseAndBroadcast) {
  Rng rng(12);
  Parameter x("x", random_mat(rng, 4, 6));
  Parameter v("v", random_mat(rng, 1, 6));
  std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  auto build = [&] {
    auto h = add_rowvec(leaf(x), leaf(v));
    h = add_rows_masked(h, leaf(v), mask);
    h = relu(add(h, constant(Mat::Constant(4, 6, 0.3))));
    return sum_all(tanh_op(h));
  };
  EXPECT_LT(sftest::grad_check({&x, &v}, build), 1e-7);
}

TEST(Autodiff, SoftmaxAndLayerNorm) {
  Rng rng(13);
  Parameter x("x", random_mat(rng, 5, 7));
  Mat gamma = random_mat(rng, 1, 7, 0.5);
  gamma.array() += 1.0;
  Mat beta = random_mat(rng, 1, 7, 0.2);
  // The weight matrix inside the builder must be fixed across evaluations.
  Mat w = random_mat(rng, 7, 2);
  auto build2 = [&] {
    auto h = layernorm_rows(leaf(x), gamma, beta);
    auto p = softmax_rows(h);
    return sum_all(tanh_op(matmul(p, constant(w))));
  };
  EXPECT_LT(sftest::grad_check({&x}, build2), 1e-6);
}

TEST(Autodiff, CrossEntropyUniformLogitsIsLogV) {
  const int v = 17;
  auto logits = constant(Mat::Zero(3, v));
  auto loss = ce_sum(logits, {0, 5, 16});
  EXPECT_NEAR(loss->scalar() / 3.0, std::log(static_cast<double>(v)), 1e-12);
}

TEST(Autodiff, CrossEntropyGradient) {
  Rng rng(14);
  Parameter x("x", random_mat(rng, 3, 9));
  std::vector<int> targets = {2, 0, 8};
  auto build = [&] { return scale(ce_sum(leaf(x), targets), 1.0 / 3.0); };
  EXPECT_LT(sftest::grad_check({&x}, build), 1e-8);
}

TEST(Autodiff, BceLogitsValueAndGradient) {
  // Hand case: scores 0 => p=0.5; BCE = -t*log(.5) - (1-t)*log(.5) = log 2.
  Mat target(2, 2);
  target << 1.0, 0.0, 0.25, 1.0;
  auto scores = constant(Mat::Zero(2, 2));
  auto loss = bce_logits_sum(scores, target);
  EXPECT_NEAR(loss->scalar(), 4.0 * std::log(2.0), 1e-12);

  Rng rng(15);
  Parameter s("s", random_mat(rng, 3, 4));
  auto build = [&] { return bce_logits_sum(leaf(s), Mat::Constant(3, 4, 0.3)); };
  EXPECT_LT(sftest::grad_check({&s}, build), 1e-7);
}

TEST(Autodiff, ConvTransposeShapeAndGradient) {
  Rng rng(16);
  Parameter x("x", random_mat(rng, 2, 2));
  Parameter k("k", random_mat(rng, 4, 4));
  Parameter b("b", Mat::Zero(1, 1));
  {
    NoGradGuard ng;
    auto out = conv_transpose2d(leaf(x), leaf(k), leaf(b), 2);
    EXPECT_EQ(out->value.rows(), 6);  // (2-1)*2+4
    EXPECT_EQ(out->value.cols(), 6);
  }
  auto build = [&] {
    return sum_all(tanh_op(conv_transpose2d(leaf(x), leaf(k), leaf(b), 2)));
  };
  EXPECT_LT(sftest::grad_check({&x, &k, &b}, build), 1e-7);
}

TEST(Autodiff, BilinearResizeKnownValuesAndGradient) {
  Mat in(2, 2);
  in << 0.0, 1.0, 2.0, 3.0;
  {
    NoGradGuard ng;
    auto out = bilinear_resize(constant(in), 3, 3);
    EXPECT_NEAR(out->value(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(out->value(2, 2), 3.0, 1e-15);
    EXPECT_NEAR(out->value(1, 1), 1.5, 1e-15);
    EXPECT_NEAR(out->value(0, 1), 0.5, 1e-15);
  }
  Rng rng(17);
  Parameter x("x", random_mat(rng, 3, 5));
  auto build = [&] { return sum_all(tanh_op(bilinear_resize(leaf(x), 7, 9))); };
  EXPECT_LT(sftest::grad_check({&x}, build), 1e-7);
}

TEST(Autodiff, ReshapeIsRowMajor) {
  Mat in(4, 1);
  in << 1, 2, 3, 4;
  NoGradGuard ng;
  auto out = reshape(constant(in), 2, 2);
  EXPECT_EQ(out->value(0, 0), 1);
  EXPECT_EQ(out->value(0, 1), 2);
  EXPECT_EQ(out->value(1, 0), 3);
  EXPECT_EQ(out->value(1, 1), 4);
}

TEST(Autodiff, ConcatSliceGradient) {
  Rng rng(18);
  Parameter a("a", random_mat(rng, 2, 4));
  Parameter b("b", random_mat(rng, 3, 4));
  auto build = [&] {
    auto cat = concat_rows({leaf(a), leaf(b)});
    auto left = slice_cols(cat, 0, 2);
    auto right = slice_cols(cat, 2, 2);
    auto mix = concat_cols({right, left});
    return sum_all(tanh_op(slice_rows(mix, 1, 3)));
  };
  EXPECT_LT(sftest::grad_check({&a, &b}, build), 1e-7);
}

TEST(Autodiff, SharedSubgraphAccumulates) {
  Parameter a("a", Mat::Constant(1, 1, 2.0));
  auto x = leaf(a);
  auto y = add(x, x);  // y = 2a -> dy/da = 2
  backward(y);
  EXPECT_DOUBLE_EQ(a.grad(0, 0), 2.0);

  a.zero_grad();
  auto x2 = leaf(a);
  auto z = matmul(x2, x2);  // z = a^2 -> dz/da = 2a = 4
  backward(z);
  EXPECT_DOUBLE_EQ(a.grad(0, 0), 4.0);
}

TEST(Autodiff, NoGradModeBuildsConstants) {
  Parameter a("a", Mat::Constant(2, 2, 1.5));
  NoGradGuard ng;
  auto x = leaf(a);
  EXPECT_FALSE(x->needs_grad);
  auto y = sum_all(x);
  EXPECT_FALSE(y->needs_grad);
}

TEST(Autodiff, GradsAccumulateAcrossBackwards) {
  Parameter a("a", Mat::Constant(1, 1, 3.0));
  for (int i = 0; i < 3; ++i) {
    auto loss = scale(leaf(a), 2.0);
    backward(loss);
  }
  EXPECT_DOUBLE_EQ(a.grad(0, 0), 6.0);
}

}  // namespace
