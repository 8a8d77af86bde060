#pragma once

#include <functional>

#include "socialfusion/autodiff.hpp"
#include "socialfusion/common.hpp"

namespace sftest {

using socialfusion::Mat;

// Central finite difference of f with respect to one entry of x.
inline double numeric_grad(const std::function<double()>& f, double& x, double eps = 1e-6) {
  double orig = x;
  x = orig + eps;
  double hi = f();
  x = orig - eps;
  double lo = f();
  x = orig;
  return (hi - lo) / (2 * eps);
}

// Vector-norm relative error between analytic and numeric gradients of all
// entries of the given parameters.
inline double grad_check(std::vector<socialfusion::ad::Parameter*> params,
                         const std::function<socialfusion::ad::NodePtr()>& loss_builder,
                         double eps = 1e-6) {
  using namespace socialfusion;
  for (auto* p : params) p->zero_grad();
  auto root = loss_builder();
  ad::backward(root);
  double num2 = 0, diff2 = 0;
  auto eval = [&loss_builder]() {
    ad::NoGradGuard ng;
    return loss_builder()->scalar();
  };
  for (auto* p : params) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double g_num = numeric_grad(eval, p->value(r, c), eps);
        double g_ad = p->grad(r, c);
        num2 += g_num * g_num;
        diff2 += (g_ad - g_num) * (g_ad - g_num);
      }
  }
  return std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-12);
}

}  // namespace sftest
