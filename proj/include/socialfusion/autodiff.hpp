#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "socialfusion/common.hpp"

namespace socialfusion::ad {

using socialfusion::Mat;

// A named tensor with persistent storage. Trainable parameters accumulate
// gradients across backward passes until zero_grad(); frozen parameters are
// treated as constants by the graph.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Mat v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Mat::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }
};

class Node;
using NodePtr = std::shared_ptr<Node>;

// One value in a dynamically built computation graph. Creation order is a
// valid topological order since parents always exist before children.
class Node {
 public:
  Mat value;
  Mat grad;
  bool needs_grad = false;
  std::uint64_t order = 0;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Mat::Zero(value.rows(), value.cols());
  }

  double scalar() const { return value(0, 0); }
};

inline std::uint64_t next_order() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

// When grad mode is off, leaf() degrades to constant() and no closures are
// recorded; evaluation-only forward passes stay cheap.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
};

inline NodePtr make_node(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->order = next_order();
  return n;
}

inline NodePtr constant(Mat value) { return make_node(std::move(value)); }

inline NodePtr leaf(Parameter& p) {
  auto n = make_node(p.value);
  if (!grad_mode() || !p.trainable) return n;
  n->needs_grad = true;
  Parameter* pp = &p;
  n->backward_fn = [pp](Node& self) { pp->grad += self.grad; };
  return n;
}

namespace detail {

inline NodePtr unary(NodePtr a, Mat value, std::function<void(Node&, Node&)> bwd) {
  auto n = make_node(std::move(value));
  if (a->needs_grad) {
    n->needs_grad = true;
    n->parents = {a};
    NodePtr pa = a;
    n->backward_fn = [pa, bwd](Node& self) {
      pa->ensure_grad();
      bwd(self, *pa);
    };
  }
  return n;
}

inline NodePtr binary(NodePtr a, NodePtr b, Mat value,
                      std::function<void(Node&, Node&, Node&)> bwd) {
  auto n = make_node(std::move(value));
  if (a->needs_grad || b->needs_grad) {
    n->needs_grad = true;
    n->parents = {a, b};
    NodePtr pa = a, pb = b;
    n->backward_fn = [pa, pb, bwd](Node& self) {
      pa->ensure_grad();
      pb->ensure_grad();
      bwd(self, *pa, *pb);
    };
  }
  return n;
}

}  // namespace detail

inline NodePtr add(NodePtr a, NodePtr b) {
  return detail::binary(a, b, a->value + b->value, [](Node& self, Node& a, Node& b) {
    a.grad += self.grad;
    b.grad += self.grad;
  });
}

inline NodePtr scale(NodePtr a, double s) {
  return detail::unary(a, a->value * s, [s](Node& self, Node& a) { a.grad += s * self.grad; });
}

// Broadcast-add a 1xC row vector to every row.
inline NodePtr add_rowvec(NodePtr a, NodePtr v) {
  Mat out = a->value;
  out.rowwise() += v->value.row(0);
  return detail::binary(a, v, std::move(out), [](Node& self, Node& a, Node& v) {
    a.grad += self.grad;
    v.grad.row(0) += self.grad.colwise().sum();
  });
}

// Adds the 1xC vector v only to rows where mask[r] is true.
inline NodePtr add_rows_masked(NodePtr a, NodePtr v, std::vector<std::uint8_t> mask) {
  if (static_cast<Eigen::Index>(mask.size()) != a->value.rows())
    throw InvalidInputError("add_rows_masked: mask length mismatch");
  Mat out = a->value;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    if (mask[static_cast<std::size_t>(r)]) out.row(r) += v->value.row(0);
  return detail::binary(a, v, std::move(out),
                        [mask](Node& self, Node& a, Node& v) {
                          a.grad += self.grad;
                          for (Eigen::Index r = 0; r < self.grad.rows(); ++r)
                            if (mask[static_cast<std::size_t>(r)])
                              v.grad.row(0) += self.grad.row(r);
                        });
}

// Elementwise product with a fixed matrix (e.g. a dropout mask).
inline NodePtr mul_mask(NodePtr a, Mat m) {
  Mat out = a->value.cwiseProduct(m);
  return detail::unary(a, std::move(out),
                       [m](Node& self, Node& a) { a.grad += self.grad.cwiseProduct(m); });
}

inline NodePtr matmul(NodePtr a, NodePtr b, bool trans_a = false, bool trans_b = false) {
  Mat out;
  if (!trans_a && !trans_b) out = a->value * b->value;
  else if (!trans_a && trans_b) out = a->value * b->value.transpose();
  else if (trans_a && !trans_b) out = a->value.transpose() * b->value;
  else out = a->value.transpose() * b->value.transpose();
  return detail::binary(a, b, std::move(out),
                        [trans_a, trans_b](Node& self, Node& a, Node& b) {
                          const Mat& g = self.grad;
                          if (!trans_a && !trans_b) {
                            a.grad.noalias() += g * b.value.transpose();
                            b.grad.noalias() += a.value.transpose() * g;
                          } else if (!trans_a && trans_b) {
                            a.grad.noalias() += g * b.value;
                            b.grad.noalias() += g.transpose() * a.value;
                          } else if (trans_a && !trans_b) {
                            a.grad.noalias() += b.value * g.transpose();
                            b.grad.noalias() += a.value * g;
                          } else {
                            a.grad.noalias() += b.value.transpose() * g.transpose();
                            b.grad.noalias() += g.transpose() * a.value.transpose();
                          }
                        });
}

inline NodePtr relu(NodePtr a) {
  Mat out = a->value.cwiseMax(0.0);
  return detail::unary(a, std::move(out), [](Node& self, Node& a) {
    a.grad += (a.value.array() > 0.0).cast<double>().matrix().cwiseProduct(self.grad);
  });
}

inline NodePtr tanh_op(NodePtr a) {
  Mat out = a->value.array().tanh().matrix();
  Mat t = out;
  return detail::unary(a, std::move(out), [t](Node& self, Node& a) {
    a.grad += ((1.0 - t.array().square()).matrix()).cwiseProduct(self.grad);
  });
}

inline NodePtr softmax_rows(NodePtr a) {
  Mat p = a->value;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  Mat probs = p;
  return detail::unary(a, std::move(p), [probs](Node& self, Node& a) {
    for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
      double dot = self.grad.row(r).cwiseProduct(probs.row(r)).sum();
      a.grad.row(r) += (self.grad.row(r).array() - dot).matrix().cwiseProduct(probs.row(r));
    }
  });
}

// Row-wise layer norm with frozen affine terms.
inline NodePtr layernorm_rows(NodePtr x, const Mat& gamma, const Mat& beta, double eps = 1e-5) {
  const Eigen::Index d = x->value.cols();
  Mat xhat(x->value.rows(), d);
  Vec inv_std(x->value.rows());
  for (Eigen::Index r = 0; r < x->value.rows(); ++r) {
    double mu = x->value.row(r).mean();
    double var = (x->value.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(r) = is;
    xhat.row(r) = (x->value.row(r).array() - mu) * is;
  }
  Mat out = xhat;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) = out.row(r).cwiseProduct(gamma.row(0)) + beta.row(0);
  return detail::unary(x, std::move(out), [xhat, inv_std, gamma](Node& self, Node& x) {
    for (Eigen::Index r = 0; r < self.grad.rows(); ++r) {
      Eigen::RowVectorXd dxhat = self.grad.row(r).cwiseProduct(gamma.row(0));
      double m1 = dxhat.mean();
      double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
      x.grad.row(r) +=
          inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
    }
  });
}

inline NodePtr concat_rows(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_rows: empty");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0]->value.cols();
  for (const auto& p : parts) rows += p->value.rows();
  Mat out(rows, cols);
  Eigen::Index r = 0;
  bool needs = false;
  for (const auto& p : parts) {
    out.middleRows(r, p->value.rows()) = p->value;
    r += p->value.rows();
    needs = needs || p->needs_grad;
  }
  auto n = make_node(std::move(out));
  if (needs) {
    n->needs_grad = true;
    n->parents = parts;
    auto ps = parts;
    n->backward_fn = [ps](Node& self) {
      Eigen::Index r = 0;
      for (const auto& p : ps) {
        if (p->needs_grad) {
          p->ensure_grad();
          p->grad += self.grad.middleRows(r, p->value.rows());
        }
        r += p->value.rows();
      }
    };
  }
  return n;
}

inline NodePtr concat_cols(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_cols: empty");
  const Eigen::Index rows = parts[0]->value.rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) cols += p->value.cols();
  Mat out(rows, cols);
  Eigen::Index c = 0;
  bool needs = false;
  for (const auto& p : parts) {
    out.middleCols(c, p->value.cols()) = p->value;
    c += p->value.cols();
    needs = needs || p->needs_grad;
  }
  auto n = make_node(std::move(out));
  if (needs) {
    n->needs_grad = true;
    n->parents = parts;
    auto ps = parts;
    n->backward_fn = [ps](Node& self) {
      Eigen::Index c = 0;
      for (const auto& p : ps) {
        if (p->needs_grad) {
          p->ensure_grad();
          p->grad += self.grad.middleCols(c, p->value.cols());
        }
        c += p->value.cols();
      }
    };
  }
  return n;
}

inline NodePtr slice_rows(NodePtr a, Eigen::Index r0, Eigen::Index n) {
  Mat out = a->value.middleRows(r0, n);
  return detail::unary(a, std::move(out), [r0, n](Node& self, Node& a) {
    a.grad.middleRows(r0, n) += self.grad;
  });
}

inline NodePtr slice_cols(NodePtr a, Eigen::Index c0, Eigen::Index n) {
  Mat out = a->value.middleCols(c0, n);
  return detail::unary(a, std::move(out), [c0, n](Node& self, Node& a) {
    a.grad.middleCols(c0, n) += self.grad;
  });
}

// Row-major reinterpretation into a new shape.
inline NodePtr reshape(NodePtr a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a->value.size()) throw InvalidInputError("reshape: element count mismatch");
  const Eigen::Index in_cols = a->value.cols();
  Mat out(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k)
    out(k / cols, k % cols) = a->value(k / in_cols, k % in_cols);
  return detail::unary(a, std::move(out), [rows, cols, in_cols](Node& self, Node& a) {
    for (Eigen::Index k = 0; k < rows * cols; ++k)
      a.grad(k / in_cols, k % in_cols) += self.grad(k / cols, k % cols);
  });
}

inline NodePtr sum_all(NodePtr a) {
  Mat out(1, 1);
  out(0, 0) = a->value.sum();
  return detail::unary(a, std::move(out), [](Node& self, Node& a) {
    a.grad.array() += self.grad(0, 0);
  });
}

// Sum over rows of -log softmax(logits)[row, target[row]].
inline NodePtr ce_sum(NodePtr logits, std::vector<int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits->value.rows())
    throw InvalidInputError("ce_sum: target count mismatch");
  Mat probs = logits->value;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double m = probs.row(r).maxCoeff();
    Eigen::RowVectorXd e = (probs.row(r).array() - m).exp();
    double z = e.sum();
    probs.row(r) = e / z;
    int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= probs.cols()) throw InvalidInputError("ce_sum: target id out of range");
    loss -= std::log(probs(r, t));
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return detail::unary(logits, std::move(out), [probs, targets](Node& self, Node& a) {
    double g = self.grad(0, 0);
    Mat d = probs;
    for (Eigen::Index r = 0; r < d.rows(); ++r)
      d(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
    a.grad += g * d;
  });
}

// Sum over entries of binary cross-entropy with logits against soft targets.
inline NodePtr bce_logits_sum(NodePtr scores, const Mat& target) {
  if (scores->value.rows() != target.rows() || scores->value.cols() != target.cols())
    throw InvalidInputError("bce_logits_sum: shape mismatch");
  const auto& s = scores->value.array();
  double loss = (s.max(0.0) - s * target.array() + (-s.abs()).exp().log1p()).sum();
  Mat out(1, 1);
  out(0, 0) = loss;
  return detail::unary(scores, std::move(out), [target](Node& self, Node& a) {
    double g = self.grad(0, 0);
    Mat sig = (1.0 / (1.0 + (-a.value.array()).exp())).matrix();
    a.grad += g * (sig - target);
  });
}

// Single-channel transposed convolution: out[(i*s+u), (j*s+v)] += x[i,j]*k[u,v].
inline NodePtr conv_transpose2d(NodePtr x, NodePtr kernel, NodePtr bias, int stride) {
  const Eigen::Index hi = x->value.rows(), wi = x->value.cols();
  const Eigen::Index k = kernel->value.rows();
  const Eigen::Index ho = (hi - 1) * stride + k;
  const Eigen::Index wo = (wi - 1) * stride + k;
  Mat out = Mat::Constant(ho, wo, bias->value(0, 0));
  for (Eigen::Index i = 0; i < hi; ++i)
    for (Eigen::Index j = 0; j < wi; ++j)
      out.block(i * stride, j * stride, k, k) += x->value(i, j) * kernel->value;
  auto n = make_node(std::move(out));
  if (x->needs_grad || kernel->needs_grad || bias->needs_grad) {
    n->needs_grad = true;
    n->parents = {x, kernel, bias};
    NodePtr px = x, pk = kernel, pb = bias;
    n->backward_fn = [px, pk, pb, stride, k, hi, wi](Node& self) {
      px->ensure_grad();
      pk->ensure_grad();
      pb->ensure_grad();
      for (Eigen::Index i = 0; i < hi; ++i)
        for (Eigen::Index j = 0; j < wi; ++j) {
          auto g = self.grad.block(i * stride, j * stride, k, k);
          px->grad(i, j) += g.cwiseProduct(pk->value).sum();
          pk->grad += px->value(i, j) * g;
        }
      pb->grad(0, 0) += self.grad.sum();
    };
  }
  return n;
}

// Bilinear resize with align-corners sampling; a fixed sparse linear map.
inline NodePtr bilinear_resize(NodePtr x, Eigen::Index ho, Eigen::Index wo) {
  const Eigen::Index hi = x->value.rows(), wi = x->value.cols();
  auto src = [](Eigen::Index o, Eigen::Index no, Eigen::Index ni) {
    return no > 1 ? static_cast<double>(o) * (ni - 1) / static_cast<double>(no - 1) : 0.0;
  };
  Mat out(ho, wo);
  for (Eigen::Index a = 0; a < ho; ++a) {
    double fr = src(a, ho, hi);
    Eigen::Index r0 = static_cast<Eigen::Index>(std::floor(fr));
    Eigen::Index r1 = std::min(r0 + 1, hi - 1);
    double tr = fr - r0;
    for (Eigen::Index b = 0; b < wo; ++b) {
      double fc = src(b, wo, wi);
      Eigen::Index c0 = static_cast<Eigen::Index>(std::floor(fc));
      Eigen::Index c1 = std::min(c0 + 1, wi - 1);
      double tc = fc - c0;
      out(a, b) = (1 - tr) * ((1 - tc) * x->value(r0, c0) + tc * x->value(r0, c1)) +
                  tr * ((1 - tc) * x->value(r1, c0) + tc * x->value(r1, c1));
    }
  }
  return detail::unary(x, std::move(out), [ho, wo, hi, wi, src](Node& self, Node& x) {
    for (Eigen::Index a = 0; a < ho; ++a) {
      double fr = src(a, ho, hi);
      Eigen::Index r0 = static_cast<Eigen::Index>(std::floor(fr));
      Eigen::Index r1 = std::min(r0 + 1, hi - 1);
      double tr = fr - r0;
      for (Eigen::Index b = 0; b < wo; ++b) {
        double fc = src(b, wo, wi);
        Eigen::Index c0 = static_cast<Eigen::Index>(std::floor(fc));
        Eigen::Index c1 = std::min(c0 + 1, wi - 1);
        double tc = fc - c0;
        double g = self.grad(a, b);
        x.grad(r0, c0) += g * (1 - tr) * (1 - tc);
        x.grad(r0, c1) += g * (1 - tr) * tc;
        x.grad(r1, c0) += g * tr * (1 - tc);
        x.grad(r1, c1) += g * tr * tc;
      }
    }
  });
}

// Reverse pass from a scalar root. Creation order doubles as topo order.
inline void backward(NodePtr root) {
  if (root->value.rows() != 1 || root->value.cols() != 1)
    throw InvalidInputError("backward: root must be scalar");
  if (!root->needs_grad) return;
  std::vector<Node*> reachable;
  std::unordered_set<Node*> seen;
  std::vector<NodePtr> stack{root};
  std::vector<NodePtr> keep_alive;
  while (!stack.empty()) {
    NodePtr n = stack.back();
    stack.pop_back();
    if (!n->needs_grad || seen.count(n.get())) continue;
    seen.insert(n.get());
    reachable.push_back(n.get());
    keep_alive.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p);
  }
  std::sort(reachable.begin(), reachable.end(),
            [](const Node* a, const Node* b) { return a->order > b->order; });
  root->ensure_grad();
  root->grad(0, 0) = 1.0;
  for (Node* n : reachable) {
    if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
  }
}

}  // namespace socialfusion::ad
