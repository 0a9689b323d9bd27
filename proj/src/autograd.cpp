#include "hypermask/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

#include "hypermask/networks.hpp"

namespace hypermask {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

namespace {

CMapM as_mat(const Tensor& t) {
  return CMapM(t.data.data(), static_cast<Eigen::Index>(t.rows()),
               static_cast<Eigen::Index>(t.cols()));
}

MapM as_mat(Tensor& t) {
  return MapM(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

void require_2d(const Tensor& t, const char* who) {
  if (t.shape.size() != 2) throw ShapeError(std::string(who) + ": expected 2-D tensor");
}

}  // namespace

Graph::Node* Graph::make(Tensor value, bool requires_grad) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  Node* p = n.get();
  nodes_.push_back(std::move(n));
  return p;
}

Graph::Node* Graph::leaf(Tensor t, bool requires_grad) {
  return make(std::move(t), requires_grad);
}

Graph::Node* Graph::leaf_view(const Tensor* t, bool requires_grad) {
  auto n = std::make_unique<Node>();
  n->view = t;
  n->requires_grad = requires_grad;
  Node* p = n.get();
  nodes_.push_back(std::move(n));
  return p;
}

Tensor& Graph::ensure_grad(Node* n) {
  if (n->grad.empty()) n->grad = Tensor::zeros(n->val().shape);
  return n->grad;
}

Graph::Node* Graph::matmul(Node* a, Node* b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  if (av.shape.empty() || av.shape.size() > 2 || bv.shape.size() != 2)
    throw ShapeError("matmul: expected 2-D operands");
  if (av.cols() != bv.shape[0])
    throw ShapeError("matmul: inner dimensions disagree");
  Tensor out = Tensor::zeros({av.rows(), bv.shape[1]});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  Node* n = make(std::move(out), a->requires_grad || b->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, b](Node& self) {
      CMapM g = as_mat(std::as_const(self).grad);
      if (a->requires_grad)
        as_mat(ensure_grad(a)).noalias() += g * as_mat(b->val()).transpose();
      if (b->requires_grad)
        as_mat(ensure_grad(b)).noalias() += as_mat(a->val()).transpose() * g;
    };
  }
  return n;
}

Graph::Node* Graph::add(Node* a, Node* b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  bool broadcast = false;
  if (!av.same_shape(bv)) {
    // row-vector broadcast over the batch dimension
    if (av.shape.size() == 2 && bv.cols() == av.shape[1] && bv.rows() == 1)
      broadcast = true;
    else
      throw ShapeError("add: shapes incompatible");
  }
  Tensor out = av;
  if (broadcast) {
    size_t rows = av.shape[0], cols = av.shape[1];
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) out.data[r * cols + c] += bv.data[c];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  }
  Node* n = make(std::move(out), a->requires_grad || b->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, b, broadcast](Node& self) {
      const Tensor& g = self.grad;
      if (a->requires_grad) {
        Tensor& ga = ensure_grad(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (b->requires_grad) {
        Tensor& gb = ensure_grad(b);
        if (broadcast) {
          size_t cols = gb.size();
          size_t rows = g.size() / cols;
          for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) gb.data[c] += g.data[r * cols + c];
        } else {
          for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
        }
      }
    };
  }
  return n;
}

Graph::Node* Graph::sub(Node* a, Node* b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  if (!av.same_shape(bv)) throw ShapeError("sub: shapes differ");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  Node* n = make(std::move(out), a->requires_grad || b->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, b](Node& self) {
      const Tensor& g = self.grad;
      if (a->requires_grad) {
        Tensor& ga = ensure_grad(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (b->requires_grad) {
        Tensor& gb = ensure_grad(b);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
      }
    };
  }
  return n;
}

Graph::Node* Graph::mul(Node* a, Node* b) {
  const Tensor& av = a->val();
  const Tensor& bv = b->val();
  if (!av.same_shape(bv)) throw ShapeError("mul: shapes differ");
  Tensor out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  Node* n = make(std::move(out), a->requires_grad || b->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, b](Node& self) {
      const Tensor& g = self.grad;
      if (a->requires_grad) {
        Tensor& ga = ensure_grad(a);
        const Tensor& bv2 = b->val();
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
      }
      if (b->requires_grad) {
        Tensor& gb = ensure_grad(b);
        const Tensor& av2 = a->val();
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
      }
    };
  }
  return n;
}

Graph::Node* Graph::scale(Node* a, double c) {
  Tensor out = a->val();
  for (double& v : out.data) v *= c;
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, c](Node& self) {
      Tensor& ga = ensure_grad(a);
      for (size_t i = 0; i < self.grad.size(); ++i)
        ga.data[i] += c * self.grad.data[i];
    };
  }
  return n;
}

Graph::Node* Graph::tanh_op(Node* a) {
  Tensor out = a->val();
  for (double& v : out.data) v = std::tanh(v);
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a](Node& self) {
      Tensor& ga = ensure_grad(a);
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double y = self.value.data[i];
        ga.data[i] += self.grad.data[i] * (1.0 - y * y);
      }
    };
  }
  return n;
}

Graph::Node* Graph::elu_op(Node* a, double alpha) {
  Tensor out = a->val();
  for (double& v : out.data) v = v > 0.0 ? v : alpha * (std::exp(v) - 1.0);
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, alpha](Node& self) {
      Tensor& ga = ensure_grad(a);
      const Tensor& x = a->val();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double d = x.data[i] > 0.0 ? 1.0 : self.value.data[i] + alpha;
        ga.data[i] += self.grad.data[i] * d;
      }
    };
  }
  return n;
}

Graph::Node* Graph::relu_op(Node* a) {
  Tensor out = a->val();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a](Node& self) {
      Tensor& ga = ensure_grad(a);
      const Tensor& x = a->val();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (x.data[i] > 0.0) ga.data[i] += self.grad.data[i];
    };
  }
  return n;
}

Graph::Node* Graph::abs_op(Node* a) {
  Tensor out = a->val();
  for (double& v : out.data) v = std::fabs(v);
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a](Node& self) {
      Tensor& ga = ensure_grad(a);
      const Tensor& x = a->val();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double s = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
        ga.data[i] += self.grad.data[i] * s;
      }
    };
  }
  return n;
}

Graph::Node* Graph::sum(Node* a) {
  double s = 0.0;
  for (double v : a->val().data) s += v;
  Node* n = make(Tensor::scalar(s), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a](Node& self) {
      Tensor& ga = ensure_grad(a);
      double g = self.grad.data[0];
      for (double& v : ga.data) v += g;
    };
  }
  return n;
}

Graph::Node* Graph::sum_sq(Node* a) {
  double s = 0.0;
  for (double v : a->val().data) s += v * v;
  Node* n = make(Tensor::scalar(s), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a](Node& self) {
      Tensor& ga = ensure_grad(a);
      const Tensor& x = a->val();
      double g = self.grad.data[0];
      for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += 2.0 * g * x.data[i];
    };
  }
  return n;
}

Graph::Node* Graph::elementwise(const std::string& tag, Node* a, Node* b) {
  if (tag == "add") {
    if (!b) throw ContractError("elementwise add needs two operands");
    return add(a, b);
  }
  if (tag == "mul") {
    if (!b) throw ContractError("elementwise mul needs two operands");
    return mul(a, b);
  }
  if (tag == "tanh") return tanh_op(a);
  if (tag == "elu") return elu_op(a);
  if (tag == "relu") return relu_op(a);
  throw UnsupportedOpError("elementwise: unknown tag '" + tag + "'");
}

Graph::Node* Graph::segment(Node* a, size_t offset, size_t len,
                            std::vector<size_t> shape) {
  const Tensor& av = a->val();
  if (offset + len > av.size()) throw ShapeError("segment: range out of bounds");
  if (Tensor::numel(shape) != len) throw ShapeError("segment: shape/len mismatch");
  Tensor out{std::move(shape),
             std::vector<double>(av.data.begin() + offset,
                                 av.data.begin() + offset + len)};
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, offset](Node& self) {
      Tensor& ga = ensure_grad(a);
      for (size_t i = 0; i < self.grad.size(); ++i)
        ga.data[offset + i] += self.grad.data[i];
    };
  }
  return n;
}

Graph::Node* Graph::slice_cols(Node* a, size_t start, size_t count) {
  const Tensor& av = a->val();
  require_2d(av, "slice_cols");
  size_t rows = av.shape[0], cols = av.shape[1];
  if (start + count > cols) throw ShapeError("slice_cols: out of bounds");
  Tensor out = Tensor::zeros({rows, count});
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < count; ++c)
      out.data[r * count + c] = av.data[r * cols + start + c];
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, start, count, cols](Node& self) {
      Tensor& ga = ensure_grad(a);
      size_t rows2 = self.grad.shape[0];
      for (size_t r = 0; r < rows2; ++r)
        for (size_t c = 0; c < count; ++c)
          ga.data[r * cols + start + c] += self.grad.data[r * count + c];
    };
  }
  return n;
}

Graph::Node* Graph::sparsify(Node* a, double threshold) {
  const Tensor& av = a->val();
  Tensor out = av;
  for (double& v : out.data)
    if (std::fabs(v) <= threshold) v = 0.0;
  Node* n = make(std::move(out), a->requires_grad);
  if (n->requires_grad) {
    n->backprop = [a, threshold](Node& self) {
      Tensor& ga = ensure_grad(a);
      const Tensor& x = a->val();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (std::fabs(x.data[i]) > threshold)
          ga.data[i] += self.grad.data[i];
    };
  }
  return n;
}

Graph::Node* Graph::softmax_xent(Node* logits, const std::vector<int>& labels) {
  const Tensor& lv = logits->val();
  require_2d(lv, "softmax_xent");
  size_t batch = lv.shape[0], classes = lv.shape[1];
  if (labels.size() != batch)
    throw ShapeError("softmax_xent: label count != batch size");
  for (int y : labels)
    if (y < 0 || static_cast<size_t>(y) >= classes)
      throw IndexError("softmax_xent: label out of range");
  // keep the softmax for the backward pass
  Tensor probs = Tensor::zeros(lv.shape);
  double loss = 0.0;
  for (size_t r = 0; r < batch; ++r) {
    const double* row = lv.data.data() + r * classes;
    double m = *std::max_element(row, row + classes);
    double z = 0.0;
    for (size_t c = 0; c < classes; ++c) {
      double e = std::exp(row[c] - m);
      probs.data[r * classes + c] = e;
      z += e;
    }
    for (size_t c = 0; c < classes; ++c) probs.data[r * classes + c] /= z;
    loss -= std::log(probs.data[r * classes + labels[r]]);
  }
  loss /= static_cast<double>(batch);
  Node* n = make(Tensor::scalar(loss), logits->requires_grad);
  if (n->requires_grad) {
    auto shared = std::make_shared<Tensor>(std::move(probs));
    n->backprop = [logits, labels, shared, batch, classes](Node& self) {
      Tensor& gl = ensure_grad(logits);
      double g = self.grad.data[0] / static_cast<double>(batch);
      for (size_t r = 0; r < batch; ++r)
        for (size_t c = 0; c < classes; ++c) {
          double p = shared->data[r * classes + c];
          double ind = (static_cast<size_t>(labels[r]) == c) ? 1.0 : 0.0;
          gl.data[r * classes + c] += g * (p - ind);
        }
    };
  }
  return n;
}

void Graph::backward(Node* out) {
  if (out->val().size() != 1)
    throw ContractError("backward: output must be scalar");
  ensure_grad(out).data[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backprop) continue;
    n.backprop(n);
  }
}

const Tensor& Graph::grad_of(Node* n) { return ensure_grad(n); }

Tensor softmax_rows(const Tensor& logits) {
  require_2d(logits, "softmax_rows");
  size_t rows = logits.shape[0], cols = logits.shape[1];
  Tensor out = Tensor::zeros(logits.shape);
  for (size_t r = 0; r < rows; ++r) {
    const double* row = logits.data.data() + r * cols;
    double m = *std::max_element(row, row + cols);
    double z = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      double e = std::exp(row[c] - m);
      out.data[r * cols + c] = e;
      z += e;
    }
    for (size_t c = 0; c < cols; ++c) out.data[r * cols + c] /= z;
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul lhs");
  require_2d(b, "matmul rhs");
  if (a.shape[1] != b.shape[0]) throw ShapeError("matmul: inner dims disagree");
  Tensor out = Tensor::zeros({a.shape[0], b.shape[1]});
  as_mat(out).noalias() = as_mat(a) * as_mat(b);
  return out;
}

Tensor add_rowwise(const Tensor& a, const Tensor& b) {
  require_2d(a, "add_rowwise");
  if (b.cols() != a.shape[1] || b.rows() != 1)
    throw ShapeError("add_rowwise: bias shape mismatch");
  Tensor out = a;
  size_t rows = a.shape[0], cols = a.shape[1];
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) out.data[r * cols + c] += b.data[c];
  return out;
}

double grad_check(const GraphBuilder& f, ParameterSet& params, double eps) {
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Graph::Node*> leaves;
    leaves.reserve(params.items.size());
    for (auto& [name, t] : params.items) leaves.push_back(g.leaf_view(&t, true));
    Graph::Node* out = f(g, leaves);
    if (out->val().size() != 1)
      throw ContractError("grad_check: builder output must be scalar");
    g.backward(out);
    for (Graph::Node* l : leaves) analytic.push_back(g.grad_of(l));
  }
  auto eval = [&]() {
    Graph g;
    std::vector<Graph::Node*> leaves;
    for (auto& [name, t] : params.items) leaves.push_back(g.leaf_view(&t, false));
    return f(g, leaves)->val().data[0];
  };
  double worst = 0.0;
  for (size_t pi = 0; pi < params.items.size(); ++pi) {
    Tensor& t = params.items[pi].second;
    for (size_t i = 0; i < t.size(); ++i) {
      double orig = t.data[i];
      t.data[i] = orig + eps;
      double up = eval();
      t.data[i] = orig - eps;
      double dn = eval();
      t.data[i] = orig;
      double cd = (up - dn) / (2.0 * eps);
      double an = analytic[pi].data[i];
      double denom = std::max({std::fabs(an), std::fabs(cd), 1e-12});
      worst = std::max(worst, std::fabs(an - cd) / denom);
    }
  }
  return worst;
}

}  // namespace hypermask
