#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hypermask/tensor.hpp"

namespace hypermask {

// Define-by-run reverse-mode graph over dense tensors. A graph is built for
// one forward pass, backward() runs once, then the graph is dropped. Nodes
// are owned by the graph; handles stay valid until the graph is destroyed.
// Gradients accumulate (+=) so shared subexpressions are handled correctly.
class Graph {
 public:
  struct Node {
    Tensor value;                // owned storage (unused for external leaves)
    const Tensor* view = nullptr;  // external storage for leaf_view
    Tensor grad;                 // allocated lazily during backward
    bool requires_grad = false;
    std::function<void(Node&)> backprop;  // empty for leaves

    const Tensor& val() const { return view ? *view : value; }
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. leaf() copies; leaf_view() references caller-owned storage that
  // must outlive the graph (used for parameter tensors).
  Node* leaf(Tensor t, bool requires_grad = false);
  Node* leaf_view(const Tensor* t, bool requires_grad);

  Node* matmul(Node* a, Node* b);
  // b may have the same shape as a, or be a row vector broadcast over a's rows.
  Node* add(Node* a, Node* b);
  Node* sub(Node* a, Node* b);
  Node* mul(Node* a, Node* b);  // Hadamard, same shape
  Node* scale(Node* a, double c);
  Node* tanh_op(Node* a);
  Node* elu_op(Node* a, double alpha = 1.0);
  Node* relu_op(Node* a);
  Node* abs_op(Node* a);
  Node* sum(Node* a);     // -> scalar [1]
  Node* sum_sq(Node* a);  // -> scalar [1]

  // Tag-dispatched elementwise entry point. Supported tags: add, mul, tanh,
  // elu, relu. Unknown tags raise UnsupportedOpError.
  Node* elementwise(const std::string& tag, Node* a, Node* b = nullptr);

  // Flat slice of a's data reinterpreted with a new shape (backward scatters).
  Node* segment(Node* a, size_t offset, size_t len, std::vector<size_t> shape);
  // Column slice of a 2-D tensor.
  Node* slice_cols(Node* a, size_t start, size_t count);
  // Semi-binary sparsification: entries with |w| <= threshold become 0.
  // Gradient passes only through surviving entries.
  Node* sparsify(Node* a, double threshold);

  // Mean over the batch of -log softmax(logits)[label]; max-stabilized.
  Node* softmax_xent(Node* logits, const std::vector<int>& labels);

  void backward(Node* out);

  // Gradient of a node after backward(); zeros if it never received one.
  const Tensor& grad_of(Node* n);

  size_t node_count() const { return nodes_.size(); }

 private:
  Node* make(Tensor value, bool requires_grad);
  static Tensor& ensure_grad(Node* n);

  std::vector<std::unique_ptr<Node>> nodes_;
};

// Row-wise softmax (forward only; not part of any graph).
Tensor softmax_rows(const Tensor& logits);

// Plain forward helpers mirroring the graph ops, used by inference paths.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rowwise(const Tensor& a, const Tensor& b);

struct ParameterSet;  // defined in networks.hpp

// Max over all parameter entries of the relative disagreement between the
// analytic gradient and a central finite difference with step eps. The
// builder must return a scalar node computed from the given leaves, which
// are views over the ParameterSet entries in order.
using GraphBuilder =
    std::function<Graph::Node*(Graph&, const std::vector<Graph::Node*>&)>;
double grad_check(const GraphBuilder& f, ParameterSet& params, double eps);

}  // namespace hypermask
