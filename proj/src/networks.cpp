#include "hypermask/networks.hpp"

#include <cmath>

namespace hypermask {

Tensor& ParameterSet::at(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return t;
  throw ContractError("ParameterSet: no tensor named " + name);
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return t;
  throw ContractError("ParameterSet: no tensor named " + name);
}

size_t ParameterSet::total_size() const {
  size_t n = 0;
  for (const auto& [name, t] : items) n += t.size();
  return n;
}

bool ParameterSet::same_layout(const ParameterSet& o) const {
  if (items.size() != o.items.size()) return false;
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].first != o.items[i].first ||
        items[i].second.shape != o.items[i].second.shape)
      return false;
  return true;
}

static Layout mlp_layout(size_t input, const std::vector<size_t>& hidden,
                         size_t output) {
  Layout out;
  size_t prev = input;
  size_t li = 0;
  for (size_t h : hidden) {
    out.emplace_back("w" + std::to_string(li), std::vector<size_t>{prev, h});
    out.emplace_back("b" + std::to_string(li), std::vector<size_t>{h});
    prev = h;
    ++li;
  }
  out.emplace_back("w" + std::to_string(li), std::vector<size_t>{prev, output});
  out.emplace_back("b" + std::to_string(li), std::vector<size_t>{output});
  return out;
}

Layout TargetSpec::layout() const {
  return mlp_layout(input_dim, hidden, output_width());
}

size_t TargetSpec::param_count() const {
  size_t n = 0;
  for (const auto& [name, shape] : layout()) n += Tensor::numel(shape);
  return n;
}

size_t HypernetworkSpec::output_size() const {
  size_t n = 0;
  for (const auto& [name, shape] : output_layout) n += Tensor::numel(shape);
  return n;
}

Layout HypernetworkSpec::layout() const {
  return mlp_layout(embedding_dim, hidden, output_size());
}

ParameterSet init_dense_params(const Layout& layout, std::mt19937_64& rng) {
  ParameterSet out;
  for (const auto& [name, shape] : layout) {
    Tensor t = Tensor::zeros(shape);
    if (shape.size() == 2) {
      double limit = std::sqrt(6.0 / static_cast<double>(shape[0]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : t.data) v = dist(rng);
    }
    out.items.emplace_back(name, std::move(t));
  }
  return out;
}

Tensor init_embedding(size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros({dim});
  for (double& v : t.data) v = dist(rng);
  return t;
}

Graph::Node* hyper_mlp(Graph& g, Graph::Node* e,
                       const std::vector<Graph::Node*>& phi,
                       const HypernetworkSpec& spec) {
  if (e->val().cols() != spec.embedding_dim)
    throw ShapeError("hyper_mlp: embedding dimension mismatch");
  size_t n_dense = spec.hidden.size() + 1;
  if (phi.size() != 2 * n_dense)
    throw ShapeError("hyper_mlp: wrong number of parameter nodes");
  Graph::Node* h = e;
  for (size_t i = 0; i < n_dense; ++i) {
    h = g.add(g.matmul(h, phi[2 * i]), phi[2 * i + 1]);
    if (i + 1 < n_dense) h = g.elu_op(h);
  }
  return g.tanh_op(h);
}

std::vector<Graph::Node*> split_mask_layers(Graph& g, Graph::Node* flat,
                                            const HypernetworkSpec& spec,
                                            double effective_ratio) {
  if (flat->val().rows() != 1)
    throw ShapeError("split_mask_layers: expected a single-row mask");
  std::vector<Graph::Node*> out;
  out.reserve(spec.output_layout.size());
  size_t off = 0;
  for (const auto& [name, shape] : spec.output_layout) {
    size_t len = Tensor::numel(shape);
    Graph::Node* seg = g.segment(flat, off, len, shape);
    if (effective_ratio > 0.0) {
      auto c = percentile_threshold(seg->val(), effective_ratio);
      if (c) seg = g.sparsify(seg, *c);
    }
    out.push_back(seg);
    off += len;
  }
  if (off != flat->val().size())
    throw ShapeError("split_mask_layers: layout does not cover mask output");
  return out;
}

TargetGraphOut target_mlp(Graph& g, Graph::Node* x,
                          const std::vector<Graph::Node*>& params,
                          const TargetSpec& spec) {
  size_t n_dense = spec.hidden.size() + 1;
  if (params.size() != 2 * n_dense)
    throw ShapeError("target_mlp: wrong number of parameter nodes");
  if (x->val().cols() != spec.input_dim)
    throw ShapeError("target_mlp: input dimension mismatch");
  TargetGraphOut out;
  Graph::Node* h = x;
  for (size_t i = 0; i < n_dense; ++i) {
    // biases are rank-1; matmul/add treat them as row vectors
    h = g.add(g.matmul(h, params[2 * i]), params[2 * i + 1]);
    if (i + 1 < n_dense) {
      h = g.elu_op(h);
      if (i + 2 == n_dense) out.last_hidden = h;
    }
  }
  if (spec.hidden.empty()) out.last_hidden = x;
  out.logits_all = h;
  return out;
}

Graph::Node* head_slice(Graph& g, Graph::Node* logits_all,
                        const TargetSpec& spec, size_t task) {
  if (task >= spec.num_tasks)
    throw ContractError("head_slice: unknown task head");
  return g.slice_cols(logits_all, task * spec.classes_per_task,
                      spec.classes_per_task);
}

Tensor hyper_mlp_plain(const Tensor& e, const ParameterSet& phi,
                       const HypernetworkSpec& spec) {
  Graph g;
  std::vector<Graph::Node*> leaves;
  for (const auto& [name, t] : phi.items) leaves.push_back(g.leaf_view(&t, false));
  Tensor e2 = e;
  if (e2.shape.size() == 1) e2.shape = {1, e2.shape[0]};
  Graph::Node* out = hyper_mlp(g, g.leaf(std::move(e2)), leaves, spec);
  return out->val();
}

SemiBinaryMask hyper_forward(const TaskEmbedding& e, const ParameterSet& phi,
                             const HypernetworkSpec& spec,
                             const SparsitySchedule* schedule) {
  Tensor flat = hyper_mlp_plain(e.e, phi, spec);
  SemiBinaryMask mask;
  mask.sparsity_applied = schedule ? schedule->effective_ratio() : 0.0;
  size_t off = 0;
  for (const auto& [name, shape] : spec.output_layout) {
    size_t len = Tensor::numel(shape);
    Tensor layer{shape, std::vector<double>(flat.data.begin() + off,
                                            flat.data.begin() + off + len)};
    if (mask.sparsity_applied > 0.0) {
      auto c = percentile_threshold(layer, mask.sparsity_applied);
      if (c) layer = apply_threshold(layer, *c);
    }
    mask.layers.emplace_back(name, std::move(layer));
    off += len;
  }
  return mask;
}

static Tensor as_row_matrix(const Tensor& t) {
  Tensor out = t;
  if (out.shape.size() == 1) out.shape = {1, out.shape[0]};
  return out;
}

static Tensor mlp_plain_forward(const Tensor& x, const ParameterSet& params,
                                size_t n_dense, Tensor* last_hidden) {
  Tensor h = x;
  for (size_t i = 0; i < n_dense; ++i) {
    const Tensor& w = params.items[2 * i].second;
    const Tensor& b = params.items[2 * i + 1].second;
    h = add_rowwise(matmul(h, w), as_row_matrix(b));
    if (i + 1 < n_dense) {
      for (double& v : h.data) v = v > 0.0 ? v : std::exp(v) - 1.0;  // ELU a=1
      if (last_hidden && i + 2 == n_dense) *last_hidden = h;
    }
  }
  return h;
}

TargetForwardOut target_forward(const Tensor& x, const ParameterSet& theta,
                                const SemiBinaryMask& mask,
                                const TargetSpec& spec, size_t task) {
  if (task >= spec.num_tasks) throw ContractError("target_forward: unknown task");
  ParameterSet mod = modulate(theta, mask);
  TargetForwardOut out;
  Tensor logits_all =
      mlp_plain_forward(x, mod, spec.hidden.size() + 1, &out.last_hidden);
  size_t width = spec.output_width();
  size_t start = task * spec.classes_per_task;
  size_t rows = logits_all.rows();
  out.logits = Tensor::zeros({rows, spec.classes_per_task});
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < spec.classes_per_task; ++c)
      out.logits.data[r * spec.classes_per_task + c] =
          logits_all.data[r * width + start + c];
  return out;
}

Tensor hidden_features(const Tensor& x, const ParameterSet& theta,
                       const SemiBinaryMask& mask, const TargetSpec& spec) {
  ParameterSet mod = modulate(theta, mask);
  Tensor last_hidden;
  mlp_plain_forward(x, mod, spec.hidden.size() + 1, &last_hidden);
  if (last_hidden.empty()) return x;
  return last_hidden;
}

}  // namespace hypermask
