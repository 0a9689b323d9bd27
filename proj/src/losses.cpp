#include "hypermask/losses.hpp"

namespace hypermask {

RegularizationTargets snapshot_regularization_targets(
    const ParameterSet& phi, const ParameterSet* theta,
    const std::vector<Tensor>& embeddings, size_t prev_tasks,
    const HypernetworkSpec& spec) {
  RegularizationTargets reg;
  reg.phi_star = phi;
  if (theta) reg.theta_star = *theta;
  reg.frozen_embeddings.assign(embeddings.begin(),
                               embeddings.begin() + prev_tasks);
  if (prev_tasks > 0) {
    // one batched pass over all previous embeddings, p = 0
    Tensor stacked = Tensor::zeros({prev_tasks, spec.embedding_dim});
    for (size_t i = 0; i < prev_tasks; ++i)
      std::copy(embeddings[i].data.begin(), embeddings[i].data.end(),
                stacked.data.begin() + i * spec.embedding_dim);
    Tensor masks = hyper_mlp_plain(stacked, phi, spec);
    size_t p = spec.output_size();
    for (size_t i = 0; i < prev_tasks; ++i) {
      Tensor row = Tensor::zeros({p});
      std::copy(masks.data.begin() + i * p, masks.data.begin() + (i + 1) * p,
                row.data.begin());
      reg.stored_masks.push_back(std::move(row));
    }
  }
  return reg;
}

Graph::Node* current_loss(Graph& g, Graph::Node* logits,
                          const std::vector<int>& labels) {
  return g.softmax_xent(logits, labels);
}

Graph::Node* output_regularizer(Graph& g,
                                const std::vector<Graph::Node*>& phi_leaves,
                                const HypernetworkSpec& spec,
                                const RegularizationTargets& reg,
                                size_t current_task) {
  if (current_task < 2)
    throw ContractError("output_regularizer: requires task >= 2");
  size_t prev = current_task - 1;
  if (reg.stored_masks.size() < prev || reg.frozen_embeddings.size() < prev)
    throw ContractError("output_regularizer: missing stored masks");
  size_t p = spec.output_size();
  Tensor embs = Tensor::zeros({prev, spec.embedding_dim});
  Tensor stored = Tensor::zeros({prev, p});
  for (size_t i = 0; i < prev; ++i) {
    std::copy(reg.frozen_embeddings[i].data.begin(),
              reg.frozen_embeddings[i].data.end(),
              embs.data.begin() + i * spec.embedding_dim);
    std::copy(reg.stored_masks[i].data.begin(), reg.stored_masks[i].data.end(),
              stored.data.begin() + i * p);
  }
  Graph::Node* live = hyper_mlp(g, g.leaf(std::move(embs)), phi_leaves, spec);
  Graph::Node* diff = g.sub(live, g.leaf(std::move(stored)));
  return g.scale(g.sum_sq(diff), 1.0 / static_cast<double>(prev));
}

Graph::Node* target_regularizer(Graph& g,
                                const std::vector<Graph::Node*>& theta_leaves,
                                const RegularizationTargets& reg,
                                const std::vector<Graph::Node*>* mask_layers) {
  if (!reg.theta_star)
    throw ContractError("target_regularizer: theta snapshot missing");
  if (theta_leaves.size() != reg.theta_star->items.size())
    throw ShapeError("target_regularizer: layout mismatch");
  Graph::Node* acc = nullptr;
  for (size_t i = 0; i < theta_leaves.size(); ++i) {
    Graph::Node* star = g.leaf(reg.theta_star->items[i].second);
    Graph::Node* d = g.abs_op(g.sub(star, theta_leaves[i]));
    if (mask_layers) d = g.mul((*mask_layers)[i], d);
    Graph::Node* s = g.sum(d);
    acc = acc ? g.add(acc, s) : s;
  }
  return acc;
}

Graph::Node* total_loss(Graph& g, Graph::Node* l_current,
                        Graph::Node* l_output, Graph::Node* l_target,
                        double beta, double lambda, bool target_trainable,
                        size_t task) {
  if (beta < 0.0 || lambda < 0.0)
    throw ConfigError("total_loss: negative regularization strength");
  if (task == 1) return l_current;
  Graph::Node* total = l_current;
  if (l_output) total = g.add(total, g.scale(l_output, beta));
  if (target_trainable && l_target)
    total = g.add(total, g.scale(l_target, lambda));
  return total;
}

}  // namespace hypermask
