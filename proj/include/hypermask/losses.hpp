#pragma once

#include <optional>
#include <vector>

#include "hypermask/autograd.hpp"
#include "hypermask/networks.hpp"

namespace hypermask {

// Frozen snapshots consulted by the regularizers during one task. Stored
// masks are the flat p=0 hypernetwork outputs for every previous task.
struct RegularizationTargets {
  ParameterSet phi_star;
  std::optional<ParameterSet> theta_star;  // trainable-target mode only
  std::vector<Tensor> stored_masks;        // flat [P], one per previous task
  std::vector<Tensor> frozen_embeddings;   // e_1 .. e_{t-1}
};

RegularizationTargets snapshot_regularization_targets(
    const ParameterSet& phi, const ParameterSet* theta,
    const std::vector<Tensor>& embeddings, size_t prev_tasks,
    const HypernetworkSpec& spec);

// Cross-entropy on the current head (delegates to softmax_xent).
Graph::Node* current_loss(Graph& g, Graph::Node* logits,
                          const std::vector<int>& labels);

// Mean over previous tasks of the squared L2 distance between the stored
// p=0 masks and the p=0 masks from the live hypernetwork parameters.
// Frozen embeddings enter as constants, so no gradient reaches them.
Graph::Node* output_regularizer(Graph& g,
                                const std::vector<Graph::Node*>& phi_leaves,
                                const HypernetworkSpec& spec,
                                const RegularizationTargets& reg,
                                size_t current_task);

// L1 drift from the task-start target snapshot. With mask_layers given, each
// entry's |theta* - theta| is weighted by the signed mask value and the
// gradient also reaches the hypernetwork through the mask.
Graph::Node* target_regularizer(Graph& g,
                                const std::vector<Graph::Node*>& theta_leaves,
                                const RegularizationTargets& reg,
                                const std::vector<Graph::Node*>* mask_layers);

Graph::Node* total_loss(Graph& g, Graph::Node* l_current,
                        Graph::Node* l_output, Graph::Node* l_target,
                        double beta, double lambda, bool target_trainable,
                        size_t task);

}  // namespace hypermask
