#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hypermask/autograd.hpp"
#include "hypermask/masking.hpp"
#include "hypermask/tensor.hpp"

namespace hypermask {

// Ordered collection of named, shaped dense tensors.
struct ParameterSet {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  size_t total_size() const;
  bool same_layout(const ParameterSet& o) const;
};

using Layout = std::vector<std::pair<std::string, std::vector<size_t>>>;

struct TargetSpec {
  size_t input_dim = 0;
  std::vector<size_t> hidden;
  size_t num_tasks = 0;
  size_t classes_per_task = 0;

  size_t output_width() const { return num_tasks * classes_per_task; }
  // w0, b0, w1, b1, ... for input -> hidden... -> output
  Layout layout() const;
  size_t param_count() const;
  size_t last_hidden_dim() const {
    return hidden.empty() ? input_dim : hidden.back();
  }
};

struct HypernetworkSpec {
  size_t embedding_dim = 0;
  std::vector<size_t> hidden;
  Layout output_layout;  // mirrors the target layout

  size_t output_size() const;
  Layout layout() const;  // the hypernetwork's own dense layers
};

// Trainable task-identity vector.
struct TaskEmbedding {
  Tensor e;  // shape [N]
  size_t task = 0;
  bool frozen = false;
};

// He-style uniform fan-in init for the dense layers of a layout; biases zero.
ParameterSet init_dense_params(const Layout& layout, std::mt19937_64& rng);
Tensor init_embedding(size_t dim, std::mt19937_64& rng);  // i.i.d. N(0,1)

// Graph-building forwards -----------------------------------------------

// MLP body of the hypernetwork: embeddings [B x N] -> tanh output [B x P].
// ELU hidden activations; no sparsification here.
Graph::Node* hyper_mlp(Graph& g, Graph::Node* e,
                       const std::vector<Graph::Node*>& phi,
                       const HypernetworkSpec& spec);

// Split a single-row tanh output into per-layer mask nodes, applying the
// sigma_p threshold at effective_ratio percent (pass a negative ratio, or 0,
// to keep everything; 0 is the KEEP_ALL contract).
std::vector<Graph::Node*> split_mask_layers(Graph& g, Graph::Node* flat,
                                            const HypernetworkSpec& spec,
                                            double effective_ratio);

struct TargetGraphOut {
  Graph::Node* logits_all = nullptr;   // [B x num_tasks*classes_per_task]
  Graph::Node* last_hidden = nullptr;  // [B x last_hidden_dim]
};

// Target MLP forward with (already modulated) parameter nodes in layout order.
TargetGraphOut target_mlp(Graph& g, Graph::Node* x,
                          const std::vector<Graph::Node*>& params,
                          const TargetSpec& spec);

// Head-t column slice of the full logits; unknown task -> ContractError.
Graph::Node* head_slice(Graph& g, Graph::Node* logits_all,
                        const TargetSpec& spec, size_t task);

// Plain (graph-free) forwards for evaluation -----------------------------

// Full hypernetwork pass for one embedding: tanh output split per layer with
// sigma_p applied at the schedule's effective ratio. Null schedule means the
// p=0 variant used by the output regularizer.
SemiBinaryMask hyper_forward(const TaskEmbedding& e, const ParameterSet& phi,
                             const HypernetworkSpec& spec,
                             const SparsitySchedule* schedule);

// Batched plain hypernetwork body: [B x N] -> tanh output [B x P].
Tensor hyper_mlp_plain(const Tensor& e, const ParameterSet& phi,
                       const HypernetworkSpec& spec);

struct TargetForwardOut {
  Tensor logits;       // [B x classes_per_task], head slice
  Tensor last_hidden;  // [B x last_hidden_dim]
};

TargetForwardOut target_forward(const Tensor& x, const ParameterSet& theta,
                                const SemiBinaryMask& mask,
                                const TargetSpec& spec, size_t task);

// Identical forward, returning only the activation before the output layer.
Tensor hidden_features(const Tensor& x, const ParameterSet& theta,
                       const SemiBinaryMask& mask, const TargetSpec& spec);

}  // namespace hypermask
