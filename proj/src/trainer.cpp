#include "hypermask/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "hypermask/adam.hpp"

namespace hypermask {

void TrainConfig::validate() const {
  if (dataset != "split" && dataset != "permuted")
    throw ConfigError("dataset must be 'split' or 'permuted'");
  if (num_tasks == 0 || classes_per_task == 0 || iterations == 0 ||
      batch_size == 0 || embedding_dim == 0 || input_dim == 0)
    throw ConfigError("config fields must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (beta < 0.0 || lambda < 0.0)
    throw ConfigError("beta and lambda must be nonnegative");
  if (p < 0.0 || p > 100.0) throw ConfigError("p must lie in [0,100]");
}

TargetSpec TrainConfig::target_spec() const {
  return TargetSpec{input_dim, target_hidden, num_tasks, classes_per_task};
}

HypernetworkSpec TrainConfig::hyper_spec() const {
  HypernetworkSpec h;
  h.embedding_dim = embedding_dim;
  h.hidden = hyper_hidden;
  h.output_layout = target_spec().layout();
  return h;
}

TrainedState init_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainedState s;
  s.cfg = cfg;
  s.tspec = cfg.target_spec();
  s.hspec = cfg.hyper_spec();
  s.rng.seed(cfg.seed);
  s.phi = init_dense_params(s.hspec.layout(), s.rng);
  s.theta = init_dense_params(s.tspec.layout(), s.rng);
  for (size_t t = 0; t < cfg.num_tasks; ++t)
    s.embeddings.push_back(
        TaskEmbedding{init_embedding(cfg.embedding_dim, s.rng), t, false});
  return s;
}

SemiBinaryMask task_mask(const TrainedState& state, size_t t) {
  if (t == 0 || t > state.tasks_trained)
    throw ContractError("task_mask: task not trained");
  SparsitySchedule sched{state.cfg.p, 1, 2, 1};  // constant ratio p
  return hyper_forward(state.embeddings[t - 1], state.phi, state.hspec,
                       &sched);
}

namespace {

struct Candidate {
  double val_loss;
  ParameterSet phi;
  ParameterSet theta;
  Tensor e;
};

std::vector<Tensor> embedding_tensors(const TrainedState& s, size_t n) {
  std::vector<Tensor> out;
  for (size_t i = 0; i < n; ++i) out.push_back(s.embeddings[i].e);
  return out;
}

double split_loss(const TrainedState& state, size_t t, const DataSplit& split,
                  const SemiBinaryMask& mask) {
  const size_t chunk = 2048;
  double total = 0.0;
  for (size_t off = 0; off < split.count; off += chunk) {
    size_t n = std::min(chunk, split.count - off);
    Tensor x{{n, split.dim},
             std::vector<double>(split.x.begin() + off * split.dim,
                                 split.x.begin() + (off + n) * split.dim)};
    TargetForwardOut fo =
        target_forward(x, state.theta, mask, state.tspec, t - 1);
    Tensor probs = softmax_rows(fo.logits);
    size_t c = state.tspec.classes_per_task;
    for (size_t r = 0; r < n; ++r)
      total -= std::log(std::max(probs.data[r * c + split.y[off + r]], 1e-300));
  }
  return total / static_cast<double>(split.count);
}

}  // namespace

double validation_loss(const TrainedState& state, size_t t,
                       const DataSplit& split) {
  return split_loss(state, t, split, task_mask(state, t));
}

double evaluate(const TrainedState& state, size_t t, const DataSplit& split) {
  if (t == 0 || t > state.tasks_trained)
    throw ContractError("evaluate: task not trained");
  SemiBinaryMask mask = task_mask(state, t);
  const size_t chunk = 2048;
  size_t correct = 0;
  for (size_t off = 0; off < split.count; off += chunk) {
    size_t n = std::min(chunk, split.count - off);
    Tensor x{{n, split.dim},
             std::vector<double>(split.x.begin() + off * split.dim,
                                 split.x.begin() + (off + n) * split.dim)};
    TargetForwardOut fo =
        target_forward(x, state.theta, mask, state.tspec, t - 1);
    size_t c = state.tspec.classes_per_task;
    for (size_t r = 0; r < n; ++r) {
      const double* row = fo.logits.data.data() + r * c;
      size_t arg = std::max_element(row, row + c) - row;
      if (static_cast<int>(arg) == split.y[off + r]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(split.count);
}

void train_task(TrainedState& state, size_t t, const TaskDataset& data,
                ReportSink* sink) {
  const TrainConfig& cfg = state.cfg;
  if (t != state.tasks_trained + 1)
    throw ContractError("train_task: tasks must be trained in order");
  if (t > cfg.num_tasks) throw ContractError("train_task: task beyond config");
  const bool trainable = cfg.target_trainable;

  RegularizationTargets reg;
  if (t > 1) {
    reg = snapshot_regularization_targets(
        state.phi, trainable ? &state.theta : nullptr,
        embedding_tensors(state, t - 1), t - 1, state.hspec);
    state.stored_masks = reg.stored_masks;
  }

  std::vector<AdamState> phi_opt, theta_opt;
  for (auto& [name, p] : state.phi.items)
    phi_opt.push_back(AdamState::for_shape(p.shape));
  if (trainable)
    for (auto& [name, p] : state.theta.items)
      theta_opt.push_back(AdamState::for_shape(p.shape));
  AdamState emb_opt = AdamState::for_shape(state.embeddings[t - 1].e.shape);
  AdamHyper hp{cfg.learning_rate, 0.9, 0.999, 1e-8};

  std::uniform_int_distribution<size_t> pick(0, data.train.count - 1);
  std::vector<size_t> batch_idx(cfg.batch_size);
  std::vector<int> batch_labels(cfg.batch_size);

  std::optional<Candidate> best;

  for (size_t i = 1; i <= cfg.iterations; ++i) {
    for (size_t b = 0; b < cfg.batch_size; ++b) {
      batch_idx[b] = pick(state.rng);
      batch_labels[b] = data.train.y[batch_idx[b]];
    }
    Tensor x = data.train.batch(batch_idx);

    Graph g;
    std::vector<Graph::Node*> phi_leaves, theta_leaves;
    for (auto& [name, p] : state.phi.items)
      phi_leaves.push_back(g.leaf_view(&p, true));
    for (auto& [name, p] : state.theta.items)
      theta_leaves.push_back(g.leaf_view(&p, trainable));
    Graph::Node* e_node = g.leaf_view(&state.embeddings[t - 1].e, true);

    double ratio = (t == 1)
                       ? cfg.p * static_cast<double>(i) /
                             static_cast<double>(cfg.iterations)
                       : cfg.p;
    Graph::Node* flat = hyper_mlp(g, e_node, phi_leaves, state.hspec);
    std::vector<Graph::Node*> mask_layers =
        split_mask_layers(g, flat, state.hspec, ratio);

    std::vector<Graph::Node*> modulated(theta_leaves.size());
    for (size_t k = 0; k < theta_leaves.size(); ++k)
      modulated[k] = g.mul(theta_leaves[k], mask_layers[k]);

    TargetGraphOut tg = target_mlp(g, g.leaf(std::move(x)), modulated,
                                   state.tspec);
    Graph::Node* logits = head_slice(g, tg.logits_all, state.tspec, t - 1);
    Graph::Node* l_current = current_loss(g, logits, batch_labels);

    Graph::Node* l_output = nullptr;
    Graph::Node* l_target = nullptr;
    if (t > 1) {
      l_output = output_regularizer(g, phi_leaves, state.hspec, reg, t);
      if (trainable) {
        if (cfg.masked_l1) {
          std::vector<Graph::Node*> weights = mask_layers;
          if (cfg.masked_l1_abs)
            for (auto& w : weights) w = g.abs_op(w);
          l_target = target_regularizer(g, theta_leaves, reg, &weights);
        } else {
          l_target = target_regularizer(g, theta_leaves, reg, nullptr);
        }
      }
    }
    Graph::Node* total = total_loss(g, l_current, l_output, l_target, cfg.beta,
                                    cfg.lambda, trainable, t);
    double loss = total->val().data[0];
    if (!std::isfinite(loss))
      throw DivergenceError("train_task: non-finite loss at iteration " +
                                std::to_string(i),
                            i);
    g.backward(total);

    for (size_t k = 0; k < phi_leaves.size(); ++k)
      adam_step(state.phi.items[k].second, g.grad_of(phi_leaves[k]),
                phi_opt[k], hp);
    if (trainable)
      for (size_t k = 0; k < theta_leaves.size(); ++k)
        adam_step(state.theta.items[k].second, g.grad_of(theta_leaves[k]),
                  theta_opt[k], hp);
    adam_step(state.embeddings[t - 1].e, g.grad_of(e_node), emb_opt, hp);

    if (sink) sink->on_iteration(t, i, loss);

    if (cfg.selection == SelectionRule::kBestValidationLoss &&
        (i % cfg.val_every == 0 || i == cfg.iterations)) {
      // the state already counts this task as in-flight; score it directly
      SparsitySchedule eval_sched{cfg.p, 1, 2, 1};
      SemiBinaryMask m = hyper_forward(state.embeddings[t - 1], state.phi,
                                       state.hspec, &eval_sched);
      TrainedState* self = &state;
      double vl = 0.0;
      {
        const size_t saved = self->tasks_trained;
        self->tasks_trained = t;
        vl = split_loss(*self, t, data.validation, m);
        self->tasks_trained = saved;
      }
      if (!best || vl < best->val_loss)
        best = Candidate{vl, state.phi, state.theta,
                         state.embeddings[t - 1].e};
    }
  }

  if (best) {
    state.phi = std::move(best->phi);
    state.theta = std::move(best->theta);
    state.embeddings[t - 1].e = std::move(best->e);
  }

  state.embeddings[t - 1].frozen = true;
  state.tasks_trained = t;
  // refresh the state's stored-mask list to cover tasks 1..t (p = 0)
  RegularizationTargets end_snap = snapshot_regularization_targets(
      state.phi, nullptr, embedding_tensors(state, t), t, state.hspec);
  state.stored_masks = std::move(end_snap.stored_masks);
  state.theta_snapshots.push_back(state.theta);
}

TrainedState train_sequence(const std::vector<TaskDataset>& tasks,
                            const TrainConfig& cfg, ReportSink* sink) {
  if (tasks.empty()) throw ContractError("train_sequence: no tasks");
  TrainedState state = init_state(cfg);
  for (size_t t = 1; t <= tasks.size(); ++t) {
    train_task(state, t, tasks[t - 1], sink);
    std::vector<double> row;
    for (size_t j = 1; j <= t; ++j)
      row.push_back(evaluate(state, j, tasks[j - 1].test));
    state.acc.rows.push_back(row);
    if (sink) sink->on_task_accuracy(t, row);
  }
  return state;
}

TrainedState train_sequence(const TaskProvider& provider,
                            const TrainConfig& cfg, ReportSink* sink) {
  if (cfg.num_tasks == 0) throw ContractError("train_sequence: no tasks");
  TrainedState state = init_state(cfg);
  std::vector<DataSplit> tests;
  for (size_t t = 1; t <= cfg.num_tasks; ++t) {
    {
      TaskDataset td = provider(t);
      train_task(state, t, td, sink);
      tests.push_back(std::move(td.test));
    }  // the task's train/validation splits are released here
    std::vector<double> row;
    for (size_t j = 1; j <= t; ++j)
      row.push_back(evaluate(state, j, tests[j - 1]));
    state.acc.rows.push_back(row);
    if (sink) sink->on_task_accuracy(t, row);
  }
  return state;
}

}  // namespace hypermask
