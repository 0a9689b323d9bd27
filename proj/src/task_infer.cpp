#include "hypermask/task_infer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hypermask {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

double entropy_of(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw ContractError("entropy_of: negative probability");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<InferenceResult> infer_entropy_batch(const TrainedState& state,
                                                 const DataSplit& split,
                                                 size_t upto_task) {
  if (upto_task == 0 || upto_task > state.tasks_trained)
    throw ContractError("infer_entropy: no trained tasks in range");
  size_t n = split.count;
  size_t c = state.tspec.classes_per_task;
  std::vector<InferenceResult> out(n);
  std::vector<std::vector<double>> entropies(n,
                                             std::vector<double>(upto_task));
  std::vector<std::vector<int>> argmaxes(n, std::vector<int>(upto_task));
  Tensor x = split.all_inputs();
  for (size_t ti = 1; ti <= upto_task; ++ti) {
    SemiBinaryMask mask = task_mask(state, ti);
    TargetForwardOut fo =
        target_forward(x, state.theta, mask, state.tspec, ti - 1);
    Tensor probs = softmax_rows(fo.logits);
    for (size_t r = 0; r < n; ++r) {
      const double* row = probs.data.data() + r * c;
      double h = 0.0;
      for (size_t j = 0; j < c; ++j)
        if (row[j] > 0.0) h -= row[j] * std::log(row[j]);
      entropies[r][ti - 1] = h;
      argmaxes[r][ti - 1] =
          static_cast<int>(std::max_element(row, row + c) - row);
    }
  }
  for (size_t r = 0; r < n; ++r) {
    size_t best = 0;
    for (size_t ti = 1; ti < upto_task; ++ti)
      if (entropies[r][ti] < entropies[r][best]) best = ti;  // ties: lowest
    out[r].selected_task = best + 1;
    out[r].predicted_class =
        static_cast<int>(best * c) + argmaxes[r][best];
    out[r].scores = entropies[r];
  }
  return out;
}

InferenceResult infer_entropy(const TrainedState& state,
                              const std::vector<double>& x) {
  DataSplit one;
  one.count = 1;
  one.dim = x.size();
  one.x = x;
  one.y = {0};
  return infer_entropy_batch(state, one, state.tasks_trained)[0];
}

Tensor shrink_covariance(const Tensor& sigma) {
  if (sigma.shape.size() != 2 || sigma.shape[0] != sigma.shape[1])
    throw ShapeError("shrink_covariance: expected a square matrix");
  size_t d = sigma.shape[0];
  double diag = 0.0, off = 0.0;
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      (i == j ? diag : off) += sigma.data[i * d + j];
  double d1 = diag / static_cast<double>(d);
  double d2 = d > 1 ? off / static_cast<double>(d * d - d) : 0.0;
  Tensor out = sigma;
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      out.data[i * d + j] += (i == j) ? d1 : d2;
  return out;
}

Tensor normalize_covariance(const Tensor& sigma) {
  if (sigma.shape.size() != 2 || sigma.shape[0] != sigma.shape[1])
    throw ShapeError("normalize_covariance: expected a square matrix");
  size_t d = sigma.shape[0];
  std::vector<double> rootdiag(d);
  for (size_t i = 0; i < d; ++i) {
    double v = sigma.data[i * d + i];
    if (v <= 0.0)
      throw DegenerateCovarianceError(
          "normalize_covariance: nonpositive diagonal entry");
    rootdiag[i] = std::sqrt(v);
  }
  Tensor out = sigma;
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j)
      out.data[i * d + j] /= rootdiag[i] * rootdiag[j];
  return out;
}

namespace {

Tensor hidden_features_chunked(const TrainedState& state,
                               const DataSplit& split,
                               const SemiBinaryMask& mask) {
  size_t d = state.tspec.last_hidden_dim();
  Tensor out = Tensor::zeros({split.count, d});
  const size_t chunk = 4096;
  for (size_t off = 0; off < split.count; off += chunk) {
    size_t n = std::min(chunk, split.count - off);
    Tensor x{{n, split.dim},
             std::vector<double>(split.x.begin() + off * split.dim,
                                 split.x.begin() + (off + n) * split.dim)};
    Tensor f = hidden_features(x, state.theta, mask, state.tspec);
    std::copy(f.data.begin(), f.data.end(), out.data.begin() + off * d);
  }
  return out;
}

void l2_normalize_rows(Tensor& t) {
  size_t rows = t.shape[0], cols = t.shape[1];
  for (size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      double v = t.data[r * cols + c];
      s += v * v;
    }
    if (s <= 0.0)
      throw ContractError("l2 normalization: zero-norm feature row");
    double inv = 1.0 / std::sqrt(s);
    for (size_t c = 0; c < cols; ++c) t.data[r * cols + c] *= inv;
  }
}

}  // namespace

namespace {

void append_task_prototypes(const TrainedState& state, size_t ti,
                            const TaskDataset& task,
                            std::vector<ClassPrototype>& out) {
  size_t d = state.tspec.last_hidden_dim();
  size_t cpt = state.tspec.classes_per_task;
  SemiBinaryMask mask = task_mask(state, ti);
  Tensor feats = hidden_features_chunked(state, task.train, mask);
  {
    for (size_t local = 0; local < cpt; ++local) {
      int cls = static_cast<int>((ti - 1) * cpt + local);
      std::vector<size_t> rows;
      for (size_t r = 0; r < task.train.count; ++r)
        if (task.train.y[r] == static_cast<int>(local))
          rows.push_back(r);
      if (rows.size() < 2)
        throw DegenerateCovarianceError(
            "build_prototypes: class needs at least 2 samples");
      ClassPrototype proto;
      proto.cls = cls;
      proto.sample_count = rows.size();
      proto.mu = Tensor::zeros({d});
      for (size_t r : rows)
        for (size_t j = 0; j < d; ++j)
          proto.mu.data[j] += feats.data[r * d + j];
      for (double& v : proto.mu.data) v /= static_cast<double>(rows.size());
      // unbiased covariance
      Tensor cov = Tensor::zeros({d, d});
      {
        EMat centered(rows.size(), d);
        for (size_t k = 0; k < rows.size(); ++k)
          for (size_t j = 0; j < d; ++j)
            centered(k, j) = feats.data[rows[k] * d + j] - proto.mu.data[j];
        Eigen::Map<EMat> covm(cov.data.data(), d, d);
        covm.noalias() = centered.transpose() * centered;
        covm /= static_cast<double>(rows.size() - 1);
      }
      Tensor norm = normalize_covariance(
          shrink_covariance(shrink_covariance(cov)));
      proto.sigma_inv = Tensor::zeros({d, d});
      {
        Eigen::Map<const EMat> nm(norm.data.data(), d, d);
        Eigen::Map<EMat> inv(proto.sigma_inv.data.data(), d, d);
        inv = nm.partialPivLu().inverse();
      }
      out.push_back(std::move(proto));
    }
  }
}

}  // namespace

std::vector<ClassPrototype> build_prototypes(
    const TrainedState& state, const std::vector<TaskDataset>& tasks,
    size_t upto_task) {
  if (upto_task == 0 || upto_task > state.tasks_trained ||
      upto_task > tasks.size())
    throw ContractError("build_prototypes: tasks not trained");
  std::vector<ClassPrototype> out;
  for (size_t ti = 1; ti <= upto_task; ++ti)
    append_task_prototypes(state, ti, tasks[ti - 1], out);
  return out;
}

std::vector<ClassPrototype> build_prototypes(const TrainedState& state,
                                             const TaskProvider& provider,
                                             size_t upto_task) {
  if (upto_task == 0 || upto_task > state.tasks_trained)
    throw ContractError("build_prototypes: tasks not trained");
  std::vector<ClassPrototype> out;
  for (size_t ti = 1; ti <= upto_task; ++ti) {
    TaskDataset task = provider(ti);
    append_task_prototypes(state, ti, task, out);
  }
  return out;
}

double mahalanobis_sq(const Tensor& feature, const ClassPrototype& proto) {
  size_t d = proto.mu.size();
  if (feature.size() != d) throw ShapeError("mahalanobis_sq: dim mismatch");
  double nf = 0.0, nm = 0.0;
  for (size_t i = 0; i < d; ++i) {
    nf += feature.data[i] * feature.data[i];
    nm += proto.mu.data[i] * proto.mu.data[i];
  }
  if (nf <= 0.0 || nm <= 0.0)
    throw ContractError("mahalanobis_sq: zero-norm feature or prototype");
  nf = std::sqrt(nf);
  nm = std::sqrt(nm);
  Eigen::VectorXd u(d);
  for (size_t i = 0; i < d; ++i)
    u(i) = feature.data[i] / nf - proto.mu.data[i] / nm;
  Eigen::Map<const EMat> s(proto.sigma_inv.data.data(), d, d);
  return u.dot(s * u);
}

std::vector<InferenceResult> classify_fecam_batch(
    const TrainedState& state, const std::vector<ClassPrototype>& protos,
    const DataSplit& split, size_t upto_task) {
  if (upto_task == 0 || upto_task > state.tasks_trained)
    throw ContractError("classify_fecam: no trained tasks in range");
  if (protos.empty()) throw ContractError("classify_fecam: no prototypes");
  size_t n = split.count;
  size_t d = state.tspec.last_hidden_dim();
  std::vector<InferenceResult> out(n);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  // candidates sorted by (class, task) so strict improvement implements the
  // tie rule
  std::vector<size_t> proto_order(protos.size());
  for (size_t i = 0; i < protos.size(); ++i) proto_order[i] = i;
  std::sort(proto_order.begin(), proto_order.end(), [&](size_t a, size_t b) {
    return protos[a].cls < protos[b].cls;
  });
  // features for every candidate task mask, L2-normalized rows
  std::vector<Tensor> feats;
  for (size_t ti = 1; ti <= upto_task; ++ti) {
    SemiBinaryMask mask = task_mask(state, ti);
    Tensor f = hidden_features_chunked(state, split, mask);
    l2_normalize_rows(f);
    feats.push_back(std::move(f));
  }
  EMat u(n, d), a(n, d);
  for (size_t pi : proto_order) {
    const ClassPrototype& proto = protos[pi];
    double nm = 0.0;
    for (size_t i = 0; i < d; ++i) nm += proto.mu.data[i] * proto.mu.data[i];
    if (nm <= 0.0)
      throw ContractError("classify_fecam: zero-norm prototype");
    nm = std::sqrt(nm);
    Eigen::Map<const EMat> s(proto.sigma_inv.data.data(), d, d);
    for (size_t ti = 1; ti <= upto_task; ++ti) {
      const Tensor& f = feats[ti - 1];
      for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < d; ++j)
          u(r, j) = f.data[r * d + j] - proto.mu.data[j] / nm;
      a.noalias() = u * s;
      for (size_t r = 0; r < n; ++r) {
        double dist = a.row(r).dot(u.row(r));
        if (dist < best[r]) {
          best[r] = dist;
          out[r].predicted_class = proto.cls;
          out[r].selected_task = ti;
        }
      }
    }
  }
  for (size_t r = 0; r < n; ++r) out[r].scores = {best[r]};
  return out;
}

std::vector<std::vector<double>> fecam_distance_matrix(
    const TrainedState& state, const std::vector<ClassPrototype>& protos,
    const DataSplit& split, size_t upto_task) {
  if (upto_task == 0 || upto_task > state.tasks_trained)
    throw ContractError("fecam_distance_matrix: no trained tasks in range");
  size_t n = split.count;
  size_t d = state.tspec.last_hidden_dim();
  std::vector<std::vector<double>> out(
      n, std::vector<double>(protos.size() * upto_task));
  std::vector<Tensor> feats;
  for (size_t ti = 1; ti <= upto_task; ++ti) {
    SemiBinaryMask mask = task_mask(state, ti);
    Tensor f = hidden_features_chunked(state, split, mask);
    l2_normalize_rows(f);
    feats.push_back(std::move(f));
  }
  EMat u(n, d), a(n, d);
  for (size_t pi = 0; pi < protos.size(); ++pi) {
    const ClassPrototype& proto = protos[pi];
    double nm = 0.0;
    for (size_t i = 0; i < d; ++i) nm += proto.mu.data[i] * proto.mu.data[i];
    if (nm <= 0.0)
      throw ContractError("fecam_distance_matrix: zero-norm prototype");
    nm = std::sqrt(nm);
    Eigen::Map<const EMat> s(proto.sigma_inv.data.data(), d, d);
    for (size_t ti = 1; ti <= upto_task; ++ti) {
      const Tensor& f = feats[ti - 1];
      for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < d; ++j)
          u(r, j) = f.data[r * d + j] - proto.mu.data[j] / nm;
      a.noalias() = u * s;
      for (size_t r = 0; r < n; ++r)
        out[r][pi * upto_task + (ti - 1)] = a.row(r).dot(u.row(r));
    }
  }
  return out;
}

InferenceResult classify_fecam(const TrainedState& state,
                               const std::vector<ClassPrototype>& protos,
                               const std::vector<double>& x) {
  DataSplit one;
  one.count = 1;
  one.dim = x.size();
  one.x = x;
  one.y = {0};
  return classify_fecam_batch(state, protos, one, state.tasks_trained)[0];
}

}  // namespace hypermask
