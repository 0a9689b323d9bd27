// Batch experiment driver: train runs, checkpointing, CSV reports, and
// task-agnostic evaluation (entropy / FeCAM).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "hypermask/checkpoint.hpp"
#include "hypermask/presets.hpp"
#include "hypermask/task_infer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hypermask;

namespace {

constexpr const char* kVersion = "hypermask 1.0.0";

std::string data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("HYPERMASK_DATA_DIR")) return env;
  return "data/mnist";
}

std::string find_idx(const std::string& root, const std::string& stem) {
  for (const std::string& name : {stem, stem + ".gz"}) {
    fs::path p = fs::path(root) / name;
    if (fs::exists(p)) return p.string();
  }
  throw DataError("dataset file not found: " + (fs::path(root) / stem).string() +
                  "[.gz] (set --data or HYPERMASK_DATA_DIR)");
}

struct RawCorpus {
  RawMnist train, test;
};

RawCorpus load_corpus(const std::string& root) {
  RawCorpus c;
  c.train = load_idx(find_idx(root, "train-images-idx3-ubyte"),
                     find_idx(root, "train-labels-idx1-ubyte"));
  c.test = load_idx(find_idx(root, "t10k-images-idx3-ubyte"),
                    find_idx(root, "t10k-labels-idx1-ubyte"));
  return c;
}

// One-task-at-a-time access; permuted tasks are rebuilt on demand so long
// streams never hold every permuted corpus copy at once.
TaskProvider task_provider(const TrainConfig& cfg,
                           std::shared_ptr<RawCorpus> corpus) {
  if (cfg.dataset == "permuted") {
    if (cfg.num_tasks < 1) throw ConfigError("num_tasks must be >= 1");
    return [corpus, seed = cfg.seed, val = cfg.val_size](size_t t) {
      return build_permuted_task(corpus->train, corpus->test, t, seed, val);
    };
  }
  auto tasks = std::make_shared<std::vector<TaskDataset>>(
      build_split_tasks(corpus->train, corpus->test, cfg.val_size, cfg.seed));
  if (cfg.num_tasks > tasks->size())
    throw ConfigError("split dataset provides at most " +
                      std::to_string(tasks->size()) + " tasks");
  return [tasks](size_t t) { return (*tasks)[t - 1]; };
}

json design_decisions() {
  return json{{"percentile", "linear_interpolation"},
              {"sparsify_rule", "zero_if_abs_le_threshold"},
              {"first_permutation", "identity"},
              {"initialization", "he_uniform_fan_in, embeddings N(0,1)"},
              {"entropy_log", "natural, exact (p log p with 0 log 0 = 0)"},
              {"augmentation", "none"},
              {"output_regularizer", "one_step_lookahead"}};
}

struct CsvSink : ReportSink {
  std::ofstream loss_log;
  std::vector<double> task_seconds;
  std::chrono::steady_clock::time_point task_start =
      std::chrono::steady_clock::now();

  explicit CsvSink(const fs::path& path) : loss_log(path) {
    loss_log << "task, iteration, loss\n";
  }
  void on_iteration(size_t task, size_t iter, double loss) override {
    if (iter % 10 == 0 || iter == 1) {
      loss_log << task << ", " << iter << ", " << loss << "\n";
    }
  }
  void on_task_accuracy(size_t task, const std::vector<double>& row) override {
    auto now = std::chrono::steady_clock::now();
    task_seconds.push_back(
        std::chrono::duration<double>(now - task_start).count());
    task_start = now;
    std::cerr << "task " << task << " done; accuracies:";
    for (double a : row) std::cerr << " " << a;
    std::cerr << "\n";
  }
};

void write_atomic(const fs::path& path, const std::string& body) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string());
    out << body;
  }
  fs::rename(tmp, path);
}

int cmd_train(const TrainConfig& cfg, const std::string& out_dir,
              const std::string& data_flag) {
  cfg.validate();
  auto corpus = std::make_shared<RawCorpus>(load_corpus(data_root(data_flag)));
  TaskProvider provider = task_provider(cfg, corpus);
  fs::create_directories(out_dir);
  CsvSink sink(fs::path(out_dir) / "loss_log.csv");

  TrainedState state = train_sequence(provider, cfg, &sink);

  write_atomic(fs::path(out_dir) / "accuracy.csv", state.acc.to_csv());
  checkpoint_write(state, (fs::path(out_dir) / "checkpoint").string());

  json cfg_echo;
  for (auto& [k, v] : config_items(cfg)) cfg_echo[k] = v;
  json manifest{{"version", kVersion},
                {"config", cfg_echo},
                {"seed", cfg.seed},
                {"design_decisions", design_decisions()},
                {"task_seconds", sink.task_seconds},
                {"mean_final_accuracy", mean_final_accuracy(state.acc)}};
  if (state.acc.rows.size() > 1)
    manifest["backward_transfer"] = backward_transfer(state.acc);
  write_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "mean final accuracy: " << mean_final_accuracy(state.acc)
            << "\n";
  return 0;
}

// Accuracy of the inference results against global class labels for one
// task's test split.
double global_accuracy(const std::vector<InferenceResult>& res,
                       const TaskDataset& task, size_t cpt) {
  size_t correct = 0;
  for (size_t r = 0; r < res.size(); ++r) {
    int truth = static_cast<int>((task.task_id - 1) * cpt) + task.test.y[r];
    if (res[r].predicted_class == truth) ++correct;
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(res.size());
}

int cmd_eval(const std::string& ckpt_dir, const std::string& mode,
             const std::string& out_path, const std::string& data_flag) {
  TrainedState state = checkpoint_read(ckpt_dir);
  if (state.tasks_trained == 0)
    throw ContractError("eval: checkpoint has no trained tasks");
  size_t T = state.tasks_trained;
  size_t cpt = state.tspec.classes_per_task;
  auto corpus = std::make_shared<RawCorpus>(load_corpus(data_root(data_flag)));
  TaskProvider provider = task_provider(state.cfg, corpus);
  // keep only the test splits resident; training data is streamed on demand
  std::vector<TaskDataset> tasks;
  for (size_t t = 1; t <= T; ++t) {
    TaskDataset td = provider(t);
    td.train = DataSplit{};
    td.validation = DataSplit{};
    tasks.push_back(std::move(td));
  }

  std::ostringstream csv;
  if (mode == "known-task") {
    csv << "task, accuracy\n";
    std::vector<double> accs;
    for (size_t t = 1; t <= T; ++t) {
      double a = evaluate(state, t, tasks[t - 1].test);
      accs.push_back(a);
      csv << t << ", " << a << "\n";
    }
    csv << "mean_final_accuracy, "
        << std::accumulate(accs.begin(), accs.end(), 0.0) /
               static_cast<double>(accs.size())
        << "\n";
    if (state.acc.rows.size() > 1)
      csv << "bwt, " << backward_transfer(state.acc) << "\n";
  } else if (mode == "entropy") {
    // per-stage accuracy: after task j, classify tasks 1..j task-agnostically
    std::vector<double> stage_acc;
    size_t task_sel_hits = 0, total = 0;
    for (size_t j = 1; j <= T; ++j) {
      double weighted = 0.0;
      size_t n = 0;
      for (size_t i = 1; i <= j; ++i) {
        auto res = infer_entropy_batch(state, tasks[i - 1].test, j);
        weighted += global_accuracy(res, tasks[i - 1], cpt) *
                    static_cast<double>(res.size());
        n += res.size();
        if (j == T) {
          total += res.size();
          for (const auto& r : res)
            if (r.selected_task == i) ++task_sel_hits;
        }
      }
      stage_acc.push_back(weighted / static_cast<double>(n));
    }
    auto [last, avg] = fecam_protocol_accuracy(stage_acc);
    csv << "stage, accuracy\n";
    for (size_t j = 0; j < stage_acc.size(); ++j)
      csv << (j + 1) << ", " << stage_acc[j] << "\n";
    csv << "overall_accuracy, " << last << "\n";
    csv << "task_selection_accuracy, "
        << 100.0 * static_cast<double>(task_sel_hits) /
               static_cast<double>(total)
        << "\n";
    csv << "protocol_last, " << last << "\n";
    csv << "protocol_average, " << avg << "\n";
  } else if (mode == "fecam") {
    std::vector<ClassPrototype> protos = build_prototypes(state, provider, T);
    // one distance matrix per test split; every stage prefix read from it
    std::vector<double> stage_num(T, 0.0);
    std::vector<size_t> stage_den(T, 0);
    size_t task_sel_hits = 0, total = 0;
    for (size_t i = 1; i <= T; ++i) {
      const TaskDataset& task = tasks[i - 1];
      auto dist = fecam_distance_matrix(state, protos, task.test, T);
      for (size_t j = i; j <= T; ++j) {
        size_t correct = 0;
        for (size_t r = 0; r < task.test.count; ++r) {
          double best = std::numeric_limits<double>::infinity();
          int best_cls = 0;
          size_t best_task = 0;
          for (size_t pi = 0; pi < protos.size(); ++pi) {
            if (protos[pi].cls >= static_cast<int>(j * cpt)) continue;
            for (size_t ti = 1; ti <= j; ++ti) {
              double v = dist[r][pi * T + (ti - 1)];
              if (v < best) {
                best = v;
                best_cls = protos[pi].cls;
                best_task = ti;
              }
            }
          }
          int truth =
              static_cast<int>((i - 1) * cpt) + task.test.y[r];
          if (best_cls == truth) ++correct;
          if (j == T) {
            ++total;
            if (best_task == i) ++task_sel_hits;
          }
        }
        stage_num[j - 1] += static_cast<double>(correct) * 100.0;
        stage_den[j - 1] += task.test.count;
      }
    }
    std::vector<double> stage_acc;
    for (size_t j = 0; j < T; ++j)
      stage_acc.push_back(stage_num[j] / static_cast<double>(stage_den[j]));
    auto [last, avg] = fecam_protocol_accuracy(stage_acc);
    csv << "stage, accuracy\n";
    for (size_t j = 0; j < stage_acc.size(); ++j)
      csv << (j + 1) << ", " << stage_acc[j] << "\n";
    csv << "overall_accuracy, " << last << "\n";
    csv << "task_selection_accuracy, "
        << 100.0 * static_cast<double>(task_sel_hits) /
               static_cast<double>(total)
        << "\n";
    csv << "protocol_last, " << last << "\n";
    csv << "protocol_average, " << avg << "\n";
  } else {
    throw ConfigError("unknown eval mode '" + mode +
                      "' (known-task | entropy | fecam)");
  }

  if (out_path.empty() || out_path == "-") {
    std::cout << csv.str();
  } else {
    write_atomic(out_path, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HyperMask continual-learning experiment driver"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a task sequence");
  std::string preset, config_path, out_dir, data_flag;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flag_vals;
  train->add_option("--preset", preset, "Named preset");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--out", out_dir, "Run output directory")->required();
  train->add_option("--data", data_flag, "Dataset root directory");
  train->add_option("--set", overrides, "Extra key=value overrides");
  const std::vector<std::string> keys = {
      "dataset",        "num_tasks",     "classes_per_task",
      "iterations",     "batch_size",    "learning_rate",
      "beta",           "lambda",        "p",
      "masked_l1",      "masked_l1_abs", "target_trainable",
      "seed",           "embedding_dim", "hyper_hidden",
      "target_hidden",  "input_dim",     "val_size",
      "val_every",      "selection"};
  for (const std::string& k : keys)
    train->add_option("--" + k, flag_vals[k], "Override config key " + k);
  std::string tasks_alias;
  train->add_option("--tasks", tasks_alias, "Alias for --num_tasks");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt, mode = "known-task", eval_out, eval_data;
  eval->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  eval->add_option("--mode", mode, "known-task | entropy | fecam");
  eval->add_option("--out", eval_out, "Metrics CSV path (default stdout)");
  eval->add_option("--data", eval_data, "Dataset root directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) {
      TrainConfig cfg;
      if (!preset.empty()) cfg = preset_config(preset);
      if (!config_path.empty()) cfg = parse_config_file(config_path, cfg);
      for (const std::string& k : keys)
        if (train->count("--" + k)) apply_config_key(cfg, k, flag_vals[k]);
      if (train->count("--tasks"))
        apply_config_key(cfg, "num_tasks", tasks_alias);
      for (const std::string& kv : overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw ConfigError("--set expects key=value, got '" + kv + "'");
        apply_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      return cmd_train(cfg, out_dir, data_flag);
    }
    return cmd_eval(ckpt, mode, eval_out, eval_data);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
