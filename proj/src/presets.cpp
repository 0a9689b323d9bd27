#include "hypermask/presets.hpp"

#include <fstream>
#include <sstream>

namespace hypermask {

namespace {

std::vector<size_t> parse_size_list(const std::string& s) {
  std::vector<size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  return out;
}

std::string join_size_list(const std::vector<size_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

}  // namespace

TrainConfig preset_config(const std::string& name) {
  TrainConfig c;
  if (name == "split-mnist") {
    c.dataset = "split";
    c.num_tasks = 5;
    c.classes_per_task = 2;
    c.target_hidden = {400, 400};
    c.hyper_hidden = {25, 25};
    c.embedding_dim = 128;
    c.p = 30.0;
    c.beta = 0.001;
    c.lambda = 0.001;
    c.iterations = 2000;
    c.val_size = 1000;
    return c;
  }
  if (name == "split-mnist-small") {
    c.dataset = "split";
    c.num_tasks = 5;
    c.classes_per_task = 2;
    c.target_hidden = {100, 100};
    c.hyper_hidden = {10, 10};
    c.embedding_dim = 64;
    c.p = 30.0;
    c.beta = 0.001;
    c.lambda = 0.001;
    c.iterations = 2000;
    c.val_size = 1000;
    return c;
  }
  if (name == "permuted-mnist" || name == "permuted-mnist-10" ||
      name == "permuted-mnist-100") {
    c.dataset = "permuted";
    c.num_tasks = name == "permuted-mnist-100" ? 100 : 10;
    c.classes_per_task = 10;
    c.target_hidden = {1000, 1000};
    c.hyper_hidden = {100, 100};
    c.embedding_dim = 24;
    c.p = 0.0;
    c.beta = 0.0005;
    c.lambda = 0.001;
    c.iterations = 5000;
    c.val_size = 5000;
    return c;
  }
  if (name == "permuted-mnist-small") {
    c.dataset = "permuted";
    c.num_tasks = 10;
    c.classes_per_task = 10;
    c.target_hidden = {256, 256};
    c.hyper_hidden = {50, 50};
    c.embedding_dim = 24;
    c.p = 0.0;
    c.beta = 0.0005;
    c.lambda = 0.001;
    c.iterations = 2000;
    c.val_size = 5000;
    return c;
  }
  std::string known;
  for (const std::string& n : preset_names()) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("unknown preset '" + name + "' (available: " + known + ")");
}

std::vector<std::string> preset_names() {
  return {"split-mnist", "split-mnist-small", "permuted-mnist-10",
          "permuted-mnist-100", "permuted-mnist-small"};
}

void apply_config_key(TrainConfig& cfg, const std::string& key,
                      const std::string& value) {
  try {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "num_tasks") cfg.num_tasks = std::stoull(value);
    else if (key == "classes_per_task") cfg.classes_per_task = std::stoull(value);
    else if (key == "iterations") cfg.iterations = std::stoull(value);
    else if (key == "batch_size") cfg.batch_size = std::stoull(value);
    else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
    else if (key == "beta") cfg.beta = std::stod(value);
    else if (key == "lambda") cfg.lambda = std::stod(value);
    else if (key == "p") cfg.p = std::stod(value);
    else if (key == "masked_l1") cfg.masked_l1 = parse_bool(value);
    else if (key == "masked_l1_abs") cfg.masked_l1_abs = parse_bool(value);
    else if (key == "target_trainable") cfg.target_trainable = parse_bool(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "embedding_dim") cfg.embedding_dim = std::stoull(value);
    else if (key == "hyper_hidden") cfg.hyper_hidden = parse_size_list(value);
    else if (key == "target_hidden") cfg.target_hidden = parse_size_list(value);
    else if (key == "input_dim") cfg.input_dim = std::stoull(value);
    else if (key == "val_size") cfg.val_size = std::stoull(value);
    else if (key == "val_every") cfg.val_every = std::stoull(value);
    else if (key == "selection") {
      if (value == "last") cfg.selection = SelectionRule::kLastIterate;
      else if (value == "best_validation")
        cfg.selection = SelectionRule::kBestValidationLoss;
      else throw ConfigError("selection must be 'last' or 'best_validation'");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  }
}

TrainConfig parse_config_file(const std::string& path,
                              const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  TrainConfig cfg = base;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    apply_config_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_items(
    const TrainConfig& cfg) {
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {
      {"dataset", cfg.dataset},
      {"num_tasks", std::to_string(cfg.num_tasks)},
      {"classes_per_task", std::to_string(cfg.classes_per_task)},
      {"iterations", std::to_string(cfg.iterations)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"learning_rate", fmt(cfg.learning_rate)},
      {"beta", fmt(cfg.beta)},
      {"lambda", fmt(cfg.lambda)},
      {"p", fmt(cfg.p)},
      {"masked_l1", cfg.masked_l1 ? "true" : "false"},
      {"masked_l1_abs", cfg.masked_l1_abs ? "true" : "false"},
      {"target_trainable", cfg.target_trainable ? "true" : "false"},
      {"seed", std::to_string(cfg.seed)},
      {"embedding_dim", std::to_string(cfg.embedding_dim)},
      {"hyper_hidden", join_size_list(cfg.hyper_hidden)},
      {"target_hidden", join_size_list(cfg.target_hidden)},
      {"input_dim", std::to_string(cfg.input_dim)},
      {"val_size", std::to_string(cfg.val_size)},
      {"val_every", std::to_string(cfg.val_every)},
      {"selection", cfg.selection == SelectionRule::kBestValidationLoss
                        ? "best_validation"
                        : "last"},
  };
}

}  // namespace hypermask
