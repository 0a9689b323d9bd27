#include "hypermask/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace hypermask {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint files are little-endian; big-endian hosts need a "
              "byte-swapping port");

namespace {

uint32_t write_tensor_file(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open " + path.string());
  const char* bytes = reinterpret_cast<const char*>(t.data.data());
  size_t nbytes = t.data.size() * sizeof(double);
  out.write(bytes, static_cast<std::streamsize>(nbytes));
  if (!out) throw DataError("checkpoint: short write to " + path.string());
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes),
            static_cast<uInt>(nbytes)));
}

Tensor read_tensor_file(const fs::path& path, const std::vector<size_t>& shape,
                        uint32_t expect_crc) {
  size_t count = 1;
  for (size_t s : shape) count *= s;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: missing tensor file " + path.string());
  Tensor t = Tensor::zeros(shape);
  size_t nbytes = count * sizeof(double);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(nbytes));
  if (static_cast<size_t>(in.gcount()) != nbytes || in.peek() != EOF)
    throw DataError("checkpoint: size mismatch in " + path.string());
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(t.data.data()),
            static_cast<uInt>(nbytes)));
  if (crc != expect_crc)
    throw DataError("checkpoint: CRC mismatch in " + path.string());
  return t;
}

json config_to_json(const TrainConfig& c) {
  return json{{"dataset", c.dataset},
              {"num_tasks", c.num_tasks},
              {"classes_per_task", c.classes_per_task},
              {"iterations", c.iterations},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"beta", c.beta},
              {"lambda", c.lambda},
              {"p", c.p},
              {"masked_l1", c.masked_l1},
              {"masked_l1_abs", c.masked_l1_abs},
              {"target_trainable", c.target_trainable},
              {"seed", c.seed},
              {"embedding_dim", c.embedding_dim},
              {"hyper_hidden", c.hyper_hidden},
              {"target_hidden", c.target_hidden},
              {"input_dim", c.input_dim},
              {"val_size", c.val_size},
              {"selection", c.selection == SelectionRule::kBestValidationLoss
                                ? "best_validation"
                                : "last"},
              {"val_every", c.val_every}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.dataset = j.at("dataset").get<std::string>();
  c.num_tasks = j.at("num_tasks").get<size_t>();
  c.classes_per_task = j.at("classes_per_task").get<size_t>();
  c.iterations = j.at("iterations").get<size_t>();
  c.batch_size = j.at("batch_size").get<size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta = j.at("beta").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.p = j.at("p").get<double>();
  c.masked_l1 = j.at("masked_l1").get<bool>();
  c.masked_l1_abs = j.at("masked_l1_abs").get<bool>();
  c.target_trainable = j.at("target_trainable").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  c.embedding_dim = j.at("embedding_dim").get<size_t>();
  c.hyper_hidden = j.at("hyper_hidden").get<std::vector<size_t>>();
  c.target_hidden = j.at("target_hidden").get<std::vector<size_t>>();
  c.input_dim = j.at("input_dim").get<size_t>();
  c.val_size = j.at("val_size").get<size_t>();
  c.selection = j.at("selection").get<std::string>() == "best_validation"
                    ? SelectionRule::kBestValidationLoss
                    : SelectionRule::kLastIterate;
  c.val_every = j.at("val_every").get<size_t>();
  return c;
}

struct TensorWriter {
  const fs::path& dir;
  json entries = json::array();

  void add(const std::string& name, const Tensor& t) {
    std::string file = name + ".bin";
    uint32_t crc = write_tensor_file(dir / file, t);
    entries.push_back(
        {{"name", name}, {"file", file}, {"shape", t.shape}, {"crc32", crc}});
  }
};

struct TensorReader {
  fs::path dir;
  // name -> (file, shape, crc)
  std::map<std::string, json> by_name;

  explicit TensorReader(const fs::path& d, const json& entries) : dir(d) {
    for (const auto& e : entries) by_name[e.at("name").get<std::string>()] = e;
  }

  Tensor get(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw FormatError("checkpoint: manifest lacks tensor '" + name + "'");
    const json& e = it->second;
    return read_tensor_file(dir / e.at("file").get<std::string>(),
                            e.at("shape").get<std::vector<size_t>>(),
                            e.at("crc32").get<uint32_t>());
  }
};

}  // namespace

void checkpoint_write(const TrainedState& state, const std::string& dir) {
  fs::create_directories(dir);
  TensorWriter w{fs::path(dir)};

  for (auto& [name, t] : state.phi.items) w.add("phi." + name, t);
  for (auto& [name, t] : state.theta.items) w.add("theta." + name, t);
  json frozen = json::array();
  for (size_t i = 0; i < state.embeddings.size(); ++i) {
    w.add("emb." + std::to_string(i + 1), state.embeddings[i].e);
    frozen.push_back(state.embeddings[i].frozen);
  }
  for (size_t i = 0; i < state.stored_masks.size(); ++i)
    w.add("stored_mask." + std::to_string(i + 1), state.stored_masks[i]);
  for (size_t s = 0; s < state.theta_snapshots.size(); ++s)
    for (auto& [name, t] : state.theta_snapshots[s].items)
      w.add("theta_snapshot." + std::to_string(s + 1) + "." + name, t);

  std::ostringstream rng_stream;
  rng_stream << state.rng;

  json manifest{
      {"format_version", kCheckpointFormatVersion},
      {"dtype", "f64_le_row_major"},
      {"config", config_to_json(state.cfg)},
      {"tasks_trained", state.tasks_trained},
      {"num_embeddings", state.embeddings.size()},
      {"num_stored_masks", state.stored_masks.size()},
      {"num_theta_snapshots", state.theta_snapshots.size()},
      {"embedding_frozen", frozen},
      {"rng", rng_stream.str()},
      {"accuracy_rows", state.acc.rows},
      {"tensors", std::move(w.entries)},
  };

  fs::path tmp = fs::path(dir) / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot open " + tmp.string());
    out << manifest.dump(2) << "\n";
  }
  fs::rename(tmp, fs::path(dir) / "manifest.json");
}

TrainedState checkpoint_read(const std::string& dir) {
  fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw FormatError("checkpoint: missing manifest " + mpath.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw FormatError("checkpoint: unsupported format version");

  TrainedState s;
  s.cfg = config_from_json(manifest.at("config"));
  s.cfg.validate();
  s.tspec = s.cfg.target_spec();
  s.hspec = s.cfg.hyper_spec();
  s.tasks_trained = manifest.at("tasks_trained").get<size_t>();

  TensorReader r(fs::path(dir), manifest.at("tensors"));

  for (auto& [name, shape] : s.hspec.layout())
    s.phi.items.emplace_back(name, r.get("phi." + name));
  for (auto& [name, shape] : s.tspec.layout())
    s.theta.items.emplace_back(name, r.get("theta." + name));

  size_t n_emb = manifest.at("num_embeddings").get<size_t>();
  auto frozen = manifest.at("embedding_frozen").get<std::vector<bool>>();
  if (frozen.size() != n_emb)
    throw FormatError("checkpoint: embedding_frozen length mismatch");
  for (size_t i = 0; i < n_emb; ++i)
    s.embeddings.push_back(
        TaskEmbedding{r.get("emb." + std::to_string(i + 1)), i, frozen[i]});

  size_t n_masks = manifest.at("num_stored_masks").get<size_t>();
  for (size_t i = 0; i < n_masks; ++i)
    s.stored_masks.push_back(r.get("stored_mask." + std::to_string(i + 1)));

  size_t n_snaps = manifest.at("num_theta_snapshots").get<size_t>();
  for (size_t k = 0; k < n_snaps; ++k) {
    ParameterSet snap;
    for (auto& [name, shape] : s.tspec.layout())
      snap.items.emplace_back(
          name, r.get("theta_snapshot." + std::to_string(k + 1) + "." + name));
    s.theta_snapshots.push_back(std::move(snap));
  }

  std::istringstream rng_stream(manifest.at("rng").get<std::string>());
  rng_stream >> s.rng;
  if (!rng_stream) throw FormatError("checkpoint: bad rng state");

  s.acc.rows = manifest.at("accuracy_rows").get<std::vector<std::vector<double>>>();
  return s;
}

}  // namespace hypermask
