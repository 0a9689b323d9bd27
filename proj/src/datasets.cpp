#include "hypermask/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace hypermask {

Tensor DataSplit::batch(const std::vector<size_t>& indices) const {
  Tensor out = Tensor::zeros({indices.size(), dim});
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy(x.begin() + indices[i] * dim, x.begin() + (indices[i] + 1) * dim,
              out.data.begin() + i * dim);
  return out;
}

Tensor DataSplit::all_inputs() const {
  return Tensor{{count, dim}, x};
}

namespace {

std::vector<uint8_t> read_file_maybe_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    // gzip container
    std::vector<uint8_t> out;
    out.resize(bytes.size() * 4 + 1024);
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
      throw FormatError("gzip init failed for " + path);
    zs.next_in = bytes.data();
    zs.avail_in = static_cast<uInt>(bytes.size());
    size_t total = 0;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
      if (total == out.size()) out.resize(out.size() * 2);
      zs.next_out = out.data() + total;
      zs.avail_out = static_cast<uInt>(out.size() - total);
      rc = inflate(&zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END) {
        inflateEnd(&zs);
        throw FormatError("gzip decode failed for " + path);
      }
      total = out.size() - zs.avail_out;
    }
    inflateEnd(&zs);
    out.resize(total);
    return out;
  }
  return bytes;
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

}  // namespace

RawMnist load_idx(const std::string& images_path,
                  const std::string& labels_path) {
  std::vector<uint8_t> img = read_file_maybe_gzip(images_path);
  std::vector<uint8_t> lab = read_file_maybe_gzip(labels_path);
  if (img.size() < 16 || be32(img.data()) != 0x00000803)
    throw FormatError("bad image magic in " + images_path);
  if (lab.size() < 8 || be32(lab.data()) != 0x00000801)
    throw FormatError("bad label magic in " + labels_path);
  uint32_t n = be32(img.data() + 4);
  uint32_t rows = be32(img.data() + 8);
  uint32_t cols = be32(img.data() + 12);
  uint32_t nl = be32(lab.data() + 4);
  if (rows != 28 || cols != 28)
    throw FormatError("expected 28x28 images in " + images_path);
  if (n != nl) throw FormatError("image/label count mismatch");
  if (img.size() != 16 + size_t(n) * 784)
    throw FormatError("truncated image file " + images_path);
  if (lab.size() != 8 + size_t(n))
    throw FormatError("truncated label file " + labels_path);
  RawMnist out;
  out.count = n;
  out.pixels.resize(size_t(n) * 784);
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = img[16 + i] / 255.0;
  out.labels.assign(lab.begin() + 8, lab.end());
  return out;
}

std::vector<double> pad_and_flatten(const std::vector<double>& pixels,
                                    size_t count) {
  if (pixels.size() != count * 784)
    throw ShapeError("pad_and_flatten: expected 28x28 inputs");
  std::vector<double> out(count * kPaddedDim, 0.0);
  for (size_t i = 0; i < count; ++i)
    for (size_t r = 0; r < 28; ++r)
      std::copy(pixels.begin() + i * 784 + r * 28,
                pixels.begin() + i * 784 + (r + 1) * 28,
                out.begin() + i * kPaddedDim + (r + 2) * 32 + 2);
  return out;
}

namespace {

// Deterministic train/validation carve: validation comes from the tail of a
// seeded shuffle of the training indices.
void carve_validation(const std::vector<double>& x,
                      const std::vector<int>& y, size_t val_size,
                      uint64_t seed, DataSplit& train, DataSplit& val) {
  size_t n = y.size();
  if (val_size >= n) throw ConfigError("validation size >= training size");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_train = n - val_size;
  auto fill = [&](DataSplit& s, size_t begin, size_t end) {
    s.count = end - begin;
    s.dim = kPaddedDim;
    s.x.resize(s.count * kPaddedDim);
    s.y.resize(s.count);
    for (size_t i = begin; i < end; ++i) {
      size_t src = order[i];
      std::copy(x.begin() + src * kPaddedDim, x.begin() + (src + 1) * kPaddedDim,
                s.x.begin() + (i - begin) * kPaddedDim);
      s.y[i - begin] = y[src];
    }
  };
  fill(train, 0, n_train);
  fill(val, n_train, n);
}

}  // namespace

namespace {

// Pixel permutation of task t (1-based): task 1 is the identity, later tasks
// consume one shuffle each from a generator seeded once for the stream.
std::vector<size_t> task_permutation(size_t t, uint64_t seed) {
  std::mt19937_64 perm_rng(seed);
  std::vector<size_t> perm(kPaddedDim);
  std::iota(perm.begin(), perm.end(), 0);
  for (size_t k = 2; k <= t; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), perm_rng);
  }
  return perm;
}

}  // namespace

TaskDataset build_permuted_task(const RawMnist& train, const RawMnist& test,
                                size_t t, uint64_t seed, size_t val_size) {
  if (t < 1) throw ConfigError("build_permuted_task: t must be >= 1");
  std::vector<double> train_flat = pad_and_flatten(train.pixels, train.count);
  std::vector<double> test_flat = pad_and_flatten(test.pixels, test.count);
  std::vector<size_t> perm = task_permutation(t, seed);
  auto permute = [&](const std::vector<double>& src, size_t count) {
    std::vector<double> out(src.size());
    for (size_t i = 0; i < count; ++i)
      for (size_t j = 0; j < kPaddedDim; ++j)
        out[i * kPaddedDim + j] = src[i * kPaddedDim + perm[j]];
    return out;
  };
  TaskDataset td;
  td.task_id = t;
  td.global_classes.resize(10);
  std::iota(td.global_classes.begin(), td.global_classes.end(), 0);
  std::vector<double> px = permute(train_flat, train.count);
  train_flat.clear();
  train_flat.shrink_to_fit();
  std::vector<int> py(train.labels.begin(), train.labels.end());
  carve_validation(px, py, val_size, seed ^ (0x9e3779b97f4a7c15ull * t),
                   td.train, td.validation);
  px.clear();
  px.shrink_to_fit();
  td.test.count = test.count;
  td.test.dim = kPaddedDim;
  td.test.x = permute(test_flat, test.count);
  td.test.y.assign(test.labels.begin(), test.labels.end());
  return td;
}

std::vector<TaskDataset> build_permuted_tasks(const RawMnist& train,
                                              const RawMnist& test, size_t T,
                                              uint64_t seed, size_t val_size) {
  if (T < 1) throw ConfigError("build_permuted_tasks: T must be >= 1");
  std::vector<TaskDataset> tasks;
  for (size_t t = 1; t <= T; ++t)
    tasks.push_back(build_permuted_task(train, test, t, seed, val_size));
  return tasks;
}

std::vector<TaskDataset> build_split_tasks(const RawMnist& train,
                                           const RawMnist& test,
                                           size_t val_size, uint64_t seed) {
  std::vector<double> train_flat = pad_and_flatten(train.pixels, train.count);
  std::vector<double> test_flat = pad_and_flatten(test.pixels, test.count);
  std::vector<size_t> class_count(10, 0);
  for (uint8_t l : train.labels) class_count[l]++;
  for (size_t c = 0; c < 10; ++c)
    if (class_count[c] == 0)
      throw DataError("missing digit class " + std::to_string(c));
  std::vector<TaskDataset> tasks;
  for (size_t t = 0; t < 5; ++t) {
    int d0 = static_cast<int>(2 * t), d1 = d0 + 1;
    TaskDataset td;
    td.task_id = t + 1;
    td.global_classes = {d0, d1};
    std::vector<double> px;
    std::vector<int> py;
    for (size_t i = 0; i < train.count; ++i) {
      int l = train.labels[i];
      if (l == d0 || l == d1) {
        px.insert(px.end(), train_flat.begin() + i * kPaddedDim,
                  train_flat.begin() + (i + 1) * kPaddedDim);
        py.push_back(l == d0 ? 0 : 1);
      }
    }
    carve_validation(px, py, val_size, seed ^ (0xc2b2ae3d27d4eb4full * (t + 1)),
                     td.train, td.validation);
    td.test.dim = kPaddedDim;
    for (size_t i = 0; i < test.count; ++i) {
      int l = test.labels[i];
      if (l == d0 || l == d1) {
        td.test.x.insert(td.test.x.end(), test_flat.begin() + i * kPaddedDim,
                         test_flat.begin() + (i + 1) * kPaddedDim);
        td.test.y.push_back(l == d0 ? 0 : 1);
      }
    }
    td.test.count = td.test.y.size();
    tasks.push_back(std::move(td));
  }
  return tasks;
}

}  // namespace hypermask
