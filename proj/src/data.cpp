#include "spikeforge/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "spikeforge/rng.hpp"

namespace spikeforge {

namespace {

constexpr uint64_t kBoxStream = 0xb0c5;
constexpr uint64_t kMaskStream = 0x3a5c;
constexpr uint64_t kSplitStream = 0x5917;

}  // namespace

std::vector<BoxSample> gen_box_dataset(int n, uint64_t seed, int image_size) {
  if (n < 1) throw std::invalid_argument("gen_box_dataset: n must be >= 1");
  if (image_size < 16) throw std::invalid_argument("gen_box_dataset: image too small");
  const int s = image_size;
  std::vector<BoxSample> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic) if (n > 64)
  for (int idx = 0; idx < n; ++idx) {
    Rng rng(mix_seed(mix_seed(seed, kBoxStream), static_cast<uint64_t>(idx)));
    BoxSample sample;
    sample.image = Tensor({1, s, s});
    // noise background
    for (auto& p : sample.image.data) p = static_cast<float>(rng.uniform(0.0, 0.35));
    const bool ellipse = rng.coin();
    const double a = rng.uniform(0.08, 0.22) * s;  // half extents in pixels
    const double b = rng.uniform(0.08, 0.22) * s;
    const double cx = rng.uniform(a + 1.0, s - 1.0 - a);
    const double cy = rng.uniform(b + 1.0, s - 1.0 - b);
    const double brightness = rng.uniform(0.75, 1.0);
    int min_x = s, max_x = -1, min_y = s, max_y = -1;
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        double dx = (x - cx) / a, dy = (y - cy) / b;
        bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                              : std::fabs(x - cx) <= a && std::fabs(y - cy) <= b;
        if (!inside) continue;
        sample.image.at(0, y, x) = static_cast<float>(brightness - rng.uniform(0.0, 0.05));
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
    // the tight box of what actually got rendered, normalized to [0,1]
    sample.box = {static_cast<float>(min_x) / s, static_cast<float>(min_y) / s,
                  static_cast<float>(max_x + 1) / s, static_cast<float>(max_y + 1) / s};
    out[static_cast<size_t>(idx)] = std::move(sample);
  }
  return out;
}

std::vector<MaskSample> gen_mask_dataset(int n, uint64_t seed, int image_size) {
  if (n < 1) throw std::invalid_argument("gen_mask_dataset: n must be >= 1");
  if (image_size < 16) throw std::invalid_argument("gen_mask_dataset: image too small");
  const int s = image_size;
  std::vector<MaskSample> out(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic) if (n > 64)
  for (int idx = 0; idx < n; ++idx) {
    Rng rng(mix_seed(mix_seed(seed, kMaskStream), static_cast<uint64_t>(idx)));
    MaskSample sample;
    sample.image = Tensor({1, s, s});
    sample.mask = Tensor({1, s, s});
    const int blobs = 1 + rng.uniform_int(0, 2);
    double cx[3], cy[3], sx[3], sy[3];
    cx[0] = rng.uniform(0.3, 0.7) * s;
    cy[0] = rng.uniform(0.3, 0.7) * s;
    sx[0] = rng.uniform(0.10, 0.18) * s;
    sy[0] = rng.uniform(0.10, 0.18) * s;
    for (int g = 1; g < blobs; ++g) {
      // satellites sit inside the first blob's half-level set, which keeps
      // the thresholded union 4-connected
      double r = 0.8 * std::min(sx[0], sy[0]);
      cx[g] = cx[0] + rng.uniform(-r, r);
      cy[g] = cy[0] + rng.uniform(-r, r);
      sx[g] = rng.uniform(0.08, 0.15) * s;
      sy[g] = rng.uniform(0.08, 0.15) * s;
    }
    const double tex_fx = rng.uniform(0.5, 1.5) / s;
    const double tex_fy = rng.uniform(0.5, 1.5) / s;
    const double tex_px = rng.uniform(0.0, 6.283185307179586);
    const double tex_py = rng.uniform(0.0, 6.283185307179586);
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        double f = 0.0;
        for (int g = 0; g < blobs; ++g) {
          double dx = (x - cx[g]) / sx[g], dy = (y - cy[g]) / sy[g];
          f += std::exp(-0.5 * (dx * dx + dy * dy));
        }
        const bool in_mask = f >= 0.5;
        sample.mask.at(0, y, x) = in_mask ? 1.0f : 0.0f;
        double t = (f - 0.25) / 0.5;
        t = std::clamp(t, 0.0, 1.0);
        double tex = 0.05 * std::sin(6.283185307179586 * tex_fx * x + tex_px) *
                     std::sin(6.283185307179586 * tex_fy * y + tex_py);
        double v = 0.30 + 0.35 * t + tex + rng.uniform(-0.07, 0.07);
        sample.image.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    out[static_cast<size_t>(idx)] = std::move(sample);
  }
  return out;
}

DataSet to_dataset(const std::vector<BoxSample>& samples) {
  DataSet d;
  d.task = Task::LocNet;
  for (const auto& s : samples) {
    d.images.push_back(s.image);
    d.targets.push_back(Tensor({4}, {s.box[0], s.box[1], s.box[2], s.box[3]}));
  }
  return d;
}

DataSet to_dataset(const std::vector<MaskSample>& samples) {
  DataSet d;
  d.task = Task::Cae;
  for (const auto& s : samples) {
    d.images.push_back(s.image);
    d.targets.push_back(s.mask);
  }
  return d;
}

DataSet generate_dataset(Task task, int n, uint64_t seed, int image_size) {
  if (task == Task::LocNet) return to_dataset(gen_box_dataset(n, seed, image_size));
  return to_dataset(gen_mask_dataset(n, seed, image_size));
}

std::pair<DataSet, DataSet> split(const DataSet& data, double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw std::invalid_argument("split: fraction must be in (0,1)");
  const size_t n = data.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed, kSplitStream));
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  const size_t n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(n)));
  DataSet train, test;
  train.task = test.task = data.task;
  for (size_t i = 0; i < n; ++i) {
    DataSet& dst = i < n_train ? train : test;
    dst.images.push_back(data.images[order[i]]);
    dst.targets.push_back(data.targets[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

namespace {

constexpr char kMagic[4] = {'S', 'F', 'D', 'S'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_f32_array(std::ostream& os, const std::vector<float>& data) {
  for (float v : data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
  }
}

void read_f32_array(std::istream& is, std::vector<float>& data) {
  for (auto& v : data) {
    uint32_t bits = read_u32(is);
    std::memcpy(&v, &bits, 4);
  }
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape) write_u32(os, static_cast<uint32_t>(d));
  write_f32_array(os, t.data);
}

Tensor read_tensor(std::istream& is) {
  uint32_t rank = read_u32(is);
  if (rank > 8) throw std::runtime_error("dataset: corrupt tensor rank");
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(read_u32(is));
  Tensor t(shape);
  read_f32_array(is, t.data);
  return t;
}

}  // namespace

void save_dataset(const std::string& path, const DataSet& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + tmp);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, data.task == Task::LocNet ? 0u : 1u);
    write_u32(os, static_cast<uint32_t>(data.size()));
    for (size_t i = 0; i < data.size(); ++i) {
      write_tensor(os, data.images[i]);
      write_tensor(os, data.targets[i]);
    }
    if (!os) throw std::runtime_error("save_dataset: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

DataSet load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_dataset: bad magic in " + path);
  if (read_u32(is) != kVersion) throw std::runtime_error("load_dataset: unsupported version");
  DataSet d;
  d.task = read_u32(is) == 0 ? Task::LocNet : Task::Cae;
  uint32_t count = read_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    d.images.push_back(read_tensor(is));
    d.targets.push_back(read_tensor(is));
  }
  if (!is) throw std::runtime_error("load_dataset: truncated file " + path);
  return d;
}

DataSet load_or_generate(Task task, int n, uint64_t seed, int image_size,
                         const std::string& cache_path) {
  if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
    DataSet d = load_dataset(cache_path);
    if (d.task == task && static_cast<int>(d.size()) == n) return d;
  }
  DataSet d = generate_dataset(task, n, seed, image_size);
  if (!cache_path.empty()) save_dataset(cache_path, d);
  return d;
}

}  // namespace spikeforge
