#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spikeforge/network.hpp"
#include "spikeforge/tensor.hpp"

namespace spikeforge {

// One localization sample: bright ellipse or rectangle over noise, with its
// tight bounding box (x_min, y_min, x_max, y_max) normalized to [0,1].
struct BoxSample {
  Tensor image;  // [1,S,S] in [0,1]
  std::array<float, 4> box;
};

// One segmentation sample: smooth random blob mask plus a textured, noisy
// intensity image that roughly encodes the mask.
struct MaskSample {
  Tensor image;  // [1,S,S] in [0,1]
  Tensor mask;   // [1,S,S] in {0,1}
};

struct DataSet {
  Task task = Task::LocNet;
  std::vector<Tensor> images;
  std::vector<Tensor> targets;  // [4] boxes or [1,S,S] masks

  size_t size() const { return images.size(); }
};

std::vector<BoxSample> gen_box_dataset(int n, uint64_t seed, int image_size = 64);
std::vector<MaskSample> gen_mask_dataset(int n, uint64_t seed, int image_size = 32);

DataSet to_dataset(const std::vector<BoxSample>& samples);
DataSet to_dataset(const std::vector<MaskSample>& samples);
DataSet generate_dataset(Task task, int n, uint64_t seed, int image_size);

// Seeded shuffle, then the first round(fraction*n) samples become train.
std::pair<DataSet, DataSet> split(const DataSet& data, double train_fraction, uint64_t seed);

// "SFDS" little-endian binary cache, bit-exact across platforms.
void save_dataset(const std::string& path, const DataSet& data);
DataSet load_dataset(const std::string& path);

// Loads the cache when it matches (task and count), otherwise generates
// and, when a cache path is given, writes it.
DataSet load_or_generate(Task task, int n, uint64_t seed, int image_size,
                         const std::string& cache_path);

}  // namespace spikeforge
