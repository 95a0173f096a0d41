#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace spikeforge {

// Dense row-major float32 tensor. The only value type that flows through
// networks, autodiff and the simulator.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<float> d);

  static Tensor zeros(std::vector<int> s);
  static Tensor full(std::vector<int> s, float v);
  static Tensor scalar(float v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // Rank-specific indexers used by tests and kernels on small tensors.
  float& at(int i);
  float& at(int i, int j);
  float& at(int i, int j, int k);
  float& at(int i, int j, int k, int l);
  float at(int i) const;
  float at(int i, int j) const;
  float at(int i, int j, int k) const;
  float at(int i, int j, int k, int l) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Elementwise helpers. Shape mismatch throws std::invalid_argument.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, float s);
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
float max_abs(const Tensor& a);

}  // namespace spikeforge
