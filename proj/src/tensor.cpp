#include "spikeforge/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace spikeforge {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Tensor::Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor shape/data size mismatch");
}

Tensor Tensor::zeros(std::vector<int> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<int> s, float v) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = v;
  return t;
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

static inline void check_rank(const Tensor& t, int r) {
  if (t.rank() != r) throw std::invalid_argument("tensor rank mismatch");
}

float& Tensor::at(int i) {
  check_rank(*this, 1);
  return data[static_cast<size_t>(i)];
}
float& Tensor::at(int i, int j) {
  check_rank(*this, 2);
  return data[static_cast<size_t>(i) * shape[1] + j];
}
float& Tensor::at(int i, int j, int k) {
  check_rank(*this, 3);
  return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
}
float& Tensor::at(int i, int j, int k, int l) {
  check_rank(*this, 4);
  return data[((static_cast<size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
}
float Tensor::at(int i) const { return const_cast<Tensor*>(this)->at(i); }
float Tensor::at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }
float Tensor::at(int i, int j, int k) const { return const_cast<Tensor*>(this)->at(i, j, k); }
float Tensor::at(int i, int j, int k, int l) const { return const_cast<Tensor*>(this)->at(i, j, k, l); }

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = a;
  for (auto& x : out.data) x *= s;
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add_inplace");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void scale_inplace(Tensor& a, float s) {
  for (auto& x : a.data) x *= s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (float v : a.data) s += v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += static_cast<double>(a.data[i]) * b.data[i];
  return s;
}

float max_abs(const Tensor& a) {
  float m = 0.0f;
  for (float v : a.data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace spikeforge
