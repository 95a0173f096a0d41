#include "spikeforge/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace spikeforge {

namespace {

void check_binary_mask(const Tensor& mask) {
  for (float v : mask.data)
    if (v != 0.0f && v != 1.0f)
      throw std::invalid_argument("bce_dice: mask must be binary");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("mse: shape mismatch " + pred.shape_str() + " vs " +
                                target.shape_str());
  double acc = 0.0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    double d = static_cast<double>(pred[i]) - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

double bce_dice_loss(const Tensor& logits, const Tensor& mask, double w_bce, double w_dice) {
  if (!logits.same_shape(mask))
    throw std::invalid_argument("bce_dice: shape mismatch " + logits.shape_str() + " vs " +
                                mask.shape_str());
  check_binary_mask(mask);
  const double eps = 1.0;
  double bce = 0.0, sum_p = 0.0, sum_m = 0.0, sum_pm = 0.0;
  for (int64_t i = 0; i < logits.numel(); ++i) {
    double z = logits[i];
    double m = mask[i];
    bce += std::max(z, 0.0) - z * m + std::log1p(std::exp(-std::fabs(z)));
    double p = sigmoid(z);
    sum_p += p;
    sum_m += m;
    sum_pm += p * m;
  }
  bce /= static_cast<double>(logits.numel());
  double dice = 1.0 - (2.0 * sum_pm + eps) / (sum_p + sum_m + eps);
  return w_bce * bce + w_dice * dice;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("tape: bad node id");
}

int Tape::input(Tensor value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::param(Tensor value) {
  Node n;
  n.op = Op::Param;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::conv2d(int x, int kernel, int stride, Padding pad) {
  check_id(x);
  check_id(kernel);
  Node n;
  n.op = Op::Conv2d;
  n.inputs = {x, kernel};
  n.stride = stride;
  n.pad = pad;
  n.value = spikeforge::conv2d(value(x), value(kernel), stride, pad);
  return push(std::move(n));
}

int Tape::conv2d_transpose(int x, int kernel, int stride) {
  check_id(x);
  check_id(kernel);
  Node n;
  n.op = Op::Conv2dTranspose;
  n.inputs = {x, kernel};
  n.stride = stride;
  n.value = spikeforge::conv2d_transpose(value(x), value(kernel), stride);
  return push(std::move(n));
}

int Tape::avg_pool2d(int x, int window) {
  check_id(x);
  Node n;
  n.op = Op::AvgPool2d;
  n.inputs = {x};
  n.window = window;
  n.value = spikeforge::avg_pool2d(value(x), window);
  return push(std::move(n));
}

int Tape::dense(int x, int weights, int bias) {
  check_id(x);
  check_id(weights);
  check_id(bias);
  Node n;
  n.op = Op::Dense;
  n.inputs = {x, weights, bias};
  n.value = spikeforge::dense(value(x), value(weights), value(bias));
  return push(std::move(n));
}

int Tape::bias_add_channel(int x, int bias) {
  check_id(x);
  check_id(bias);
  Node n;
  n.op = Op::BiasAddChannel;
  n.inputs = {x, bias};
  n.value = spikeforge::bias_add_channel(value(x), value(bias));
  return push(std::move(n));
}

int Tape::reshape(int x, std::vector<int> new_shape) {
  check_id(x);
  if (shape_numel(new_shape) != value(x).numel())
    throw std::invalid_argument("reshape: element count mismatch");
  Node n;
  n.op = Op::Reshape;
  n.inputs = {x};
  n.value = Tensor(std::move(new_shape), value(x).data);
  return push(std::move(n));
}

int Tape::activation(int x, NeuronKind kind, const NeuronParams& p) {
  check_id(x);
  Node n;
  n.op = Op::Activation;
  n.inputs = {x};
  n.neuron = kind;
  n.params = p;
  const Tensor& in = value(x);
  Tensor out(in.shape);
  const int64_t count = in.numel();
#pragma omp parallel for if (count > 16384)
  for (int64_t i = 0; i < count; ++i)
    out[i] = static_cast<float>(activation_value(kind, in[i], p));
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::surrogate_activation(int x, NeuronKind kind, const NeuronParams& p, Tensor recorded) {
  check_id(x);
  if (!recorded.same_shape(value(x)))
    throw std::invalid_argument("surrogate_activation: recorded shape mismatch");
  Node n;
  n.op = Op::SurrogateActivation;
  n.inputs = {x};
  n.neuron = kind;
  n.params = p;
  n.value = std::move(recorded);
  return push(std::move(n));
}

int Tape::mse(int pred, Tensor target) {
  check_id(pred);
  Node n;
  n.op = Op::Mse;
  n.inputs = {pred};
  n.value = Tensor::scalar(static_cast<float>(mse_loss(value(pred), target)));
  n.aux = std::move(target);
  return push(std::move(n));
}

int Tape::bce_dice(int logits, Tensor mask, double w_bce, double w_dice) {
  check_id(logits);
  Node n;
  n.op = Op::BceDice;
  n.inputs = {logits};
  n.c0 = w_bce;
  n.c1 = w_dice;
  n.value = Tensor::scalar(static_cast<float>(bce_dice_loss(value(logits), mask, w_bce, w_dice)));
  n.aux = std::move(mask);
  return push(std::move(n));
}

int Tape::rate_penalty(int x, NeuronKind kind, const NeuronParams& p, double target_hz,
                       double weight) {
  check_id(x);
  Node n;
  n.op = Op::RatePenalty;
  n.inputs = {x};
  n.neuron = kind;
  n.params = p;
  n.c0 = target_hz;
  n.c1 = weight;
  const Tensor& in = value(x);
  double acc = 0.0;
  for (int64_t i = 0; i < in.numel(); ++i) {
    double d = rate_hz(kind, in[i], p) - target_hz;
    acc += d * d;
  }
  n.value = Tensor::scalar(static_cast<float>(weight * acc / static_cast<double>(in.numel())));
  return push(std::move(n));
}

int Tape::hybrid_rate_penalty(int x, NeuronKind kind, const NeuronParams& p, Tensor measured_hz,
                              double target_hz, double weight) {
  check_id(x);
  if (!measured_hz.same_shape(value(x)))
    throw std::invalid_argument("hybrid_rate_penalty: measured shape mismatch");
  Node n;
  n.op = Op::HybridRatePenalty;
  n.inputs = {x};
  n.neuron = kind;
  n.params = p;
  n.c0 = target_hz;
  n.c1 = weight;
  double acc = 0.0;
  for (int64_t i = 0; i < measured_hz.numel(); ++i) {
    double d = static_cast<double>(measured_hz[i]) - target_hz;
    acc += d * d;
  }
  n.value =
      Tensor::scalar(static_cast<float>(weight * acc / static_cast<double>(measured_hz.numel())));
  n.aux = std::move(measured_hz);
  return push(std::move(n));
}

int Tape::add_n(const std::vector<int>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: empty input list");
  Node n;
  n.op = Op::AddN;
  double acc = 0.0;
  for (int id : xs) {
    check_id(id);
    if (value(id).numel() != 1) throw std::invalid_argument("add_n: inputs must be scalars");
    acc += value(id)[0];
    n.inputs.push_back(id);
  }
  n.value = Tensor::scalar(static_cast<float>(acc));
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(int id) {
  Tensor& g = grads_[static_cast<size_t>(id)];
  if (g.data.empty()) g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape);
  return g;
}

const Tensor& Tape::grad(int id) const {
  check_id(id);
  if (grads_.size() != nodes_.size() || grads_[static_cast<size_t>(id)].data.empty())
    throw std::logic_error("tape: no gradient recorded for node");
  return grads_[static_cast<size_t>(id)];
}

void Tape::backward(int loss) {
  check_id(loss);
  if (value(loss).numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar node");
  grads_.assign(nodes_.size(), Tensor{});
  grad_buffer(loss)[0] = 1.0f;
  for (int id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = grads_[static_cast<size_t>(id)];
    if (g.data.empty()) continue;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::Conv2d: {
        const Tensor& x = value(n.inputs[0]);
        const Tensor& k = value(n.inputs[1]);
        add_inplace(grad_buffer(n.inputs[0]),
                    conv2d_grad_input(g, k, n.stride, n.pad, x.shape));
        add_inplace(grad_buffer(n.inputs[1]),
                    conv2d_grad_kernel(x, g, n.stride, n.pad, k.shape));
        break;
      }
      case Op::Conv2dTranspose: {
        const Tensor& x = value(n.inputs[0]);
        const Tensor& k = value(n.inputs[1]);
        add_inplace(grad_buffer(n.inputs[0]), spikeforge::conv2d(g, k, n.stride, Padding::Valid));
        add_inplace(grad_buffer(n.inputs[1]),
                    conv2d_grad_kernel(g, x, n.stride, Padding::Valid, k.shape));
        break;
      }
      case Op::AvgPool2d: {
        const Tensor& x = value(n.inputs[0]);
        add_inplace(grad_buffer(n.inputs[0]), avg_pool2d_grad(g, n.window, x.shape));
        break;
      }
      case Op::Dense: {
        const Tensor& x = value(n.inputs[0]);
        const Tensor& w = value(n.inputs[1]);
        add_inplace(grad_buffer(n.inputs[0]), dense_grad_input(g, w));
        add_inplace(grad_buffer(n.inputs[1]), dense_grad_weights(x, g));
        add_inplace(grad_buffer(n.inputs[2]), dense_grad_bias(g));
        break;
      }
      case Op::BiasAddChannel: {
        const Tensor& b = value(n.inputs[1]);
        add_inplace(grad_buffer(n.inputs[0]), g);
        add_inplace(grad_buffer(n.inputs[1]), bias_add_grad_bias(g, b.dim(0)));
        break;
      }
      case Op::Reshape: {
        const Tensor& x = value(n.inputs[0]);
        Tensor gx(x.shape, g.data);
        add_inplace(grad_buffer(n.inputs[0]), gx);
        break;
      }
      case Op::Activation:
      case Op::SurrogateActivation: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& gx = grad_buffer(n.inputs[0]);
        const int64_t count = x.numel();
#pragma omp parallel for if (count > 16384)
        for (int64_t i = 0; i < count; ++i)
          gx[i] += g[i] * static_cast<float>(activation_gradient(n.neuron, x[i], n.params));
        break;
      }
      case Op::Mse: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& gx = grad_buffer(n.inputs[0]);
        const double s = 2.0 * g[0] / static_cast<double>(x.numel());
        for (int64_t i = 0; i < x.numel(); ++i)
          gx[i] += static_cast<float>(s * (static_cast<double>(x[i]) - n.aux[i]));
        break;
      }
      case Op::BceDice: {
        const Tensor& z = value(n.inputs[0]);
        Tensor& gz = grad_buffer(n.inputs[0]);
        const double eps = 1.0;
        double sum_p = 0.0, sum_m = 0.0, sum_pm = 0.0;
        for (int64_t i = 0; i < z.numel(); ++i) {
          double p = sigmoid(z[i]);
          sum_p += p;
          sum_m += n.aux[i];
          sum_pm += p * n.aux[i];
        }
        const double t = 2.0 * sum_pm + eps;
        const double s = sum_p + sum_m + eps;
        const double inv_n = 1.0 / static_cast<double>(z.numel());
        for (int64_t i = 0; i < z.numel(); ++i) {
          double p = sigmoid(z[i]);
          double m = n.aux[i];
          double d_bce = (p - m) * inv_n;
          double d_dice_dp = -(2.0 * m * s - t) / (s * s);
          double d_dice = d_dice_dp * p * (1.0 - p);
          gz[i] += static_cast<float>(g[0] * (n.c0 * d_bce + n.c1 * d_dice));
        }
        break;
      }
      case Op::RatePenalty: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& gx = grad_buffer(n.inputs[0]);
        const double s = g[0] * n.c1 * 2.0 / static_cast<double>(x.numel());
        for (int64_t i = 0; i < x.numel(); ++i) {
          double r = rate_hz(n.neuron, x[i], n.params);
          gx[i] += static_cast<float>(s * (r - n.c0) * rate_hz_gradient(n.neuron, x[i], n.params));
        }
        break;
      }
      case Op::HybridRatePenalty: {
        const Tensor& x = value(n.inputs[0]);
        Tensor& gx = grad_buffer(n.inputs[0]);
        const double s = g[0] * n.c1 * 2.0 / static_cast<double>(x.numel());
        for (int64_t i = 0; i < x.numel(); ++i)
          gx[i] += static_cast<float>(s * (static_cast<double>(n.aux[i]) - n.c0) *
                                      rate_hz_gradient(n.neuron, x[i], n.params));
        break;
      }
      case Op::AddN: {
        for (int in_id : n.inputs) grad_buffer(in_id)[0] += g[0];
        break;
      }
    }
  }
  // Parameters always end with a well-defined (possibly zero) gradient.
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::Param && grads_[i].data.empty())
      grads_[i] = Tensor::zeros(nodes_[i].value.shape);
}

}  // namespace spikeforge
