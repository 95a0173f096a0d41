#pragma once

#include <vector>

#include "spikeforge/kernels.hpp"
#include "spikeforge/neuron.hpp"
#include "spikeforge/tensor.hpp"

namespace spikeforge {

// Recorded operation trace for reverse-mode differentiation. Node ids are
// topological by construction (an op can only reference earlier nodes);
// backward() visits each node exactly once in reverse id order.
class Tape {
 public:
  enum class Op {
    Input,
    Param,
    Conv2d,
    Conv2dTranspose,
    AvgPool2d,
    Dense,
    BiasAddChannel,
    Reshape,
    Activation,
    SurrogateActivation,
    Mse,
    BceDice,
    RatePenalty,
    HybridRatePenalty,
    AddN,
  };

  int input(Tensor value);
  int param(Tensor value);
  int conv2d(int x, int kernel, int stride, Padding pad);
  int conv2d_transpose(int x, int kernel, int stride);
  int avg_pool2d(int x, int window);
  int dense(int x, int weights, int bias);
  int bias_add_channel(int x, int bias);
  int reshape(int x, std::vector<int> new_shape);
  // Elementwise smooth rate activation (value and gradient honor scale).
  int activation(int x, NeuronKind kind, const NeuronParams& p);
  // Forward value is the recorded spiking time-average; backward uses the
  // smooth rate gradient at the tape-computed mean current x.
  int surrogate_activation(int x, NeuronKind kind, const NeuronParams& p, Tensor recorded);
  int mse(int pred, Tensor target);
  int bce_dice(int logits, Tensor mask, double w_bce, double w_dice);
  // weight * mean((rate_hz(x_i) - target)^2) over the smooth rate.
  int rate_penalty(int x, NeuronKind kind, const NeuronParams& p, double target_hz, double weight);
  // Same penalty but on spiking-forward measured rates; the gradient path
  // still runs through the smooth rate at the mean current.
  int hybrid_rate_penalty(int x, NeuronKind kind, const NeuronParams& p, Tensor measured_hz,
                          double target_hz, double weight);
  int add_n(const std::vector<int>& xs);

  // Accumulates gradients of a scalar loss into every reachable node.
  void backward(int loss);

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(int id) const;
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op;
    std::vector<int> inputs;
    Tensor value;
    int stride = 1;
    int window = 0;
    Padding pad = Padding::Valid;
    NeuronKind neuron = NeuronKind::Linear;
    NeuronParams params;
    Tensor aux;  // loss target / recorded output / measured rates
    double c0 = 0.0, c1 = 0.0;
  };

  int push(Node n);
  Tensor& grad_buffer(int id);
  void check_id(int id) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  Tensor zero_;
};

// Plain loss functions (single evaluation, no tape).
double mse_loss(const Tensor& pred, const Tensor& target);
double bce_dice_loss(const Tensor& logits, const Tensor& mask, double w_bce, double w_dice);

}  // namespace spikeforge
