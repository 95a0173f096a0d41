#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spikeforge/autodiff.hpp"
#include "spikeforge/neuron.hpp"
#include "spikeforge/tensor.hpp"

namespace spikeforge {

enum class Task { LocNet, Cae };
enum class NetMode { Ann, Snn };

enum class LayerKind {
  Conv,      // 3x3 same, stride 1
  PoolConv,  // strided conv pooling, valid
  AvgPool,
  Deconv,    // stride-matched transpose conv
  Dense,
};

struct LayerSpec {
  LayerKind kind;
  NeuronKind neuron = NeuronKind::Linear;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
  int window = 0;
  std::array<int, 3> in_shape{};   // C,H,W; dense layers use {D,1,1}
  std::array<int, 3> out_shape{};

  bool has_weights() const { return kind != LayerKind::AvgPool; }
  bool is_spiking_capable() const { return neuron != NeuronKind::Linear; }
  Padding padding() const { return kind == LayerKind::Conv ? Padding::Same : Padding::Valid; }
};

struct LayerWeights {
  Tensor kernel;
  Tensor bias;
};

struct RateRegConfig {
  double target_hz = 250.0;
  // one weight per regularized (spiking) layer, in network order
  std::vector<double> layer_weights;
};

struct NetworkSpec {
  Task task = Task::LocNet;
  NetMode mode = NetMode::Ann;
  std::string provenance = "ann";  // ann | converted | hybrid
  std::vector<LayerSpec> layers;
  std::vector<LayerWeights> weights;  // parallel to layers (empty for AvgPool)
  NeuronParams neuron_params;
  double synapse_tau = 0.0;  // 0: no synaptic filter attached

  void validate() const;
  int output_dim() const;
  std::vector<int> spiking_layer_ids() const;
};

// 3x(conv + stride-2 conv pool) then dense head ending in 4 linear outputs.
NetworkSpec build_locnet(std::array<int, 3> input_shape, const std::vector<int>& channels,
                         const std::vector<int>& dense_widths, const NeuronParams& np,
                         uint64_t seed);

// Encoder conv/avg-pool stacks mirrored by a deconv decoder; 10 conv-type
// layers, linear per-pixel logit output, no skip connections.
NetworkSpec build_cae(std::array<int, 3> input_shape, const std::vector<int>& channels,
                      const NeuronParams& np, uint64_t seed);

// Plain dense stack, used by the toy fidelity and regularization setups.
NetworkSpec build_dense_net(const std::vector<int>& widths, NeuronKind hidden,
                            const NeuronParams& np, uint64_t seed, Task task = Task::LocNet);

// Linear part of one layer (weights + bias, or pooling), shared by the ANN
// forward, the tape forward and the spiking simulator.
Tensor layer_linear(const LayerSpec& spec, const LayerWeights& w, const Tensor& x);

// Rate-mode forward pass; accepts a single sample or a leading batch axis.
Tensor forward_ann(const NetworkSpec& net, const Tensor& input);

struct TapeForward {
  int output = -1;
  std::vector<int> kernel_params;  // node id per layer (-1 where unweighted)
  std::vector<int> bias_params;
  std::vector<int> currents;  // pre-activation node per layer (-1 where none)
};

// When surrogate_outputs is given (one recorded time-average per spiking
// layer, empty elsewhere), spiking activations become straight-through
// nodes: forward values come from the recording, gradients from the smooth
// rate function at the tape-computed mean current.
TapeForward forward_on_tape(Tape& tape, const NetworkSpec& net, const Tensor& input,
                            const std::vector<Tensor>* surrogate_outputs = nullptr);

// sum_l w_l * mean_i (rate_l[i] - target)^2
double rate_regularization(const std::vector<Tensor>& layer_rates_hz, const RateRegConfig& cfg);

// Default per-layer weights: 1.0 for the spiking layer feeding the output,
// 0.01 elsewhere.
RateRegConfig default_rate_reg(const NetworkSpec& net, double target_hz = 250.0,
                               double hidden_weight = 0.01, double output_weight = 1.0);

}  // namespace spikeforge
