#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "spikeforge/network.hpp"

namespace spikeforge {

enum class ReadoutMode { LastStep, MeanOfLastK };

struct SimConfig {
  double dt = 0.001;
  int n_steps = 200;
  double synapse_tau = -1.0;  // < 0: inherit the network's synapse
  ReadoutMode readout = ReadoutMode::MeanOfLastK;
  int readout_k = 100;

  void validate() const;
  int window() const { return readout == ReadoutMode::MeanOfLastK ? readout_k : 1; }
};

struct SpikeRecord {
  std::vector<int64_t> layer_spikes;   // one entry per spiking layer
  std::vector<int64_t> layer_neurons;
  double duration = 0.0;  // n_steps * dt

  int64_t total_spikes() const;
  int64_t total_neurons() const;
};

// Per-layer time averages over the readout window plus full-rollout spike
// counts; feeds the surrogate backward pass of hybrid training.
struct RolloutTrace {
  std::vector<Tensor> mean_output;   // filtered spike output per spiking layer (else empty)
  std::vector<Tensor> spike_counts;  // per-neuron counts per spiking layer (else empty)
  double duration = 0.0;
};

// Per-rollout mutable state; one instance per concurrent rollout.
struct SimState {
  std::vector<LifState> lif;               // indexed by layer (unused slots empty)
  std::vector<ReluSpikeState> relu;
  std::vector<SynapseState> synapse;
  bool has_synapse = false;

  void reset();
};

SimState make_sim_state(const NetworkSpec& net, const SimConfig& cfg);

// Clock-driven rollout of one sample: the input is presented as a constant
// current for n_steps, spikes are filtered and propagated layer by layer,
// the linear output layer reads out the filtered spike trains.
Tensor run_snn(const NetworkSpec& net, const Tensor& input, const SimConfig& cfg,
               SpikeRecord* record = nullptr, RolloutTrace* trace = nullptr);

// Sets the post-training scaling factor on every neuron; ANN-mode behavior
// of relu networks is unchanged (rates are degree-1 homogeneous for j > 0).
NetworkSpec apply_post_training_scaling(NetworkSpec net, double s);

// total spikes / (total neurons * duration)
double average_firing_rate(const SpikeRecord& rec);

}  // namespace spikeforge
