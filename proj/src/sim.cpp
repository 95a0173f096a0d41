#include "spikeforge/sim.hpp"

#include <stdexcept>

namespace spikeforge {

void SimConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("sim: dt must be > 0");
  if (n_steps < 1) throw std::invalid_argument("sim: n_steps must be >= 1");
  if (readout == ReadoutMode::MeanOfLastK && (readout_k < 1 || readout_k > n_steps))
    throw std::invalid_argument("sim: readout_k must be in [1, n_steps]");
}

int64_t SpikeRecord::total_spikes() const {
  int64_t t = 0;
  for (int64_t s : layer_spikes) t += s;
  return t;
}

int64_t SpikeRecord::total_neurons() const {
  int64_t t = 0;
  for (int64_t n : layer_neurons) t += n;
  return t;
}

void SimState::reset() {
  for (auto& s : lif) s.reset();
  for (auto& s : relu) s.reset();
  for (auto& s : synapse) s.reset();
}

namespace {

std::vector<int> layer_state_shape(const LayerSpec& s) {
  if (s.kind == LayerKind::Dense) return {s.out_ch};
  return {s.out_shape[0], s.out_shape[1], s.out_shape[2]};
}

double effective_synapse(const NetworkSpec& net, const SimConfig& cfg) {
  return cfg.synapse_tau >= 0 ? cfg.synapse_tau : net.synapse_tau;
}

}  // namespace

SimState make_sim_state(const NetworkSpec& net, const SimConfig& cfg) {
  SimState st;
  st.lif.resize(net.layers.size());
  st.relu.resize(net.layers.size());
  st.synapse.resize(net.layers.size());
  const double tau = effective_synapse(net, cfg);
  st.has_synapse = tau > 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& s = net.layers[i];
    if (!s.is_spiking_capable()) continue;
    std::vector<int> shape = layer_state_shape(s);
    if (s.neuron == NeuronKind::SoftLif)
      st.lif[i] = LifState(shape);
    else
      st.relu[i] = ReluSpikeState(shape);
    if (st.has_synapse) st.synapse[i] = SynapseState(tau, cfg.dt, shape);
  }
  return st;
}

Tensor run_snn(const NetworkSpec& net, const Tensor& input, const SimConfig& cfg,
               SpikeRecord* record, RolloutTrace* trace) {
  if (net.mode != NetMode::Snn)
    throw std::runtime_error("run_snn: network has not been converted to SNN mode");
  cfg.validate();
  const size_t n_layers = net.layers.size();
  SimState st = make_sim_state(net, cfg);

  std::vector<Tensor> counts(n_layers);
  std::vector<int64_t> totals(n_layers, 0);
  for (size_t i = 0; i < n_layers; ++i)
    if (net.layers[i].is_spiking_capable())
      counts[i] = Tensor::zeros(layer_state_shape(net.layers[i]));

  const int window = cfg.window();
  const int window_start = cfg.n_steps - window;
  std::vector<Tensor> out_sums(n_layers);
  Tensor readout_sum;
  Tensor last_out;

  for (int t = 0; t < cfg.n_steps; ++t) {
    Tensor sig = input;
    for (size_t l = 0; l < n_layers; ++l) {
      const LayerSpec& s = net.layers[l];
      Tensor z = layer_linear(s, net.weights[l], sig);
      if (!s.is_spiking_capable()) {
        sig = std::move(z);
        continue;
      }
      Tensor spikes = s.neuron == NeuronKind::SoftLif
                          ? lif_spike_step(st.lif[l], z, cfg.dt, net.neuron_params, &counts[l],
                                           &totals[l])
                          : relu_spike_step(st.relu[l], z, cfg.dt, net.neuron_params, &counts[l],
                                            &totals[l]);
      if (st.has_synapse)
        sig = synapse_step(st.synapse[l], spikes);
      else
        sig = std::move(spikes);
      if (trace && t >= window_start) {
        if (out_sums[l].data.empty()) out_sums[l] = Tensor::zeros(sig.shape);
        add_inplace(out_sums[l], sig);
      }
    }
    if (cfg.readout == ReadoutMode::MeanOfLastK) {
      if (t >= window_start) {
        if (readout_sum.data.empty()) readout_sum = Tensor::zeros(sig.shape);
        add_inplace(readout_sum, sig);
      }
    } else if (t == cfg.n_steps - 1) {
      last_out = std::move(sig);
    }
  }

  if (record) {
    record->layer_spikes.clear();
    record->layer_neurons.clear();
    record->duration = cfg.n_steps * cfg.dt;
    for (size_t l = 0; l < n_layers; ++l) {
      if (!net.layers[l].is_spiking_capable()) continue;
      record->layer_spikes.push_back(totals[l]);
      record->layer_neurons.push_back(counts[l].numel());
    }
  }
  if (trace) {
    trace->mean_output.assign(n_layers, Tensor{});
    trace->spike_counts.assign(n_layers, Tensor{});
    trace->duration = cfg.n_steps * cfg.dt;
    const float inv = 1.0f / static_cast<float>(window);
    for (size_t l = 0; l < n_layers; ++l) {
      if (!net.layers[l].is_spiking_capable()) continue;
      trace->mean_output[l] = out_sums[l];
      scale_inplace(trace->mean_output[l], inv);
      trace->spike_counts[l] = counts[l];
    }
  }
  if (cfg.readout == ReadoutMode::MeanOfLastK) {
    scale_inplace(readout_sum, 1.0f / static_cast<float>(window));
    return readout_sum;
  }
  return last_out;
}

NetworkSpec apply_post_training_scaling(NetworkSpec net, double s) {
  if (!(s >= 1.0))
    throw std::invalid_argument("apply_post_training_scaling: scale must be >= 1");
  net.neuron_params.scale = s;
  return net;
}

double average_firing_rate(const SpikeRecord& rec) {
  if (!(rec.duration > 0)) throw std::invalid_argument("average_firing_rate: duration must be > 0");
  int64_t neurons = rec.total_neurons();
  if (neurons == 0) return 0.0;
  return static_cast<double>(rec.total_spikes()) /
         (static_cast<double>(neurons) * rec.duration);
}

}  // namespace spikeforge
