#include "spikeforge/network.hpp"

#include <cmath>
#include <stdexcept>

#include "spikeforge/rng.hpp"

namespace spikeforge {

namespace {

std::array<int, 3> infer_out_shape(const LayerSpec& s) {
  const int h = s.in_shape[1], w = s.in_shape[2];
  switch (s.kind) {
    case LayerKind::Conv:
      return {s.out_ch, conv_out_dim(h, s.kernel, 1, Padding::Same),
              conv_out_dim(w, s.kernel, 1, Padding::Same)};
    case LayerKind::PoolConv:
      return {s.out_ch, conv_out_dim(h, s.kernel, s.stride, Padding::Valid),
              conv_out_dim(w, s.kernel, s.stride, Padding::Valid)};
    case LayerKind::AvgPool:
      return {s.in_ch, h / s.window, w / s.window};
    case LayerKind::Deconv:
      return {s.out_ch, (h - 1) * s.stride + s.kernel, (w - 1) * s.stride + s.kernel};
    case LayerKind::Dense:
      return {s.out_ch, 1, 1};
  }
  return {};
}

int64_t flat(const std::array<int, 3>& s) {
  return static_cast<int64_t>(s[0]) * s[1] * s[2];
}

Tensor glorot(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

LayerWeights init_weights(const LayerSpec& s, const NeuronParams& np, Rng& rng) {
  LayerWeights w;
  switch (s.kind) {
    case LayerKind::Conv:
    case LayerKind::PoolConv:
      w.kernel = glorot({s.out_ch, s.in_ch, s.kernel, s.kernel}, s.in_ch * s.kernel * s.kernel,
                        s.out_ch * s.kernel * s.kernel, rng);
      w.bias = Tensor::zeros({s.out_ch});
      break;
    case LayerKind::Deconv:
      // kernel layout [in_ch, out_ch, kH, kW], matching the adjoint conv
      w.kernel = glorot({s.in_ch, s.out_ch, s.kernel, s.kernel}, s.in_ch * s.kernel * s.kernel,
                        s.out_ch * s.kernel * s.kernel, rng);
      w.bias = Tensor::zeros({s.out_ch});
      break;
    case LayerKind::Dense:
      w.kernel = glorot({s.out_ch, s.in_ch}, s.in_ch, s.out_ch, rng);
      w.bias = Tensor::zeros({s.out_ch});
      break;
    case LayerKind::AvgPool:
      break;
  }
  // LIF neurons are silent (and gradient-dead at small gamma) below
  // threshold, so their biases start above it, spread like tuning-curve
  // intercepts; cf. the encoder defaults of NEF-style simulators.
  if (s.neuron == NeuronKind::SoftLif && w.bias.numel() > 0)
    for (auto& b : w.bias.data)
      b = static_cast<float>(np.v_th * rng.uniform(1.05, 1.45));
  return w;
}

void apply_activation(Tensor& t, NeuronKind kind, const NeuronParams& p) {
  const int64_t count = t.numel();
#pragma omp parallel for if (count > 16384)
  for (int64_t i = 0; i < count; ++i)
    t[i] = static_cast<float>(activation_value(kind, t[i], p));
}

Tensor flatten_for_dense(const Tensor& x, int expected_dim) {
  if (x.rank() == 1 || x.rank() == 2) {
    if (x.dim(x.rank() - 1) != expected_dim)
      throw std::invalid_argument("dense layer: input dim mismatch");
    return x;
  }
  if (x.rank() == 3) return Tensor({expected_dim}, x.data);
  return Tensor({x.dim(0), expected_dim}, x.data);
}

}  // namespace

void NetworkSpec::validate() const {
  neuron_params.validate();
  if (layers.empty()) throw std::invalid_argument("network: no layers");
  if (weights.size() != layers.size())
    throw std::invalid_argument("network: weights/layers size mismatch");
  if (synapse_tau < 0) throw std::invalid_argument("network: negative synapse tau");
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    if (infer_out_shape(s) != s.out_shape)
      throw std::invalid_argument("network: layer " + std::to_string(i) +
                                  " out_shape inconsistent with geometry");
    if (i + 1 < layers.size()) {
      const LayerSpec& next = layers[i + 1];
      bool ok = next.kind == LayerKind::Dense
                    ? flat(s.out_shape) == next.in_shape[0] && next.in_shape[1] == 1 &&
                          next.in_shape[2] == 1
                    : s.out_shape == next.in_shape;
      if (!ok)
        throw std::invalid_argument("network: layer " + std::to_string(i) + " output " +
                                    "does not compose with layer " + std::to_string(i + 1));
    }
    if (s.has_weights()) {
      const LayerWeights& w = weights[i];
      std::vector<int> want_kernel =
          s.kind == LayerKind::Dense ? std::vector<int>{s.out_ch, s.in_ch}
          : s.kind == LayerKind::Deconv
              ? std::vector<int>{s.in_ch, s.out_ch, s.kernel, s.kernel}
              : std::vector<int>{s.out_ch, s.in_ch, s.kernel, s.kernel};
      if (w.kernel.shape != want_kernel || w.bias.shape != std::vector<int>{s.out_ch})
        throw std::invalid_argument("network: layer " + std::to_string(i) + " weight shapes");
    }
    if (mode == NetMode::Snn && i + 1 < layers.size() && s.kind != LayerKind::AvgPool &&
        !s.is_spiking_capable())
      throw std::invalid_argument("network: snn mode requires spiking-capable hidden layers");
  }
}

int NetworkSpec::output_dim() const {
  return static_cast<int>(flat(layers.back().out_shape));
}

std::vector<int> NetworkSpec::spiking_layer_ids() const {
  std::vector<int> ids;
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].is_spiking_capable()) ids.push_back(static_cast<int>(i));
  return ids;
}

NetworkSpec build_locnet(std::array<int, 3> input_shape, const std::vector<int>& channels,
                         const std::vector<int>& dense_widths, const NeuronParams& np,
                         uint64_t seed) {
  np.validate();
  if (channels.empty() || dense_widths.empty())
    throw std::invalid_argument("build_locnet: empty channel or dense plan");
  if (dense_widths.back() != 4)
    throw std::invalid_argument("build_locnet: final dense width must be 4 (box coordinates)");
  const int stages = static_cast<int>(channels.size());
  const int div = 1 << stages;
  if (input_shape[1] % div != 0 || input_shape[2] % div != 0)
    throw std::invalid_argument("build_locnet: spatial dims must be divisible by " +
                                std::to_string(div));
  NetworkSpec net;
  net.task = Task::LocNet;
  net.neuron_params = np;
  std::array<int, 3> cur = input_shape;
  for (int ch : channels) {
    LayerSpec conv{LayerKind::Conv, NeuronKind::SoftLif, cur[0], ch, 3, 1, 0, cur, {}};
    conv.out_shape = infer_out_shape(conv);
    net.layers.push_back(conv);
    cur = conv.out_shape;
    LayerSpec pool{LayerKind::PoolConv, NeuronKind::SoftLif, cur[0], ch, 2, 2, 0, cur, {}};
    pool.out_shape = infer_out_shape(pool);
    net.layers.push_back(pool);
    cur = pool.out_shape;
  }
  int in_dim = static_cast<int>(flat(cur));
  for (size_t i = 0; i < dense_widths.size(); ++i) {
    bool last = i + 1 == dense_widths.size();
    LayerSpec d{LayerKind::Dense,
                last ? NeuronKind::Linear : NeuronKind::SoftLif,
                in_dim,
                dense_widths[i],
                0,
                1,
                0,
                {in_dim, 1, 1},
                {}};
    d.out_shape = infer_out_shape(d);
    net.layers.push_back(d);
    in_dim = dense_widths[i];
  }
  for (size_t i = 0; i < net.layers.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    net.weights.push_back(init_weights(net.layers[i], np, rng));
  }
  net.validate();
  return net;
}

NetworkSpec build_cae(std::array<int, 3> input_shape, const std::vector<int>& channels,
                      const NeuronParams& np, uint64_t seed) {
  np.validate();
  if (channels.size() != 2) throw std::invalid_argument("build_cae: channel plan must have 2 stages");
  if (input_shape[1] % 4 != 0 || input_shape[2] % 4 != 0)
    throw std::invalid_argument("build_cae: spatial dims must be divisible by 4");
  const int c1 = channels[0], c2 = channels[1];
  NetworkSpec net;
  net.task = Task::Cae;
  net.neuron_params = np;
  std::array<int, 3> cur = input_shape;
  auto add = [&](LayerKind kind, NeuronKind neuron, int out_ch, int kernel, int stride,
                 int window) {
    LayerSpec s{kind, neuron, cur[0], out_ch, kernel, stride, window, cur, {}};
    s.out_shape = infer_out_shape(s);
    net.layers.push_back(s);
    cur = s.out_shape;
  };
  // encoder
  add(LayerKind::Conv, NeuronKind::Relu, c1, 3, 1, 0);
  add(LayerKind::Conv, NeuronKind::Relu, c1, 3, 1, 0);
  add(LayerKind::AvgPool, NeuronKind::Linear, cur[0], 0, 1, 2);
  add(LayerKind::Conv, NeuronKind::Relu, c2, 3, 1, 0);
  add(LayerKind::Conv, NeuronKind::Relu, c2, 3, 1, 0);
  add(LayerKind::AvgPool, NeuronKind::Linear, cur[0], 0, 1, 2);
  // bottleneck
  add(LayerKind::Conv, NeuronKind::Relu, c2, 3, 1, 0);
  // decoder
  add(LayerKind::Deconv, NeuronKind::Relu, c2, 2, 2, 0);
  add(LayerKind::Conv, NeuronKind::Relu, c1, 3, 1, 0);
  add(LayerKind::Deconv, NeuronKind::Relu, c1, 2, 2, 0);
  add(LayerKind::Conv, NeuronKind::Relu, c1, 3, 1, 0);
  add(LayerKind::Conv, NeuronKind::Linear, input_shape[0], 3, 1, 0);  // logits
  for (size_t i = 0; i < net.layers.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    net.weights.push_back(init_weights(net.layers[i], np, rng));
  }
  net.validate();
  return net;
}

NetworkSpec build_dense_net(const std::vector<int>& widths, NeuronKind hidden,
                            const NeuronParams& np, uint64_t seed, Task task) {
  np.validate();
  if (widths.size() < 2) throw std::invalid_argument("build_dense_net: need at least 2 widths");
  NetworkSpec net;
  net.task = task;
  net.neuron_params = np;
  for (size_t i = 1; i < widths.size(); ++i) {
    bool last = i + 1 == widths.size();
    LayerSpec d{LayerKind::Dense,
                last ? NeuronKind::Linear : hidden,
                widths[i - 1],
                widths[i],
                0,
                1,
                0,
                {widths[i - 1], 1, 1},
                {}};
    d.out_shape = infer_out_shape(d);
    net.layers.push_back(d);
  }
  for (size_t i = 0; i < net.layers.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    net.weights.push_back(init_weights(net.layers[i], np, rng));
  }
  net.validate();
  return net;
}

Tensor layer_linear(const LayerSpec& spec, const LayerWeights& w, const Tensor& x) {
  switch (spec.kind) {
    case LayerKind::Conv:
      return bias_add_channel(conv2d(x, w.kernel, 1, Padding::Same), w.bias);
    case LayerKind::PoolConv:
      return bias_add_channel(conv2d(x, w.kernel, spec.stride, Padding::Valid), w.bias);
    case LayerKind::Deconv:
      return bias_add_channel(conv2d_transpose(x, w.kernel, spec.stride), w.bias);
    case LayerKind::AvgPool:
      return avg_pool2d(x, spec.window);
    case LayerKind::Dense:
      return dense(flatten_for_dense(x, spec.in_ch), w.kernel, w.bias);
  }
  throw std::logic_error("layer_linear: unknown kind");
}

Tensor forward_ann(const NetworkSpec& net, const Tensor& input) {
  if (net.mode != NetMode::Ann)
    throw std::runtime_error("forward_ann: network is in SNN mode");
  Tensor x = input;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    x = layer_linear(net.layers[i], net.weights[i], x);
    if (net.layers[i].is_spiking_capable())
      apply_activation(x, net.layers[i].neuron, net.neuron_params);
  }
  return x;
}

TapeForward forward_on_tape(Tape& tape, const NetworkSpec& net, const Tensor& input,
                            const std::vector<Tensor>* surrogate_outputs) {
  if (surrogate_outputs && surrogate_outputs->size() != net.layers.size())
    throw std::invalid_argument("forward_on_tape: surrogate outputs size mismatch");
  TapeForward out;
  out.kernel_params.assign(net.layers.size(), -1);
  out.bias_params.assign(net.layers.size(), -1);
  out.currents.assign(net.layers.size(), -1);
  int x = tape.input(input);
  bool batched = input.rank() == 4 || (net.layers[0].kind == LayerKind::Dense && input.rank() == 2);
  int batch = batched ? input.dim(0) : 1;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& s = net.layers[i];
    int k = -1, b = -1;
    if (s.has_weights()) {
      k = tape.param(net.weights[i].kernel);
      b = tape.param(net.weights[i].bias);
      out.kernel_params[i] = k;
      out.bias_params[i] = b;
    }
    switch (s.kind) {
      case LayerKind::Conv:
        x = tape.bias_add_channel(tape.conv2d(x, k, 1, Padding::Same), b);
        break;
      case LayerKind::PoolConv:
        x = tape.bias_add_channel(tape.conv2d(x, k, s.stride, Padding::Valid), b);
        break;
      case LayerKind::Deconv:
        x = tape.bias_add_channel(tape.conv2d_transpose(x, k, s.stride), b);
        break;
      case LayerKind::AvgPool:
        x = tape.avg_pool2d(x, s.window);
        break;
      case LayerKind::Dense: {
        if (tape.value(x).rank() > 2) {
          std::vector<int> flat_shape =
              batched ? std::vector<int>{batch, s.in_ch} : std::vector<int>{s.in_ch};
          x = tape.reshape(x, flat_shape);
        }
        x = tape.dense(x, k, b);
        break;
      }
    }
    if (s.is_spiking_capable()) {
      out.currents[i] = x;
      if (surrogate_outputs)
        x = tape.surrogate_activation(x, s.neuron, net.neuron_params, (*surrogate_outputs)[i]);
      else
        x = tape.activation(x, s.neuron, net.neuron_params);
    }
  }
  out.output = x;
  return out;
}

double rate_regularization(const std::vector<Tensor>& layer_rates_hz, const RateRegConfig& cfg) {
  if (layer_rates_hz.size() != cfg.layer_weights.size())
    throw std::invalid_argument("rate_regularization: weights length must equal layer count");
  double total = 0.0;
  for (size_t l = 0; l < layer_rates_hz.size(); ++l) {
    const Tensor& r = layer_rates_hz[l];
    double acc = 0.0;
    for (int64_t i = 0; i < r.numel(); ++i) {
      if (r[i] < 0) throw std::invalid_argument("rate_regularization: negative rate");
      double d = static_cast<double>(r[i]) - cfg.target_hz;
      acc += d * d;
    }
    total += cfg.layer_weights[l] * acc / static_cast<double>(r.numel());
  }
  return total;
}

RateRegConfig default_rate_reg(const NetworkSpec& net, double target_hz, double hidden_weight,
                               double output_weight) {
  RateRegConfig cfg;
  cfg.target_hz = target_hz;
  size_t n = net.spiking_layer_ids().size();
  cfg.layer_weights.assign(n, hidden_weight);
  if (n > 0) cfg.layer_weights.back() = output_weight;
  return cfg;
}

}  // namespace spikeforge
