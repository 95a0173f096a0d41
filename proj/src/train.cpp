#include "spikeforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "spikeforge/adam.hpp"
#include "spikeforge/rng.hpp"

namespace spikeforge {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (lr < 0) throw std::invalid_argument("train: learning rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (n_steps < 1) throw std::invalid_argument("train: n_steps must be >= 1");
  if (!(dt > 0)) throw std::invalid_argument("train: dt must be > 0");
  if (patience < 0) throw std::invalid_argument("train: patience must be >= 0");
  if (patience > 0 && (val_fraction <= 0 || val_fraction >= 1))
    throw std::invalid_argument("train: val_fraction must be in (0,1)");
}

std::vector<double> TrainHistory::train_losses() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.train_loss);
  return out;
}

int early_stop(const std::vector<double>& history, int patience) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  const int n = static_cast<int>(history.size());
  if (patience <= 0) return n - 1;
  double best = history[0];
  int best_idx = 0;
  for (int e = 1; e < n; ++e) {
    if (history[static_cast<size_t>(e)] < best - 1e-4) {
      best = history[static_cast<size_t>(e)];
      best_idx = e;
    } else if (e - best_idx >= patience) {
      return best_idx;
    }
  }
  return n - 1;
}

namespace {

Tensor stack_batch(const std::vector<Tensor>& items, const std::vector<size_t>& order, size_t b0,
                   size_t b1) {
  const Tensor& first = items[order[b0]];
  std::vector<int> shape{static_cast<int>(b1 - b0)};
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor out(shape);
  const int64_t stride = first.numel();
  for (size_t i = b0; i < b1; ++i)
    std::copy(items[order[i]].data.begin(), items[order[i]].data.end(),
              out.data.begin() + static_cast<int64_t>(i - b0) * stride);
  return out;
}

Tensor stack_all(const std::vector<Tensor>& items) {
  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), size_t{0});
  return stack_batch(items, order, 0, items.size());
}

std::vector<size_t> shuffled_order(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct Optim {
  std::vector<AdamState> kernels;
  std::vector<AdamState> biases;

  Optim(const NetworkSpec& net, double lr) {
    kernels.resize(net.layers.size());
    biases.resize(net.layers.size());
    for (auto& s : kernels) s.lr = lr;
    for (auto& s : biases) s.lr = lr;
  }

  void apply(NetworkSpec& net, const Tape& tape, const TapeForward& f) {
    for (size_t i = 0; i < net.layers.size(); ++i) {
      if (f.kernel_params[i] < 0) continue;
      adam_step(kernels[i], net.weights[i].kernel, tape.grad(f.kernel_params[i]));
      adam_step(biases[i], net.weights[i].bias, tape.grad(f.bias_params[i]));
    }
  }
};

int task_loss_node(Tape& tape, LossKind kind, int output, Tensor targets) {
  if (kind == LossKind::Mse) return tape.mse(output, std::move(targets));
  return tape.bce_dice(output, std::move(targets), 0.5, 0.5);
}

double plain_task_loss(LossKind kind, const Tensor& out, const Tensor& target) {
  if (kind == LossKind::Mse) return mse_loss(out, target);
  return bce_dice_loss(out, target, 0.5, 0.5);
}

void check_rate_reg(const NetworkSpec& net, const TrainConfig& cfg) {
  if (!cfg.rate_reg) return;
  if (cfg.rate_reg->layer_weights.size() != net.spiking_layer_ids().size())
    throw std::invalid_argument("train: rate_reg weights must cover every spiking layer");
}

void make_train_val(const DataSet& data, const TrainConfig& cfg, DataSet& train, DataSet& val) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.patience > 0 && data.size() >= 10) {
    auto parts = split(data, 1.0 - cfg.val_fraction, mix_seed(cfg.seed, 0xa11d));
    train = std::move(parts.first);
    val = std::move(parts.second);
  } else {
    train = data;
  }
}

struct EarlyStopper {
  int patience = 0;
  double best = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  std::vector<LayerWeights> snapshot;

  bool active() const { return patience > 0; }

  // returns true when training should stop
  bool observe(int epoch, double val, const NetworkSpec& net) {
    if (!active()) return false;
    if (val < best - 1e-4) {
      best = val;
      best_idx = epoch;
      snapshot = net.weights;
      return false;
    }
    return best_idx >= 0 && epoch - best_idx >= patience;
  }

  void restore(NetworkSpec& net) const {
    if (!snapshot.empty()) net.weights = snapshot;
  }
};

double ann_val_loss(const NetworkSpec& net, const DataSet& val, LossKind kind) {
  Tensor out = forward_ann(net, stack_all(val.images));
  return plain_task_loss(kind, out, stack_all(val.targets));
}

SimConfig hybrid_rollout_config(const TrainConfig& cfg) {
  SimConfig roll;
  roll.dt = cfg.dt;
  roll.n_steps = cfg.n_steps;
  roll.synapse_tau = -1.0;  // inherit the converted network's filter
  roll.readout = ReadoutMode::MeanOfLastK;
  roll.readout_k = std::max(1, cfg.n_steps / 2);
  return roll;
}

double snn_val_loss(const NetworkSpec& net, const DataSet& val, const SimConfig& roll,
                    LossKind kind) {
  const int n = static_cast<int>(val.size());
  std::vector<Tensor> outs(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    outs[static_cast<size_t>(i)] = run_snn(net, val.images[static_cast<size_t>(i)], roll);
  return plain_task_loss(kind, stack_all(outs), stack_all(val.targets));
}

}  // namespace

TrainHistory train_ann(NetworkSpec& net, const DataSet& data, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  if (net.mode != NetMode::Ann)
    throw std::invalid_argument("train_ann: network must be in ANN mode");
  check_rate_reg(net, cfg);

  DataSet train, val;
  make_train_val(data, cfg, train, val);
  Optim opt(net, cfg.lr);
  EarlyStopper stopper{cfg.patience};
  TrainHistory hist;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = shuffled_order(train.size(), mix_seed(cfg.seed, 0xe90c + epoch));
    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
      size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
      Tensor bx = stack_batch(train.images, order, b0, b1);
      Tensor bt = stack_batch(train.targets, order, b0, b1);
      Tape tape;
      TapeForward f = forward_on_tape(tape, net, bx);
      int task = task_loss_node(tape, cfg.loss, f.output, std::move(bt));
      double task_loss = tape.value(task)[0];
      int loss = task;
      if (cfg.rate_reg) {
        std::vector<int> terms{task};
        auto ids = net.spiking_layer_ids();
        for (size_t l = 0; l < ids.size(); ++l)
          terms.push_back(tape.rate_penalty(f.currents[static_cast<size_t>(ids[l])],
                                            net.layers[static_cast<size_t>(ids[l])].neuron,
                                            net.neuron_params, cfg.rate_reg->target_hz,
                                            cfg.rate_reg->layer_weights[l]));
        loss = tape.add_n(terms);
      }
      if (!std::isfinite(tape.value(loss)[0]))
        throw std::runtime_error("train_ann: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b0 / cfg.batch_size));
      tape.backward(loss);
      opt.apply(net, tape, f);
      loss_sum += task_loss * static_cast<double>(b1 - b0);
      seen += b1 - b0;
    }
    EpochStats es;
    es.train_loss = loss_sum / static_cast<double>(seen);
    if (!val.images.empty()) es.val_loss = ann_val_loss(net, val, cfg.loss);
    hist.epochs.push_back(es);
    if (!val.images.empty() && stopper.observe(epoch, es.val_loss, net)) break;
  }
  stopper.restore(net);
  hist.stop_epoch = stopper.best_idx >= 0 ? stopper.best_idx
                                          : static_cast<int>(hist.epochs.size()) - 1;
  return hist;
}

NetworkSpec convert(const NetworkSpec& net, double synapse_tau) {
  net.validate();
  if (net.mode == NetMode::Snn)
    throw std::invalid_argument("convert: network already converted");
  if (synapse_tau < 0) throw std::invalid_argument("convert: negative synapse tau");
  for (size_t i = 0; i + 1 < net.layers.size(); ++i) {
    const LayerSpec& s = net.layers[i];
    if (s.kind != LayerKind::AvgPool && !s.is_spiking_capable())
      throw std::invalid_argument("convert: layer " + std::to_string(i) +
                                  " has no spiking counterpart");
  }
  NetworkSpec out = net;
  out.mode = NetMode::Snn;
  out.synapse_tau = synapse_tau;
  out.provenance = "converted";
  out.validate();
  return out;
}

TrainHistory hybrid_finetune(NetworkSpec& net, const DataSet& data, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  if (net.mode != NetMode::Snn)
    throw std::invalid_argument("hybrid_finetune: network must be in SNN mode");
  if (!cfg.hybrid) throw std::invalid_argument("hybrid_finetune: cfg.hybrid must be set");
  check_rate_reg(net, cfg);

  DataSet train, val;
  make_train_val(data, cfg, train, val);
  const SimConfig roll = hybrid_rollout_config(cfg);
  const double duration = roll.n_steps * roll.dt;
  Optim opt(net, cfg.lr);
  EarlyStopper stopper{cfg.patience};
  TrainHistory hist;
  const auto spiking = net.spiking_layer_ids();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = shuffled_order(train.size(), mix_seed(cfg.seed, 0xf17e + epoch));
    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
      size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(cfg.batch_size));
      const int bsz = static_cast<int>(b1 - b0);
      std::vector<RolloutTrace> traces(static_cast<size_t>(bsz));
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < bsz; ++i)
        run_snn(net, train.images[order[b0 + static_cast<size_t>(i)]], roll, nullptr,
                &traces[static_cast<size_t>(i)]);

      std::vector<Tensor> surrogate(net.layers.size());
      std::vector<Tensor> rates(net.layers.size());
      for (int l : spiking) {
        std::vector<int> shape{bsz};
        const Tensor& first = traces[0].mean_output[static_cast<size_t>(l)];
        shape.insert(shape.end(), first.shape.begin(), first.shape.end());
        Tensor sur(shape), rate(shape);
        const int64_t stride = first.numel();
        for (int i = 0; i < bsz; ++i) {
          const auto& tr = traces[static_cast<size_t>(i)];
          std::copy(tr.mean_output[static_cast<size_t>(l)].data.begin(),
                    tr.mean_output[static_cast<size_t>(l)].data.end(),
                    sur.data.begin() + i * stride);
          const Tensor& counts = tr.spike_counts[static_cast<size_t>(l)];
          for (int64_t j = 0; j < stride; ++j)
            rate.data[static_cast<size_t>(i * stride + j)] =
                static_cast<float>(counts[j] / duration);
        }
        surrogate[static_cast<size_t>(l)] = std::move(sur);
        rates[static_cast<size_t>(l)] = std::move(rate);
      }

      Tensor bx = stack_batch(train.images, order, b0, b1);
      Tensor bt = stack_batch(train.targets, order, b0, b1);
      Tape tape;
      TapeForward f = forward_on_tape(tape, net, bx, &surrogate);
      int task = task_loss_node(tape, cfg.loss, f.output, std::move(bt));
      double task_loss = tape.value(task)[0];
      int loss = task;
      if (cfg.rate_reg) {
        std::vector<int> terms{task};
        for (size_t l = 0; l < spiking.size(); ++l) {
          int layer = spiking[l];
          terms.push_back(tape.hybrid_rate_penalty(
              f.currents[static_cast<size_t>(layer)], net.layers[static_cast<size_t>(layer)].neuron,
              net.neuron_params, rates[static_cast<size_t>(layer)], cfg.rate_reg->target_hz,
              cfg.rate_reg->layer_weights[l]));
        }
        loss = tape.add_n(terms);
      }
      if (!std::isfinite(tape.value(loss)[0]))
        throw std::runtime_error("hybrid_finetune: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(b0 / cfg.batch_size));
      tape.backward(loss);
      opt.apply(net, tape, f);
      loss_sum += task_loss * static_cast<double>(b1 - b0);
      seen += b1 - b0;
    }
    EpochStats es;
    es.train_loss = loss_sum / static_cast<double>(seen);
    if (!val.images.empty()) es.val_loss = snn_val_loss(net, val, roll, cfg.loss);
    hist.epochs.push_back(es);
    if (!val.images.empty() && stopper.observe(epoch, es.val_loss, net)) break;
  }
  stopper.restore(net);
  hist.stop_epoch = stopper.best_idx >= 0 ? stopper.best_idx
                                          : static_cast<int>(hist.epochs.size()) - 1;
  net.provenance = "hybrid";
  return hist;
}

}  // namespace spikeforge
