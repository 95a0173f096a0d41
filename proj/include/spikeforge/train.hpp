#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "spikeforge/data.hpp"
#include "spikeforge/network.hpp"
#include "spikeforge/sim.hpp"

namespace spikeforge {

enum class LossKind { Mse, BceDice };

struct TrainConfig {
  int epochs = 50;
  double lr = 0.01;
  LossKind loss = LossKind::Mse;
  std::optional<RateRegConfig> rate_reg;
  bool hybrid = false;
  int n_steps = 50;   // spiking rollout length of hybrid forward passes
  double dt = 0.001;
  int patience = 0;   // 0: run all epochs
  int batch_size = 16;
  double val_fraction = 0.1;  // carved from the training data when patience > 0
  uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int stop_epoch = -1;  // best epoch per the early-stopping rule

  std::vector<double> train_losses() const;
};

// Minibatch Adam on the task loss (+ rate regularization when configured).
// Aborts with a diagnostic on non-finite loss.
TrainHistory train_ann(NetworkSpec& net, const DataSet& data, const TrainConfig& cfg);

// Swaps rate neurons for their spiking counterparts and attaches the synaptic
// filter. Weights are untouched; no thresholding or normalization involved.
NetworkSpec convert(const NetworkSpec& net, double synapse_tau = 0.005);

// Alternating fine-tuning: spiking rollouts forward, smooth rate-function
// gradients backward (evaluated at each layer's readout-window mean current),
// Adam updates per minibatch.
TrainHistory hybrid_finetune(NetworkSpec& net, const DataSet& data, const TrainConfig& cfg);

// First epoch index after which no improvement > 1e-4 happened for
// `patience` epochs; the last epoch if never triggered.
int early_stop(const std::vector<double>& history, int patience);

}  // namespace spikeforge
