#pragma once

#include <cstdint>

#include "spikeforge/tensor.hpp"

namespace spikeforge {

enum class Smoothing { Hard, Soft };

// Enumerates the rate-mode kinds; conversion maps SoftLif and Relu onto
// their spiking counterparts, Linear stays a plain readout.
enum class NeuronKind { SoftLif, Relu, Linear };

struct NeuronParams {
  double tau_rc = 0.02;     // membrane time constant (s)
  double tau_ref = 0.002;   // refractory period (s)
  double v_th = 1.0;        // firing threshold
  double gamma = 0.005;     // smoothing factor of the softened rectification
  double amplitude = 1.0;   // output scale of the rate / spike train
  double scale = 1.0;       // post-training scaling factor s

  void validate() const;
};

double rho_hard(double x);
// gamma*log(1 + e^(x/gamma)), overflow-safe for large |x|/gamma.
double rho_soft(double x, double gamma);
double rho_soft_gradient(double x, double gamma);  // logistic sigma(x/gamma)

// Steady-state firing rate (Hz, includes amplitude):
//   amplitude / (tau_ref + tau_rc*log(1 + v_th/rho(j - v_th)))
// Hard smoothing returns 0 for j <= v_th.
double lif_rate(double j, const NeuronParams& p, Smoothing smoothing);
// Analytic d rate/d j. Hard smoothing is undefined at j <= v_th (throws
// std::domain_error); soft smoothing is finite everywhere.
double lif_rate_gradient(double j, const NeuronParams& p, Smoothing smoothing);

double relu_rate(double j, const NeuronParams& p);       // amplitude*max(j,0)
double relu_rate_gradient(double j, const NeuronParams& p);

// Layer-facing activation: the rate function with post-training scaling
// folded in, value (1/s)*rate(s*j) so relu nets are unchanged by scaling.
double activation_value(NeuronKind kind, double j, const NeuronParams& p);
double activation_gradient(NeuronKind kind, double j, const NeuronParams& p);
// Firing rate in Hz of the spiking counterpart at scaled current s*j
// (amplitude-free): the quantity the rate regularizer targets.
double rate_hz(NeuronKind kind, double j, const NeuronParams& p);
double rate_hz_gradient(NeuronKind kind, double j, const NeuronParams& p);

struct LifState {
  Tensor voltage;
  Tensor refractory;  // remaining refractory time (s), already >= 0

  explicit LifState(std::vector<int> shape)
      : voltage(Tensor::zeros(shape)), refractory(Tensor::zeros(shape)) {}
  LifState() = default;
  void reset();
};

struct ReluSpikeState {
  Tensor voltage;

  explicit ReluSpikeState(std::vector<int> shape) : voltage(Tensor::zeros(shape)) {}
  ReluSpikeState() = default;
  void reset();
};

// One clock step of the spiking LIF population. `current` holds the raw
// (unscaled) input currents; scaling happens inside. Returns the spike
// train sample (0 or amplitude/(dt*scale)); spike count per neuron is
// accumulated into *counts when given. Reset/refractory use fractional-step
// bookkeeping so the steady-state rate matches the analytic equation.
Tensor lif_spike_step(LifState& state, const Tensor& current, double dt, const NeuronParams& p,
                      Tensor* counts = nullptr, int64_t* total = nullptr);

// Spiking rectified-linear step: integrates dt*scale*max(j,0), emits one
// spike per threshold crossing with repeated subtraction.
Tensor relu_spike_step(ReluSpikeState& state, const Tensor& current, double dt,
                       const NeuronParams& p, Tensor* counts = nullptr, int64_t* total = nullptr);

// First-order low-pass y <- a*y + (1-a)*x with a = exp(-dt/tau_syn).
struct SynapseState {
  double tau_syn = 0.005;
  double dt = 0.001;
  Tensor filtered;

  SynapseState() = default;
  SynapseState(double tau, double step, std::vector<int> shape)
      : tau_syn(tau), dt(step), filtered(Tensor::zeros(shape)) {}
  void reset();
};

const Tensor& synapse_step(SynapseState& state, const Tensor& x);

}  // namespace spikeforge
