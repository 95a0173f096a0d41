#include "spikeforge/neuron.hpp"

#include <cmath>
#include <stdexcept>

namespace spikeforge {

void NeuronParams::validate() const {
  if (!(tau_rc > 0)) throw std::invalid_argument("NeuronParams: tau_rc must be > 0");
  if (!(tau_ref >= 0)) throw std::invalid_argument("NeuronParams: tau_ref must be >= 0");
  if (!(v_th > 0)) throw std::invalid_argument("NeuronParams: v_th must be > 0");
  if (!(gamma >= 0)) throw std::invalid_argument("NeuronParams: gamma must be >= 0");
  if (!(amplitude > 0)) throw std::invalid_argument("NeuronParams: amplitude must be > 0");
  if (!(scale >= 1)) throw std::invalid_argument("NeuronParams: scale must be >= 1");
}

double rho_hard(double x) { return x > 0 ? x : 0.0; }

double rho_soft(double x, double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument("rho_soft: gamma must be > 0");
  double t = x / gamma;
  if (t > 0) return x + gamma * std::log1p(std::exp(-t));
  return gamma * std::log1p(std::exp(t));
}

double rho_soft_gradient(double x, double gamma) {
  double t = x / gamma;
  if (t > 0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

namespace {

double lif_rate_from_rho(double rho, const NeuronParams& p) {
  if (rho <= 0.0) return 0.0;
  return p.amplitude / (p.tau_ref + p.tau_rc * std::log1p(p.v_th / rho));
}

}  // namespace

double lif_rate(double j, const NeuronParams& p, Smoothing smoothing) {
  double x = j - p.v_th;
  if (smoothing == Smoothing::Hard) {
    if (x <= 0) return 0.0;
    return lif_rate_from_rho(x, p);
  }
  return lif_rate_from_rho(rho_soft(x, p.gamma), p);
}

double lif_rate_gradient(double j, const NeuronParams& p, Smoothing smoothing) {
  double x = j - p.v_th;
  double z, dz;
  if (smoothing == Smoothing::Hard) {
    if (x <= 0)
      throw std::domain_error("lif_rate_gradient: undefined for hard smoothing at j <= v_th");
    z = x;
    dz = 1.0;
  } else {
    z = rho_soft(x, p.gamma);
    dz = rho_soft_gradient(x, p.gamma);
  }
  if (z <= 0.0) return 0.0;
  double denom = p.tau_ref + p.tau_rc * std::log1p(p.v_th / z);
  // d/dj of amplitude/denom, with denom depending on j through z
  return p.amplitude * p.tau_rc * p.v_th * dz / (denom * denom * (z * z + p.v_th * z));
}

double relu_rate(double j, const NeuronParams& p) { return p.amplitude * rho_hard(j); }

double relu_rate_gradient(double j, const NeuronParams& p) {
  return j > 0 ? p.amplitude : 0.0;
}

double activation_value(NeuronKind kind, double j, const NeuronParams& p) {
  switch (kind) {
    case NeuronKind::SoftLif:
      return lif_rate(p.scale * j, p, Smoothing::Soft) / p.scale;
    case NeuronKind::Relu:
      return relu_rate(p.scale * j, p) / p.scale;  // == amplitude*max(j,0)
    case NeuronKind::Linear:
      return j;
  }
  return j;
}

double activation_gradient(NeuronKind kind, double j, const NeuronParams& p) {
  switch (kind) {
    case NeuronKind::SoftLif:
      return lif_rate_gradient(p.scale * j, p, Smoothing::Soft);
    case NeuronKind::Relu:
      return relu_rate_gradient(p.scale * j, p);
    case NeuronKind::Linear:
      return 1.0;
  }
  return 1.0;
}

double rate_hz(NeuronKind kind, double j, const NeuronParams& p) {
  switch (kind) {
    case NeuronKind::SoftLif:
      return lif_rate(p.scale * j, p, Smoothing::Soft) / p.amplitude;
    case NeuronKind::Relu:
      return p.scale * rho_hard(j);
    case NeuronKind::Linear:
      return 0.0;
  }
  return 0.0;
}

double rate_hz_gradient(NeuronKind kind, double j, const NeuronParams& p) {
  switch (kind) {
    case NeuronKind::SoftLif:
      return p.scale * lif_rate_gradient(p.scale * j, p, Smoothing::Soft) / p.amplitude;
    case NeuronKind::Relu:
      return j > 0 ? p.scale : 0.0;
    case NeuronKind::Linear:
      return 0.0;
  }
  return 0.0;
}

void LifState::reset() {
  for (auto& v : voltage.data) v = 0.0f;
  for (auto& r : refractory.data) r = 0.0f;
}

void ReluSpikeState::reset() {
  for (auto& v : voltage.data) v = 0.0f;
}

void SynapseState::reset() {
  for (auto& v : filtered.data) v = 0.0f;
}

Tensor lif_spike_step(LifState& state, const Tensor& current, double dt, const NeuronParams& p,
                      Tensor* counts, int64_t* total) {
  if (!(dt > 0)) throw std::invalid_argument("lif_spike_step: dt must be > 0");
  if (!state.voltage.same_shape(current))
    throw std::invalid_argument("lif_spike_step: state/current shape mismatch");
  Tensor spikes(current.shape);
  const double spike_value = p.amplitude / (dt * p.scale);
  const double decay_window = dt;
  int64_t emitted = 0;
  for (int64_t i = 0; i < current.numel(); ++i) {
    double J = p.scale * current[i];
    double ref = static_cast<double>(state.refractory[i]) - dt;
    double delta = decay_window - std::max(ref, 0.0);
    if (delta < 0) delta = 0;
    double v = state.voltage[i];
    // exact solution of tau_rc dv/dt = -v + J over the non-refractory window
    v += (J - v) * -std::expm1(-delta / p.tau_rc);
    if (v >= p.v_th) {
      // fractional-step reset: charge the refractory clock from the actual
      // threshold-crossing time inside this step
      double num = v - p.v_th;
      double den = J - p.v_th;
      double ratio = den > 0 ? num / den : 1.0;
      if (ratio > 1.0 - 1e-12) ratio = 1.0 - 1e-12;
      double t_spike = dt + p.tau_rc * std::log1p(-ratio);
      if (t_spike < 0) t_spike = 0;
      if (t_spike > dt) t_spike = dt;
      ref = p.tau_ref + t_spike;
      v = 0.0;
      spikes[i] = static_cast<float>(spike_value);
      if (counts) (*counts)[i] += 1.0f;
      ++emitted;
    }
    if (v < 0) v = 0;
    state.voltage[i] = static_cast<float>(v);
    state.refractory[i] = static_cast<float>(std::max(ref, 0.0));
  }
  if (total) *total += emitted;
  return spikes;
}

Tensor relu_spike_step(ReluSpikeState& state, const Tensor& current, double dt,
                       const NeuronParams& p, Tensor* counts, int64_t* total) {
  if (!(dt > 0)) throw std::invalid_argument("relu_spike_step: dt must be > 0");
  if (!state.voltage.same_shape(current))
    throw std::invalid_argument("relu_spike_step: state/current shape mismatch");
  Tensor spikes(current.shape);
  const double spike_value = p.amplitude / (dt * p.scale);
  int64_t emitted = 0;
  for (int64_t i = 0; i < current.numel(); ++i) {
    double j = current[i];
    double v = state.voltage[i] + dt * p.scale * (j > 0 ? j : 0.0);
    int m = 0;
    while (v >= 1.0) {
      v -= 1.0;
      ++m;
    }
    if (m > 0) {
      spikes[i] = static_cast<float>(m * spike_value);
      if (counts) (*counts)[i] += static_cast<float>(m);
      emitted += m;
    }
    state.voltage[i] = static_cast<float>(v);
  }
  if (total) *total += emitted;
  return spikes;
}

const Tensor& synapse_step(SynapseState& state, const Tensor& x) {
  if (!(state.dt > 0) || !(state.tau_syn > 0))
    throw std::invalid_argument("synapse_step: dt and tau_syn must be > 0");
  if (!state.filtered.same_shape(x))
    throw std::invalid_argument("synapse_step: state/input shape mismatch");
  const float a = static_cast<float>(std::exp(-state.dt / state.tau_syn));
  const float b = 1.0f - a;
  for (int64_t i = 0; i < x.numel(); ++i)
    state.filtered[i] = a * state.filtered[i] + b * x[i];
  return state.filtered;
}

}  // namespace spikeforge
