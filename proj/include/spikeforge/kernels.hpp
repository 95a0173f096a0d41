#pragma once

#include "spikeforge/tensor.hpp"

namespace spikeforge {

enum class Padding { Valid, Same };

// Output spatial size of a strided cross-correlation.
int conv_out_dim(int in, int k, int stride, Padding pad);
// Leading pad (TF convention: total = max((ceil(in/s)-1)*s + k - in, 0)).
int conv_pad_begin(int in, int k, int stride, Padding pad);

// OpenMP-parallel kernels. Inputs may carry a leading batch axis
// (conv: [N,C,H,W] or [C,H,W]; dense: [N,D] or [D]); output rank mirrors
// the input. Each output element is owned by one thread and accumulated
// serially in double, so results do not depend on the schedule.

// Cross-correlation with kernel [Cout,Cin,kH,kW].
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad);
// Adjoint of conv2d(.,kernel,stride,Valid). Kernel layout [Cin_of_out? see below]:
// kernel is the [Cout,Cin,kH,kW] tensor of the paired conv; input channels here
// equal Cout and the result has Cin channels, spatial (H-1)*stride + kH.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride);
Tensor avg_pool2d(const Tensor& input, int window);
// W [M,N] x + b.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
// Adds bias[c] to every spatial position of channel c.
Tensor bias_add_channel(const Tensor& input, const Tensor& bias);

// Gradients. dX routines also serve as transpose-conv forward paths.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, int stride, Padding pad,
                         const std::vector<int>& input_shape);
Tensor conv2d_grad_kernel(const Tensor& input, const Tensor& grad_out, int stride, Padding pad,
                          const std::vector<int>& kernel_shape);
Tensor avg_pool2d_grad(const Tensor& grad_out, int window, const std::vector<int>& input_shape);
Tensor dense_grad_input(const Tensor& grad_out, const Tensor& weights);
Tensor dense_grad_weights(const Tensor& input, const Tensor& grad_out);
Tensor dense_grad_bias(const Tensor& grad_out);
Tensor bias_add_grad_bias(const Tensor& grad_out, int channels);

namespace reference {

// Serial naive implementations, kept as independent oracles for the
// parallel kernels and as the baseline in the benchmark.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad);
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride);
Tensor avg_pool2d(const Tensor& input, int window);
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

}  // namespace reference

}  // namespace spikeforge
