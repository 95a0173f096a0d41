#include "spikeforge/kernels.hpp"

#include <stdexcept>

namespace spikeforge {

namespace {

struct ConvGeom {
  int n, ci, h, w;      // input
  int co, kh, kw;       // kernel
  int oh, ow;           // output
  int ph, pw;           // leading pads
  bool batched;
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, int stride, Padding pad) {
  if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d: kernel must be [Co,Ci,kH,kW]");
  ConvGeom g{};
  g.batched = input.rank() == 4;
  if (!g.batched && input.rank() != 3)
    throw std::invalid_argument("conv2d: input must be [C,H,W] or [N,C,H,W]");
  g.n = g.batched ? input.dim(0) : 1;
  g.ci = input.dim(g.batched ? 1 : 0);
  g.h = input.dim(g.batched ? 2 : 1);
  g.w = input.dim(g.batched ? 3 : 2);
  g.co = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  if (kernel.dim(1) != g.ci)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(g.ci) +
                                " do not match kernel C_in " + std::to_string(kernel.dim(1)));
  g.ph = conv_pad_begin(g.h, g.kh, stride, pad);
  g.pw = conv_pad_begin(g.w, g.kw, stride, pad);
  if (pad == Padding::Valid && (g.kh > g.h || g.kw > g.w))
    throw std::invalid_argument("conv2d: kernel larger than input");
  g.oh = conv_out_dim(g.h, g.kh, stride, pad);
  g.ow = conv_out_dim(g.w, g.kw, stride, pad);
  return g;
}

std::vector<int> conv_out_shape(const ConvGeom& g) {
  return g.batched ? std::vector<int>{g.n, g.co, g.oh, g.ow} : std::vector<int>{g.co, g.oh, g.ow};
}

}  // namespace

int conv_out_dim(int in, int k, int stride, Padding pad) {
  if (pad == Padding::Same) return (in + stride - 1) / stride;
  return (in - k) / stride + 1;
}

int conv_pad_begin(int in, int k, int stride, Padding pad) {
  if (pad == Padding::Valid) return 0;
  int out = (in + stride - 1) / stride;
  int total = (out - 1) * stride + k - in;
  if (total < 0) total = 0;
  return total / 2;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad) {
  ConvGeom g = conv_geometry(input, kernel, stride, pad);
  Tensor out(conv_out_shape(g));
  const float* x = input.data.data();
  const float* k = kernel.data.data();
  float* y = out.data.data();
  const int64_t work = static_cast<int64_t>(g.n) * g.co * g.oh * g.ow * g.ci * g.kh * g.kw;
#pragma omp parallel for collapse(2) if (work > 65536)
  for (int n = 0; n < g.n; ++n) {
    for (int co = 0; co < g.co; ++co) {
      for (int oh = 0; oh < g.oh; ++oh) {
        for (int ow = 0; ow < g.ow; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < g.ci; ++ci) {
            const float* xp = x + ((static_cast<int64_t>(n) * g.ci + ci) * g.h) * g.w;
            const float* kp = k + ((static_cast<int64_t>(co) * g.ci + ci) * g.kh) * g.kw;
            for (int kh = 0; kh < g.kh; ++kh) {
              int ih = oh * stride + kh - g.ph;
              if (ih < 0 || ih >= g.h) continue;
              for (int kw = 0; kw < g.kw; ++kw) {
                int iw = ow * stride + kw - g.pw;
                if (iw < 0 || iw >= g.w) continue;
                acc += static_cast<double>(xp[static_cast<int64_t>(ih) * g.w + iw]) *
                       kp[kh * g.kw + kw];
              }
            }
          }
          y[((static_cast<int64_t>(n) * g.co + co) * g.oh + oh) * g.ow + ow] =
              static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, int stride, Padding pad,
                         const std::vector<int>& input_shape) {
  Tensor probe(input_shape);  // zero tensor, used for geometry only
  ConvGeom g = conv_geometry(probe, kernel, stride, pad);
  bool gbatched = grad_out.rank() == 4;
  if (gbatched != g.batched || grad_out.dim(gbatched ? 1 : 0) != g.co ||
      grad_out.dim(gbatched ? 2 : 1) != g.oh || grad_out.dim(gbatched ? 3 : 2) != g.ow)
    throw std::invalid_argument("conv2d_grad_input: grad shape " + grad_out.shape_str() +
                                " inconsistent with input " + shape_to_string(input_shape));
  Tensor out(input_shape);
  const float* dy = grad_out.data.data();
  const float* k = kernel.data.data();
  float* dx = out.data.data();
  const int64_t work = static_cast<int64_t>(g.n) * g.co * g.oh * g.ow * g.ci * g.kh * g.kw;
#pragma omp parallel for collapse(2) if (work > 65536)
  for (int n = 0; n < g.n; ++n) {
    for (int ci = 0; ci < g.ci; ++ci) {
      std::vector<double> slab(static_cast<size_t>(g.h) * g.w, 0.0);
      for (int co = 0; co < g.co; ++co) {
        const float* dyp = dy + ((static_cast<int64_t>(n) * g.co + co) * g.oh) * g.ow;
        const float* kp = k + ((static_cast<int64_t>(co) * g.ci + ci) * g.kh) * g.kw;
        for (int oh = 0; oh < g.oh; ++oh) {
          for (int ow = 0; ow < g.ow; ++ow) {
            double d = dyp[static_cast<int64_t>(oh) * g.ow + ow];
            for (int kh = 0; kh < g.kh; ++kh) {
              int ih = oh * stride + kh - g.ph;
              if (ih < 0 || ih >= g.h) continue;
              for (int kw = 0; kw < g.kw; ++kw) {
                int iw = ow * stride + kw - g.pw;
                if (iw < 0 || iw >= g.w) continue;
                slab[static_cast<size_t>(ih) * g.w + iw] += d * kp[kh * g.kw + kw];
              }
            }
          }
        }
      }
      float* dxp = dx + ((static_cast<int64_t>(n) * g.ci + ci) * g.h) * g.w;
      for (size_t i = 0; i < slab.size(); ++i) dxp[i] = static_cast<float>(slab[i]);
    }
  }
  return out;
}

Tensor conv2d_grad_kernel(const Tensor& input, const Tensor& grad_out, int stride, Padding pad,
                          const std::vector<int>& kernel_shape) {
  Tensor kprobe(kernel_shape);
  ConvGeom g = conv_geometry(input, kprobe, stride, pad);
  Tensor out(kernel_shape);
  const float* x = input.data.data();
  const float* dy = grad_out.data.data();
  float* dk = out.data.data();
#pragma omp parallel for collapse(2) if (g.co * g.ci > 4)
  for (int co = 0; co < g.co; ++co) {
    for (int ci = 0; ci < g.ci; ++ci) {
      for (int kh = 0; kh < g.kh; ++kh) {
        for (int kw = 0; kw < g.kw; ++kw) {
          double acc = 0.0;
          for (int n = 0; n < g.n; ++n) {
            const float* xp = x + ((static_cast<int64_t>(n) * g.ci + ci) * g.h) * g.w;
            const float* dyp = dy + ((static_cast<int64_t>(n) * g.co + co) * g.oh) * g.ow;
            for (int oh = 0; oh < g.oh; ++oh) {
              int ih = oh * stride + kh - g.ph;
              if (ih < 0 || ih >= g.h) continue;
              for (int ow = 0; ow < g.ow; ++ow) {
                int iw = ow * stride + kw - g.pw;
                if (iw < 0 || iw >= g.w) continue;
                acc += static_cast<double>(xp[static_cast<int64_t>(ih) * g.w + iw]) *
                       dyp[static_cast<int64_t>(oh) * g.ow + ow];
              }
            }
          }
          dk[((static_cast<int64_t>(co) * g.ci + ci) * g.kh + kh) * g.kw + kw] =
              static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride) {
  if (kernel.rank() != 4) throw std::invalid_argument("conv2d_transpose: kernel must be 4D");
  bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3)
    throw std::invalid_argument("conv2d_transpose: input must be [C,H,W] or [N,C,H,W]");
  int n = batched ? input.dim(0) : 1;
  int c = input.dim(batched ? 1 : 0);
  int h = input.dim(batched ? 2 : 1);
  int w = input.dim(batched ? 3 : 2);
  if (c != kernel.dim(0))
    throw std::invalid_argument("conv2d_transpose: input channels " + std::to_string(c) +
                                " do not match kernel dim 0 " + std::to_string(kernel.dim(0)));
  int out_h = (h - 1) * stride + kernel.dim(2);
  int out_w = (w - 1) * stride + kernel.dim(3);
  std::vector<int> out_shape = batched
                                   ? std::vector<int>{n, kernel.dim(1), out_h, out_w}
                                   : std::vector<int>{kernel.dim(1), out_h, out_w};
  (void)n;
  return conv2d_grad_input(input, kernel, stride, Padding::Valid, out_shape);
}

Tensor avg_pool2d(const Tensor& input, int window) {
  if (window <= 0) throw std::invalid_argument("avg_pool2d: window must be positive");
  bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3)
    throw std::invalid_argument("avg_pool2d: input must be [C,H,W] or [N,C,H,W]");
  int n = batched ? input.dim(0) : 1;
  int c = input.dim(batched ? 1 : 0);
  int h = input.dim(batched ? 2 : 1);
  int w = input.dim(batched ? 3 : 2);
  if (h % window != 0 || w % window != 0)
    throw std::invalid_argument("avg_pool2d: spatial dims " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by window " +
                                std::to_string(window));
  int oh = h / window, ow = w / window;
  Tensor out(batched ? std::vector<int>{n, c, oh, ow} : std::vector<int>{c, oh, ow});
  const float* x = input.data.data();
  float* y = out.data.data();
  const double inv = 1.0 / (static_cast<double>(window) * window);
#pragma omp parallel for collapse(2) if (static_cast<int64_t>(n) * c * h * w > 65536)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* xp = x + ((static_cast<int64_t>(ni) * c + ci) * h) * w;
      float* yp = y + ((static_cast<int64_t>(ni) * c + ci) * oh) * ow;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (int a = 0; a < window; ++a)
            for (int b = 0; b < window; ++b)
              acc += xp[static_cast<int64_t>(i * window + a) * w + j * window + b];
          yp[static_cast<int64_t>(i) * ow + j] = static_cast<float>(acc * inv);
        }
      }
    }
  }
  return out;
}

Tensor avg_pool2d_grad(const Tensor& grad_out, int window, const std::vector<int>& input_shape) {
  Tensor out(input_shape);
  bool batched = out.rank() == 4;
  int n = batched ? out.dim(0) : 1;
  int c = out.dim(batched ? 1 : 0);
  int h = out.dim(batched ? 2 : 1);
  int w = out.dim(batched ? 3 : 2);
  int oh = h / window, ow = w / window;
  const float inv = 1.0f / (static_cast<float>(window) * window);
  const float* dy = grad_out.data.data();
  float* dx = out.data.data();
#pragma omp parallel for collapse(2) if (static_cast<int64_t>(n) * c * h * w > 65536)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* dyp = dy + ((static_cast<int64_t>(ni) * c + ci) * oh) * ow;
      float* dxp = dx + ((static_cast<int64_t>(ni) * c + ci) * h) * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          dxp[static_cast<int64_t>(i) * w + j] =
              dyp[static_cast<int64_t>(i / window) * ow + j / window] * inv;
    }
  }
  return out;
}

namespace {

struct DenseGeom {
  int n, d, m;
  bool batched;
};

DenseGeom dense_geometry(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw std::invalid_argument("dense: weights must be [M,N]");
  DenseGeom g{};
  g.batched = input.rank() == 2;
  if (!g.batched && input.rank() != 1)
    throw std::invalid_argument("dense: input must be [N] or [B,N]");
  g.n = g.batched ? input.dim(0) : 1;
  g.d = input.dim(g.batched ? 1 : 0);
  g.m = weights.dim(0);
  if (weights.dim(1) != g.d)
    throw std::invalid_argument("dense: input dim " + std::to_string(g.d) +
                                " does not match weights N " + std::to_string(weights.dim(1)));
  if (bias.rank() != 1 || bias.dim(0) != g.m)
    throw std::invalid_argument("dense: bias must be [M]");
  return g;
}

}  // namespace

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  DenseGeom g = dense_geometry(input, weights, bias);
  Tensor out(g.batched ? std::vector<int>{g.n, g.m} : std::vector<int>{g.m});
  const float* x = input.data.data();
  const float* wt = weights.data.data();
  float* y = out.data.data();
#pragma omp parallel for collapse(2) if (static_cast<int64_t>(g.n) * g.m * g.d > 65536)
  for (int n = 0; n < g.n; ++n) {
    for (int m = 0; m < g.m; ++m) {
      const float* xp = x + static_cast<int64_t>(n) * g.d;
      const float* wp = wt + static_cast<int64_t>(m) * g.d;
      double acc = bias[m];
      for (int i = 0; i < g.d; ++i) acc += static_cast<double>(xp[i]) * wp[i];
      y[static_cast<int64_t>(n) * g.m + m] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor dense_grad_input(const Tensor& grad_out, const Tensor& weights) {
  bool batched = grad_out.rank() == 2;
  int n = batched ? grad_out.dim(0) : 1;
  int m = grad_out.dim(batched ? 1 : 0);
  int d = weights.dim(1);
  if (weights.dim(0) != m) throw std::invalid_argument("dense_grad_input: shape mismatch");
  Tensor out(batched ? std::vector<int>{n, d} : std::vector<int>{d});
  const float* dy = grad_out.data.data();
  const float* wt = weights.data.data();
  float* dx = out.data.data();
#pragma omp parallel for collapse(2) if (static_cast<int64_t>(n) * m * d > 65536)
  for (int ni = 0; ni < n; ++ni) {
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int mi = 0; mi < m; ++mi)
        acc += static_cast<double>(dy[static_cast<int64_t>(ni) * m + mi]) *
               wt[static_cast<int64_t>(mi) * d + i];
      dx[static_cast<int64_t>(ni) * d + i] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor dense_grad_weights(const Tensor& input, const Tensor& grad_out) {
  bool batched = input.rank() == 2;
  int n = batched ? input.dim(0) : 1;
  int d = input.dim(batched ? 1 : 0);
  int m = grad_out.dim(batched ? 1 : 0);
  Tensor out({m, d});
  const float* x = input.data.data();
  const float* dy = grad_out.data.data();
  float* dw = out.data.data();
#pragma omp parallel for if (static_cast<int64_t>(m) * d * n > 65536)
  for (int mi = 0; mi < m; ++mi) {
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int ni = 0; ni < n; ++ni)
        acc += static_cast<double>(dy[static_cast<int64_t>(ni) * m + mi]) *
               x[static_cast<int64_t>(ni) * d + i];
      dw[static_cast<int64_t>(mi) * d + i] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor dense_grad_bias(const Tensor& grad_out) {
  bool batched = grad_out.rank() == 2;
  int n = batched ? grad_out.dim(0) : 1;
  int m = grad_out.dim(batched ? 1 : 0);
  Tensor out({m});
  for (int ni = 0; ni < n; ++ni)
    for (int mi = 0; mi < m; ++mi) out[mi] += grad_out[static_cast<int64_t>(ni) * m + mi];
  return out;
}

Tensor bias_add_channel(const Tensor& input, const Tensor& bias) {
  bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3)
    throw std::invalid_argument("bias_add_channel: input must be [C,H,W] or [N,C,H,W]");
  int c = input.dim(batched ? 1 : 0);
  if (bias.rank() != 1 || bias.dim(0) != c)
    throw std::invalid_argument("bias_add_channel: bias must be [C]");
  int n = batched ? input.dim(0) : 1;
  int64_t hw = static_cast<int64_t>(input.dim(batched ? 2 : 1)) * input.dim(batched ? 3 : 2);
  Tensor out = input;
  float* y = out.data.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      float b = bias[ci];
      float* p = y + (static_cast<int64_t>(ni) * c + ci) * hw;
      for (int64_t i = 0; i < hw; ++i) p[i] += b;
    }
  return out;
}

Tensor bias_add_grad_bias(const Tensor& grad_out, int channels) {
  bool batched = grad_out.rank() == 4;
  int n = batched ? grad_out.dim(0) : 1;
  int64_t hw = static_cast<int64_t>(grad_out.dim(batched ? 2 : 1)) * grad_out.dim(batched ? 3 : 2);
  Tensor out({channels});
  const float* dy = grad_out.data.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < channels; ++ci) {
      const float* p = dy + (static_cast<int64_t>(ni) * channels + ci) * hw;
      double acc = 0.0;
      for (int64_t i = 0; i < hw; ++i) acc += p[i];
      out[ci] += static_cast<float>(acc);
    }
  return out;
}

namespace reference {

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Padding pad) {
  bool batched = input.rank() == 4;
  int n = batched ? input.dim(0) : 1;
  int ci_n = input.dim(batched ? 1 : 0);
  int h = input.dim(batched ? 2 : 1);
  int w = input.dim(batched ? 3 : 2);
  int co_n = kernel.dim(0), kh_n = kernel.dim(2), kw_n = kernel.dim(3);
  if (kernel.dim(1) != ci_n) throw std::invalid_argument("reference::conv2d: channel mismatch");
  int oh_n = conv_out_dim(h, kh_n, stride, pad);
  int ow_n = conv_out_dim(w, kw_n, stride, pad);
  int ph = conv_pad_begin(h, kh_n, stride, pad);
  int pw = conv_pad_begin(w, kw_n, stride, pad);
  Tensor out(batched ? std::vector<int>{n, co_n, oh_n, ow_n}
                     : std::vector<int>{co_n, oh_n, ow_n});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < co_n; ++co)
      for (int oh = 0; oh < oh_n; ++oh)
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < ci_n; ++ci)
            for (int kh = 0; kh < kh_n; ++kh)
              for (int kw = 0; kw < kw_n; ++kw) {
                int ih = oh * stride + kh - ph;
                int iw = ow * stride + kw - pw;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                double xv = batched ? input.at(ni, ci, ih, iw) : input.at(ci, ih, iw);
                acc += xv * kernel.at(co, ci, kh, kw);
              }
          if (batched)
            out.at(ni, co, oh, ow) = static_cast<float>(acc);
          else
            out.at(co, oh, ow) = static_cast<float>(acc);
        }
  return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride) {
  bool batched = input.rank() == 4;
  int n = batched ? input.dim(0) : 1;
  int c = input.dim(batched ? 1 : 0);
  int h = input.dim(batched ? 2 : 1);
  int w = input.dim(batched ? 3 : 2);
  if (c != kernel.dim(0)) throw std::invalid_argument("reference::conv2d_transpose: channel mismatch");
  int oc = kernel.dim(1), kh_n = kernel.dim(2), kw_n = kernel.dim(3);
  int oh_n = (h - 1) * stride + kh_n;
  int ow_n = (w - 1) * stride + kw_n;
  Tensor out(batched ? std::vector<int>{n, oc, oh_n, ow_n} : std::vector<int>{oc, oh_n, ow_n});
  // scatter form: every input pixel stamps the kernel into the output
  for (int ni = 0; ni < n; ++ni)
    for (int ic = 0; ic < c; ++ic)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < w; ++iw) {
          double v = batched ? input.at(ni, ic, ih, iw) : input.at(ic, ih, iw);
          for (int o = 0; o < oc; ++o)
            for (int kh = 0; kh < kh_n; ++kh)
              for (int kw = 0; kw < kw_n; ++kw) {
                int oh = ih * stride + kh;
                int ow = iw * stride + kw;
                float add = static_cast<float>(v * kernel.at(ic, o, kh, kw));
                if (batched)
                  out.at(ni, o, oh, ow) += add;
                else
                  out.at(o, oh, ow) += add;
              }
        }
  return out;
}

Tensor avg_pool2d(const Tensor& input, int window) {
  bool batched = input.rank() == 4;
  int n = batched ? input.dim(0) : 1;
  int c = input.dim(batched ? 1 : 0);
  int h = input.dim(batched ? 2 : 1);
  int w = input.dim(batched ? 3 : 2);
  if (h % window != 0 || w % window != 0)
    throw std::invalid_argument("reference::avg_pool2d: dims not divisible");
  int oh_n = h / window, ow_n = w / window;
  Tensor out(batched ? std::vector<int>{n, c, oh_n, ow_n} : std::vector<int>{c, oh_n, ow_n});
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int oh = 0; oh < oh_n; ++oh)
        for (int ow = 0; ow < ow_n; ++ow) {
          double acc = 0.0;
          for (int a = 0; a < window; ++a)
            for (int b = 0; b < window; ++b) {
              int ih = oh * window + a, iw = ow * window + b;
              acc += batched ? input.at(ni, ci, ih, iw) : input.at(ci, ih, iw);
            }
          float v = static_cast<float>(acc / (window * window));
          if (batched)
            out.at(ni, ci, oh, ow) = v;
          else
            out.at(ci, oh, ow) = v;
        }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  bool batched = input.rank() == 2;
  int n = batched ? input.dim(0) : 1;
  int d = input.dim(batched ? 1 : 0);
  int m = weights.dim(0);
  if (weights.dim(1) != d || bias.dim(0) != m)
    throw std::invalid_argument("reference::dense: shape mismatch");
  Tensor out(batched ? std::vector<int>{n, m} : std::vector<int>{m});
  for (int ni = 0; ni < n; ++ni)
    for (int mi = 0; mi < m; ++mi) {
      double acc = bias[mi];
      for (int i = 0; i < d; ++i) {
        double xv = batched ? input.at(ni, i) : input[i];
        acc += xv * weights.at(mi, i);
      }
      if (batched)
        out.at(ni, mi) = static_cast<float>(acc);
      else
        out[mi] = static_cast<float>(acc);
    }
  return out;
}

}  // namespace reference

}  // namespace spikeforge
