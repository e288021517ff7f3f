// Copyright 2026 the bevocc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bevocc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace bevocc {

namespace op_counters {
namespace {
OpCounters g_counters;
}
void reset() { g_counters = OpCounters{}; }
OpCounters snapshot() { return g_counters; }
}  // namespace op_counters

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// floor((in + 2*pad - K)/stride) + 1, the usual convention; trailing rows
// that cannot seat a full window are dropped.
std::int64_t out_extent(std::int64_t in, int kernel, int stride, int pad, const char* op, const char* axis) {
  const std::int64_t span = in + 2 * static_cast<std::int64_t>(pad) - kernel;
  require(span >= 0, std::string(op) + ": kernel " + std::to_string(kernel) + " exceeds padded " + axis +
                         " extent " + std::to_string(in + 2 * pad));
  return span / stride + 1;
}

// Column block size keeps the im2col scratch near 8 MB.
std::int64_t tile_columns(std::int64_t k, std::int64_t n) {
  return std::clamp<std::int64_t>(2'000'000 / std::max<std::int64_t>(k, 1), 64, n);
}

void add_bias(Tensor& out, const Tensor& bias, std::int64_t batch, std::int64_t cout, std::int64_t spatial) {
  for (std::int64_t b = 0; b < batch; ++b) {
    float* base = out.data() + b * cout * spatial;
    for (std::int64_t c = 0; c < cout; ++c) {
      const float v = bias[c];
      float* row = base + c * spatial;
      for (std::int64_t i = 0; i < spatial; ++i) row[i] += v;
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Conv2dParams& p) {
  ++op_counters::g_counters.conv2d_calls;
  require(input.ndim() == 4, "conv2d: input must be [B,Cin,H,W], got " + shape_str(input.shape()));
  require(p.weight.ndim() == 4, "conv2d: weight must be [Cout,Cin,Kh,Kw], got " + shape_str(p.weight.shape()));
  const std::int64_t batch = input.size(0), cin = input.size(1), h = input.size(2), w = input.size(3);
  const std::int64_t cout = p.weight.size(0), kh = p.weight.size(2), kw = p.weight.size(3);
  require(p.weight.size(1) == cin, "conv2d: channel mismatch, input " + shape_str(input.shape()) +
                                       " vs weight " + shape_str(p.weight.shape()));
  require(p.bias.ndim() == 1 && p.bias.size(0) == cout,
          "conv2d: bias must be [" + std::to_string(cout) + "], got " + shape_str(p.bias.shape()));
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd, got " + shape_str(p.weight.shape()));
  require(p.stride >= 1 && p.padding >= 0, "conv2d: bad stride/padding");
  const std::int64_t ho = out_extent(h, static_cast<int>(kh), p.stride, p.padding, "conv2d", "H");
  const std::int64_t wo = out_extent(w, static_cast<int>(kw), p.stride, p.padding, "conv2d", "W");

  Tensor out({batch, cout, ho, wo});
  const std::int64_t n = ho * wo;
  Eigen::Map<const RowMat> wmat(p.weight.data(), cout, cin * kh * kw);

  if (kh == 1 && kw == 1 && p.stride == 1 && p.padding == 0) {
    // Pointwise conv is a plain GEMM over the existing layout.
    for (std::int64_t b = 0; b < batch; ++b) {
      Eigen::Map<const RowMat> im(input.data() + b * cin * h * w, cin, h * w);
      Eigen::Map<RowMat> om(out.data() + b * cout * n, cout, n);
      om.noalias() = wmat * im;
    }
    add_bias(out, p.bias, batch, cout, n);
    return out;
  }

  const std::int64_t k = cin * kh * kw;
  const std::int64_t tile = tile_columns(k, n);
  std::vector<float> patches(static_cast<size_t>(k * tile));

  for (std::int64_t b = 0; b < batch; ++b) {
    const float* in_b = input.data() + b * cin * h * w;
    for (std::int64_t col0 = 0; col0 < n; col0 += tile) {
      const std::int64_t cols = std::min(tile, n - col0);
      for (std::int64_t c = 0; c < cols; ++c) {
        const std::int64_t oy = (col0 + c) / wo, ox = (col0 + c) % wo;
        const std::int64_t iy0 = oy * p.stride - p.padding, ix0 = ox * p.stride - p.padding;
        float* dst = patches.data() + c * k;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          const float* plane = in_b + ci * h * w;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            const std::int64_t iy = iy0 + ky;
            if (iy < 0 || iy >= h) {
              for (std::int64_t kx = 0; kx < kw; ++kx) *dst++ = 0.0f;
              continue;
            }
            const float* row = plane + iy * w;
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              const std::int64_t ix = ix0 + kx;
              *dst++ = (ix >= 0 && ix < w) ? row[ix] : 0.0f;
            }
          }
        }
      }
      Eigen::Map<const ColMat> pm(patches.data(), k, cols);
      Eigen::Map<RowMat, 0, Eigen::OuterStride<>> om(out.data() + b * cout * n + col0, cout, cols,
                                                     Eigen::OuterStride<>(n));
      om.noalias() = wmat * pm;
    }
  }
  add_bias(out, p.bias, batch, cout, n);
  return out;
}

Tensor conv3d(const Tensor& input, const Conv3dParams& p) {
  ++op_counters::g_counters.conv3d_calls;
  require(input.ndim() == 5, "conv3d: input must be [B,Cin,Z,H,W], got " + shape_str(input.shape()));
  require(p.weight.ndim() == 5,
          "conv3d: weight must be [Cout,Cin,Kd,Kh,Kw], got " + shape_str(p.weight.shape()));
  const std::int64_t batch = input.size(0), cin = input.size(1);
  const std::int64_t z = input.size(2), h = input.size(3), w = input.size(4);
  const std::int64_t cout = p.weight.size(0);
  const std::int64_t kd = p.weight.size(2), kh = p.weight.size(3), kw = p.weight.size(4);
  require(p.weight.size(1) == cin, "conv3d: channel mismatch, input " + shape_str(input.shape()) +
                                       " vs weight " + shape_str(p.weight.shape()));
  require(p.bias.ndim() == 1 && p.bias.size(0) == cout,
          "conv3d: bias must be [" + std::to_string(cout) + "], got " + shape_str(p.bias.shape()));
  require(kd % 2 == 1 && kh % 2 == 1 && kw % 2 == 1,
          "conv3d: kernel dims must be odd, got " + shape_str(p.weight.shape()));
  require(p.stride >= 1 && p.padding >= 0, "conv3d: bad stride/padding");
  const std::int64_t zo = out_extent(z, static_cast<int>(kd), p.stride, p.padding, "conv3d", "Z");
  const std::int64_t ho = out_extent(h, static_cast<int>(kh), p.stride, p.padding, "conv3d", "H");
  const std::int64_t wo = out_extent(w, static_cast<int>(kw), p.stride, p.padding, "conv3d", "W");

  Tensor out({batch, cout, zo, ho, wo});
  const std::int64_t n = zo * ho * wo;
  const std::int64_t k = cin * kd * kh * kw;
  Eigen::Map<const RowMat> wmat(p.weight.data(), cout, k);

  if (kd == 1 && kh == 1 && kw == 1 && p.stride == 1 && p.padding == 0) {
    for (std::int64_t b = 0; b < batch; ++b) {
      Eigen::Map<const RowMat> im(input.data() + b * cin * z * h * w, cin, z * h * w);
      Eigen::Map<RowMat> om(out.data() + b * cout * n, cout, n);
      om.noalias() = wmat * im;
    }
    add_bias(out, p.bias, batch, cout, n);
    return out;
  }

  const std::int64_t tile = tile_columns(k, n);
  std::vector<float> patches(static_cast<size_t>(k * tile));

  for (std::int64_t b = 0; b < batch; ++b) {
    const float* in_b = input.data() + b * cin * z * h * w;
    for (std::int64_t col0 = 0; col0 < n; col0 += tile) {
      const std::int64_t cols = std::min(tile, n - col0);
      for (std::int64_t c = 0; c < cols; ++c) {
        const std::int64_t idx = col0 + c;
        const std::int64_t oz = idx / (ho * wo);
        const std::int64_t oy = (idx / wo) % ho, ox = idx % wo;
        const std::int64_t iz0 = oz * p.stride - p.padding;
        const std::int64_t iy0 = oy * p.stride - p.padding, ix0 = ox * p.stride - p.padding;
        float* dst = patches.data() + c * k;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          const float* vol = in_b + ci * z * h * w;
          for (std::int64_t kz = 0; kz < kd; ++kz) {
            const std::int64_t iz = iz0 + kz;
            if (iz < 0 || iz >= z) {
              for (std::int64_t i = 0; i < kh * kw; ++i) *dst++ = 0.0f;
              continue;
            }
            const float* plane = vol + iz * h * w;
            for (std::int64_t ky = 0; ky < kh; ++ky) {
              const std::int64_t iy = iy0 + ky;
              if (iy < 0 || iy >= h) {
                for (std::int64_t kx = 0; kx < kw; ++kx) *dst++ = 0.0f;
                continue;
              }
              const float* row = plane + iy * w;
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t ix = ix0 + kx;
                *dst++ = (ix >= 0 && ix < w) ? row[ix] : 0.0f;
              }
            }
          }
        }
      }
      Eigen::Map<const ColMat> pm(patches.data(), k, cols);
      Eigen::Map<RowMat, 0, Eigen::OuterStride<>> om(out.data() + b * cout * n + col0, cout, cols,
                                                     Eigen::OuterStride<>(n));
      om.noalias() = wmat * pm;
    }
  }
  add_bias(out, p.bias, batch, cout, n);
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out(t.shape());
  for (std::int64_t i = 0; i < t.numel(); ++i) out[i] = t[i] > 0.0f ? t[i] : 0.0f;
  return out;
}

Tensor batch_norm_inference(const Tensor& t, const Tensor& mean, const Tensor& var,
                            const Tensor& gamma, const Tensor& beta, float eps) {
  require(eps > 0.0f, "batch_norm: eps must be positive, got " + std::to_string(eps));
  require(t.ndim() >= 2, "batch_norm: input needs a channel axis, got " + shape_str(t.shape()));
  const std::int64_t c = t.size(1);
  for (const Tensor* s : {&mean, &var, &gamma, &beta}) {
    require(s->ndim() == 1 && s->size(0) == c,
            "batch_norm: statistic shape " + shape_str(s->shape()) + " does not match channels " +
                std::to_string(c));
  }
  std::int64_t inner = 1;
  for (int a = 2; a < t.ndim(); ++a) inner *= t.size(a);
  const std::int64_t batch = t.size(0);

  std::vector<float> scale(static_cast<size_t>(c)), shift(static_cast<size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) {
    scale[i] = gamma[i] / std::sqrt(var[i] + eps);
    shift[i] = beta[i] - mean[i] * scale[i];
  }

  Tensor out(t.shape());
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const float* src = t.data() + (b * c + ch) * inner;
      float* dst = out.data() + (b * c + ch) * inner;
      const float sc = scale[ch], sh = shift[ch];
      for (std::int64_t i = 0; i < inner; ++i) dst[i] = src[i] * sc + sh;
    }
  }
  return out;
}

Tensor batch_norm_inference(const Tensor& t, const BatchNormParams& p) {
  return batch_norm_inference(t, p.mean, p.var, p.gamma, p.beta, p.eps);
}

namespace {
struct LerpTap {
  std::int64_t lo, hi;
  float w_hi;
};

std::vector<LerpTap> upsample_taps(std::int64_t in) {
  std::vector<LerpTap> taps(static_cast<size_t>(2 * in));
  for (std::int64_t i = 0; i < 2 * in; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
    const std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
    const double frac = src - static_cast<double>(lo);
    taps[static_cast<size_t>(i)] = {std::clamp<std::int64_t>(lo, 0, in - 1),
                                    std::clamp<std::int64_t>(lo + 1, 0, in - 1),
                                    static_cast<float>(frac)};
  }
  return taps;
}
}  // namespace

Tensor upsample2x_bilinear(const Tensor& t) {
  require(t.ndim() == 4, "upsample2x: input must be [B,C,H,W], got " + shape_str(t.shape()));
  const std::int64_t batch = t.size(0), c = t.size(1), h = t.size(2), w = t.size(3);
  const auto ytaps = upsample_taps(h);
  const auto xtaps = upsample_taps(w);
  Tensor out({batch, c, 2 * h, 2 * w});
  for (std::int64_t bc = 0; bc < batch * c; ++bc) {
    const float* src = t.data() + bc * h * w;
    float* dst = out.data() + bc * 4 * h * w;
    for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
      const LerpTap& ty = ytaps[static_cast<size_t>(oy)];
      const float* r0 = src + ty.lo * w;
      const float* r1 = src + ty.hi * w;
      float* orow = dst + oy * 2 * w;
      for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
        const LerpTap& tx = xtaps[static_cast<size_t>(ox)];
        const float top = r0[tx.lo] * (1.0f - tx.w_hi) + r0[tx.hi] * tx.w_hi;
        const float bot = r1[tx.lo] * (1.0f - tx.w_hi) + r1[tx.hi] * tx.w_hi;
        orow[ox] = top * (1.0f - ty.w_hi) + bot * ty.w_hi;
      }
    }
  }
  return out;
}

Tensor softmax_axis(const Tensor& t, int axis) {
  require(axis >= 0 && axis < t.ndim(),
          "softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(t.shape()));
  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= t.size(a);
  for (int a = axis + 1; a < t.ndim(); ++a) inner *= t.size(a);
  const std::int64_t n = t.size(axis);

  Tensor out(t.shape());
  std::vector<double> lane(static_cast<size_t>(n));
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const float* src = t.data() + o * n * inner + i;
      float* dst = out.data() + o * n * inner + i;
      float maxv = src[0];
      for (std::int64_t j = 1; j < n; ++j) maxv = std::max(maxv, src[j * inner]);
      double sum = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        lane[static_cast<size_t>(j)] = std::exp(static_cast<double>(src[j * inner]) - maxv);
        sum += lane[static_cast<size_t>(j)];
      }
      for (std::int64_t j = 0; j < n; ++j)
        dst[j * inner] = static_cast<float>(lane[static_cast<size_t>(j)] / sum);
    }
  }
  return out;
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  std::int64_t n = 1;
  for (std::int64_t d : new_shape) n *= d;
  require(n == t.numel(), "reshape: element count mismatch, " + shape_str(t.shape()) + " (" +
                              std::to_string(t.numel()) + ") vs " + shape_str(new_shape) + " (" +
                              std::to_string(n) + ")");
  return Tensor(std::move(new_shape), t.vec());
}

Tensor permute(const Tensor& t, const std::vector<int>& axis_order) {
  const int nd = t.ndim();
  require(static_cast<int>(axis_order.size()) == nd,
          "permute: order size " + std::to_string(axis_order.size()) + " != ndim " + std::to_string(nd));
  std::vector<bool> seen(static_cast<size_t>(nd), false);
  for (int a : axis_order) {
    require(a >= 0 && a < nd && !seen[static_cast<size_t>(a)],
            "permute: order is not a permutation of axes");
    seen[static_cast<size_t>(a)] = true;
  }

  Shape out_shape(static_cast<size_t>(nd));
  for (int k = 0; k < nd; ++k) out_shape[static_cast<size_t>(k)] = t.size(axis_order[static_cast<size_t>(k)]);
  Tensor out(out_shape);

  std::vector<std::int64_t> out_strides(static_cast<size_t>(nd), 1);
  for (int k = nd - 2; k >= 0; --k)
    out_strides[static_cast<size_t>(k)] = out_strides[static_cast<size_t>(k + 1)] * out_shape[static_cast<size_t>(k + 1)];
  // out_stride as seen from the input axis it reads.
  std::vector<std::int64_t> scatter(static_cast<size_t>(nd), 0);
  for (int k = 0; k < nd; ++k) scatter[static_cast<size_t>(axis_order[static_cast<size_t>(k)])] = out_strides[static_cast<size_t>(k)];

  std::vector<std::int64_t> idx(static_cast<size_t>(nd), 0);
  std::int64_t out_off = 0;
  for (std::int64_t lin = 0; lin < t.numel(); ++lin) {
    out[out_off] = t[lin];
    for (int a = nd - 1; a >= 0; --a) {
      idx[static_cast<size_t>(a)] += 1;
      out_off += scatter[static_cast<size_t>(a)];
      if (idx[static_cast<size_t>(a)] < t.size(a)) break;
      out_off -= scatter[static_cast<size_t>(a)] * t.size(a);
      idx[static_cast<size_t>(a)] = 0;
    }
  }
  return out;
}

Conv2dParams make_conv2d(int cin, int cout, int kernel, int stride, int padding, Rng& rng) {
  Conv2dParams p;
  p.weight = he_normal({cout, cin, kernel, kernel}, static_cast<std::int64_t>(cin) * kernel * kernel, rng);
  p.bias = Tensor({cout});
  p.stride = stride;
  p.padding = padding;
  return p;
}

Conv3dParams make_conv3d(int cin, int cout, int kernel, int stride, int padding, Rng& rng) {
  Conv3dParams p;
  p.weight = he_normal({cout, cin, kernel, kernel, kernel},
                       static_cast<std::int64_t>(cin) * kernel * kernel * kernel, rng);
  p.bias = Tensor({cout});
  p.stride = stride;
  p.padding = padding;
  return p;
}

BatchNormParams make_identity_batch_norm(int channels) {
  BatchNormParams p;
  p.mean = Tensor({channels});
  p.var = Tensor::full({channels}, 1.0f);
  p.gamma = Tensor::full({channels}, 1.0f);
  p.beta = Tensor({channels});
  return p;
}

}  // namespace bevocc
