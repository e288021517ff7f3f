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

#pragma once

#include <cstdint>
#include <vector>

#include "bevocc/tensor.hpp"

namespace bevocc {

/// Zero-padded cross-correlation parameters. weight is [Cout,Cin,Kh,Kw].
struct Conv2dParams {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;
};

/// weight is [Cout,Cin,Kd,Kh,Kw].
struct Conv3dParams {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;
};

/// Per-channel inference-time normalization statistics.
struct BatchNormParams {
  Tensor mean;
  Tensor var;
  Tensor gamma;
  Tensor beta;
  float eps = 1e-5f;
};

/// Structural call counters, used to assert which kernel family a
/// configured path actually executes.
struct OpCounters {
  std::int64_t conv2d_calls = 0;
  std::int64_t conv3d_calls = 0;
};
namespace op_counters {
void reset();
OpCounters snapshot();
}  // namespace op_counters

// input [B,Cin,H,W] -> [B,Cout,H',W'] with H' = (H + 2*pad - K)/stride + 1.
// The padded extent must divide evenly; anything else is a config error.
Tensor conv2d(const Tensor& input, const Conv2dParams& p);

// input [B,Cin,Z,H,W] -> [B,Cout,Z',H',W']
Tensor conv3d(const Tensor& input, const Conv3dParams& p);

Tensor relu(const Tensor& t);

/// (x - mean) / sqrt(var + eps) * gamma + beta over channel axis 1.
Tensor batch_norm_inference(const Tensor& t, const BatchNormParams& p);
Tensor batch_norm_inference(const Tensor& t, const Tensor& mean, const Tensor& var,
                            const Tensor& gamma, const Tensor& beta, float eps);

/// Align-corners-false bilinear 2x upsampling of [B,C,H,W].
Tensor upsample2x_bilinear(const Tensor& t);

Tensor softmax_axis(const Tensor& t, int axis);

Tensor reshape(const Tensor& t, Shape new_shape);
Tensor permute(const Tensor& t, const std::vector<int>& axis_order);

// Seeded parameter factories shared by the encoder/head builders.
Conv2dParams make_conv2d(int cin, int cout, int kernel, int stride, int padding, Rng& rng);
Conv3dParams make_conv3d(int cin, int cout, int kernel, int stride, int padding, Rng& rng);
BatchNormParams make_identity_batch_norm(int channels);

}  // namespace bevocc
