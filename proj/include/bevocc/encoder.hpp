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

#include <optional>
#include <vector>

#include "bevocc/ops.hpp"
#include "bevocc/tensor.hpp"

namespace bevocc {

struct ConvBn {
  Conv2dParams conv;
  BatchNormParams bn;
};

/// Two 3x3 conv+bn layers with an optional 1x1 projection on the skip
/// path (needed whenever channels or stride change).
struct ResidualBlockParams {
  ConvBn conv1;  // carries the block stride
  ConvBn conv2;  // stride 1
  std::optional<ConvBn> projection;
};

/// relu(bn(conv2(relu(bn(conv1(x))))) + skip(x))
Tensor residual_block(const Tensor& x, const ResidualBlockParams& p);

/// Stage 0 keeps resolution, every following stage downsamples by 2.
struct EncoderParams {
  std::vector<std::vector<ResidualBlockParams>> stages;
};

struct EncodedFeatures {
  Tensor fine;    // second-to-last stage output
  Tensor coarse;  // last stage output, at half the fine resolution
};

EncodedFeatures encode(const Tensor& x, const EncoderParams& p);

/// upsample2x(coarse) ++ fine along channels, then 3x3 conv. The coarse
/// map must be at exactly half the fine resolution.
Tensor fpn_lss_fuse(const Tensor& fine, const Tensor& coarse, const Conv2dParams& fuse_conv);

/// Backbone + neck, restoring the input resolution: encode, fuse, then
/// bilinear-upsample the fused map back to the input grid when the fine
/// stage sits below it.
struct EncoderNeckParams {
  EncoderParams encoder;
  Conv2dParams fuse_conv;
};

Tensor encode_and_fuse(const Tensor& x, const EncoderNeckParams& p);

ResidualBlockParams make_residual_block(int cin, int cout, int stride, Rng& rng);
EncoderParams make_encoder(int cin, const std::vector<int>& stage_widths, int blocks_per_stage, Rng& rng);
EncoderNeckParams make_encoder_neck(int cin, const std::vector<int>& stage_widths, int neck_channels,
                                    int blocks_per_stage, Rng& rng);

}  // namespace bevocc
