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

#include <vector>

#include "bevocc/encoder.hpp"
#include "bevocc/grid.hpp"
#include "bevocc/ops.hpp"
#include "bevocc/tensor.hpp"

namespace bevocc {

/// Reinterpret C = C* x Z packed channels of a BEV map [B,C,H,W] as
/// voxel logits [B,C*,Z,H,W]. Pure row-major reshape, class outermost:
/// out[b,k,z,y,x] == in[b, k*Z + z, y, x].
Tensor channel_to_height(const Tensor& bev, int num_classes, int z_bins);

/// Exact inverse of channel_to_height.
Tensor height_to_channel(const Tensor& logits);

/// 3x3 conv chain on the BEV plane ending in a linear layer of width
/// C* x Z, then channel_to_height. No 3D convolution on this path.
struct FlashHeadParams {
  std::vector<ConvBn> hidden;
  Conv2dParams final_conv;
  int num_classes = 0;
  int z_bins = 0;
  void validate() const;
};

Tensor flash_head(const Tensor& bev, const FlashHeadParams& p);

/// Multi-scale variant: each input is 1x1-projected, upsampled to the
/// finest grid, concatenated, then run through the same conv chain idea.
struct MultiScaleHeadParams {
  std::vector<Conv2dParams> input_projections;
  std::vector<ConvBn> hidden;
  Conv2dParams final_conv;
  int num_classes = 0;
  int z_bins = 0;
};

Tensor multi_scale_head(const std::vector<Tensor>& inputs, const MultiScaleHeadParams& p);

/// The voxel-level reference: 3x3x3 conv+bn chain over [B,Cv,Z,H,W]
/// followed by a 1x1x1 per-voxel classifier.
struct ConvBn3d {
  Conv3dParams conv;
  BatchNormParams bn;
};

struct VoxelHeadParams {
  std::vector<ConvBn3d> hidden;
  Conv3dParams classifier;
  void validate() const;
};

Tensor voxel_head(const Tensor& vox, const VoxelHeadParams& p);

/// Per-voxel argmax over the class axis; ties go to the lowest class id.
OccupancyGrid predict_labels(const Tensor& logits);

struct LinearHeadGradients {
  double loss = 0.0;
  Tensor weight_grad;
  Tensor bias_grad;
};

/// Mean softmax cross-entropy of conv1x1(bev) -> channel_to_height
/// against the label grid, with analytic gradients. Reductions run in
/// 64-bit.
LinearHeadGradients linear_head_loss_grad(const Tensor& bev, const OccupancyGrid& labels,
                                          const Conv2dParams& conv, int num_classes, int z_bins);

struct LinearHeadTrainResult {
  Conv2dParams conv;
  std::vector<double> loss_trace;
};

/// Plain gradient descent on the 1x1 head. Throws if the loss goes
/// non-finite, reporting the step.
LinearHeadTrainResult train_linear_head(const Tensor& bev, const OccupancyGrid& labels, int num_classes,
                                        int z_bins, float lr, int steps);

FlashHeadParams make_flash_head(int cin, const std::vector<int>& widths, int num_classes, int z_bins,
                                Rng& rng);
VoxelHeadParams make_voxel_head(int cin, const std::vector<int>& widths, int num_classes, Rng& rng);
MultiScaleHeadParams make_multi_scale_head(const std::vector<int>& input_channels,
                                           const std::vector<int>& projected_widths,
                                           const std::vector<int>& widths, int num_classes, int z_bins,
                                           Rng& rng);

}  // namespace bevocc
