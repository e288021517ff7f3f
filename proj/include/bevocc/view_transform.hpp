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

#include "bevocc/geometry.hpp"
#include "bevocc/ops.hpp"
#include "bevocc/tensor.hpp"

namespace bevocc {

/// Metric extents and resolution of the BEV / occupancy lattice.
/// W cells along x, H along y, Z along z; all half-open [min, max).
struct BevGridSpec {
  double x_min = -40.0, x_max = 40.0;
  double y_min = -40.0, y_max = 40.0;
  double z_min = -1.0, z_max = 5.4;
  double xy_res = 0.4, z_res = 0.4;

  int width() const;
  int height() const;
  int z_bins() const;
  void validate() const;
};

/// 1x1 conv producing D depth logits plus C_ctx context channels.
struct DepthContextParams {
  Conv2dParams conv;
  int depth_bins = 0;
  int context_channels = 0;
  void validate() const;
};

struct DepthContext {
  Tensor depth_prob;  // [B,D,h,w], softmax over D
  Tensor context;     // [B,C_ctx,h,w]
};

DepthContext predict_depth_context(const Tensor& img_feat, const DepthContextParams& p);

/// Outer product of context and depth distribution:
/// out[b,c,d,y,x] = context[b,c,y,x] * depth_prob[b,d,y,x].
Tensor lift(const Tensor& context, const Tensor& depth_prob);

struct SplatResult {
  Tensor bev;  // [B,C,H,W]
  std::int64_t dropped_points = 0;
};

struct SplatVoxelResult {
  Tensor voxels;  // [B,C,Z,H,W]
  std::int64_t dropped_points = 0;
};

/// Scatter lifted frustum features into the BEV lattice. Each (d,y,x)
/// sample maps through the camera to ego space; samples inside the grid
/// extents sum their channel vector into the containing cell (all z
/// collapsed), samples outside are dropped and counted.
SplatResult splat(const FrustumGrid& frustum, const Tensor& lifted, const Camera& camera,
                  const BevGridSpec& grid);

/// Same scatter but keeping the height axis resolved; summing the result
/// over z reproduces splat().
SplatVoxelResult splat_voxels(const FrustumGrid& frustum, const Tensor& lifted, const Camera& camera,
                              const BevGridSpec& grid);

struct ViewTransformResult {
  Tensor bev;
  std::int64_t dropped_points = 0;
};

/// Depth-distribution transform: predict_depth_context -> lift -> splat,
/// summed over cameras in rig order.
ViewTransformResult lss_transform(const std::vector<Tensor>& cam_feats, const CameraRig& rig,
                                  const DepthContextParams& params, const FrustumGrid& frustum,
                                  const BevGridSpec& grid);

/// Uniform-depth variant: every bin weighted 1/D, features used as-is.
ViewTransformResult ls_transform(const std::vector<Tensor>& cam_feats, const CameraRig& rig,
                                 const FrustumGrid& frustum, const BevGridSpec& grid);

/// One-hot depth variant: bin containing depth_m[y,x] gets weight 1.
/// Pixels with no finite depth (or out-of-range depth) contribute nothing.
ViewTransformResult oracle_depth_transform(const std::vector<Tensor>& cam_feats,
                                           const std::vector<Tensor>& depth_maps, const CameraRig& rig,
                                           const FrustumGrid& frustum, const BevGridSpec& grid);

}  // namespace bevocc
