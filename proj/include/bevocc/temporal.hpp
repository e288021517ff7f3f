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

#include "bevocc/geometry.hpp"
#include "bevocc/ops.hpp"
#include "bevocc/tensor.hpp"
#include "bevocc/view_transform.hpp"

namespace bevocc {

/// Holds at most one past frame: its raw BEV feature and the ego pose it
/// was captured under.
struct TemporalBuffer {
  struct Frame {
    Tensor bev;
    RigidTransform ego_to_global;
    double timestamp = 0.0;
  };
  std::optional<Frame> frame;

  void clear() { frame.reset(); }
};

/// Warp a history BEV feature into the current ego frame. The relative
/// pose is reduced to the BEV plane (yaw + x/y translation); each current
/// cell center is sampled bilinearly from the history grid, reading zero
/// outside it. Cell-aligned motion resolves to exact copies.
Tensor align_bev(const Tensor& history, const RigidTransform& pose_hist, const RigidTransform& pose_cur,
                 const BevGridSpec& grid);

/// conv3x3(concat(current, aligned)); the conv must map 2C -> C.
Tensor fuse_concat(const Tensor& current, const Tensor& aligned, const Conv2dParams& fuse_conv);

}  // namespace bevocc
