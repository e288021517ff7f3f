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
#include <string>
#include <vector>

#include "bevocc/geometry.hpp"
#include "bevocc/grid.hpp"
#include "bevocc/tensor.hpp"
#include "bevocc/view_transform.hpp"

namespace bevocc {

enum class PrimitiveKind { kBox, kCylinder, kGroundPlane };

/// A solid placed in ego space.
///  box:          size = full extents (sx, sy, sz) in the local frame
///  cylinder:     size.x = radius, size.y = height, axis along local z
///  ground_plane: horizontal half-space z <= pose.translation.z
struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  RigidTransform pose;
  Eigen::Vector3d size = Eigen::Vector3d::Zero();
  int class_id = 0;
};

struct Scene {
  std::vector<ScenePrimitive> primitives;
  CameraRig rig;
  std::uint64_t seed = 0;
  void validate(int num_classes) const;
};

/// Point containment, with an optional inflation tolerance in meters.
bool contains(const ScenePrimitive& prim, const Eigen::Vector3d& p, double tol = 0.0);

/// First intersection parameter s > 0 of the ray origin + s*dir with the
/// primitive surface, or nothing. Rays starting inside a solid miss it.
std::optional<double> raycast(const ScenePrimitive& prim, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir);

/// Label every voxel whose center lies in a primitive; earlier primitives
/// win overlaps. Empty voxels get the trailing free class.
OccupancyGrid voxelize(const Scene& scene, const BevGridSpec& grid, int num_classes = 18);

struct CameraRender {
  Tensor depth;     // [feat_h, feat_w] planar depth in meters, +inf on miss
  Tensor features;  // [num_classes, feat_h, feat_w] one-hot class of the hit
};

/// Cast one ray per feature-cell center; dir has unit camera-z so the hit
/// parameter is directly the planar depth used by pixel_to_camera.
CameraRender render_oracle(const Scene& scene, int cam_index, int feat_w, int feat_h,
                           double stride_px = 1.0, int num_classes = 18);

/// A voxel is visible when some camera pixel ray enters it at or before
/// the first occupied voxel along that ray (the occluder itself counts as
/// seen). Traversal is exact grid walking, occlusion is labeled-voxel
/// based.
VisibilityMask visibility_mask(const Scene& scene, const CameraRig& rig, const BevGridSpec& grid,
                               int num_classes = 18);

// Scene JSON (primitives + rig + seed); diffable fixtures.
std::string scene_to_json_string(const Scene& scene);
Scene scene_from_json_string(const std::string& text, const std::string& origin = "<string>");
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

/// Surround rig: num_cameras pinhole cameras on a ring, first facing ego
/// +x, evenly spaced in yaw, with a little overlap between neighbors.
CameraRig make_surround_rig(int num_cameras, int image_width, int image_height,
                            double hfov_deg = 80.0, double mount_radius_m = 1.0,
                            double mount_height_m = 1.6);

/// Deterministic random scene: a ground slab plus boxes and cylinders
/// scattered outside a clear radius around the rig.
Scene make_random_scene(std::uint64_t seed, const BevGridSpec& grid, int num_cameras = 6,
                        int image_width = 64, int image_height = 40, int num_objects = 10,
                        int num_classes = 18);

}  // namespace bevocc
