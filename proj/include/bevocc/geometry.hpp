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

#include <Eigen/Core>
#include <string>
#include <vector>

#include "bevocc/tensor.hpp"

namespace bevocc {

/// Pinhole model in pixels. Camera frame: z forward, x right, y down.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(double x, double y, double z);
  /// Rotation about +z (ego up) by yaw radians, then translate.
  static RigidTransform from_yaw_xyz(double yaw, double x, double y, double z);

  /// RtR == I and det == +1, both within tol.
  void validate(double tol = 1e-6) const;
};

struct Camera {
  std::string name;
  CameraIntrinsics intrinsics;
  RigidTransform cam_to_ego;
};

struct CameraRig {
  std::vector<Camera> cameras;
  void validate() const;  // at least one camera, unique names
};

/// Back-project a pixel at the given positive depth (camera z) to the
/// camera frame: ((u-cx)/fx*d, (v-cy)/fy*d, d).
Eigen::Vector3d pixel_to_camera(double u, double v, double depth, const CameraIntrinsics& intr);

Eigen::Vector3d transform_point(const Eigen::Vector3d& p, const RigidTransform& t);

/// compose(a, b) applies b first: compose(a,b)(p) == a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

/// The (u,v,d) sample lattice of one camera: feature-cell centers scaled
/// by stride_px, with metric depth-bin centers.
struct FrustumGrid {
  int feat_w = 0, feat_h = 0, depth_bins = 0;
  double stride_px = 1.0;
  double depth_start = 0.0, depth_step = 0.0;
  std::vector<double> us;      // feat_w pixel centers
  std::vector<double> vs;      // feat_h pixel centers
  std::vector<double> depths;  // depth_bins bin centers

  std::int64_t point_count() const {
    return static_cast<std::int64_t>(feat_w) * feat_h * depth_bins;
  }
  /// Bin such that depths[i] is its center, or -1 outside [start, start + D*step).
  int bin_of(double depth) const;
};

FrustumGrid build_frustum(int feat_w, int feat_h, double stride_px, double depth_start_m,
                          double depth_end_m, double depth_step_m);

}  // namespace bevocc
