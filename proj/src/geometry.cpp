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

#include "bevocc/geometry.hpp"

#include <Eigen/LU>
#include <cmath>
#include <set>

namespace bevocc {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive (fx=" + std::to_string(fx) +
                                ", fy=" + std::to_string(fy) + ")");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("intrinsics: principal point outside image");
}

RigidTransform RigidTransform::from_translation(double x, double y, double z) {
  RigidTransform t;
  t.translation = {x, y, z};
  return t;
}

RigidTransform RigidTransform::from_yaw_xyz(double yaw, double x, double y, double z) {
  RigidTransform t;
  const double c = std::cos(yaw), s = std::sin(yaw);
  t.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
  t.translation = {x, y, z};
  return t;
}

void RigidTransform::validate(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("rigid transform: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol)
    throw std::invalid_argument("rigid transform: rotation determinant != 1");
}

void CameraRig::validate() const {
  if (cameras.empty()) throw std::invalid_argument("camera rig: needs at least one camera");
  std::set<std::string> names;
  for (const Camera& cam : cameras) {
    if (!names.insert(cam.name).second)
      throw std::invalid_argument("camera rig: duplicate camera name \"" + cam.name + "\"");
    cam.intrinsics.validate();
    cam.cam_to_ego.validate();
  }
}

Eigen::Vector3d pixel_to_camera(double u, double v, double depth, const CameraIntrinsics& intr) {
  if (!(depth > 0.0))
    throw std::invalid_argument("pixel_to_camera: depth must be positive, got " + std::to_string(depth));
  return {(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth};
}

Eigen::Vector3d transform_point(const Eigen::Vector3d& p, const RigidTransform& t) {
  return t.rotation * p + t.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

int FrustumGrid::bin_of(double depth) const {
  const double rel = (depth - depth_start) / depth_step;
  if (rel < 0.0) return -1;
  const int bin = static_cast<int>(rel);
  return bin < depth_bins ? bin : -1;
}

FrustumGrid build_frustum(int feat_w, int feat_h, double stride_px, double depth_start_m,
                          double depth_end_m, double depth_step_m) {
  if (feat_w < 1 || feat_h < 1) throw std::invalid_argument("frustum: feature grid must be non-empty");
  if (!(depth_start_m > 0.0) || !(depth_end_m > depth_start_m) || !(depth_step_m > 0.0))
    throw std::invalid_argument("frustum: need depth_end > depth_start > 0 and depth_step > 0");
  FrustumGrid g;
  g.feat_w = feat_w;
  g.feat_h = feat_h;
  g.stride_px = stride_px;
  g.depth_start = depth_start_m;
  g.depth_step = depth_step_m;
  g.depth_bins = static_cast<int>(std::floor((depth_end_m - depth_start_m) / depth_step_m));
  if (g.depth_bins == 0) throw std::invalid_argument("frustum: depth range yields zero bins");
  g.us.resize(static_cast<size_t>(feat_w));
  g.vs.resize(static_cast<size_t>(feat_h));
  g.depths.resize(static_cast<size_t>(g.depth_bins));
  for (int i = 0; i < feat_w; ++i) g.us[static_cast<size_t>(i)] = (i + 0.5) * stride_px;
  for (int i = 0; i < feat_h; ++i) g.vs[static_cast<size_t>(i)] = (i + 0.5) * stride_px;
  for (int i = 0; i < g.depth_bins; ++i)
    g.depths[static_cast<size_t>(i)] = depth_start_m + (i + 0.5) * depth_step_m;
  return g;
}

}  // namespace bevocc
