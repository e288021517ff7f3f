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

#include "bevocc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace bevocc {

using nlohmann::json;

void Scene::validate(int num_classes) const {
  if (primitives.empty()) throw std::invalid_argument("scene: needs at least one primitive");
  rig.validate();
  for (const ScenePrimitive& p : primitives) {
    if (p.class_id < 0 || p.class_id >= num_classes)
      throw std::invalid_argument("scene: class_id " + std::to_string(p.class_id) + " out of range");
    if (p.kind == PrimitiveKind::kBox && !(p.size.minCoeff() > 0.0))
      throw std::invalid_argument("scene: box extents must be positive");
    if (p.kind == PrimitiveKind::kCylinder && !(p.size.x() > 0.0 && p.size.y() > 0.0))
      throw std::invalid_argument("scene: cylinder radius/height must be positive");
    p.pose.validate();
  }
}

bool contains(const ScenePrimitive& prim, const Eigen::Vector3d& p, double tol) {
  switch (prim.kind) {
    case PrimitiveKind::kGroundPlane:
      return p.z() <= prim.pose.translation.z() + tol;
    case PrimitiveKind::kBox: {
      const Eigen::Vector3d local = prim.pose.rotation.transpose() * (p - prim.pose.translation);
      return std::abs(local.x()) <= prim.size.x() * 0.5 + tol &&
             std::abs(local.y()) <= prim.size.y() * 0.5 + tol &&
             std::abs(local.z()) <= prim.size.z() * 0.5 + tol;
    }
    case PrimitiveKind::kCylinder: {
      const Eigen::Vector3d local = prim.pose.rotation.transpose() * (p - prim.pose.translation);
      const double r = prim.size.x() + tol;
      return local.x() * local.x() + local.y() * local.y() <= r * r &&
             std::abs(local.z()) <= prim.size.y() * 0.5 + tol;
    }
  }
  return false;
}

namespace {

constexpr double kRayEps = 1e-9;

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool empty() const { return lo > hi; }
};

bool clip_slab(Interval& iv, double o, double d, double lo, double hi) {
  if (std::abs(d) < 1e-14) return o >= lo && o <= hi;
  double t0 = (lo - o) / d, t1 = (hi - o) / d;
  if (t0 > t1) std::swap(t0, t1);
  iv.lo = std::max(iv.lo, t0);
  iv.hi = std::min(iv.hi, t1);
  return !iv.empty();
}

}  // namespace

std::optional<double> raycast(const ScenePrimitive& prim, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir) {
  switch (prim.kind) {
    case PrimitiveKind::kGroundPlane: {
      const double elev = prim.pose.translation.z();
      if (origin.z() <= elev) return std::nullopt;  // starting inside the slab
      if (dir.z() >= -1e-14) return std::nullopt;
      const double s = (elev - origin.z()) / dir.z();
      return s > kRayEps ? std::optional<double>(s) : std::nullopt;
    }
    case PrimitiveKind::kBox: {
      const Eigen::Vector3d o = prim.pose.rotation.transpose() * (origin - prim.pose.translation);
      const Eigen::Vector3d d = prim.pose.rotation.transpose() * dir;
      Interval iv;
      if (!clip_slab(iv, o.x(), d.x(), -prim.size.x() * 0.5, prim.size.x() * 0.5)) return std::nullopt;
      if (!clip_slab(iv, o.y(), d.y(), -prim.size.y() * 0.5, prim.size.y() * 0.5)) return std::nullopt;
      if (!clip_slab(iv, o.z(), d.z(), -prim.size.z() * 0.5, prim.size.z() * 0.5)) return std::nullopt;
      if (iv.hi < kRayEps || iv.lo < kRayEps) return std::nullopt;
      return iv.lo;
    }
    case PrimitiveKind::kCylinder: {
      const Eigen::Vector3d o = prim.pose.rotation.transpose() * (origin - prim.pose.translation);
      const Eigen::Vector3d d = prim.pose.rotation.transpose() * dir;
      const double r = prim.size.x();
      Interval iv;
      if (!clip_slab(iv, o.z(), d.z(), -prim.size.y() * 0.5, prim.size.y() * 0.5)) return std::nullopt;
      const double a = d.x() * d.x() + d.y() * d.y();
      const double c = o.x() * o.x() + o.y() * o.y() - r * r;
      if (a < 1e-16) {
        if (c > 0.0) return std::nullopt;  // parallel to the axis, outside the radius
      } else {
        const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        iv.lo = std::max(iv.lo, (-b - sq) / (2.0 * a));
        iv.hi = std::min(iv.hi, (-b + sq) / (2.0 * a));
        if (iv.empty()) return std::nullopt;
      }
      if (iv.hi < kRayEps || iv.lo < kRayEps) return std::nullopt;
      return iv.lo;
    }
  }
  return std::nullopt;
}

OccupancyGrid voxelize(const Scene& scene, const BevGridSpec& grid, int num_classes) {
  scene.validate(num_classes);
  grid.validate();
  const int w = grid.width(), h = grid.height(), zb = grid.z_bins();
  OccupancyGrid out = OccupancyGrid::filled(w, h, zb, num_classes,
                                            static_cast<std::uint8_t>(num_classes - 1));
  for (int z = 0; z < zb; ++z) {
    const double pz = grid.z_min + (z + 0.5) * grid.z_res;
    for (int y = 0; y < h; ++y) {
      const double py = grid.y_min + (y + 0.5) * grid.xy_res;
      for (int x = 0; x < w; ++x) {
        const Eigen::Vector3d p(grid.x_min + (x + 0.5) * grid.xy_res, py, pz);
        for (const ScenePrimitive& prim : scene.primitives) {
          if (contains(prim, p)) {
            out.set(x, y, z, static_cast<std::uint8_t>(prim.class_id));
            break;
          }
        }
      }
    }
  }
  return out;
}

CameraRender render_oracle(const Scene& scene, int cam_index, int feat_w, int feat_h, double stride_px,
                           int num_classes) {
  scene.validate(num_classes);
  if (cam_index < 0 || cam_index >= static_cast<int>(scene.rig.cameras.size()))
    throw std::invalid_argument("render: camera index " + std::to_string(cam_index) + " out of range");
  const Camera& cam = scene.rig.cameras[static_cast<size_t>(cam_index)];

  CameraRender out;
  out.depth = Tensor::full({feat_h, feat_w}, std::numeric_limits<float>::infinity());
  out.features = Tensor({num_classes, feat_h, feat_w});

  const Eigen::Vector3d origin = cam.cam_to_ego.translation;
  for (int iy = 0; iy < feat_h; ++iy) {
    const double v = (iy + 0.5) * stride_px;
    for (int ix = 0; ix < feat_w; ++ix) {
      const double u = (ix + 0.5) * stride_px;
      const Eigen::Vector3d dir_cam((u - cam.intrinsics.cx) / cam.intrinsics.fx,
                                    (v - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
      const Eigen::Vector3d dir = cam.cam_to_ego.rotation * dir_cam;
      double best = std::numeric_limits<double>::infinity();
      int best_prim = -1;
      for (size_t pi = 0; pi < scene.primitives.size(); ++pi) {
        const auto s = raycast(scene.primitives[pi], origin, dir);
        if (s && *s < best) {
          best = *s;
          best_prim = static_cast<int>(pi);
        }
      }
      if (best_prim >= 0) {
        out.depth.at(iy, ix) = static_cast<float>(best);
        out.features.at(scene.primitives[static_cast<size_t>(best_prim)].class_id, iy, ix) = 1.0f;
      }
    }
  }
  return out;
}

VisibilityMask visibility_mask(const Scene& scene, const CameraRig& rig, const BevGridSpec& grid,
                               int num_classes) {
  grid.validate();
  rig.validate();
  const OccupancyGrid occ = voxelize(scene, grid, num_classes);
  const std::uint8_t free_class = static_cast<std::uint8_t>(num_classes - 1);
  const int w = grid.width(), h = grid.height(), zb = grid.z_bins();
  VisibilityMask mask = VisibilityMask::filled(w, h, zb, false);

  for (const Camera& cam : rig.cameras) {
    const Eigen::Vector3d origin = cam.cam_to_ego.translation;
    for (int py = 0; py < cam.intrinsics.height; ++py) {
      for (int px = 0; px < cam.intrinsics.width; ++px) {
        const Eigen::Vector3d dir_cam((px + 0.5 - cam.intrinsics.cx) / cam.intrinsics.fx,
                                      (py + 0.5 - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
        const Eigen::Vector3d dir = cam.cam_to_ego.rotation * dir_cam;

        // Clip the ray against the grid box.
        Interval iv;
        iv.lo = 0.0;
        if (!clip_slab(iv, origin.x(), dir.x(), grid.x_min, grid.x_max)) continue;
        if (!clip_slab(iv, origin.y(), dir.y(), grid.y_min, grid.y_max)) continue;
        if (!clip_slab(iv, origin.z(), dir.z(), grid.z_min, grid.z_max)) continue;
        if (iv.empty()) continue;

        // Grid walk from the entry point (Amanatides-Woo).
        const double s0 = iv.lo;
        const Eigen::Vector3d enter = origin + s0 * dir;
        int ix = std::clamp(static_cast<int>((enter.x() - grid.x_min) / grid.xy_res), 0, w - 1);
        int iy = std::clamp(static_cast<int>((enter.y() - grid.y_min) / grid.xy_res), 0, h - 1);
        int iz = std::clamp(static_cast<int>((enter.z() - grid.z_min) / grid.z_res), 0, zb - 1);

        const int step_x = dir.x() > 0 ? 1 : -1;
        const int step_y = dir.y() > 0 ? 1 : -1;
        const int step_z = dir.z() > 0 ? 1 : -1;
        const double inf = std::numeric_limits<double>::infinity();
        auto boundary_s = [&](double o, double d, double lo, double res, int idx, int step) {
          if (std::abs(d) < 1e-14) return inf;
          const double edge = lo + (idx + (step > 0 ? 1 : 0)) * res;
          return (edge - o) / d;
        };
        double sx = boundary_s(origin.x(), dir.x(), grid.x_min, grid.xy_res, ix, step_x);
        double sy = boundary_s(origin.y(), dir.y(), grid.y_min, grid.xy_res, iy, step_y);
        double sz = boundary_s(origin.z(), dir.z(), grid.z_min, grid.z_res, iz, step_z);
        const double dsx = std::abs(dir.x()) < 1e-14 ? inf : grid.xy_res / std::abs(dir.x());
        const double dsy = std::abs(dir.y()) < 1e-14 ? inf : grid.xy_res / std::abs(dir.y());
        const double dsz = std::abs(dir.z()) < 1e-14 ? inf : grid.z_res / std::abs(dir.z());

        while (true) {
          mask.set(ix, iy, iz, true);
          if (occ.at(ix, iy, iz) != free_class) break;  // occluder itself is seen
          if (sx <= sy && sx <= sz) {
            ix += step_x;
            if (ix < 0 || ix >= w) break;
            sx += dsx;
          } else if (sy <= sz) {
            iy += step_y;
            if (iy < 0 || iy >= h) break;
            sy += dsy;
          } else {
            iz += step_z;
            if (iz < 0 || iz >= zb) break;
            sz += dsz;
          }
        }
      }
    }
  }
  return mask;
}

namespace {

json transform_to_json(const RigidTransform& t) {
  json j;
  j["rotation"] = std::vector<double>(t.rotation.data(), t.rotation.data() + 9);  // column-major
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  return j;
}

RigidTransform transform_from_json(const json& j) {
  RigidTransform t;
  const auto rot = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (rot.size() != 9 || tr.size() != 3)
    throw std::invalid_argument("transform: rotation needs 9 values, translation 3");
  for (int i = 0; i < 9; ++i) t.rotation.data()[i] = rot[static_cast<size_t>(i)];
  t.translation = {tr[0], tr[1], tr[2]};
  return t;
}

std::string kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kBox: return "box";
    case PrimitiveKind::kCylinder: return "cylinder";
    case PrimitiveKind::kGroundPlane: return "ground_plane";
  }
  return "box";
}

PrimitiveKind kind_from_name(const std::string& name) {
  if (name == "box") return PrimitiveKind::kBox;
  if (name == "cylinder") return PrimitiveKind::kCylinder;
  if (name == "ground_plane") return PrimitiveKind::kGroundPlane;
  throw std::invalid_argument("scene: unknown primitive kind \"" + name + "\"");
}

}  // namespace

std::string scene_to_json_string(const Scene& scene) {
  json j;
  j["seed"] = scene.seed;
  j["primitives"] = json::array();
  for (const ScenePrimitive& p : scene.primitives) {
    json pj;
    pj["kind"] = kind_name(p.kind);
    pj["class_id"] = p.class_id;
    pj["size"] = {p.size.x(), p.size.y(), p.size.z()};
    pj["pose"] = transform_to_json(p.pose);
    j["primitives"].push_back(pj);
  }
  j["rig"] = json::array();
  for (const Camera& cam : scene.rig.cameras) {
    json cj;
    cj["name"] = cam.name;
    cj["fx"] = cam.intrinsics.fx;
    cj["fy"] = cam.intrinsics.fy;
    cj["cx"] = cam.intrinsics.cx;
    cj["cy"] = cam.intrinsics.cy;
    cj["width"] = cam.intrinsics.width;
    cj["height"] = cam.intrinsics.height;
    cj["cam_to_ego"] = transform_to_json(cam.cam_to_ego);
    j["rig"].push_back(cj);
  }
  return j.dump(2) + "\n";
}

Scene scene_from_json_string(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin, e.byte, std::string("invalid JSON: ") + e.what());
  }
  try {
    Scene scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    for (const json& pj : j.at("primitives")) {
      ScenePrimitive p;
      p.kind = kind_from_name(pj.at("kind").get<std::string>());
      p.class_id = pj.at("class_id").get<int>();
      const auto size = pj.at("size").get<std::vector<double>>();
      if (size.size() != 3) throw std::invalid_argument("scene: primitive size needs 3 values");
      p.size = {size[0], size[1], size[2]};
      p.pose = transform_from_json(pj.at("pose"));
      scene.primitives.push_back(std::move(p));
    }
    for (const json& cj : j.at("rig")) {
      Camera cam;
      cam.name = cj.at("name").get<std::string>();
      cam.intrinsics.fx = cj.at("fx").get<double>();
      cam.intrinsics.fy = cj.at("fy").get<double>();
      cam.intrinsics.cx = cj.at("cx").get<double>();
      cam.intrinsics.cy = cj.at("cy").get<double>();
      cam.intrinsics.width = cj.at("width").get<int>();
      cam.intrinsics.height = cj.at("height").get<int>();
      cam.cam_to_ego = transform_from_json(cj.at("cam_to_ego"));
      scene.rig.cameras.push_back(std::move(cam));
    }
    return scene;
  } catch (const json::exception& e) {
    throw DataError(origin, 0, std::string("bad scene schema: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(origin, 0, e.what());
  }
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path, 0, "cannot open for writing");
  out << scene_to_json_string(scene);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scene_from_json_string(buf.str(), path);
}

CameraRig make_surround_rig(int num_cameras, int image_width, int image_height, double hfov_deg,
                            double mount_radius_m, double mount_height_m) {
  if (num_cameras < 1) throw std::invalid_argument("rig: need at least one camera");
  CameraRig rig;
  // camera axes (z fwd, x right, y down) expressed in ego (x fwd, y left, z up)
  Eigen::Matrix3d cam_axes;
  cam_axes.col(0) = Eigen::Vector3d(0, -1, 0);
  cam_axes.col(1) = Eigen::Vector3d(0, 0, -1);
  cam_axes.col(2) = Eigen::Vector3d(1, 0, 0);
  const double f = image_width / (2.0 * std::tan(hfov_deg * M_PI / 180.0 / 2.0));
  for (int i = 0; i < num_cameras; ++i) {
    Camera cam;
    cam.name = "cam" + std::to_string(i);
    cam.intrinsics = {f, f, image_width / 2.0, image_height / 2.0, image_width, image_height};
    const double yaw = 2.0 * M_PI * i / num_cameras;
    Eigen::Matrix3d rz;
    rz << std::cos(yaw), -std::sin(yaw), 0, std::sin(yaw), std::cos(yaw), 0, 0, 0, 1;
    cam.cam_to_ego.rotation = rz * cam_axes;
    cam.cam_to_ego.translation = {mount_radius_m * std::cos(yaw), mount_radius_m * std::sin(yaw),
                                  mount_height_m};
    rig.cameras.push_back(std::move(cam));
  }
  return rig;
}

Scene make_random_scene(std::uint64_t seed, const BevGridSpec& grid, int num_cameras, int image_width,
                        int image_height, int num_objects, int num_classes) {
  Rng rng(seed_for(seed, "scene"));
  Scene scene;
  scene.seed = seed;
  scene.rig = make_surround_rig(num_cameras, image_width, image_height);

  // Ground slab just above the grid floor so the lowest voxel layer is solid.
  ScenePrimitive ground;
  ground.kind = PrimitiveKind::kGroundPlane;
  ground.pose = RigidTransform::from_translation(0.0, 0.0, grid.z_min + 0.7 * grid.z_res);
  ground.class_id = num_classes >= 13 ? 11 : 0;
  scene.primitives.push_back(ground);

  const double extent = 0.45 * std::min(grid.x_max - grid.x_min, grid.y_max - grid.y_min);
  const double clear_radius = 4.0;
  const double ground_z = ground.pose.translation.z();
  for (int i = 0; i < num_objects; ++i) {
    ScenePrimitive p;
    double px = 0.0, py = 0.0;
    do {
      px = rng.uniform(-static_cast<float>(extent), static_cast<float>(extent));
      py = rng.uniform(-static_cast<float>(extent), static_cast<float>(extent));
    } while (std::hypot(px, py) < clear_radius);
    p.class_id = rng.uniform_int(0, num_classes - 2);
    if (rng.uniform() < 0.65f) {
      p.kind = PrimitiveKind::kBox;
      p.size = {rng.uniform(0.8f, 4.0f), rng.uniform(0.8f, 4.0f), rng.uniform(0.8f, 3.0f)};
      const double yaw = rng.uniform(0.0f, static_cast<float>(2.0 * M_PI));
      p.pose = RigidTransform::from_yaw_xyz(yaw, px, py, ground_z + p.size.z() * 0.5);
    } else {
      p.kind = PrimitiveKind::kCylinder;
      p.size = {rng.uniform(0.4f, 1.5f), rng.uniform(1.0f, 3.5f), 0.0};
      p.pose = RigidTransform::from_translation(px, py, ground_z + p.size.y() * 0.5);
    }
    scene.primitives.push_back(std::move(p));
  }
  scene.validate(num_classes);
  return scene;
}

}  // namespace bevocc
