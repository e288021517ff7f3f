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

#include "bevocc/view_transform.hpp"

#include <cmath>

namespace bevocc {

namespace {

int metric_cells(double lo, double hi, double res, const char* axis) {
  const double cells = (hi - lo) / res;
  const double rounded = std::round(cells);
  if (!(cells > 0.0) || std::abs(cells - rounded) > 1e-6)
    throw std::invalid_argument(std::string("grid: (") + axis + "_max - " + axis +
                                "_min)/res must be a positive integer, got " + std::to_string(cells));
  return static_cast<int>(rounded);
}

}  // namespace

int BevGridSpec::width() const { return metric_cells(x_min, x_max, xy_res, "x"); }
int BevGridSpec::height() const { return metric_cells(y_min, y_max, xy_res, "y"); }
int BevGridSpec::z_bins() const { return metric_cells(z_min, z_max, z_res, "z"); }

void BevGridSpec::validate() const {
  if (!(xy_res > 0.0) || !(z_res > 0.0)) throw std::invalid_argument("grid: resolutions must be positive");
  (void)width();
  (void)height();
  (void)z_bins();
}

void DepthContextParams::validate() const {
  if (depth_bins <= 0 || context_channels <= 0)
    throw std::invalid_argument("depth-context: D and C_ctx must be positive");
  if (conv.weight.ndim() != 4 || conv.weight.size(0) != depth_bins + context_channels)
    throw std::invalid_argument("depth-context: conv output width " +
                                std::to_string(conv.weight.ndim() == 4 ? conv.weight.size(0) : -1) +
                                " != D + C_ctx = " + std::to_string(depth_bins + context_channels));
}

DepthContext predict_depth_context(const Tensor& img_feat, const DepthContextParams& p) {
  p.validate();
  const Tensor raw = conv2d(img_feat, p.conv);
  const std::int64_t b = raw.size(0), h = raw.size(2), w = raw.size(3);
  const std::int64_t d = p.depth_bins, cctx = p.context_channels;

  Tensor logits({b, d, h, w});
  Tensor context({b, cctx, h, w});
  const std::int64_t plane = h * w;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    const float* src = raw.data() + bi * (d + cctx) * plane;
    std::copy(src, src + d * plane, logits.data() + bi * d * plane);
    std::copy(src + d * plane, src + (d + cctx) * plane, context.data() + bi * cctx * plane);
  }
  return {softmax_axis(logits, 1), std::move(context)};
}

Tensor lift(const Tensor& context, const Tensor& depth_prob) {
  if (context.ndim() != 4 || depth_prob.ndim() != 4 || context.size(0) != depth_prob.size(0) ||
      context.size(2) != depth_prob.size(2) || context.size(3) != depth_prob.size(3))
    throw std::invalid_argument("lift: context " + shape_str(context.shape()) + " and depth_prob " +
                                shape_str(depth_prob.shape()) + " disagree on B/h/w");
  const std::int64_t b = context.size(0), c = context.size(1);
  const std::int64_t d = depth_prob.size(1), h = context.size(2), w = context.size(3);
  Tensor out({b, c, d, h, w});
  const std::int64_t plane = h * w;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const float* ctx = context.data() + (bi * c + ci) * plane;
      for (std::int64_t di = 0; di < d; ++di) {
        const float* prob = depth_prob.data() + (bi * d + di) * plane;
        float* dst = out.data() + ((bi * c + ci) * d + di) * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] = ctx[i] * prob[i];
      }
    }
  }
  return out;
}

namespace {

// Flattened cell index per frustum point: iy*W + ix for the BEV case,
// (iz*H + iy)*W + ix when keep_z; -1 for dropped points.
std::vector<std::int64_t> project_cells(const FrustumGrid& frustum, const Camera& camera,
                                        const BevGridSpec& grid, bool keep_z, std::int64_t* dropped) {
  const int w = grid.width(), h = grid.height(), zb = grid.z_bins();
  const std::int64_t points = frustum.point_count();
  std::vector<std::int64_t> cells(static_cast<size_t>(points), -1);
  std::int64_t miss = 0;

  const Eigen::Matrix3d& rot = camera.cam_to_ego.rotation;
  const Eigen::Vector3d& tr = camera.cam_to_ego.translation;
  std::int64_t n = 0;
  for (int di = 0; di < frustum.depth_bins; ++di) {
    const double depth = frustum.depths[static_cast<size_t>(di)];
    for (int vi = 0; vi < frustum.feat_h; ++vi) {
      const double v = frustum.vs[static_cast<size_t>(vi)];
      for (int ui = 0; ui < frustum.feat_w; ++ui, ++n) {
        const double u = frustum.us[static_cast<size_t>(ui)];
        const Eigen::Vector3d cam = pixel_to_camera(u, v, depth, camera.intrinsics);
        const Eigen::Vector3d ego = rot * cam + tr;
        const double fx = (ego.x() - grid.x_min) / grid.xy_res;
        const double fy = (ego.y() - grid.y_min) / grid.xy_res;
        const double fz = (ego.z() - grid.z_min) / grid.z_res;
        if (fx < 0.0 || fy < 0.0 || fz < 0.0) {
          ++miss;
          continue;
        }
        const std::int64_t ix = static_cast<std::int64_t>(fx);
        const std::int64_t iy = static_cast<std::int64_t>(fy);
        const std::int64_t iz = static_cast<std::int64_t>(fz);
        if (ix >= w || iy >= h || iz >= zb) {
          ++miss;
          continue;
        }
        cells[static_cast<size_t>(n)] = keep_z ? (iz * h + iy) * w + ix : iy * w + ix;
      }
    }
  }
  if (dropped) *dropped = miss;
  return cells;
}

void check_lifted(const FrustumGrid& frustum, const Tensor& lifted) {
  if (lifted.ndim() != 5 || lifted.size(2) != frustum.depth_bins || lifted.size(3) != frustum.feat_h ||
      lifted.size(4) != frustum.feat_w)
    throw std::invalid_argument("splat: lifted " + shape_str(lifted.shape()) +
                                " does not match frustum D/h/w (" + std::to_string(frustum.depth_bins) +
                                "," + std::to_string(frustum.feat_h) + "," + std::to_string(frustum.feat_w) +
                                ")");
}

}  // namespace

SplatResult splat(const FrustumGrid& frustum, const Tensor& lifted, const Camera& camera,
                  const BevGridSpec& grid) {
  grid.validate();
  check_lifted(frustum, lifted);
  const std::int64_t b = lifted.size(0), c = lifted.size(1);
  const std::int64_t points = frustum.point_count();
  std::int64_t dropped = 0;
  const std::vector<std::int64_t> cells = project_cells(frustum, camera, grid, false, &dropped);

  Tensor bev({b, c, grid.height(), grid.width()});
  const std::int64_t plane = static_cast<std::int64_t>(grid.height()) * grid.width();
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const float* src = lifted.data() + (bi * c + ci) * points;
      float* dst = bev.data() + (bi * c + ci) * plane;
      for (std::int64_t n = 0; n < points; ++n) {
        const std::int64_t cell = cells[static_cast<size_t>(n)];
        if (cell >= 0) dst[cell] += src[n];
      }
    }
  }
  return {std::move(bev), dropped};
}

SplatVoxelResult splat_voxels(const FrustumGrid& frustum, const Tensor& lifted, const Camera& camera,
                              const BevGridSpec& grid) {
  grid.validate();
  check_lifted(frustum, lifted);
  const std::int64_t b = lifted.size(0), c = lifted.size(1);
  const std::int64_t points = frustum.point_count();
  std::int64_t dropped = 0;
  const std::vector<std::int64_t> cells = project_cells(frustum, camera, grid, true, &dropped);

  Tensor vox({b, c, grid.z_bins(), grid.height(), grid.width()});
  const std::int64_t volume = static_cast<std::int64_t>(grid.z_bins()) * grid.height() * grid.width();
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const float* src = lifted.data() + (bi * c + ci) * points;
      float* dst = vox.data() + (bi * c + ci) * volume;
      for (std::int64_t n = 0; n < points; ++n) {
        const std::int64_t cell = cells[static_cast<size_t>(n)];
        if (cell >= 0) dst[cell] += src[n];
      }
    }
  }
  return {std::move(vox), dropped};
}

namespace {

void accumulate(Tensor& acc, const Tensor& part) {
  for (std::int64_t i = 0; i < acc.numel(); ++i) acc[i] += part[i];
}

void check_cam_feats(const std::vector<Tensor>& cam_feats, const CameraRig& rig) {
  rig.validate();
  if (cam_feats.size() != rig.cameras.size())
    throw std::invalid_argument("view transform: " + std::to_string(cam_feats.size()) +
                                " feature maps for " + std::to_string(rig.cameras.size()) + " cameras");
}

}  // namespace

ViewTransformResult lss_transform(const std::vector<Tensor>& cam_feats, const CameraRig& rig,
                                  const DepthContextParams& params, const FrustumGrid& frustum,
                                  const BevGridSpec& grid) {
  check_cam_feats(cam_feats, rig);
  Tensor bev;
  std::int64_t dropped = 0;
  for (size_t i = 0; i < cam_feats.size(); ++i) {
    DepthContext dc = predict_depth_context(cam_feats[i], params);
    const Tensor lifted = lift(dc.context, dc.depth_prob);
    SplatResult part = splat(frustum, lifted, rig.cameras[i], grid);
    dropped += part.dropped_points;
    if (i == 0)
      bev = std::move(part.bev);
    else
      accumulate(bev, part.bev);
  }
  return {std::move(bev), dropped};
}

ViewTransformResult ls_transform(const std::vector<Tensor>& cam_feats, const CameraRig& rig,
                                 const FrustumGrid& frustum, const BevGridSpec& grid) {
  check_cam_feats(cam_feats, rig);
  Tensor bev;
  std::int64_t dropped = 0;
  for (size_t i = 0; i < cam_feats.size(); ++i) {
    const Tensor& feat = cam_feats[i];
    Tensor prob = Tensor::full({feat.size(0), frustum.depth_bins, feat.size(2), feat.size(3)},
                               1.0f / static_cast<float>(frustum.depth_bins));
    const Tensor lifted = lift(feat, prob);
    SplatResult part = splat(frustum, lifted, rig.cameras[i], grid);
    dropped += part.dropped_points;
    if (i == 0)
      bev = std::move(part.bev);
    else
      accumulate(bev, part.bev);
  }
  return {std::move(bev), dropped};
}

ViewTransformResult oracle_depth_transform(const std::vector<Tensor>& cam_feats,
                                           const std::vector<Tensor>& depth_maps, const CameraRig& rig,
                                           const FrustumGrid& frustum, const BevGridSpec& grid) {
  check_cam_feats(cam_feats, rig);
  if (depth_maps.size() != cam_feats.size())
    throw std::invalid_argument("oracle transform: depth map count mismatch");
  Tensor bev;
  std::int64_t dropped = 0;
  for (size_t i = 0; i < cam_feats.size(); ++i) {
    const Tensor& feat = cam_feats[i];
    const Tensor& depth = depth_maps[i];
    if (depth.ndim() != 2 || depth.size(0) != feat.size(2) || depth.size(1) != feat.size(3))
      throw std::invalid_argument("oracle transform: depth map " + shape_str(depth.shape()) +
                                  " does not match features " + shape_str(feat.shape()));
    Tensor prob({feat.size(0), frustum.depth_bins, feat.size(2), feat.size(3)});
    const std::int64_t plane = feat.size(2) * feat.size(3);
    for (std::int64_t bi = 0; bi < feat.size(0); ++bi) {
      for (std::int64_t px = 0; px < plane; ++px) {
        const float d = depth[px];
        if (!std::isfinite(d)) continue;
        const int bin = frustum.bin_of(static_cast<double>(d));
        if (bin >= 0) prob[(bi * frustum.depth_bins + bin) * plane + px] = 1.0f;
      }
    }
    const Tensor lifted = lift(feat, prob);
    SplatResult part = splat(frustum, lifted, rig.cameras[i], grid);
    dropped += part.dropped_points;
    if (i == 0)
      bev = std::move(part.bev);
    else
      accumulate(bev, part.bev);
  }
  return {std::move(bev), dropped};
}

}  // namespace bevocc
