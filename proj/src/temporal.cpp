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

#include "bevocc/temporal.hpp"

#include <cmath>

namespace bevocc {

Tensor align_bev(const Tensor& history, const RigidTransform& pose_hist, const RigidTransform& pose_cur,
                 const BevGridSpec& grid) {
  if (history.ndim() != 4)
    throw std::invalid_argument("align_bev: history must be [B,C,H,W], got " + shape_str(history.shape()));
  pose_hist.validate();
  pose_cur.validate();
  grid.validate();
  const std::int64_t b = history.size(0), c = history.size(1);
  const std::int64_t h = history.size(2), w = history.size(3);
  if (h != grid.height() || w != grid.width())
    throw std::invalid_argument("align_bev: tensor " + shape_str(history.shape()) +
                                " does not match grid " + std::to_string(grid.width()) + "x" +
                                std::to_string(grid.height()));

  // current ego -> history ego, reduced to the ground plane. Identical
  // poses compose to the identity exactly, so skip the float algebra that
  // would otherwise leave ~1e-16 residue in the rotation.
  RigidTransform rel;
  const bool same_pose = (pose_hist.rotation - pose_cur.rotation).cwiseAbs().maxCoeff() == 0.0 &&
                         (pose_hist.translation - pose_cur.translation).cwiseAbs().maxCoeff() == 0.0;
  if (!same_pose) rel = compose(inverse(pose_hist), pose_cur);
  const double yaw = std::atan2(rel.rotation(1, 0), rel.rotation(0, 0));
  const double cy = std::cos(yaw), sy = std::sin(yaw);

  // Sampling coordinates are formed in cell units so that identity and
  // cell-multiple translations hit integer positions exactly. Offsets
  // within 1e-9 of a whole cell are snapped: that reads "k * xy_res up to
  // representation error" as exactly k cells.
  auto cellify = [&](double v) {
    const double cells = v / grid.xy_res;
    const double snapped = std::round(cells);
    return std::abs(cells - snapped) < 1e-9 ? snapped : cells;
  };
  const double kx = cellify((cy - 1.0) * grid.x_min - sy * grid.y_min + rel.translation.x());
  const double ky = cellify(sy * grid.x_min + (cy - 1.0) * grid.y_min + rel.translation.y());

  Tensor out({b, c, h, w});
  const std::int64_t plane = h * w;
  for (std::int64_t iy = 0; iy < h; ++iy) {
    const double cell_y = static_cast<double>(iy) + 0.5;
    for (std::int64_t ix = 0; ix < w; ++ix) {
      const double cell_x = static_cast<double>(ix) + 0.5;
      const double gx = cy * cell_x - sy * cell_y + kx - 0.5;
      const double gy = sy * cell_x + cy * cell_y + ky - 0.5;
      const std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
      const std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
      const double fx = gx - static_cast<double>(x0);
      const double fy = gy - static_cast<double>(y0);
      const bool x0_in = x0 >= 0 && x0 < w, x1_in = x0 + 1 >= 0 && x0 + 1 < w;
      const bool y0_in = y0 >= 0 && y0 < h, y1_in = y0 + 1 >= 0 && y0 + 1 < h;
      if (!(x0_in || x1_in) || !(y0_in || y1_in)) continue;  // fully outside, keep zero

      const double w00 = (1.0 - fx) * (1.0 - fy), w10 = fx * (1.0 - fy);
      const double w01 = (1.0 - fx) * fy, w11 = fx * fy;
      for (std::int64_t bc = 0; bc < b * c; ++bc) {
        const float* src = history.data() + bc * plane;
        double v = 0.0;
        if (x0_in && y0_in) v += w00 * static_cast<double>(src[y0 * w + x0]);
        if (x1_in && y0_in) v += w10 * static_cast<double>(src[y0 * w + x0 + 1]);
        if (x0_in && y1_in) v += w01 * static_cast<double>(src[(y0 + 1) * w + x0]);
        if (x1_in && y1_in) v += w11 * static_cast<double>(src[(y0 + 1) * w + x0 + 1]);
        out.data()[bc * plane + iy * w + ix] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor fuse_concat(const Tensor& current, const Tensor& aligned, const Conv2dParams& fuse_conv) {
  if (current.shape() != aligned.shape())
    throw std::invalid_argument("fuse_concat: current " + shape_str(current.shape()) + " vs aligned " +
                                shape_str(aligned.shape()));
  const std::int64_t b = current.size(0), c = current.size(1);
  const std::int64_t plane = current.size(2) * current.size(3);
  if (fuse_conv.weight.size(1) != 2 * c || fuse_conv.weight.size(0) != c)
    throw std::invalid_argument("fuse_concat: conv must map 2C=" + std::to_string(2 * c) + " -> C=" +
                                std::to_string(c) + ", got " + shape_str(fuse_conv.weight.shape()));

  Tensor cat({b, 2 * c, current.size(2), current.size(3)});
  for (std::int64_t bi = 0; bi < b; ++bi) {
    std::copy(current.data() + bi * c * plane, current.data() + (bi + 1) * c * plane,
              cat.data() + bi * 2 * c * plane);
    std::copy(aligned.data() + bi * c * plane, aligned.data() + (bi + 1) * c * plane,
              cat.data() + (bi * 2 + 1) * c * plane);
  }
  return conv2d(cat, fuse_conv);
}

}  // namespace bevocc
