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

#include <Eigen/Geometry>

#include "bevocc/view_transform.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bevocc;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

// Forward-looking camera mounted at the given ego position.
Camera forward_camera(double x, double y, double z, double f = 20.0, int w = 8, int h = 8) {
  Camera cam;
  cam.name = "cam0";
  cam.intrinsics = {f, f, w / 2.0, h / 2.0, w, h};
  cam.cam_to_ego.rotation.col(0) = Eigen::Vector3d(0, -1, 0);
  cam.cam_to_ego.rotation.col(1) = Eigen::Vector3d(0, 0, -1);
  cam.cam_to_ego.rotation.col(2) = Eigen::Vector3d(1, 0, 0);
  cam.cam_to_ego.translation = {x, y, z};
  return cam;
}

BevGridSpec small_grid() {
  BevGridSpec g;
  g.x_min = 0.0;
  g.x_max = 12.0;
  g.y_min = -6.0;
  g.y_max = 6.0;
  g.z_min = -1.0;
  g.z_max = 3.0;
  g.xy_res = 1.0;
  g.z_res = 1.0;
  return g;
}

}  // namespace

TEST_CASE("bev grid cell counts") {
  BevGridSpec g;  // defaults: [-40,40) at 0.4, z [-1,5.4) at 0.4
  CHECK(g.width() == 200);
  CHECK(g.height() == 200);
  CHECK(g.z_bins() == 16);
  g.x_max = 40.1;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("predict_depth_context: zero logits give a uniform distribution") {
  const int d = 5, cctx = 3;
  DepthContextParams p;
  p.depth_bins = d;
  p.context_channels = cctx;
  p.conv.weight = Tensor({d + cctx, 4, 1, 1});
  p.conv.bias = Tensor({d + cctx});
  Rng rng(21);
  Tensor feat = random_tensor({1, 4, 3, 3}, rng);
  const DepthContext dc = predict_depth_context(feat, p);
  CHECK(dc.depth_prob.shape() == Shape{1, d, 3, 3});
  CHECK(dc.context.shape() == Shape{1, cctx, 3, 3});
  for (std::int64_t i = 0; i < dc.depth_prob.numel(); ++i)
    CHECK(dc.depth_prob[i] == doctest::Approx(1.0 / d).epsilon(1e-6));
}

TEST_CASE("predict_depth_context matches conv-then-softmax composition") {
  Rng rng(22);
  DepthContextParams p;
  p.depth_bins = 6;
  p.context_channels = 4;
  p.conv = make_conv2d(5, 10, 1, 1, 0, rng);
  Tensor feat = random_tensor({2, 5, 4, 7}, rng);
  const DepthContext dc = predict_depth_context(feat, p);

  const Tensor raw = conv2d(feat, p.conv);
  // slice and softmax independently
  Tensor logits({2, 6, 4, 7}), ctx({2, 4, 4, 7});
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 7; ++x) {
        for (std::int64_t c = 0; c < 6; ++c) logits.at(b, c, y, x) = raw.at(b, c, y, x);
        for (std::int64_t c = 0; c < 4; ++c) ctx.at(b, c, y, x) = raw.at(b, 6 + c, y, x);
      }
  CHECK(max_abs_diff(dc.depth_prob, softmax_axis(logits, 1)) <= 1e-6f);
  CHECK(max_abs_diff(dc.context, ctx) == 0.0f);

  // per-pixel normalization
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 7; ++x) {
        double sum = 0;
        for (std::int64_t c = 0; c < 6; ++c) sum += dc.depth_prob.at(b, c, y, x);
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
}

TEST_CASE("lift: one-hot depth selects a slice, sums collapse to context") {
  Rng rng(23);
  Tensor ctx = random_tensor({1, 3, 2, 2}, rng);
  Tensor prob({1, 4, 2, 2});
  for (std::int64_t y = 0; y < 2; ++y)
    for (std::int64_t x = 0; x < 2; ++x) prob.at(0, 2, y, x) = 1.0f;  // delta at bin 2
  const Tensor lifted = lift(ctx, prob);
  CHECK(lifted.shape() == Shape{1, 3, 4, 2, 2});
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t d = 0; d < 4; ++d)
      for (std::int64_t y = 0; y < 2; ++y)
        for (std::int64_t x = 0; x < 2; ++x)
          CHECK(lifted.at(0, c, d, y, x) == (d == 2 ? ctx.at(0, c, y, x) : 0.0f));

  Tensor sm = softmax_axis(random_tensor({1, 4, 2, 2}, rng), 1);
  const Tensor l2 = lift(ctx, sm);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < 2; ++y)
      for (std::int64_t x = 0; x < 2; ++x) {
        double sum = 0;
        for (std::int64_t d = 0; d < 4; ++d) sum += l2.at(0, c, d, y, x);
        CHECK(std::abs(sum - ctx.at(0, c, y, x)) <= 1e-5);
      }

  // elementwise product oracle
  Tensor big_ctx = random_tensor({2, 5, 3, 4}, rng);
  Tensor big_prob = random_tensor({2, 6, 3, 4}, rng, 0.0f, 1.0f);
  const Tensor big = lift(big_ctx, big_prob);
  float worst = 0;
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t c = 0; c < 5; ++c)
      for (std::int64_t d = 0; d < 6; ++d)
        for (std::int64_t y = 0; y < 3; ++y)
          for (std::int64_t x = 0; x < 4; ++x)
            worst = std::max(worst, std::abs(big.at(b, c, d, y, x) -
                                             big_ctx.at(b, c, y, x) * big_prob.at(b, d, y, x)));
  CHECK(worst <= 1e-6f);
}

TEST_CASE("splat: single frustum point lands in exactly one cell") {
  const BevGridSpec grid = small_grid();
  // one-pixel camera: u = v = 0.5 with cx=cy=0.5 makes the ray the optical axis
  Camera cam = forward_camera(0.0, 0.0, 0.5);
  cam.intrinsics = {10.0, 10.0, 0.5, 0.5, 1, 1};
  const FrustumGrid frustum = build_frustum(1, 1, 1.0, 4.0, 5.0, 1.0);  // single depth 4.5
  REQUIRE(frustum.depth_bins == 1);
  Tensor lifted = Tensor::full({1, 1, 1, 1, 1}, 1.0f);
  const SplatResult res = splat(frustum, lifted, cam, grid);
  // the point sits at ego (4.5, 0, 0.5): cell ix=4, iy=6
  CHECK(res.dropped_points == 0);
  for (std::int64_t iy = 0; iy < grid.height(); ++iy)
    for (std::int64_t ix = 0; ix < grid.width(); ++ix)
      CHECK(res.bev.at(0, 0, iy, ix) == ((ix == 4 && iy == 6) ? 1.0f : 0.0f));
}

TEST_CASE("splat: points above z_max are culled") {
  const BevGridSpec grid = small_grid();
  Camera cam = forward_camera(0.0, 0.0, 10.0);  // mounted far above the grid ceiling
  cam.intrinsics = {50.0, 50.0, 0.5, 0.5, 1, 1};
  const FrustumGrid frustum = build_frustum(1, 1, 1.0, 4.0, 5.0, 1.0);
  Tensor lifted = Tensor::full({1, 2, 1, 1, 1}, 1.0f);
  const SplatResult res = splat(frustum, lifted, cam, grid);
  CHECK(res.dropped_points == 1);
  for (std::int64_t i = 0; i < res.bev.numel(); ++i) CHECK(res.bev[i] == 0.0f);
}

TEST_CASE("splat conserves in-range mass against the point-by-point oracle") {
  Rng rng(24);
  const BevGridSpec grid = small_grid();
  for (int trial = 0; trial < 10; ++trial) {
    Camera cam = forward_camera(rng.uniform(-1.0f, 1.0f), rng.uniform(-1.0f, 1.0f),
                                rng.uniform(0.2f, 1.5f), rng.uniform(6.0f, 30.0f));
    const FrustumGrid frustum = build_frustum(8, 8, 1.0, 0.5, rng.uniform(8.0f, 16.0f), 0.7);
    Tensor lifted = random_tensor({1, 3, frustum.depth_bins, 8, 8}, rng, 0.0f, 1.0f);
    const SplatResult res = splat(frustum, lifted, cam, grid);

    // oracle: per-point projection via homogeneous transform, double sums
    const Eigen::Matrix4d m = testing::to_homogeneous(cam.cam_to_ego);
    double want = 0.0;
    std::int64_t dropped = 0;
    for (int d = 0; d < frustum.depth_bins; ++d)
      for (int vy = 0; vy < 8; ++vy)
        for (int vx = 0; vx < 8; ++vx) {
          const double depth = frustum.depths[static_cast<size_t>(d)];
          const Eigen::Vector3d pc((frustum.us[static_cast<size_t>(vx)] - cam.intrinsics.cx) /
                                       cam.intrinsics.fx * depth,
                                   (frustum.vs[static_cast<size_t>(vy)] - cam.intrinsics.cy) /
                                       cam.intrinsics.fy * depth,
                                   depth);
          const Eigen::Vector3d pe = testing::apply_homogeneous(m, pc);
          const bool in = pe.x() >= grid.x_min && pe.x() < grid.x_max && pe.y() >= grid.y_min &&
                          pe.y() < grid.y_max && pe.z() >= grid.z_min && pe.z() < grid.z_max;
          if (!in) {
            ++dropped;
            continue;
          }
          for (int c = 0; c < 3; ++c) want += lifted.at(0, c, d, vy, vx);
        }
    double got = 0.0;
    for (std::int64_t i = 0; i < res.bev.numel(); ++i) got += res.bev[i];
    CHECK(res.dropped_points == dropped);
    CHECK(std::abs(got - want) <= 1e-4 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("vertical pooling equivalence: z-resolved splat sums to the flat splat") {
  Rng rng(25);
  const BevGridSpec grid = small_grid();
  Camera cam = forward_camera(0.3, -0.2, 0.8);
  const FrustumGrid frustum = build_frustum(8, 8, 1.0, 0.5, 12.0, 0.5);
  Tensor lifted = random_tensor({1, 4, frustum.depth_bins, 8, 8}, rng);
  const SplatResult flat = splat(frustum, lifted, cam, grid);
  const SplatVoxelResult vox = splat_voxels(frustum, lifted, cam, grid);
  CHECK(vox.dropped_points == flat.dropped_points);
  Tensor summed({1, 4, grid.height(), grid.width()});
  for (std::int64_t c = 0; c < 4; ++c)
    for (int z = 0; z < grid.z_bins(); ++z)
      for (std::int64_t y = 0; y < grid.height(); ++y)
        for (std::int64_t x = 0; x < grid.width(); ++x)
          summed.at(0, c, y, x) += vox.voxels.at(0, c, z, y, x);
  CHECK(max_abs_diff(summed, flat.bev) <= 1e-5f);
}

TEST_CASE("multi-camera transform is the sum of per-camera splats") {
  Rng rng(26);
  const BevGridSpec grid = small_grid();
  CameraRig rig;
  rig.cameras.push_back(forward_camera(0.0, -2.0, 0.5));
  rig.cameras.push_back(forward_camera(0.0, 2.0, 0.7));
  rig.cameras[1].name = "cam1";
  const FrustumGrid frustum = build_frustum(8, 8, 1.0, 0.5, 10.0, 0.5);

  DepthContextParams p;
  p.depth_bins = frustum.depth_bins;
  p.context_channels = 3;
  Rng prng(27);
  p.conv = make_conv2d(6, frustum.depth_bins + 3, 1, 1, 0, prng);

  std::vector<Tensor> feats = {random_tensor({1, 6, 8, 8}, rng), random_tensor({1, 6, 8, 8}, rng)};
  const ViewTransformResult both = lss_transform(feats, rig, p, frustum, grid);

  Tensor manual({1, 3, grid.height(), grid.width()});
  std::int64_t dropped = 0;
  for (int i = 0; i < 2; ++i) {
    const DepthContext dc = predict_depth_context(feats[static_cast<size_t>(i)], p);
    const SplatResult part =
        splat(frustum, lift(dc.context, dc.depth_prob), rig.cameras[static_cast<size_t>(i)], grid);
    dropped += part.dropped_points;
    for (std::int64_t j = 0; j < manual.numel(); ++j) manual[j] += part.bev[j];
  }
  CHECK(both.dropped_points == dropped);
  CHECK(max_abs_diff(both.bev, manual) <= 1e-6f);
}

TEST_CASE("ls equals lss when the depth head is uniform, zero in means zero out") {
  Rng rng(28);
  const BevGridSpec grid = small_grid();
  CameraRig rig;
  rig.cameras.push_back(forward_camera(0.0, 0.0, 0.5));
  const FrustumGrid frustum = build_frustum(8, 8, 1.0, 0.5, 10.0, 1.0);
  const int context = 4;

  // depth rows zero (uniform softmax), context rows pass features through
  DepthContextParams p;
  p.depth_bins = frustum.depth_bins;
  p.context_channels = context;
  p.conv.weight = Tensor({frustum.depth_bins + context, context, 1, 1});
  p.conv.bias = Tensor({frustum.depth_bins + context});
  for (int c = 0; c < context; ++c) p.conv.weight.at(frustum.depth_bins + c, c, 0, 0) = 1.0f;

  std::vector<Tensor> feats = {random_tensor({1, context, 8, 8}, rng)};
  const ViewTransformResult via_lss = lss_transform(feats, rig, p, frustum, grid);
  const ViewTransformResult via_ls = ls_transform(feats, rig, frustum, grid);
  CHECK(max_abs_diff(via_lss.bev, via_ls.bev) <= 1e-6f);

  std::vector<Tensor> zeros = {Tensor({1, context, 8, 8})};
  const ViewTransformResult z = ls_transform(zeros, rig, frustum, grid);
  for (std::int64_t i = 0; i < z.bev.numel(); ++i) CHECK(z.bev[i] == 0.0f);
}

TEST_CASE("uniform-depth transform spreads a pixel along its whole in-grid ray") {
  const BevGridSpec grid = small_grid();
  CameraRig rig;
  rig.cameras.push_back(forward_camera(0.0, 0.0, 0.5));
  rig.cameras[0].intrinsics = {10.0, 10.0, 0.5, 0.5, 1, 1};
  const FrustumGrid frustum = build_frustum(1, 1, 1.0, 0.5, 10.5, 1.0);  // depths 1..10
  std::vector<Tensor> feats = {Tensor::full({1, 1, 1, 1}, 1.0f)};
  const ViewTransformResult res = ls_transform(feats, rig, frustum, grid);
  // ray along +x at y=0 z=0.5: every x cell from 1..9.5 within [0,12) gets 1/D
  const float w = 1.0f / static_cast<float>(frustum.depth_bins);
  int hits = 0;
  for (std::int64_t ix = 0; ix < grid.width(); ++ix) {
    const float v = res.bev.at(0, 0, 6, ix);
    if (v > 0) {
      ++hits;
      CHECK(v == doctest::Approx(w).epsilon(1e-6));
    }
  }
  CHECK(hits == 10);  // depths 1.0 .. 10.0 all land inside x < 12
}
