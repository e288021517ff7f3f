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

#include "bevocc/bench.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bevocc;

namespace {

PipelineConfig bench_config() {
  PipelineConfig cfg;
  cfg.name = "bench-tiny";
  cfg.seed = 9;
  cfg.num_cameras = 2;
  cfg.image_width = 16;
  cfg.image_height = 12;
  cfg.image_encoder = {{8, 16}, 16, 1};
  cfg.view_transform.channels = 8;
  cfg.view_transform.depth_end_m = 9.0;
  cfg.view_transform.depth_step_m = 1.0;
  cfg.grid = {-6.4, 6.4, -6.4, 6.4, -1.0, 2.2, 0.4, 0.4};
  cfg.bev_encoder = {{8, 16, 32}, 144, 1};
  cfg.head = {HeadKind::kMultiConv, {16, 144}, {}};
  cfg.voxel_head_widths = {8};
  return cfg;
}

}  // namespace

TEST_CASE("bench rejects too few iterations") {
  CHECK_THROWS_AS(run_bench(bench_config(), 0, 2, {PathKind::kFlash}), std::invalid_argument);
  CHECK_THROWS_AS(run_bench(bench_config(), -1, 3, {PathKind::kFlash}), std::invalid_argument);
  CHECK_THROWS_AS(run_bench(bench_config(), 0, 3, {}), std::invalid_argument);
}

TEST_CASE("analytic conv flop counts follow the formulas") {
  // a 1x1 conv with Cin=Cout=1 on a 2x2 grid costs 2*1*1*1*1*2*2 = 8
  PipelineConfig base = bench_config();
  Pipeline p = build_pipeline(base);
  const auto& flops = p.stage_flops();
  // head: convs 144in->16 and 16->144 at 32x32, 3x3 kernels
  const long long want_head = 2LL * 144 * 9 * 16 * 32 * 32 + 2LL * 16 * 9 * 144 * 32 * 32;
  CHECK(flops.at("head") == want_head);

  // doubling the grid width doubles every bev-side conv count exactly
  PipelineConfig wide = base;
  wide.grid.x_max = 19.2;  // 64 cells instead of 32
  Pipeline q = build_pipeline(wide);
  CHECK(q.stage_flops().at("head") == 2 * want_head);

  // the voxel head formula carries the kernel depth and Z factors
  PipelineConfig vox = base;
  vox.path = PathKind::kVoxel;
  Pipeline v = build_pipeline(vox);
  const long long want_vox = 2LL * (144 / 8) * 27 * 8 * (8 * 32 * 32) +  // 3x3x3, 18ch -> 8ch
                             2LL * 8 * 1 * 18 * (8 * 32 * 32);           // 1x1x1 classifier
  CHECK(v.stage_flops().at("head") == want_vox);
}

TEST_CASE("flash head flops are strictly lower at matched full-scale configs") {
  for (const std::vector<int>& mc : {std::vector<int>{128, 256, 288}, std::vector<int>{256, 512, 288}}) {
    PipelineConfig cfg;
    cfg.name = "m-style";
    cfg.head.widths = mc;
    cfg.view_transform.channels = 64;
    cfg.image_width = 88;
    cfg.image_height = 32;
    cfg.image_encoder = {{32, 64}, 64, 1};
    cfg.bev_encoder = {{128, 256, 512}, 256, 1};
    cfg.voxel_head_widths = {128, 128};
    Pipeline flash = build_pipeline(cfg);
    cfg.path = PathKind::kVoxel;
    Pipeline voxel = build_pipeline(cfg);
    CHECK(flash.stage_flops().at("head") < voxel.stage_flops().at("head"));
  }
}

TEST_CASE("bench report: determinism, counters, byte accounting") {
  const PipelineConfig cfg = bench_config();
  const BenchReport a = run_bench(cfg, 1, 3, {PathKind::kFlash, PathKind::kVoxel});
  const BenchReport b = run_bench(cfg, 1, 3, {PathKind::kFlash, PathKind::kVoxel});

  const PathReport* fa = a.find("flash");
  const PathReport* va = a.find("voxel");
  REQUIRE(fa);
  REQUIRE(va);
  // flop counts and parameter counts are identical across runs
  CHECK(fa->flops == b.find("flash")->flops);
  CHECK(va->flops == b.find("voxel")->flops);
  CHECK(fa->parameter_count == b.find("flash")->parameter_count);
  CHECK(fa->peak_bytes == b.find("flash")->peak_bytes);
  CHECK(va->peak_bytes == b.find("voxel")->peak_bytes);

  // structural counters
  CHECK(fa->conv3d_calls == 0);
  CHECK(fa->conv2d_calls > 0);
  CHECK(va->conv3d_calls > 0);

  // the report carries grouped stages and speedups
  CHECK(fa->timing_s.count("bev_enc_occ") == 1);
  CHECK(fa->timing_s.count("others") == 1);
  CHECK(a.speedup.count("head_wall") == 1);

  // byte accounting equals a direct instrumented inference
  PipelineConfig direct_cfg = cfg;
  Pipeline direct = build_pipeline(direct_cfg);
  const Scene scene = make_random_scene(cfg.seed, cfg.grid, cfg.num_cameras, cfg.image_width,
                                        cfg.image_height, 10, cfg.num_classes);
  const FrameInput frame = make_frame_input(scene, direct_cfg);
  const InferResult r = direct.infer(frame);
  for (const auto& [stage, bytes] : r.stage_peak_bytes) {
    INFO(stage);
    CHECK(fa->peak_bytes.at(stage) == bytes);
  }

  // json serialization carries the documented keys
  const auto j = nlohmann::json::parse(a.to_json_string());
  CHECK(j.at("paths").size() == 2);
  CHECK(j.at("paths")[0].contains("flops"));
  CHECK(j.at("paths")[0].contains("peak_tensor_bytes"));
  CHECK(j.at("paths")[0].contains("timing_s"));
  CHECK(j.contains("speedup"));
}

TEST_CASE("median wall-clock ordering is stable across repeated bench runs") {
  const PipelineConfig cfg = bench_config();
  int flash_faster = 0;
  for (int run = 0; run < 5; ++run) {
    const BenchReport r = run_bench(cfg, 1, 3, {PathKind::kFlash, PathKind::kVoxel});
    if (r.find("flash")->timing_s.at("head").median_s < r.find("voxel")->timing_s.at("head").median_s)
      ++flash_faster;
  }
  // same winner every time
  CHECK((flash_faster == 0 || flash_faster == 5));
  CHECK(flash_faster == 5);  // and at this config the 2D head is the fast one
}
