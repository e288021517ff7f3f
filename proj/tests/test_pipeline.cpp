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

#include <filesystem>
#include <map>

#include "bevocc/pipeline.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bevocc;
namespace fs = std::filesystem;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.name = "tiny";
  cfg.seed = 7;
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

Scene tiny_scene(const PipelineConfig& cfg, std::uint64_t seed = 5) {
  return make_random_scene(seed, cfg.grid, cfg.num_cameras, cfg.image_width, cfg.image_height, 6,
                           cfg.num_classes);
}

}  // namespace

TEST_CASE("config json round-trips") {
  const PipelineConfig cfg = tiny_config();
  const std::string text = config_to_json_string(cfg);
  const PipelineConfig back = config_from_json_string(text);
  CHECK(config_to_json_string(back) == text);
  CHECK(back.num_cameras == 2);
  CHECK(back.view_transform.channels == 8);
  CHECK(back.head.widths == std::vector<int>{16, 144});
}

TEST_CASE("config validation names the offending stage") {
  PipelineConfig cfg = tiny_config();
  cfg.head.widths = {16, 100};  // 100 != 18 * 8
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("head"), std::invalid_argument);

  PipelineConfig bad_neck = tiny_config();
  bad_neck.path = PathKind::kVoxel;
  bad_neck.bev_encoder.neck_channels = 100;  // not divisible by Z=8
  bad_neck.head.widths = {16, 144};
  CHECK_THROWS_WITH_AS(bad_neck.validate(), doctest::Contains("divisible"), std::invalid_argument);

  CHECK_THROWS_AS(config_from_json_string("{\"cameras\": 3}"), DataError);
  CHECK_THROWS_AS(config_from_json_string("not json at all"), DataError);

  PipelineConfig oracle_bad = tiny_config();
  oracle_bad.view_transform.depth_mode = DepthMode::kOracle;  // channels != num_classes
  CHECK_THROWS_WITH_AS(oracle_bad.validate(), doctest::Contains("one-hot"), std::invalid_argument);
}

TEST_CASE("rebuilding with the same seed yields bit-identical parameters") {
  const PipelineConfig cfg = tiny_config();
  Pipeline a = build_pipeline(cfg), b = build_pipeline(cfg);
  std::map<std::string, std::vector<float>> pa;
  a.visit_params([&](const std::string& name, Tensor& t) { pa[name] = t.vec(); });
  int visited = 0;
  b.visit_params([&](const std::string& name, Tensor& t) {
    ++visited;
    REQUIRE(pa.count(name) == 1);
    CHECK(pa[name] == t.vec());
  });
  CHECK(visited == static_cast<int>(pa.size()));
  CHECK(a.parameter_count() > 0);
}

TEST_CASE("flash and voxel paths share a bit-identical bev trunk") {
  PipelineConfig cfg = tiny_config();
  Pipeline flash = build_pipeline(cfg);
  cfg.path = PathKind::kVoxel;
  Pipeline voxel = build_pipeline(cfg);
  std::map<std::string, std::vector<float>> trunk;
  flash.visit_params([&](const std::string& name, Tensor& t) {
    if (name.rfind("bev_encoder", 0) == 0) trunk[name] = t.vec();
  });
  REQUIRE(!trunk.empty());
  voxel.visit_params([&](const std::string& name, Tensor& t) {
    if (name.rfind("bev_encoder", 0) == 0) CHECK(trunk.at(name) == t.vec());
  });
}

TEST_CASE("infer produces the configured logit and grid shapes") {
  const PipelineConfig cfg = tiny_config();
  Pipeline p = build_pipeline(cfg);
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  const InferResult r = p.infer(frame);
  CHECK(r.logits.shape() == Shape{1, 18, 8, 32, 32});
  CHECK(r.grid.width == 32);
  CHECK(r.grid.height == 32);
  CHECK(r.grid.z_bins == 8);
  CHECK(r.grid.num_classes == 18);
  CHECK(r.timings.total > 0.0);
}

TEST_CASE("m1-width flash head emits the full-scale occupancy logits") {
  Rng rng(91);
  FlashHeadParams head = make_flash_head(256, {256, 512, 288}, 18, 16, rng);
  const Tensor bev({1, 256, 200, 200});  // zero input
  const Tensor logits = flash_head(bev, head);
  CHECK(logits.shape() == Shape{1, 18, 16, 200, 200});
  // zero biases propagate zero input to zero logits
  for (std::int64_t i = 0; i < logits.numel(); i += 9173) CHECK(logits[i] == 0.0f);
}

TEST_CASE("path isolation: conv kernel families per path") {
  PipelineConfig cfg = tiny_config();
  Pipeline flash = build_pipeline(cfg);
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  op_counters::reset();
  (void)flash.infer(frame);
  const OpCounters fc = op_counters::snapshot();
  CHECK(fc.conv2d_calls > 0);
  CHECK(fc.conv3d_calls == 0);

  cfg.path = PathKind::kVoxel;
  Pipeline voxel = build_pipeline(cfg);
  op_counters::reset();
  (void)voxel.infer(frame);
  const OpCounters vc = op_counters::snapshot();
  CHECK(vc.conv3d_calls > 0);
}

TEST_CASE("temporal off means stateless, temporal on converges under identity motion") {
  PipelineConfig cfg = tiny_config();
  Pipeline p = build_pipeline(cfg);
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  const InferResult a = p.infer(frame);
  const InferResult b = p.infer(frame);
  CHECK(a.logits.vec() == b.logits.vec());

  cfg.temporal = TemporalMode::kMonoAlignConcat;
  Pipeline t = build_pipeline(cfg);
  const InferResult r1 = t.infer(frame);  // zero history
  const InferResult r2 = t.infer(frame);  // history = frame 1 bev, identity motion
  const InferResult r3 = t.infer(frame);  // history = frame 2 bev == frame 1 bev
  CHECK(r2.logits.vec() == r3.logits.vec());
  // the zero-history frame differs from the steady state
  CHECK(r1.logits.vec() != r2.logits.vec());
}

TEST_CASE("zeroed parameters label every voxel as class 0") {
  const PipelineConfig cfg = tiny_config();
  Pipeline p = build_pipeline(cfg);
  p.visit_params([](const std::string&, Tensor& t) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = 0.0f;
  });
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  const InferResult r = p.infer(frame);
  for (std::uint8_t l : r.grid.labels) CHECK(l == 0);
}

TEST_CASE("stage timings sum to the measured total within 5 percent") {
  const PipelineConfig cfg = tiny_config();
  Pipeline p = build_pipeline(cfg);
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  (void)p.infer(frame);  // warm caches
  const InferResult r = p.infer(frame);
  CHECK(r.timings.sum() == doctest::Approx(r.timings.total).epsilon(0.05));
}

TEST_CASE("oracle depth mode splats the raw one-hot features") {
  PipelineConfig cfg = tiny_config();
  cfg.view_transform.depth_mode = DepthMode::kOracle;
  cfg.view_transform.channels = cfg.num_classes;
  cfg.bev_encoder = {{8, 16, 32}, 144, 1};
  cfg.validate();
  Pipeline p = build_pipeline(cfg);
  const Scene scene = tiny_scene(cfg);
  const FrameInput frame = make_frame_input(scene, cfg);
  const InferResult r = p.infer(frame);
  CHECK(r.logits.shape() == Shape{1, 18, 8, 32, 32});

  // the same transform called directly must agree
  const FrustumGrid frustum =
      build_frustum(cfg.image_width, cfg.image_height, 1.0, cfg.view_transform.depth_start_m,
                    cfg.view_transform.depth_end_m, cfg.view_transform.depth_step_m);
  std::vector<Tensor> feats;
  for (const Tensor& img : frame.images)
    feats.push_back(reshape(img, {1, img.size(0), img.size(1), img.size(2)}));
  const ViewTransformResult vt =
      oracle_depth_transform(feats, frame.oracle_depths, frame.rig, frustum, cfg.grid);
  CHECK(vt.dropped_points == r.dropped_points);
}

TEST_CASE("multi-scale head path builds and runs") {
  PipelineConfig cfg = tiny_config();
  cfg.head.kind = HeadKind::kMultiScale;
  cfg.head.widths = {16, 144};
  cfg.head.mso_input_widths = {8, 8, 8};
  cfg.validate();
  Pipeline p = build_pipeline(cfg);
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  const InferResult r = p.infer(frame);
  CHECK(r.logits.shape() == Shape{1, 18, 8, 32, 32});
}

TEST_CASE("checkpoints round-trip parameters bit-exactly") {
  const fs::path dir = fs::temp_directory_path() / "bevocc_ckpt_test";
  fs::remove_all(dir);
  const PipelineConfig cfg = tiny_config();
  Pipeline a = build_pipeline(cfg);
  save_checkpoint(a, dir.string());

  Pipeline b = build_pipeline(cfg);
  b.visit_params([](const std::string&, Tensor& t) {
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] += 1.0f;
  });
  load_checkpoint(b, dir.string());
  std::map<std::string, std::vector<float>> pa;
  a.visit_params([&](const std::string& name, Tensor& t) { pa[name] = t.vec(); });
  b.visit_params([&](const std::string& name, Tensor& t) { CHECK(pa.at(name) == t.vec()); });

  // the two pipelines now agree end to end
  const FrameInput frame = make_frame_input(tiny_scene(cfg), cfg);
  CHECK(a.infer(frame).logits.vec() == b.infer(frame).logits.vec());
  CHECK_THROWS_AS(load_checkpoint(b, (dir / "missing").string()), DataError);
  fs::remove_all(dir);
}

TEST_CASE("frame input validation") {
  const PipelineConfig cfg = tiny_config();
  Pipeline p = build_pipeline(cfg);
  const Scene scene = tiny_scene(cfg);
  FrameInput frame = make_frame_input(scene, cfg);
  frame.images.pop_back();
  CHECK_THROWS_WITH_AS(p.infer(frame), doctest::Contains("images"), std::invalid_argument);

  const Scene wrong_rig = make_random_scene(5, cfg.grid, 3, cfg.image_width, cfg.image_height, 6, 18);
  CHECK_THROWS_AS(make_frame_input(wrong_rig, cfg), std::invalid_argument);
}
