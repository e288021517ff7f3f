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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bevocc/bench.hpp"
#include "bevocc/eval.hpp"
#include "bevocc/head.hpp"
#include "bevocc/pipeline.hpp"
#include "bevocc/scene.hpp"

namespace {

using namespace bevocc;
using nlohmann::json;

BevGridSpec grid_from_values(const std::vector<double>& v) {
  if (v.empty()) return BevGridSpec{};
  BevGridSpec g;
  g.x_min = v[0];
  g.x_max = v[1];
  g.y_min = v[2];
  g.y_max = v[3];
  g.z_min = v[4];
  g.z_max = v[5];
  g.xy_res = v[6];
  g.z_res = v[7];
  g.validate();
  return g;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path, 0, "cannot open for writing");
  out << text;
}

int cmd_gen_scene(std::uint64_t seed, const std::string& out_path, const std::string& gt_path,
                  const std::string& mask_path, const std::vector<double>& grid_values, int cameras,
                  int image_width, int image_height, int objects) {
  const BevGridSpec grid = grid_from_values(grid_values);
  const Scene scene = make_random_scene(seed, grid, cameras, image_width, image_height, objects);
  save_scene(scene, out_path);
  std::cout << "scene: " << out_path << " (" << scene.primitives.size() << " primitives, "
            << scene.rig.cameras.size() << " cameras)\n";
  if (!gt_path.empty()) {
    save_occg(voxelize(scene, grid), gt_path);
    std::cout << "ground truth: " << gt_path << "\n";
  }
  if (!mask_path.empty()) {
    save_occg(visibility_mask(scene, scene.rig, grid), mask_path);
    std::cout << "visibility mask: " << mask_path << "\n";
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& scene_path, const std::string& path_override,
            const std::string& out_path) {
  PipelineConfig config = load_config(config_path);
  if (path_override == "flash")
    config.path = PathKind::kFlash;
  else if (path_override == "voxel")
    config.path = PathKind::kVoxel;
  else if (!path_override.empty())
    throw std::invalid_argument("run: --path must be flash or voxel, got " + path_override);
  config.validate();

  const Scene scene = load_scene(scene_path);
  Pipeline pipeline = build_pipeline(config);
  const FrameInput frame = make_frame_input(scene, config);
  const InferResult result = pipeline.infer(frame);
  save_occg(result.grid, out_path);

  std::cout << "prediction: " << out_path << " (" << result.grid.width << "x" << result.grid.height << "x"
            << result.grid.z_bins << ", " << result.grid.num_classes << " classes)\n";
  std::cout << "dropped frustum points: " << result.dropped_points << "\n";
  std::printf("timings [ms]: image_enc %.2f  view_transform %.2f  temporal %.2f  bev_enc %.2f  head %.2f  argmax %.2f  total %.2f\n",
              result.timings.image_encoder * 1e3, result.timings.view_transform * 1e3,
              result.timings.temporal * 1e3, result.timings.bev_encoder * 1e3, result.timings.head * 1e3,
              result.timings.argmax * 1e3, result.timings.total * 1e3);
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& mask_path,
             bool masked, const std::string& out_path) {
  const OccupancyGrid pred = load_occg(pred_path);
  const OccupancyGrid gt = load_occg(gt_path);
  VisibilityMask mask;
  if (masked) {
    if (mask_path.empty()) throw std::invalid_argument("eval: --masked needs --mask FILE");
    mask = load_occg_mask(mask_path);
  }
  const ConfusionMatrix conf = confusion(pred, gt, masked ? &mask : nullptr);
  const MiouResult result = miou(conf, semantic_classes(gt.num_classes));

  json j;
  j["miou"] = result.mean;
  j["counted_classes"] = result.counted_classes;
  j["masked"] = masked;
  j["voxels_counted"] = conf.total();
  j["per_class_iou"] = json::array();
  for (const auto& iou : result.per_class_iou) {
    if (iou)
      j["per_class_iou"].push_back(*iou);
    else
      j["per_class_iou"].push_back(nullptr);
  }
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) write_text(out_path, text);
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& paths, int warmup, int iters,
              const std::string& report_path, const std::string& scene_path) {
  const PipelineConfig config = load_config(config_path);
  std::vector<PathKind> kinds;
  if (paths == "both")
    kinds = {PathKind::kFlash, PathKind::kVoxel};
  else if (paths == "flash")
    kinds = {PathKind::kFlash};
  else if (paths == "voxel")
    kinds = {PathKind::kVoxel};
  else
    throw std::invalid_argument("bench: --paths must be both, flash or voxel, got " + paths);

  Scene scene;
  const Scene* scene_ptr = nullptr;
  if (!scene_path.empty()) {
    scene = load_scene(scene_path);
    scene_ptr = &scene;
  }
  const BenchReport report = run_bench(config, warmup, iters, kinds, scene_ptr);
  if (!report_path.empty()) write_text(report_path, report.to_json_string());

  for (const PathReport& p : report.paths) {
    std::printf("%-5s  head %.2f ms  bev_enc+occ %.2f ms  total %.2f ms  head_flops %lld  peak %lld MiB\n",
                p.path.c_str(), p.timing_s.at("head").median_s * 1e3,
                p.timing_s.at("bev_enc_occ").median_s * 1e3, p.timing_s.at("total").median_s * 1e3,
                p.flops.at("head"), p.peak_bytes.at("max") / (1024 * 1024));
    if (p.timer_warning) std::cout << "  warning: stage medians near timer resolution\n";
  }
  for (const auto& [name, ratio] : report.speedup)
    std::printf("speedup %-16s %.2fx\n", name.c_str(), ratio);
  return 0;
}

// Compact invariant suite behind `selftest`; the full suites live in the
// test binaries.
int selftest_failures = 0;

void check(bool ok, const std::string& name, const std::string& detail = "") {
  if (ok) {
    std::cout << "[ok]   " << name << "\n";
  } else {
    std::cout << "[FAIL] " << name << (detail.empty() ? "" : ": " + detail) << "\n";
    ++selftest_failures;
  }
}

void naive_conv2d(const Tensor& in, const Conv2dParams& p, Tensor& out) {
  const std::int64_t b = in.size(0), cin = in.size(1), h = in.size(2), w = in.size(3);
  const std::int64_t cout = p.weight.size(0), kh = p.weight.size(2), kw = p.weight.size(3);
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t co = 0; co < cout; ++co)
      for (std::int64_t oy = 0; oy < out.size(2); ++oy)
        for (std::int64_t ox = 0; ox < out.size(3); ++ox) {
          double acc = p.bias[co];
          for (std::int64_t ci = 0; ci < cin; ++ci)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t iy = oy * p.stride - p.padding + ky;
                const std::int64_t ix = ox * p.stride - p.padding + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += static_cast<double>(in.at(bi, ci, iy, ix)) *
                       static_cast<double>(p.weight.at(co, ci, ky, kx));
              }
          out.at(bi, co, oy, ox) = static_cast<float>(acc);
        }
}

int cmd_selftest() {
  Rng rng(20260809);

  {  // channel-to-height bijection + index map
    Tensor bev({1, 12, 5, 4});
    for (std::int64_t i = 0; i < bev.numel(); ++i) bev[i] = rng.normal();
    const Tensor logits = channel_to_height(bev, 3, 4);
    bool spot = true;
    for (int trial = 0; trial < 200; ++trial) {
      const int k = rng.uniform_int(0, 2), z = rng.uniform_int(0, 3);
      const int y = rng.uniform_int(0, 4), x = rng.uniform_int(0, 3);
      if (logits.at(0, k, z, y, x) != bev.at(0, k * 4 + z, y, x)) spot = false;
    }
    const Tensor back = height_to_channel(logits);
    check(spot && back.vec() == bev.vec() && back.shape() == bev.shape(),
          "channel_to_height round trip + index map");
  }
  {  // conv2d against the naive loop oracle
    Tensor in({2, 3, 7, 7});
    for (std::int64_t i = 0; i < in.numel(); ++i) in[i] = rng.normal();
    Conv2dParams p = make_conv2d(3, 4, 3, 2, 1, rng);
    for (std::int64_t i = 0; i < p.bias.numel(); ++i) p.bias[i] = rng.normal();
    const Tensor got = conv2d(in, p);
    Tensor want(got.shape());
    naive_conv2d(in, p, want);
    float err = 0;
    for (std::int64_t i = 0; i < got.numel(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
    check(err <= 1e-5f, "conv2d matches naive oracle", "max abs err " + std::to_string(err));
  }
  {  // softmax normalization
    Tensor t({3, 5, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-10.f, 10.f);
    const Tensor s = softmax_axis(t, 1);
    double worst = 0;
    for (std::int64_t o = 0; o < 3; ++o)
      for (std::int64_t i = 0; i < 4; ++i) {
        double sum = 0;
        for (std::int64_t j = 0; j < 5; ++j) sum += s.at(o, j, i);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    check(worst <= 1e-6, "softmax sums to one");
  }
  {  // rigid transform round trip
    const RigidTransform t = RigidTransform::from_yaw_xyz(0.7, 1.5, -2.0, 0.3);
    const Eigen::Vector3d p(3.0, -1.0, 2.0);
    const Eigen::Vector3d q = transform_point(transform_point(p, t), inverse(t));
    check((q - p).cwiseAbs().maxCoeff() <= 1e-5, "rigid transform inverse round trip");
  }
  {  // splat locality and conservation
    BevGridSpec grid;
    grid.x_min = 0;
    grid.x_max = 8;
    grid.y_min = -4;
    grid.y_max = 4;
    grid.z_min = 0;
    grid.z_max = 2;
    grid.xy_res = 1.0;
    grid.z_res = 1.0;
    Camera cam;
    cam.name = "c";
    cam.intrinsics = {10, 10, 2, 2, 4, 4};
    Eigen::Matrix3d axes;
    axes.col(0) = Eigen::Vector3d(0, -1, 0);
    axes.col(1) = Eigen::Vector3d(0, 0, -1);
    axes.col(2) = Eigen::Vector3d(1, 0, 0);
    cam.cam_to_ego.rotation = axes;
    cam.cam_to_ego.translation = {0, 0, 1.0};
    const FrustumGrid frustum = build_frustum(4, 4, 1.0, 0.5, 7.5, 1.0);
    Tensor lifted({1, 2, frustum.depth_bins, 4, 4});
    for (std::int64_t i = 0; i < lifted.numel(); ++i) lifted[i] = rng.uniform();
    const SplatResult res = splat(frustum, lifted, cam, grid);
    double mass_in = 0, mass_out = 0;
    for (std::int64_t i = 0; i < res.bev.numel(); ++i) mass_out += res.bev[i];
    // independent recount of in-range mass
    std::int64_t n = 0;
    for (int d = 0; d < frustum.depth_bins; ++d)
      for (int vy = 0; vy < 4; ++vy)
        for (int vx = 0; vx < 4; ++vx, ++n) {
          const Eigen::Vector3d pc =
              pixel_to_camera(frustum.us[vx], frustum.vs[vy], frustum.depths[d], cam.intrinsics);
          const Eigen::Vector3d pe = transform_point(pc, cam.cam_to_ego);
          if (pe.x() < grid.x_min || pe.x() >= grid.x_max || pe.y() < grid.y_min ||
              pe.y() >= grid.y_max || pe.z() < grid.z_min || pe.z() >= grid.z_max)
            continue;
          for (int c = 0; c < 2; ++c)
            mass_in += lifted.at(0, c, d, vy, vx);
        }
    check(std::abs(mass_in - mass_out) <= 1e-4 * std::max(1.0, std::abs(mass_in)),
          "splat conserves in-range mass");
  }
  {  // identity warp
    BevGridSpec grid;
    grid.x_min = -4;
    grid.x_max = 4;
    grid.y_min = -4;
    grid.y_max = 4;
    grid.xy_res = 0.4;
    Tensor bev({1, 3, grid.height(), grid.width()});
    for (std::int64_t i = 0; i < bev.numel(); ++i) bev[i] = rng.normal();
    const RigidTransform pose = RigidTransform::from_yaw_xyz(0.3, 5.0, -2.0, 0.0);
    const Tensor warped = align_bev(bev, pose, pose, grid);
    check(warped.vec() == bev.vec(), "identity-pose warp is bit-exact");
  }
  {  // miou on identical grids
    OccupancyGrid g = OccupancyGrid::filled(6, 5, 4, 5, 4);
    for (size_t i = 0; i < g.labels.size(); ++i) g.labels[i] = static_cast<std::uint8_t>(i % 5);
    const MiouResult m = miou(confusion(g, g), semantic_classes(5));
    check(std::abs(m.mean - 1.0) < 1e-12, "self-comparison mIoU is 1.0");
  }
  {  // fixture file round trips
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bevocc_selftest";
    fs::create_directories(dir);
    Tensor t({2, 3, 4});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
    save_ften(t, (dir / "t.ften").string());
    const Tensor t2 = load_ften((dir / "t.ften").string());
    OccupancyGrid g = OccupancyGrid::filled(3, 4, 5, 7, 6);
    for (size_t i = 0; i < g.labels.size(); ++i) g.labels[i] = static_cast<std::uint8_t>(i % 7);
    save_occg(g, (dir / "g.occg").string());
    const OccupancyGrid g2 = load_occg((dir / "g.occg").string());
    check(t2.shape() == t.shape() && t2.vec() == t.vec() && g2.labels == g.labels &&
              g2.num_classes == g.num_classes,
          "FTEN/OCCG round trips");
    fs::remove_all(dir);
  }
  {  // tiny pipeline: determinism and path isolation
    PipelineConfig cfg;
    cfg.name = "selftest";
    cfg.seed = 11;
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
    const Scene scene = make_random_scene(5, cfg.grid, cfg.num_cameras, cfg.image_width,
                                          cfg.image_height, 6, cfg.num_classes);
    const FrameInput frame = make_frame_input(scene, cfg);
    Pipeline a = build_pipeline(cfg);
    Pipeline b = build_pipeline(cfg);
    op_counters::reset();
    const InferResult ra = a.infer(frame);
    const OpCounters flash_ops = op_counters::snapshot();
    const InferResult rb = b.infer(frame);
    cfg.path = PathKind::kVoxel;
    Pipeline v = build_pipeline(cfg);
    op_counters::reset();
    const InferResult rv = v.infer(frame);
    const OpCounters voxel_ops = op_counters::snapshot();
    check(ra.logits.vec() == rb.logits.vec(), "pipeline is deterministic under a fixed seed");
    check(flash_ops.conv3d_calls == 0 && voxel_ops.conv3d_calls > 0,
          "flash path runs no 3D convolutions, voxel path does");
    check(ra.grid.labels == rb.grid.labels, "label grids agree across rebuilds");
    (void)rv;
  }

  if (selftest_failures) {
    std::cout << selftest_failures << " check(s) failed\n";
    return 2;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surround-view BEV occupancy prediction toolkit"};
  app.require_subcommand(1);

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "generate a deterministic synthetic scene");
  std::uint64_t seed = 0;
  std::string scene_out, gt_out, mask_out;
  std::vector<double> grid_values;
  int cameras = 6, image_width = 64, image_height = 40, objects = 10;
  gen->add_option("--seed", seed, "scene seed")->required();
  gen->add_option("--out", scene_out, "scene JSON path")->required();
  gen->add_option("--gt", gt_out, "ground-truth OCCG path");
  gen->add_option("--mask", mask_out, "visibility mask OCCG path");
  gen->add_option("--grid", grid_values, "x_min x_max y_min y_max z_min z_max xy_res z_res")
      ->expected(8);
  gen->add_option("--cameras", cameras, "surround camera count");
  gen->add_option("--image-width", image_width, "camera image width");
  gen->add_option("--image-height", image_height, "camera image height");
  gen->add_option("--objects", objects, "number of scattered objects");

  // run
  auto* run = app.add_subcommand("run", "run inference on a scene");
  std::string run_config, run_scene, run_path, run_out;
  run->add_option("--config", run_config, "pipeline config JSON")->required();
  run->add_option("--scene", run_scene, "scene JSON")->required();
  run->add_option("--path", run_path, "flash|voxel (overrides config)");
  run->add_option("--out", run_out, "prediction OCCG path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a prediction against ground truth");
  std::string eval_pred, eval_gt, eval_mask, eval_out;
  bool masked = false;
  eval->add_option("--pred", eval_pred, "prediction OCCG")->required();
  eval->add_option("--gt", eval_gt, "ground-truth OCCG")->required();
  eval->add_option("--mask", eval_mask, "visibility mask OCCG");
  eval->add_flag("--masked", masked, "restrict scoring to mask-visible voxels");
  eval->add_option("--out", eval_out, "also write the JSON result here");

  // bench
  auto* bench = app.add_subcommand("bench", "latency/FLOP/memory comparison of the two paths");
  std::string bench_config, bench_paths = "both", bench_report, bench_scene;
  int warmup = 5, iters = 50;
  bench->add_option("--config", bench_config, "pipeline config JSON")->required();
  bench->add_option("--paths", bench_paths, "both|flash|voxel");
  bench->add_option("--warmup", warmup, "untimed warmup iterations");
  bench->add_option("--iters", iters, "timed iterations (>= 3)");
  bench->add_option("--report", bench_report, "report JSON path");
  bench->add_option("--scene", bench_scene, "optional scene JSON (default: derived from config seed)");

  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_scene(seed, scene_out, gt_out, mask_out, grid_values, cameras, image_width,
                           image_height, objects);
    if (run->parsed()) return cmd_run(run_config, run_scene, run_path, run_out);
    if (eval->parsed()) return cmd_eval(eval_pred, eval_gt, eval_mask, masked, eval_out);
    if (bench->parsed()) return cmd_bench(bench_config, bench_paths, warmup, iters, bench_report, bench_scene);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
