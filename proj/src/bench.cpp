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

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"

namespace bevocc {

using nlohmann::json;

namespace {

LatencyStats stats_of(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const size_t n = samples.size();
  LatencyStats s;
  s.median_s = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  s.p10_s = samples[static_cast<size_t>(std::llround(0.10 * (n - 1)))];
  s.p90_s = samples[static_cast<size_t>(std::llround(0.90 * (n - 1)))];
  return s;
}

double measure_timer_resolution() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int i = 0; i < 64; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double>(b - a).count());
  }
  return best;
}

}  // namespace

const PathReport* BenchReport::find(const std::string& path) const {
  for (const PathReport& p : paths)
    if (p.path == path) return &p;
  return nullptr;
}

BenchReport run_bench(const PipelineConfig& base, int warmup, int iters,
                      const std::vector<PathKind>& paths, const Scene* scene) {
  if (iters < 3) throw std::invalid_argument("bench: iters must be >= 3, got " + std::to_string(iters));
  if (warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  if (paths.empty()) throw std::invalid_argument("bench: no paths selected");

  BenchReport report;
  report.config_name = base.name;
  report.warmup = warmup;
  report.iters = iters;
  report.timer_resolution_s = measure_timer_resolution();

  Scene local_scene;
  if (!scene) {
    local_scene = make_random_scene(base.seed, base.grid, base.num_cameras, base.image_width,
                                    base.image_height, 10, base.num_classes);
    scene = &local_scene;
  }
  const FrameInput frame = make_frame_input(*scene, base);

  for (PathKind path : paths) {
    PipelineConfig cfg = base;
    cfg.path = path;
    Pipeline pipeline = build_pipeline(cfg);

    PathReport pr;
    pr.path = path == PathKind::kFlash ? "flash" : "voxel";
    pr.parameter_count = pipeline.parameter_count();
    pr.flops = pipeline.stage_flops();
    pr.flops["total"] = pipeline.total_flops();

    for (int i = 0; i < warmup; ++i) {
      pipeline.reset_temporal();
      (void)pipeline.infer(frame);
    }

    std::map<std::string, std::vector<double>> samples;
    for (int i = 0; i < iters; ++i) {
      pipeline.reset_temporal();
      op_counters::reset();
      const InferResult res = pipeline.infer(frame);
      const OpCounters counters = op_counters::snapshot();
      pr.conv2d_calls = counters.conv2d_calls;
      pr.conv3d_calls = counters.conv3d_calls;
      samples["image_encoder"].push_back(res.timings.image_encoder);
      samples["view_transform"].push_back(res.timings.view_transform);
      samples["temporal"].push_back(res.timings.temporal);
      samples["bev_encoder"].push_back(res.timings.bev_encoder);
      samples["head"].push_back(res.timings.head);
      samples["argmax"].push_back(res.timings.argmax);
      samples["others"].push_back(res.timings.image_encoder + res.timings.view_transform +
                                  res.timings.temporal + res.timings.argmax);
      samples["bev_enc_occ"].push_back(res.timings.bev_encoder + res.timings.head);
      samples["total"].push_back(res.timings.total);
      for (const auto& [stage, bytes] : res.stage_peak_bytes) {
        auto it = pr.peak_bytes.find(stage);
        if (it == pr.peak_bytes.end())
          pr.peak_bytes[stage] = bytes;
        else
          it->second = std::max(it->second, bytes);
      }
    }
    std::int64_t peak_max = 0;
    for (const auto& [stage, bytes] : pr.peak_bytes) peak_max = std::max(peak_max, bytes);
    pr.peak_bytes["max"] = peak_max;

    for (auto& [stage, vec] : samples) pr.timing_s[stage] = stats_of(vec);
    // Sub-resolution stage medians are noise, not measurements; flag them.
    const double floor_s = std::max(1e-6, 3.0 * report.timer_resolution_s);
    for (const char* stage : {"bev_encoder", "head", "total"})
      if (pr.timing_s[stage].median_s < floor_s) pr.timer_warning = true;

    report.paths.push_back(std::move(pr));
  }

  const PathReport* flash = report.find("flash");
  const PathReport* voxel = report.find("voxel");
  if (flash && voxel) {
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    report.speedup["head_wall"] = ratio(voxel->timing_s.at("head").median_s,
                                        flash->timing_s.at("head").median_s);
    report.speedup["bev_enc_occ_wall"] = ratio(voxel->timing_s.at("bev_enc_occ").median_s,
                                               flash->timing_s.at("bev_enc_occ").median_s);
    report.speedup["total_wall"] = ratio(voxel->timing_s.at("total").median_s,
                                         flash->timing_s.at("total").median_s);
  }
  return report;
}

std::string BenchReport::to_json_string() const {
  json j;
  j["config"] = config_name;
  j["warmup"] = warmup;
  j["iters"] = iters;
  j["execution"] = "serial";
  j["timer_resolution_s"] = timer_resolution_s;
  j["paths"] = json::array();
  for (const PathReport& p : paths) {
    json pj;
    pj["path"] = p.path;
    pj["parameter_count"] = p.parameter_count;
    pj["conv2d_calls"] = p.conv2d_calls;
    pj["conv3d_calls"] = p.conv3d_calls;
    pj["flops"] = p.flops;
    pj["peak_tensor_bytes"] = p.peak_bytes;
    json tj;
    for (const auto& [stage, st] : p.timing_s)
      tj[stage] = {{"median_s", st.median_s}, {"p10_s", st.p10_s}, {"p90_s", st.p90_s}};
    pj["timing_s"] = tj;
    pj["timer_warning"] = p.timer_warning;
    j["paths"].push_back(pj);
  }
  j["speedup"] = speedup;
  return j.dump(2) + "\n";
}

}  // namespace bevocc
