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

#include <map>
#include <string>
#include <vector>

#include "bevocc/pipeline.hpp"

namespace bevocc {

struct LatencyStats {
  double median_s = 0, p10_s = 0, p90_s = 0;
};

struct PathReport {
  std::string path;
  std::int64_t parameter_count = 0;
  std::map<std::string, long long> flops;              // per stage + "total"
  std::map<std::string, std::int64_t> peak_bytes;      // per stage + "max"
  std::map<std::string, LatencyStats> timing_s;        // per stage + groups + "total"
  std::int64_t conv2d_calls = 0, conv3d_calls = 0;     // per inference
  bool timer_warning = false;
};

struct BenchReport {
  std::string config_name;
  int warmup = 0, iters = 0;
  double timer_resolution_s = 0.0;
  std::vector<PathReport> paths;
  std::map<std::string, double> speedup;  // voxel-over-flash wall-clock ratios

  const PathReport* find(const std::string& path) const;
  std::string to_json_string() const;
};

/// Run warmup + iters timed inferences per path on one shared synthetic
/// frame. Paths run strictly one after the other, never interleaved.
BenchReport run_bench(const PipelineConfig& base, int warmup, int iters,
                      const std::vector<PathKind>& paths, const Scene* scene = nullptr);

}  // namespace bevocc
