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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bevocc/encoder.hpp"
#include "bevocc/eval.hpp"
#include "bevocc/geometry.hpp"
#include "bevocc/head.hpp"
#include "bevocc/scene.hpp"
#include "bevocc/temporal.hpp"
#include "bevocc/view_transform.hpp"

namespace bevocc {

enum class ViewTransformKind { kLss, kLs };
enum class DepthMode { kPredicted, kOracle };
enum class HeadKind { kMultiConv, kMultiScale };
enum class PathKind { kFlash, kVoxel };
enum class TemporalMode { kNone, kMonoAlignConcat };

struct EncoderConfig {
  std::vector<int> widths;
  int neck_channels = 0;
  int blocks_per_stage = 1;
};

struct ViewTransformConfig {
  ViewTransformKind kind = ViewTransformKind::kLss;
  DepthMode depth_mode = DepthMode::kPredicted;
  int channels = 64;
  double depth_start_m = 1.0;
  double depth_end_m = 45.0;
  double depth_step_m = 0.5;
};

struct HeadConfig {
  HeadKind kind = HeadKind::kMultiConv;
  std::vector<int> widths;            // mc conv widths, last one = C* x Z
  std::vector<int> mso_input_widths;  // per-input 1x1 projection widths
};

/// Declarative description of the whole inference graph. The compact
/// token grammar (e.g. "LSS-64,200x200,0.5", "MC-256-512-288", "FL-256",
/// "3B-128-256-512") maps one token per field; see the README table.
struct PipelineConfig {
  std::string name = "default";
  std::uint64_t seed = 0;
  int num_classes = 18;
  int num_cameras = 6;
  int image_width = 64;
  int image_height = 40;
  EncoderConfig image_encoder{{32, 64}, 64, 1};
  ViewTransformConfig view_transform;
  BevGridSpec grid;
  EncoderConfig bev_encoder{{128, 256, 512}, 256, 1};
  HeadConfig head{HeadKind::kMultiConv, {256, 512, 288}, {}};
  std::vector<int> voxel_head_widths{128, 128};
  PathKind path = PathKind::kFlash;
  TemporalMode temporal = TemporalMode::kNone;

  void validate() const;
};

PipelineConfig config_from_json_string(const std::string& text, const std::string& origin = "<string>");
std::string config_to_json_string(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

struct FrameInput {
  std::vector<Tensor> images;        // per camera [C,h,w] or [1,C,h,w]
  std::vector<Tensor> oracle_depths; // per camera [h,w]; required in oracle depth mode
  CameraRig rig;
  RigidTransform ego_to_global;
  double timestamp = 0.0;
};

struct StageTimings {
  double image_encoder = 0, view_transform = 0, temporal = 0;
  double bev_encoder = 0, head = 0, argmax = 0;
  double total = 0;
  double sum() const { return image_encoder + view_transform + temporal + bev_encoder + head + argmax; }
};

struct InferResult {
  OccupancyGrid grid;
  Tensor logits;  // [1, C*, Z, H, W]
  StageTimings timings;
  std::map<std::string, std::int64_t> stage_peak_bytes;
  std::int64_t dropped_points = 0;
};

class Pipeline {
 public:
  const PipelineConfig& config() const { return config_; }
  std::int64_t parameter_count() const;
  /// Analytic conv FLOPs per stage for one frame.
  const std::map<std::string, long long>& stage_flops() const { return stage_flops_; }
  long long total_flops() const;

  InferResult infer(const FrameInput& frame);
  void reset_temporal() { temporal_buffer_.clear(); }

  /// Stable-order traversal of every parameter tensor.
  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);

  friend Pipeline build_pipeline(const PipelineConfig& config);

 private:
  PipelineConfig config_;
  FrustumGrid frustum_;
  EncoderNeckParams image_trunk_;
  DepthContextParams depth_ctx_;
  EncoderNeckParams bev_trunk_;
  FlashHeadParams flash_head_;
  MultiScaleHeadParams mso_head_;
  VoxelHeadParams voxel_head_;
  Conv2dParams temporal_fuse_;
  TemporalBuffer temporal_buffer_;
  std::map<std::string, long long> stage_flops_;
};

/// Instantiate all parameters with the seeded initializer; throws
/// std::invalid_argument naming the offending stage on width mismatches.
Pipeline build_pipeline(const PipelineConfig& config);

/// Render per-camera inputs for a scene under this config.
FrameInput make_frame_input(const Scene& scene, const PipelineConfig& config,
                            const RigidTransform& ego_to_global = RigidTransform::identity(),
                            double timestamp = 0.0);

// Weight checkpointing: a directory of FTEN files plus manifest.json
// mapping parameter names to file names.
void save_checkpoint(Pipeline& pipeline, const std::string& dir);
void load_checkpoint(Pipeline& pipeline, const std::string& dir);

}  // namespace bevocc
