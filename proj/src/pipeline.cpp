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

#include "bevocc/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace bevocc {

using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::int64_t out_dim(std::int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

long long conv2d_flops(std::int64_t cin, std::int64_t cout, std::int64_t kh, std::int64_t kw,
                       std::int64_t ho, std::int64_t wo) {
  return 2LL * cin * kh * kw * cout * ho * wo;
}

long long conv3d_flops(std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t zo,
                       std::int64_t ho, std::int64_t wo) {
  return 2LL * cin * k * k * k * cout * zo * ho * wo;
}

/// Conv FLOPs of an encoder+neck trunk on an input of the given size.
long long trunk_flops(const EncoderConfig& cfg, int cin, std::int64_t h, std::int64_t w) {
  long long total = 0;
  std::int64_t prev_c = cin, ch = h, cw = w;
  std::vector<std::pair<std::int64_t, std::pair<std::int64_t, std::int64_t>>> stage_dims;
  for (size_t s = 0; s < cfg.widths.size(); ++s) {
    const int width = cfg.widths[s];
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      const std::int64_t oh = out_dim(ch, 3, stride, 1), ow = out_dim(cw, 3, stride, 1);
      total += conv2d_flops(prev_c, width, 3, 3, oh, ow);   // conv1
      total += conv2d_flops(width, width, 3, 3, oh, ow);    // conv2
      if (prev_c != width || stride != 1) total += conv2d_flops(prev_c, width, 1, 1, oh, ow);
      prev_c = width;
      ch = oh;
      cw = ow;
    }
    stage_dims.push_back({width, {ch, cw}});
  }
  const auto& fine = stage_dims[stage_dims.size() - 2];
  const std::int64_t cf = fine.first, cc = stage_dims.back().first;
  total += conv2d_flops(cf + cc, cfg.neck_channels, 3, 3, fine.second.first, fine.second.second);
  return total;
}

}  // namespace

void PipelineConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
  if (num_cameras < 1) throw std::invalid_argument("config: need at least one camera");
  if (image_width < 4 || image_height < 4) throw std::invalid_argument("config: image size too small");
  if (image_encoder.widths.size() < 2)
    throw std::invalid_argument("config image_encoder: needs at least two stage widths");
  if (image_encoder.neck_channels <= 0)
    throw std::invalid_argument("config image_encoder: neck width must be positive");
  if (bev_encoder.widths.size() < 2)
    throw std::invalid_argument("config bev_encoder: needs at least two stage widths");
  if (bev_encoder.neck_channels <= 0)
    throw std::invalid_argument("config bev_encoder: neck width must be positive");
  if (view_transform.channels <= 0)
    throw std::invalid_argument("config view_transform: channels must be positive");
  if (!(view_transform.depth_start_m > 0.0) ||
      !(view_transform.depth_end_m > view_transform.depth_start_m) ||
      !(view_transform.depth_step_m > 0.0))
    throw std::invalid_argument("config view_transform: bad depth range");
  if (view_transform.depth_mode == DepthMode::kOracle && view_transform.channels != num_classes)
    throw std::invalid_argument(
        "config view_transform: oracle depth mode feeds one-hot class features, channels must equal "
        "num_classes");
  if (view_transform.kind == ViewTransformKind::kLs &&
      view_transform.depth_mode == DepthMode::kPredicted &&
      image_encoder.neck_channels != view_transform.channels)
    throw std::invalid_argument(
        "config view_transform: the uniform-depth transform consumes encoder features directly, "
        "image_encoder.neck_channels must equal view_transform.channels");
  grid.validate();

  const int z = grid.z_bins();
  if (head.kind == HeadKind::kMultiConv) {
    if (head.widths.empty()) throw std::invalid_argument("config head: mc widths must be non-empty");
    if (head.widths.back() != num_classes * z)
      throw std::invalid_argument("config head: final width " + std::to_string(head.widths.back()) +
                                  " != num_classes * Z = " + std::to_string(num_classes * z));
  } else {
    if (head.widths.empty() || head.mso_input_widths.size() != 3)
      throw std::invalid_argument("config head: mso needs 3 input widths and a conv width list");
    if (head.widths.back() != num_classes * z)
      throw std::invalid_argument("config head: final mso width " + std::to_string(head.widths.back()) +
                                  " != num_classes * Z = " + std::to_string(num_classes * z));
  }
  if (path == PathKind::kVoxel) {
    if (bev_encoder.neck_channels % z != 0)
      throw std::invalid_argument("config: voxel path needs bev neck width " +
                                  std::to_string(bev_encoder.neck_channels) + " divisible by Z = " +
                                  std::to_string(z));
    if (voxel_head_widths.empty())
      throw std::invalid_argument("config: voxel path needs voxel_head_widths");
  }
}

namespace {

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.widths = j.at("widths").get<std::vector<int>>();
  cfg.neck_channels = j.at("neck_channels").get<int>();
  cfg.blocks_per_stage = j.value("blocks_per_stage", 1);
  return cfg;
}

json encoder_to_json(const EncoderConfig& cfg) {
  return json{{"widths", cfg.widths},
              {"neck_channels", cfg.neck_channels},
              {"blocks_per_stage", cfg.blocks_per_stage}};
}

}  // namespace

PipelineConfig config_from_json_string(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin, e.byte, std::string("invalid JSON: ") + e.what());
  }
  try {
    PipelineConfig cfg;
    cfg.name = j.value("name", "default");
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.num_classes = j.value("num_classes", 18);
    cfg.num_cameras = j.at("cameras").at("count").get<int>();
    cfg.image_width = j.at("cameras").at("image_width").get<int>();
    cfg.image_height = j.at("cameras").at("image_height").get<int>();
    cfg.image_encoder = encoder_from_json(j.at("image_encoder"));
    cfg.bev_encoder = encoder_from_json(j.at("bev_encoder"));

    const json& vt = j.at("view_transform");
    const std::string vt_kind = vt.at("type").get<std::string>();
    if (vt_kind == "lss")
      cfg.view_transform.kind = ViewTransformKind::kLss;
    else if (vt_kind == "ls")
      cfg.view_transform.kind = ViewTransformKind::kLs;
    else
      throw std::invalid_argument("config: view_transform.type must be lss or ls, got " + vt_kind);
    cfg.view_transform.channels = vt.at("channels").get<int>();
    cfg.view_transform.depth_start_m = vt.value("depth_start_m", 1.0);
    cfg.view_transform.depth_end_m = vt.value("depth_end_m", 45.0);
    cfg.view_transform.depth_step_m = vt.at("depth_step_m").get<double>();
    const std::string mode = vt.value("depth_mode", "predicted");
    if (mode == "predicted")
      cfg.view_transform.depth_mode = DepthMode::kPredicted;
    else if (mode == "oracle")
      cfg.view_transform.depth_mode = DepthMode::kOracle;
    else
      throw std::invalid_argument("config: depth_mode must be predicted or oracle, got " + mode);

    const json& g = j.at("grid");
    cfg.grid.x_min = g.at("x_min").get<double>();
    cfg.grid.x_max = g.at("x_max").get<double>();
    cfg.grid.y_min = g.at("y_min").get<double>();
    cfg.grid.y_max = g.at("y_max").get<double>();
    cfg.grid.z_min = g.at("z_min").get<double>();
    cfg.grid.z_max = g.at("z_max").get<double>();
    cfg.grid.xy_res = g.at("xy_res").get<double>();
    cfg.grid.z_res = g.at("z_res").get<double>();

    const json& h = j.at("head");
    const std::string head_kind = h.at("type").get<std::string>();
    if (head_kind == "mc")
      cfg.head.kind = HeadKind::kMultiConv;
    else if (head_kind == "mso")
      cfg.head.kind = HeadKind::kMultiScale;
    else
      throw std::invalid_argument("config: head.type must be mc or mso, got " + head_kind);
    cfg.head.widths = h.at("widths").get<std::vector<int>>();
    if (h.contains("input_widths"))
      cfg.head.mso_input_widths = h.at("input_widths").get<std::vector<int>>();
    cfg.voxel_head_widths = j.value("voxel_head_widths", std::vector<int>{128, 128});

    const std::string path = j.value("path", "flash");
    if (path == "flash")
      cfg.path = PathKind::kFlash;
    else if (path == "voxel")
      cfg.path = PathKind::kVoxel;
    else
      throw std::invalid_argument("config: path must be flash or voxel, got " + path);

    const std::string temporal = j.value("temporal", "none");
    if (temporal == "none")
      cfg.temporal = TemporalMode::kNone;
    else if (temporal == "mono_align_concat")
      cfg.temporal = TemporalMode::kMonoAlignConcat;
    else
      throw std::invalid_argument("config: temporal must be none or mono_align_concat, got " + temporal);

    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw DataError(origin, 0, std::string("bad config schema: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(origin, 0, e.what());
  }
}

std::string config_to_json_string(const PipelineConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["num_classes"] = cfg.num_classes;
  j["cameras"] = {{"count", cfg.num_cameras},
                  {"image_width", cfg.image_width},
                  {"image_height", cfg.image_height}};
  j["image_encoder"] = encoder_to_json(cfg.image_encoder);
  j["bev_encoder"] = encoder_to_json(cfg.bev_encoder);
  j["view_transform"] = {
      {"type", cfg.view_transform.kind == ViewTransformKind::kLss ? "lss" : "ls"},
      {"channels", cfg.view_transform.channels},
      {"depth_start_m", cfg.view_transform.depth_start_m},
      {"depth_end_m", cfg.view_transform.depth_end_m},
      {"depth_step_m", cfg.view_transform.depth_step_m},
      {"depth_mode", cfg.view_transform.depth_mode == DepthMode::kPredicted ? "predicted" : "oracle"}};
  j["grid"] = {{"x_min", cfg.grid.x_min}, {"x_max", cfg.grid.x_max}, {"y_min", cfg.grid.y_min},
               {"y_max", cfg.grid.y_max}, {"z_min", cfg.grid.z_min}, {"z_max", cfg.grid.z_max},
               {"xy_res", cfg.grid.xy_res}, {"z_res", cfg.grid.z_res}};
  j["head"] = {{"type", cfg.head.kind == HeadKind::kMultiConv ? "mc" : "mso"}, {"widths", cfg.head.widths}};
  if (!cfg.head.mso_input_widths.empty()) j["head"]["input_widths"] = cfg.head.mso_input_widths;
  j["voxel_head_widths"] = cfg.voxel_head_widths;
  j["path"] = cfg.path == PathKind::kFlash ? "flash" : "voxel";
  j["temporal"] = cfg.temporal == TemporalMode::kNone ? "none" : "mono_align_concat";
  return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_string(buf.str(), path);
}

Pipeline build_pipeline(const PipelineConfig& config) {
  config.validate();
  Pipeline p;
  p.config_ = config;

  p.frustum_ = build_frustum(config.image_width, config.image_height, 1.0,
                             config.view_transform.depth_start_m, config.view_transform.depth_end_m,
                             config.view_transform.depth_step_m);

  {
    Rng rng(seed_for(config.seed, "image_encoder"));
    p.image_trunk_ = make_encoder_neck(config.num_classes, config.image_encoder.widths,
                                       config.image_encoder.neck_channels,
                                       config.image_encoder.blocks_per_stage, rng);
  }
  {
    Rng rng(seed_for(config.seed, "depth_context"));
    p.depth_ctx_.depth_bins = p.frustum_.depth_bins;
    p.depth_ctx_.context_channels = config.view_transform.channels;
    p.depth_ctx_.conv = make_conv2d(config.image_encoder.neck_channels,
                                    p.frustum_.depth_bins + config.view_transform.channels, 1, 1, 0, rng);
  }
  {
    Rng rng(seed_for(config.seed, "bev_encoder"));
    p.bev_trunk_ = make_encoder_neck(config.view_transform.channels, config.bev_encoder.widths,
                                     config.bev_encoder.neck_channels,
                                     config.bev_encoder.blocks_per_stage, rng);
  }
  if (config.temporal == TemporalMode::kMonoAlignConcat) {
    Rng rng(seed_for(config.seed, "temporal_fuse"));
    p.temporal_fuse_ = make_conv2d(2 * config.view_transform.channels, config.view_transform.channels, 3,
                                   1, 1, rng);
  }

  const int z = config.grid.z_bins();
  if (config.path == PathKind::kFlash) {
    Rng rng(seed_for(config.seed, "occupancy_head"));
    if (config.head.kind == HeadKind::kMultiConv) {
      p.flash_head_ = make_flash_head(config.bev_encoder.neck_channels, config.head.widths,
                                      config.num_classes, z, rng);
    } else {
      const auto& w = config.bev_encoder.widths;
      const std::vector<int> input_channels{w[w.size() - 2], static_cast<int>(w.back()),
                                            config.bev_encoder.neck_channels};
      p.mso_head_ = make_multi_scale_head(input_channels, config.head.mso_input_widths,
                                          config.head.widths, config.num_classes, z, rng);
    }
  } else {
    Rng rng(seed_for(config.seed, "voxel_head"));
    p.voxel_head_ = make_voxel_head(config.bev_encoder.neck_channels / z, config.voxel_head_widths,
                                    config.num_classes, rng);
  }

  // Analytic per-frame conv FLOPs, stage by stage.
  long long img = 0;
  if (config.view_transform.depth_mode == DepthMode::kPredicted)
    img = trunk_flops(config.image_encoder, config.num_classes, config.image_height, config.image_width) *
          config.num_cameras;
  long long vt = 0;
  if (config.view_transform.kind == ViewTransformKind::kLss &&
      config.view_transform.depth_mode == DepthMode::kPredicted) {
    vt = conv2d_flops(config.image_encoder.neck_channels,
                      p.frustum_.depth_bins + config.view_transform.channels, 1, 1, config.image_height,
                      config.image_width) *
         config.num_cameras;
  }
  const std::int64_t bh = config.grid.height(), bw = config.grid.width();
  long long temporal = 0;
  if (config.temporal == TemporalMode::kMonoAlignConcat)
    temporal = conv2d_flops(2 * config.view_transform.channels, config.view_transform.channels, 3, 3, bh, bw);
  const long long bev = trunk_flops(config.bev_encoder, config.view_transform.channels, bh, bw);

  long long head = 0;
  if (config.path == PathKind::kFlash) {
    if (config.head.kind == HeadKind::kMultiConv) {
      std::int64_t prev = config.bev_encoder.neck_channels;
      for (int width : config.head.widths) {
        head += conv2d_flops(prev, width, 3, 3, bh, bw);
        prev = width;
      }
    } else {
      const auto& w = config.bev_encoder.widths;
      const std::int64_t dims[3][3] = {{w[w.size() - 2], bh / 2, bw / 2},
                                       {static_cast<std::int64_t>(w.back()), bh / 4, bw / 4},
                                       {config.bev_encoder.neck_channels, bh, bw}};
      std::int64_t prev = 0;
      for (int i = 0; i < 3; ++i) {
        head += conv2d_flops(dims[i][0], config.head.mso_input_widths[static_cast<size_t>(i)], 1, 1,
                             dims[i][1], dims[i][2]);
        prev += config.head.mso_input_widths[static_cast<size_t>(i)];
      }
      for (int width : config.head.widths) {
        head += conv2d_flops(prev, width, 3, 3, bh, bw);
        prev = width;
      }
    }
  } else {
    std::int64_t prev = config.bev_encoder.neck_channels / z;
    for (int width : config.voxel_head_widths) {
      head += conv3d_flops(prev, width, 3, z, bh, bw);
      prev = width;
    }
    head += conv3d_flops(prev, config.num_classes, 1, z, bh, bw);
  }

  p.stage_flops_ = {{"image_encoder", img},
                    {"view_transform", vt},
                    {"temporal", temporal},
                    {"bev_encoder", bev},
                    {"head", head}};
  return p;
}

long long Pipeline::total_flops() const {
  long long total = 0;
  for (const auto& [stage, flops] : stage_flops_) total += flops;
  return total;
}

InferResult Pipeline::infer(const FrameInput& frame) {
  const PipelineConfig& cfg = config_;
  if (static_cast<int>(frame.images.size()) != cfg.num_cameras)
    throw std::invalid_argument("infer: frame has " + std::to_string(frame.images.size()) +
                                " images, config expects " + std::to_string(cfg.num_cameras));
  if (static_cast<int>(frame.rig.cameras.size()) != cfg.num_cameras)
    throw std::invalid_argument("infer: rig camera count does not match config");

  InferResult result;
  StageTimings& t = result.timings;
  const double t_start = now_seconds();

  auto stage_begin = [&]() {
    memory::reset_peak();
    return now_seconds();
  };
  auto stage_end = [&](const char* name, double begin, double* slot) {
    *slot = now_seconds() - begin;
    result.stage_peak_bytes[name] = memory::peak_bytes();
  };

  std::vector<Tensor> images;
  for (const Tensor& img : frame.images) {
    if (img.ndim() == 3)
      images.push_back(reshape(img, {1, img.size(0), img.size(1), img.size(2)}));
    else
      images.push_back(img);
    const Tensor& b = images.back();
    if (b.ndim() != 4 || b.size(2) != cfg.image_height || b.size(3) != cfg.image_width)
      throw std::invalid_argument("infer: camera image " + shape_str(img.shape()) +
                                  " does not match configured size " + std::to_string(cfg.image_width) +
                                  "x" + std::to_string(cfg.image_height));
  }

  const bool oracle = cfg.view_transform.depth_mode == DepthMode::kOracle;

  // image encoder
  double begin = stage_begin();
  std::vector<Tensor> cam_feats;
  if (oracle) {
    cam_feats = images;  // one-hot semantics pass straight to the lift
  } else {
    for (const Tensor& img : images) cam_feats.push_back(encode_and_fuse(img, image_trunk_));
  }
  stage_end("image_encoder", begin, &t.image_encoder);

  // view transform
  begin = stage_begin();
  ViewTransformResult vt;
  if (oracle) {
    if (frame.oracle_depths.size() != images.size())
      throw std::invalid_argument("infer: oracle depth mode needs one depth map per camera");
    vt = oracle_depth_transform(cam_feats, frame.oracle_depths, frame.rig, frustum_, cfg.grid);
  } else if (cfg.view_transform.kind == ViewTransformKind::kLss) {
    vt = lss_transform(cam_feats, frame.rig, depth_ctx_, frustum_, cfg.grid);
  } else {
    vt = ls_transform(cam_feats, frame.rig, frustum_, cfg.grid);
  }
  result.dropped_points = vt.dropped_points;
  Tensor bev = std::move(vt.bev);
  stage_end("view_transform", begin, &t.view_transform);

  // temporal fusion
  begin = stage_begin();
  if (cfg.temporal == TemporalMode::kMonoAlignConcat) {
    Tensor aligned;
    if (temporal_buffer_.frame) {
      aligned = align_bev(temporal_buffer_.frame->bev, temporal_buffer_.frame->ego_to_global,
                          frame.ego_to_global, cfg.grid);
    } else {
      aligned = Tensor(bev.shape());  // no history yet: neutral zero features
    }
    Tensor fused = fuse_concat(bev, aligned, temporal_fuse_);
    temporal_buffer_.frame = TemporalBuffer::Frame{bev, frame.ego_to_global, frame.timestamp};
    bev = std::move(fused);
  }
  stage_end("temporal", begin, &t.temporal);

  // BEV encoder
  begin = stage_begin();
  Tensor neck_out;
  EncodedFeatures bev_feats;
  const bool needs_multiscale = cfg.path == PathKind::kFlash && cfg.head.kind == HeadKind::kMultiScale;
  if (needs_multiscale) {
    bev_feats = encode(bev, bev_trunk_.encoder);
    Tensor fused = fpn_lss_fuse(bev_feats.fine, bev_feats.coarse, bev_trunk_.fuse_conv);
    while (fused.size(2) < bev.size(2)) fused = upsample2x_bilinear(fused);
    neck_out = std::move(fused);
  } else {
    neck_out = encode_and_fuse(bev, bev_trunk_);
  }
  stage_end("bev_encoder", begin, &t.bev_encoder);

  // occupancy head
  begin = stage_begin();
  Tensor logits;
  if (cfg.path == PathKind::kFlash) {
    if (cfg.head.kind == HeadKind::kMultiConv) {
      logits = flash_head(neck_out, flash_head_);
    } else {
      logits = multi_scale_head({bev_feats.fine, bev_feats.coarse, neck_out}, mso_head_);
    }
  } else {
    const int z = cfg.grid.z_bins();
    // inverse channel-to-height: identical bytes, voxel-major view
    Tensor vox = reshape(neck_out, {neck_out.size(0), neck_out.size(1) / z, z, neck_out.size(2),
                                    neck_out.size(3)});
    logits = voxel_head(vox, voxel_head_);
  }
  stage_end("head", begin, &t.head);

  begin = stage_begin();
  result.grid = predict_labels(logits);
  stage_end("argmax", begin, &t.argmax);

  result.logits = std::move(logits);
  t.total = now_seconds() - t_start;
  return result;
}

namespace {

void visit_conv(const std::string& prefix, Conv2dParams& conv,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".weight", conv.weight);
  fn(prefix + ".bias", conv.bias);
}

void visit_conv(const std::string& prefix, Conv3dParams& conv,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".weight", conv.weight);
  fn(prefix + ".bias", conv.bias);
}

void visit_bn(const std::string& prefix, BatchNormParams& bn,
              const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".mean", bn.mean);
  fn(prefix + ".var", bn.var);
  fn(prefix + ".gamma", bn.gamma);
  fn(prefix + ".beta", bn.beta);
}

void visit_convbn(const std::string& prefix, ConvBn& cb,
                  const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_conv(prefix + ".conv", cb.conv, fn);
  visit_bn(prefix + ".bn", cb.bn, fn);
}

void visit_trunk(const std::string& prefix, EncoderNeckParams& trunk,
                 const std::function<void(const std::string&, Tensor&)>& fn) {
  for (size_t s = 0; s < trunk.encoder.stages.size(); ++s) {
    for (size_t b = 0; b < trunk.encoder.stages[s].size(); ++b) {
      const std::string base = prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b);
      ResidualBlockParams& block = trunk.encoder.stages[s][b];
      visit_convbn(base + ".conv1", block.conv1, fn);
      visit_convbn(base + ".conv2", block.conv2, fn);
      if (block.projection) visit_convbn(base + ".proj", *block.projection, fn);
    }
  }
  visit_conv(prefix + ".fuse", trunk.fuse_conv, fn);
}

}  // namespace

void Pipeline::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
  if (config_.view_transform.depth_mode == DepthMode::kPredicted) {
    visit_trunk("image_encoder", image_trunk_, fn);
    if (config_.view_transform.kind == ViewTransformKind::kLss)
      visit_conv("depth_context.conv", depth_ctx_.conv, fn);
  }
  visit_trunk("bev_encoder", bev_trunk_, fn);
  if (config_.temporal == TemporalMode::kMonoAlignConcat)
    visit_conv("temporal.fuse", temporal_fuse_, fn);
  if (config_.path == PathKind::kFlash) {
    if (config_.head.kind == HeadKind::kMultiConv) {
      for (size_t i = 0; i < flash_head_.hidden.size(); ++i)
        visit_convbn("head.hidden" + std::to_string(i), flash_head_.hidden[i], fn);
      visit_conv("head.final", flash_head_.final_conv, fn);
    } else {
      for (size_t i = 0; i < mso_head_.input_projections.size(); ++i)
        visit_conv("head.project" + std::to_string(i), mso_head_.input_projections[i], fn);
      for (size_t i = 0; i < mso_head_.hidden.size(); ++i)
        visit_convbn("head.hidden" + std::to_string(i), mso_head_.hidden[i], fn);
      visit_conv("head.final", mso_head_.final_conv, fn);
    }
  } else {
    for (size_t i = 0; i < voxel_head_.hidden.size(); ++i) {
      visit_conv("head.hidden" + std::to_string(i) + ".conv", voxel_head_.hidden[i].conv, fn);
      visit_bn("head.hidden" + std::to_string(i) + ".bn", voxel_head_.hidden[i].bn, fn);
    }
    visit_conv("head.classifier", voxel_head_.classifier, fn);
  }
}

std::int64_t Pipeline::parameter_count() const {
  std::int64_t count = 0;
  const_cast<Pipeline*>(this)->visit_params([&](const std::string&, Tensor& t) { count += t.numel(); });
  return count;
}

FrameInput make_frame_input(const Scene& scene, const PipelineConfig& config,
                            const RigidTransform& ego_to_global, double timestamp) {
  if (static_cast<int>(scene.rig.cameras.size()) != config.num_cameras)
    throw std::invalid_argument("frame input: scene rig has " +
                                std::to_string(scene.rig.cameras.size()) + " cameras, config expects " +
                                std::to_string(config.num_cameras));
  FrameInput frame;
  frame.rig = scene.rig;
  frame.ego_to_global = ego_to_global;
  frame.timestamp = timestamp;
  for (int i = 0; i < config.num_cameras; ++i) {
    CameraRender render =
        render_oracle(scene, i, config.image_width, config.image_height, 1.0, config.num_classes);
    frame.images.push_back(std::move(render.features));
    frame.oracle_depths.push_back(std::move(render.depth));
  }
  return frame;
}

void save_checkpoint(Pipeline& pipeline, const std::string& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  pipeline.visit_params([&](const std::string& name, Tensor& t) {
    std::string file = name;
    for (char& c : file)
      if (c == '.') c = '_';
    file += ".ften";
    save_ften(t, dir + "/" + file);
    manifest[name] = file;
  });
  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw DataError(dir + "/manifest.json", 0, "cannot open for writing");
  out << manifest.dump(2) << "\n";
}

void load_checkpoint(Pipeline& pipeline, const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw DataError(manifest_path, 0, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  json manifest;
  try {
    manifest = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw DataError(manifest_path, e.byte, std::string("invalid JSON: ") + e.what());
  }
  pipeline.visit_params([&](const std::string& name, Tensor& t) {
    if (!manifest.contains(name)) throw DataError(manifest_path, 0, "missing parameter " + name);
    Tensor loaded = load_ften(dir + "/" + manifest.at(name).get<std::string>());
    if (loaded.shape() != t.shape())
      throw DataError(manifest_path, 0,
                      "parameter " + name + " has shape " + shape_str(loaded.shape()) + ", expected " +
                          shape_str(t.shape()));
    t = std::move(loaded);
  });
}

}  // namespace bevocc
