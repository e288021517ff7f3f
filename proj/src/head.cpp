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

#include "bevocc/head.hpp"

#include <cmath>

namespace bevocc {

Tensor channel_to_height(const Tensor& bev, int num_classes, int z_bins) {
  if (bev.ndim() != 4)
    throw std::invalid_argument("channel_to_height: expected [B,C,H,W], got " + shape_str(bev.shape()));
  const std::int64_t c = bev.size(1);
  if (num_classes <= 0 || z_bins <= 0 ||
      c != static_cast<std::int64_t>(num_classes) * z_bins)
    throw std::invalid_argument("channel_to_height: C=" + std::to_string(c) + " != num_classes=" +
                                std::to_string(num_classes) + " * Z=" + std::to_string(z_bins));
  return reshape(bev, {bev.size(0), num_classes, z_bins, bev.size(2), bev.size(3)});
}

Tensor height_to_channel(const Tensor& logits) {
  if (logits.ndim() != 5)
    throw std::invalid_argument("height_to_channel: expected [B,C*,Z,H,W], got " +
                                shape_str(logits.shape()));
  return reshape(logits, {logits.size(0), logits.size(1) * logits.size(2), logits.size(3), logits.size(4)});
}

void FlashHeadParams::validate() const {
  if (num_classes <= 0 || z_bins <= 0) throw std::invalid_argument("flash head: C*/Z must be positive");
  if (final_conv.weight.ndim() != 4 ||
      final_conv.weight.size(0) != static_cast<std::int64_t>(num_classes) * z_bins)
    throw std::invalid_argument("flash head: final width " +
                                std::to_string(final_conv.weight.ndim() == 4 ? final_conv.weight.size(0) : -1) +
                                " != C* * Z = " + std::to_string(num_classes * z_bins));
}

Tensor flash_head(const Tensor& bev, const FlashHeadParams& p) {
  p.validate();
  Tensor cur = bev;
  for (const ConvBn& layer : p.hidden) cur = relu(batch_norm_inference(conv2d(cur, layer.conv), layer.bn));
  cur = conv2d(cur, p.final_conv);
  return channel_to_height(cur, p.num_classes, p.z_bins);
}

Tensor multi_scale_head(const std::vector<Tensor>& inputs, const MultiScaleHeadParams& p) {
  if (inputs.empty() || inputs.size() != p.input_projections.size())
    throw std::invalid_argument("multi-scale head: got " + std::to_string(inputs.size()) +
                                " inputs for " + std::to_string(p.input_projections.size()) +
                                " projections");
  std::int64_t h = 0, w = 0;
  for (const Tensor& t : inputs) {
    h = std::max(h, t.size(2));
    w = std::max(w, t.size(3));
  }
  std::vector<Tensor> scaled;
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = conv2d(inputs[i], p.input_projections[i]);
    while (t.size(2) < h) t = upsample2x_bilinear(t);
    if (t.size(2) != h || t.size(3) != w)
      throw std::invalid_argument("multi-scale head: input " + std::to_string(i) +
                                  " cannot be upsampled to the finest grid");
    scaled.push_back(std::move(t));
  }
  std::int64_t ctotal = 0;
  for (const Tensor& t : scaled) ctotal += t.size(1);
  const std::int64_t b = scaled[0].size(0), plane = h * w;
  Tensor cat({b, ctotal, h, w});
  for (std::int64_t bi = 0; bi < b; ++bi) {
    std::int64_t coff = 0;
    for (const Tensor& t : scaled) {
      const std::int64_t c = t.size(1);
      std::copy(t.data() + bi * c * plane, t.data() + (bi + 1) * c * plane,
                cat.data() + (bi * ctotal + coff) * plane);
      coff += c;
    }
  }
  Tensor cur = cat;
  for (const ConvBn& layer : p.hidden) cur = relu(batch_norm_inference(conv2d(cur, layer.conv), layer.bn));
  cur = conv2d(cur, p.final_conv);
  return channel_to_height(cur, p.num_classes, p.z_bins);
}

void VoxelHeadParams::validate() const {
  if (classifier.weight.ndim() != 5)
    throw std::invalid_argument("voxel head: classifier must be a conv3d parameter set");
}

Tensor voxel_head(const Tensor& vox, const VoxelHeadParams& p) {
  p.validate();
  Tensor cur = vox;
  for (const ConvBn3d& layer : p.hidden) cur = relu(batch_norm_inference(conv3d(cur, layer.conv), layer.bn));
  return conv3d(cur, p.classifier);
}

OccupancyGrid predict_labels(const Tensor& logits) {
  if (logits.ndim() != 5)
    throw std::invalid_argument("predict_labels: expected [B,C*,Z,H,W], got " + shape_str(logits.shape()));
  if (logits.size(0) != 1)
    throw std::invalid_argument("predict_labels: batch size must be 1, got " +
                                std::to_string(logits.size(0)));
  const std::int64_t classes = logits.size(1), z = logits.size(2);
  const std::int64_t h = logits.size(3), w = logits.size(4);
  if (classes > 255) throw std::invalid_argument("predict_labels: more than 255 classes");

  OccupancyGrid grid = OccupancyGrid::filled(static_cast<int>(w), static_cast<int>(h),
                                             static_cast<int>(z), static_cast<int>(classes), 0);
  const std::int64_t volume = z * h * w;
  const float* base = logits.data();
  for (std::int64_t v = 0; v < volume; ++v) {
    float best = base[v];
    std::int64_t best_k = 0;
    if (std::isnan(best)) throw std::invalid_argument("predict_labels: NaN logit at voxel " + std::to_string(v));
    for (std::int64_t k = 1; k < classes; ++k) {
      const float val = base[k * volume + v];
      if (std::isnan(val))
        throw std::invalid_argument("predict_labels: NaN logit at voxel " + std::to_string(v));
      if (val > best) {
        best = val;
        best_k = k;
      }
    }
    // logits volume index order (z,y,x) matches the grid layout directly
    grid.labels[static_cast<size_t>(v)] = static_cast<std::uint8_t>(best_k);
  }
  return grid;
}

LinearHeadGradients linear_head_loss_grad(const Tensor& bev, const OccupancyGrid& labels,
                                          const Conv2dParams& conv, int num_classes, int z_bins) {
  if (bev.ndim() != 4 || bev.size(0) != 1)
    throw std::invalid_argument("linear head: bev must be [1,C,H,W], got " + shape_str(bev.shape()));
  const std::int64_t cin = bev.size(1), h = bev.size(2), w = bev.size(3);
  const std::int64_t cout = static_cast<std::int64_t>(num_classes) * z_bins;
  if (conv.weight.ndim() != 4 || conv.weight.size(0) != cout || conv.weight.size(1) != cin ||
      conv.weight.size(2) != 1 || conv.weight.size(3) != 1)
    throw std::invalid_argument("linear head: conv must be 1x1 [" + std::to_string(cout) + "," +
                                std::to_string(cin) + ",1,1], got " + shape_str(conv.weight.shape()));
  if (labels.width != w || labels.height != h || labels.z_bins != z_bins)
    throw std::invalid_argument("linear head: label grid " + std::to_string(labels.width) + "x" +
                                std::to_string(labels.height) + "x" + std::to_string(labels.z_bins) +
                                " does not match bev " + shape_str(bev.shape()) + " with Z=" +
                                std::to_string(z_bins));

  const std::int64_t plane = h * w;
  const std::int64_t voxels = plane * z_bins;

  LinearHeadGradients out;
  out.weight_grad = Tensor({cout, cin, 1, 1});
  out.bias_grad = Tensor({cout});

  std::vector<double> wgrad(static_cast<size_t>(cout * cin), 0.0);
  std::vector<double> bgrad(static_cast<size_t>(cout), 0.0);
  std::vector<double> logits(static_cast<size_t>(num_classes));
  double loss = 0.0;

  // dL/dlogit packed back into the BEV channel layout c = k*Z + z.
  std::vector<double> dlogit(static_cast<size_t>(cout));
  const double inv_n = 1.0 / static_cast<double>(voxels);

  for (std::int64_t px = 0; px < plane; ++px) {
    const std::int64_t y = px / w, x = px % w;
    // logits for the whole pillar at (y,x)
    std::fill(dlogit.begin(), dlogit.end(), 0.0);
    for (std::int64_t z = 0; z < z_bins; ++z) {
      for (std::int64_t k = 0; k < num_classes; ++k) {
        const std::int64_t co = k * z_bins + z;
        double acc = static_cast<double>(conv.bias[co]);
        for (std::int64_t ci = 0; ci < cin; ++ci)
          acc += static_cast<double>(conv.weight[co * cin + ci]) *
                 static_cast<double>(bev[ci * plane + px]);
        logits[static_cast<size_t>(k)] = acc;
      }
      double maxv = logits[0];
      for (std::int64_t k = 1; k < num_classes; ++k) maxv = std::max(maxv, logits[static_cast<size_t>(k)]);
      double sum = 0.0;
      for (std::int64_t k = 0; k < num_classes; ++k) {
        logits[static_cast<size_t>(k)] = std::exp(logits[static_cast<size_t>(k)] - maxv);
        sum += logits[static_cast<size_t>(k)];
      }
      const int truth = labels.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(z));
      loss -= std::log(logits[static_cast<size_t>(truth)] / sum) * inv_n;
      for (std::int64_t k = 0; k < num_classes; ++k) {
        const double p = logits[static_cast<size_t>(k)] / sum;
        dlogit[static_cast<size_t>(k * z_bins + z)] = (p - (k == truth ? 1.0 : 0.0)) * inv_n;
      }
    }
    for (std::int64_t co = 0; co < cout; ++co) {
      const double g = dlogit[static_cast<size_t>(co)];
      if (g == 0.0) continue;
      bgrad[static_cast<size_t>(co)] += g;
      for (std::int64_t ci = 0; ci < cin; ++ci)
        wgrad[static_cast<size_t>(co * cin + ci)] += g * static_cast<double>(bev[ci * plane + px]);
    }
  }

  out.loss = loss;
  for (std::int64_t i = 0; i < cout * cin; ++i)
    out.weight_grad[i] = static_cast<float>(wgrad[static_cast<size_t>(i)]);
  for (std::int64_t i = 0; i < cout; ++i)
    out.bias_grad[i] = static_cast<float>(bgrad[static_cast<size_t>(i)]);
  return out;
}

LinearHeadTrainResult train_linear_head(const Tensor& bev, const OccupancyGrid& labels, int num_classes,
                                        int z_bins, float lr, int steps) {
  if (!(lr > 0.0f)) throw std::invalid_argument("train_linear_head: lr must be positive");
  const std::int64_t cin = bev.size(1);
  const std::int64_t cout = static_cast<std::int64_t>(num_classes) * z_bins;

  LinearHeadTrainResult result;
  result.conv.weight = Tensor({cout, cin, 1, 1});
  result.conv.bias = Tensor({cout});
  result.conv.stride = 1;
  result.conv.padding = 0;

  for (int step = 0; step < steps; ++step) {
    LinearHeadGradients g = linear_head_loss_grad(bev, labels, result.conv, num_classes, z_bins);
    if (!std::isfinite(g.loss))
      throw std::runtime_error("train_linear_head: loss diverged at step " + std::to_string(step));
    result.loss_trace.push_back(g.loss);
    for (std::int64_t i = 0; i < cout * cin; ++i) result.conv.weight[i] -= lr * g.weight_grad[i];
    for (std::int64_t i = 0; i < cout; ++i) result.conv.bias[i] -= lr * g.bias_grad[i];
  }
  return result;
}

FlashHeadParams make_flash_head(int cin, const std::vector<int>& widths, int num_classes, int z_bins,
                                Rng& rng) {
  if (widths.empty()) throw std::invalid_argument("flash head: needs at least one conv width");
  FlashHeadParams p;
  p.num_classes = num_classes;
  p.z_bins = z_bins;
  int prev = cin;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    p.hidden.push_back({make_conv2d(prev, widths[i], 3, 1, 1, rng), make_identity_batch_norm(widths[i])});
    prev = widths[i];
  }
  p.final_conv = make_conv2d(prev, widths.back(), 3, 1, 1, rng);
  p.validate();
  return p;
}

VoxelHeadParams make_voxel_head(int cin, const std::vector<int>& widths, int num_classes, Rng& rng) {
  VoxelHeadParams p;
  int prev = cin;
  for (int width : widths) {
    p.hidden.push_back({make_conv3d(prev, width, 3, 1, 1, rng), make_identity_batch_norm(width)});
    prev = width;
  }
  p.classifier = make_conv3d(prev, num_classes, 1, 1, 0, rng);
  return p;
}

MultiScaleHeadParams make_multi_scale_head(const std::vector<int>& input_channels,
                                           const std::vector<int>& projected_widths,
                                           const std::vector<int>& widths, int num_classes, int z_bins,
                                           Rng& rng) {
  if (input_channels.size() != projected_widths.size())
    throw std::invalid_argument("multi-scale head: projection width list must match input count");
  MultiScaleHeadParams p;
  p.num_classes = num_classes;
  p.z_bins = z_bins;
  int total = 0;
  for (size_t i = 0; i < input_channels.size(); ++i) {
    p.input_projections.push_back(make_conv2d(input_channels[i], projected_widths[i], 1, 1, 0, rng));
    total += projected_widths[i];
  }
  int prev = total;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    p.hidden.push_back({make_conv2d(prev, widths[i], 3, 1, 1, rng), make_identity_batch_norm(widths[i])});
    prev = widths[i];
  }
  p.final_conv = make_conv2d(prev, widths.back(), 3, 1, 1, rng);
  return p;
}

}  // namespace bevocc
