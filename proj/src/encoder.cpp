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

#include "bevocc/encoder.hpp"

namespace bevocc {

namespace {

Tensor add_relu(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("residual block: branch " + shape_str(a.shape()) +
                                " and skip " + shape_str(b.shape()) + " disagree");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const float v = a[i] + b[i];
    out[i] = v > 0.0f ? v : 0.0f;
  }
  return out;
}

}  // namespace

Tensor residual_block(const Tensor& x, const ResidualBlockParams& p) {
  Tensor branch = relu(batch_norm_inference(conv2d(x, p.conv1.conv), p.conv1.bn));
  branch = batch_norm_inference(conv2d(branch, p.conv2.conv), p.conv2.bn);
  if (p.projection) {
    const Tensor skip = batch_norm_inference(conv2d(x, p.projection->conv), p.projection->bn);
    return add_relu(branch, skip);
  }
  return add_relu(branch, x);
}

EncodedFeatures encode(const Tensor& x, const EncoderParams& p) {
  if (p.stages.size() < 2)
    throw std::invalid_argument("encoder: needs at least two stages, got " +
                                std::to_string(p.stages.size()));
  Tensor cur = x;
  Tensor fine;
  for (size_t s = 0; s < p.stages.size(); ++s) {
    for (const ResidualBlockParams& block : p.stages[s]) cur = residual_block(cur, block);
    if (s + 2 == p.stages.size()) fine = cur;
  }
  return {std::move(fine), std::move(cur)};
}

Tensor fpn_lss_fuse(const Tensor& fine, const Tensor& coarse, const Conv2dParams& fuse_conv) {
  if (fine.ndim() != 4 || coarse.ndim() != 4)
    throw std::invalid_argument("fpn_lss_fuse: expects [B,C,H,W] inputs");
  if (coarse.size(2) * 2 != fine.size(2) || coarse.size(3) * 2 != fine.size(3))
    throw std::invalid_argument("fpn_lss_fuse: coarse " + shape_str(coarse.shape()) +
                                " is not at half the resolution of fine " + shape_str(fine.shape()));
  if (fine.size(0) != coarse.size(0)) throw std::invalid_argument("fpn_lss_fuse: batch mismatch");

  const Tensor up = upsample2x_bilinear(coarse);
  const std::int64_t b = fine.size(0), cf = fine.size(1), cc = up.size(1);
  const std::int64_t h = fine.size(2), w = fine.size(3), plane = h * w;
  if (fuse_conv.weight.size(1) != cf + cc)
    throw std::invalid_argument("fpn_lss_fuse: fuse conv expects " +
                                std::to_string(fuse_conv.weight.size(1)) + " channels, concat has " +
                                std::to_string(cf + cc));

  Tensor cat({b, cf + cc, h, w});
  for (std::int64_t bi = 0; bi < b; ++bi) {
    std::copy(fine.data() + bi * cf * plane, fine.data() + (bi + 1) * cf * plane,
              cat.data() + bi * (cf + cc) * plane);
    std::copy(up.data() + bi * cc * plane, up.data() + (bi + 1) * cc * plane,
              cat.data() + bi * (cf + cc) * plane + cf * plane);
  }
  return conv2d(cat, fuse_conv);
}

Tensor encode_and_fuse(const Tensor& x, const EncoderNeckParams& p) {
  const EncodedFeatures feats = encode(x, p.encoder);
  Tensor fused = fpn_lss_fuse(feats.fine, feats.coarse, p.fuse_conv);
  while (fused.size(2) < x.size(2)) fused = upsample2x_bilinear(fused);
  if (fused.size(2) != x.size(2) || fused.size(3) != x.size(3))
    throw std::invalid_argument("encoder neck: fused map " + shape_str(fused.shape()) +
                                " cannot be upsampled to input " + shape_str(x.shape()));
  return fused;
}

ResidualBlockParams make_residual_block(int cin, int cout, int stride, Rng& rng) {
  ResidualBlockParams p;
  p.conv1 = {make_conv2d(cin, cout, 3, stride, 1, rng), make_identity_batch_norm(cout)};
  p.conv2 = {make_conv2d(cout, cout, 3, 1, 1, rng), make_identity_batch_norm(cout)};
  if (cin != cout || stride != 1)
    p.projection = ConvBn{make_conv2d(cin, cout, 1, stride, 0, rng), make_identity_batch_norm(cout)};
  return p;
}

EncoderParams make_encoder(int cin, const std::vector<int>& stage_widths, int blocks_per_stage, Rng& rng) {
  if (stage_widths.size() < 2) throw std::invalid_argument("encoder: needs at least two stage widths");
  if (blocks_per_stage < 1) throw std::invalid_argument("encoder: blocks_per_stage must be >= 1");
  EncoderParams p;
  int prev = cin;
  for (size_t s = 0; s < stage_widths.size(); ++s) {
    std::vector<ResidualBlockParams> blocks;
    const int width = stage_widths[s];
    for (int bi = 0; bi < blocks_per_stage; ++bi) {
      const int stride = (s > 0 && bi == 0) ? 2 : 1;
      blocks.push_back(make_residual_block(prev, width, stride, rng));
      prev = width;
    }
    p.stages.push_back(std::move(blocks));
  }
  return p;
}

EncoderNeckParams make_encoder_neck(int cin, const std::vector<int>& stage_widths, int neck_channels,
                                    int blocks_per_stage, Rng& rng) {
  EncoderNeckParams p;
  p.encoder = make_encoder(cin, stage_widths, blocks_per_stage, rng);
  const int cf = stage_widths[stage_widths.size() - 2];
  const int cc = stage_widths[stage_widths.size() - 1];
  p.fuse_conv = make_conv2d(cf + cc, neck_channels, 3, 1, 1, rng);
  return p;
}

}  // namespace bevocc
