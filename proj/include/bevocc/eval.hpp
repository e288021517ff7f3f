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

#include <optional>
#include <vector>

#include "bevocc/grid.hpp"

namespace bevocc {

/// Row-major num_classes x num_classes count matrix; entry [gt][pred].
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  std::int64_t& at(int gt, int pred) { return counts[static_cast<size_t>(gt) * num_classes + pred]; }
  std::int64_t at(int gt, int pred) const { return counts[static_cast<size_t>(gt) * num_classes + pred]; }
  std::int64_t total() const;
};

/// Count voxel agreement, restricted to mask-true voxels when given.
ConfusionMatrix confusion(const OccupancyGrid& pred, const OccupancyGrid& gt,
                          const VisibilityMask* mask = nullptr);

struct MiouResult {
  /// IoU per class; classes never seen (TP+FP+FN == 0) carry no value.
  std::vector<std::optional<double>> per_class_iou;
  double mean = 0.0;
  int counted_classes = 0;
};

/// IoU_c = TP / (TP + FP + FN); the mean runs over eval_classes that are
/// defined (seen in pred or gt).
MiouResult miou(const ConfusionMatrix& conf, const std::vector<int>& eval_classes);

/// The default evaluation set: every class except the trailing free class.
std::vector<int> semantic_classes(int num_classes);

}  // namespace bevocc
