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

#include <cstdint>
#include <string>
#include <vector>

namespace bevocc {

/// Per-voxel class labels over a W x H x Z lattice, one byte per voxel,
/// stored with x fastest: index = (z*H + y)*W + x.
struct OccupancyGrid {
  int width = 0, height = 0, z_bins = 0;
  int num_classes = 0;
  std::vector<std::uint8_t> labels;

  static OccupancyGrid filled(int w, int h, int z, int num_classes, std::uint8_t label);

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(width) * height * z_bins;
  }
  std::int64_t index(int x, int y, int z) const {
    return (static_cast<std::int64_t>(z) * height + y) * width + x;
  }
  std::uint8_t at(int x, int y, int z) const { return labels[static_cast<size_t>(index(x, y, z))]; }
  void set(int x, int y, int z, std::uint8_t label) { labels[static_cast<size_t>(index(x, y, z))] = label; }

  void validate() const;
  bool same_dims(const OccupancyGrid& other) const {
    return width == other.width && height == other.height && z_bins == other.z_bins;
  }
};

/// Camera-visibility flags with the same layout as OccupancyGrid.
struct VisibilityMask {
  int width = 0, height = 0, z_bins = 0;
  std::vector<std::uint8_t> visible;

  static VisibilityMask filled(int w, int h, int z, bool value);

  std::int64_t index(int x, int y, int z) const {
    return (static_cast<std::int64_t>(z) * height + y) * width + x;
  }
  bool at(int x, int y, int z) const { return visible[static_cast<size_t>(index(x, y, z))] != 0; }
  void set(int x, int y, int z, bool v) {
    visible[static_cast<size_t>(index(x, y, z))] = v ? 1 : 0;
  }
};

// "OCCG" container: magic, u32 version=1, u32 W,H,Z,num_classes, then
// W*H*Z label bytes. Masks reuse it with num_classes=2.
void save_occg(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid load_occg(const std::string& path);
void save_occg(const VisibilityMask& mask, const std::string& path);
VisibilityMask load_occg_mask(const std::string& path);

}  // namespace bevocc
