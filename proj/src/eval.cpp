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

#include "bevocc/eval.hpp"

#include "bevocc/tensor.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace bevocc {

OccupancyGrid OccupancyGrid::filled(int w, int h, int z, int num_classes, std::uint8_t label) {
  OccupancyGrid g;
  g.width = w;
  g.height = h;
  g.z_bins = z;
  g.num_classes = num_classes;
  g.labels.assign(static_cast<size_t>(g.voxel_count()), label);
  g.validate();
  return g;
}

void OccupancyGrid::validate() const {
  if (width <= 0 || height <= 0 || z_bins <= 0 || num_classes <= 0)
    throw std::invalid_argument("occupancy grid: dims and class count must be positive");
  if (static_cast<std::int64_t>(labels.size()) != voxel_count())
    throw std::invalid_argument("occupancy grid: label buffer size " + std::to_string(labels.size()) +
                                " != W*H*Z = " + std::to_string(voxel_count()));
  for (std::uint8_t l : labels)
    if (l >= num_classes)
      throw std::invalid_argument("occupancy grid: label " + std::to_string(l) + " >= num_classes " +
                                  std::to_string(num_classes));
}

VisibilityMask VisibilityMask::filled(int w, int h, int z, bool value) {
  VisibilityMask m;
  m.width = w;
  m.height = h;
  m.z_bins = z;
  m.visible.assign(static_cast<size_t>(w) * h * z, value ? 1 : 0);
  return m;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const OccupancyGrid& pred, const OccupancyGrid& gt, const VisibilityMask* mask) {
  if (!pred.same_dims(gt) || pred.num_classes != gt.num_classes)
    throw std::invalid_argument("confusion: prediction and ground truth disagree on dims or classes");
  if (mask && (mask->width != gt.width || mask->height != gt.height || mask->z_bins != gt.z_bins))
    throw std::invalid_argument("confusion: mask dims do not match the grids");

  ConfusionMatrix conf;
  conf.num_classes = gt.num_classes;
  conf.counts.assign(static_cast<size_t>(gt.num_classes) * gt.num_classes, 0);
  const std::int64_t n = gt.voxel_count();
  for (std::int64_t i = 0; i < n; ++i) {
    if (mask && mask->visible[static_cast<size_t>(i)] == 0) continue;
    ++conf.counts[static_cast<size_t>(gt.labels[static_cast<size_t>(i)]) * conf.num_classes +
                  pred.labels[static_cast<size_t>(i)]];
  }
  return conf;
}

MiouResult miou(const ConfusionMatrix& conf, const std::vector<int>& eval_classes) {
  if (eval_classes.empty()) throw std::invalid_argument("miou: empty evaluation class set");
  const int c = conf.num_classes;
  std::vector<std::int64_t> row_sum(static_cast<size_t>(c), 0), col_sum(static_cast<size_t>(c), 0);
  for (int g = 0; g < c; ++g)
    for (int p = 0; p < c; ++p) {
      row_sum[static_cast<size_t>(g)] += conf.at(g, p);
      col_sum[static_cast<size_t>(p)] += conf.at(g, p);
    }

  MiouResult out;
  out.per_class_iou.assign(static_cast<size_t>(c), std::nullopt);
  double sum = 0.0;
  for (int k : eval_classes) {
    if (k < 0 || k >= c) throw std::invalid_argument("miou: eval class " + std::to_string(k) + " out of range");
    const std::int64_t tp = conf.at(k, k);
    const std::int64_t denom = row_sum[static_cast<size_t>(k)] + col_sum[static_cast<size_t>(k)] - tp;
    if (denom == 0) continue;  // class absent everywhere: excluded, not 0
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class_iou[static_cast<size_t>(k)] = iou;
    sum += iou;
    ++out.counted_classes;
  }
  out.mean = out.counted_classes > 0 ? sum / out.counted_classes : 0.0;
  return out;
}

std::vector<int> semantic_classes(int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("semantic_classes: need at least 2 classes");
  std::vector<int> v(static_cast<size_t>(num_classes - 1));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

namespace {

void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t get_u32(std::FILE* f, const std::string& path) {
  unsigned char b[4];
  const long off = std::ftell(f);
  if (std::fread(b, 1, 4, f) != 4) throw DataError(path, static_cast<std::uint64_t>(off), "truncated u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

void save_container(const std::string& path, int w, int h, int z, int num_classes,
                    const std::vector<std::uint8_t>& payload) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError(path, 0, "cannot open for writing");
  std::fwrite("OCCG", 1, 4, f.get());
  put_u32(f.get(), 1);
  put_u32(f.get(), static_cast<std::uint32_t>(w));
  put_u32(f.get(), static_cast<std::uint32_t>(h));
  put_u32(f.get(), static_cast<std::uint32_t>(z));
  put_u32(f.get(), static_cast<std::uint32_t>(num_classes));
  std::fwrite(payload.data(), 1, payload.size(), f.get());
  if (std::ferror(f.get())) throw DataError(path, 0, "write failed");
}

OccupancyGrid load_container(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError(path, 0, "cannot open");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "OCCG", 4) != 0)
    throw DataError(path, 0, "bad magic, expected OCCG");
  const std::uint32_t version = get_u32(f.get(), path);
  if (version != 1) throw DataError(path, 4, "unsupported version " + std::to_string(version));
  OccupancyGrid g;
  g.width = static_cast<int>(get_u32(f.get(), path));
  g.height = static_cast<int>(get_u32(f.get(), path));
  g.z_bins = static_cast<int>(get_u32(f.get(), path));
  g.num_classes = static_cast<int>(get_u32(f.get(), path));
  if (g.width <= 0 || g.height <= 0 || g.z_bins <= 0 || g.num_classes <= 0 || g.num_classes > 256)
    throw DataError(path, 8, "implausible header dims");
  g.labels.resize(static_cast<size_t>(g.voxel_count()));
  const long off = std::ftell(f.get());
  if (std::fread(g.labels.data(), 1, g.labels.size(), f.get()) != g.labels.size())
    throw DataError(path, static_cast<std::uint64_t>(off), "truncated payload");
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path, static_cast<std::uint64_t>(off), e.what());
  }
  return g;
}

}  // namespace

void save_occg(const OccupancyGrid& grid, const std::string& path) {
  grid.validate();
  save_container(path, grid.width, grid.height, grid.z_bins, grid.num_classes, grid.labels);
}

OccupancyGrid load_occg(const std::string& path) { return load_container(path); }

void save_occg(const VisibilityMask& mask, const std::string& path) {
  save_container(path, mask.width, mask.height, mask.z_bins, 2, mask.visible);
}

VisibilityMask load_occg_mask(const std::string& path) {
  const OccupancyGrid g = load_container(path);
  if (g.num_classes != 2) throw DataError(path, 20, "mask container must have num_classes=2");
  VisibilityMask m;
  m.width = g.width;
  m.height = g.height;
  m.z_bins = g.z_bins;
  m.visible = g.labels;
  return m;
}

}  // namespace bevocc
