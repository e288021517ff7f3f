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

#include <filesystem>
#include <fstream>

#include "bevocc/eval.hpp"
#include "bevocc/tensor.hpp"
#include "doctest.h"

using namespace bevocc;
namespace fs = std::filesystem;

namespace {

OccupancyGrid random_grid(Rng& rng, int w, int h, int z, int classes) {
  OccupancyGrid g = OccupancyGrid::filled(w, h, z, classes, 0);
  for (size_t i = 0; i < g.labels.size(); ++i)
    g.labels[i] = static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return g;
}

}  // namespace

TEST_CASE("confusion of identical grids is diagonal") {
  Rng rng(71);
  const OccupancyGrid g = random_grid(rng, 6, 5, 4, 5);
  const ConfusionMatrix conf = confusion(g, g);
  std::vector<std::int64_t> class_counts(5, 0);
  for (std::uint8_t l : g.labels) ++class_counts[l];
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) CHECK(conf.at(a, b) == (a == b ? class_counts[static_cast<size_t>(a)] : 0));
  CHECK(conf.total() == g.voxel_count());
}

TEST_CASE("all-false mask zeroes the matrix, counts track masked voxels") {
  Rng rng(72);
  const OccupancyGrid pred = random_grid(rng, 4, 4, 4, 3);
  const OccupancyGrid gt = random_grid(rng, 4, 4, 4, 3);
  const VisibilityMask none = VisibilityMask::filled(4, 4, 4, false);
  CHECK(confusion(pred, gt, &none).total() == 0);

  VisibilityMask some = VisibilityMask::filled(4, 4, 4, false);
  std::int64_t marked = 0;
  for (int i = 0; i < 4 * 4 * 4; i += 3) {
    some.visible[static_cast<size_t>(i)] = 1;
    ++marked;
  }
  CHECK(confusion(pred, gt, &some).total() == marked);
}

TEST_CASE("confusion matches the per-voxel loop oracle on random grids") {
  Rng rng(73);
  for (int trial = 0; trial < 25; ++trial) {
    const int classes = rng.uniform_int(2, 6);
    const OccupancyGrid pred = random_grid(rng, 8, 8, 8, classes);
    const OccupancyGrid gt = random_grid(rng, 8, 8, 8, classes);
    VisibilityMask mask = VisibilityMask::filled(8, 8, 8, false);
    for (size_t i = 0; i < mask.visible.size(); ++i) mask.visible[i] = rng.uniform() < 0.5f ? 1 : 0;
    const ConfusionMatrix conf = confusion(pred, gt, &mask);

    std::vector<std::int64_t> want(static_cast<size_t>(classes) * classes, 0);
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          if (!mask.at(x, y, z)) continue;
          ++want[static_cast<size_t>(gt.at(x, y, z)) * classes + pred.at(x, y, z)];
        }
    CHECK(conf.counts == want);
  }
}

TEST_CASE("confusion rejects mismatched dims") {
  const OccupancyGrid a = OccupancyGrid::filled(4, 4, 4, 3, 0);
  const OccupancyGrid b = OccupancyGrid::filled(4, 4, 5, 3, 0);
  CHECK_THROWS_AS(confusion(a, b), std::invalid_argument);
  const VisibilityMask m = VisibilityMask::filled(4, 4, 5, true);
  CHECK_THROWS_AS(confusion(a, a, &m), std::invalid_argument);
}

TEST_CASE("miou closed forms") {
  Rng rng(74);
  const OccupancyGrid g = random_grid(rng, 6, 6, 6, 4);
  const MiouResult perfect = miou(confusion(g, g), semantic_classes(4));
  CHECK(perfect.mean == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k < 3; ++k)
    if (perfect.per_class_iou[static_cast<size_t>(k)])
      CHECK(*perfect.per_class_iou[static_cast<size_t>(k)] == doctest::Approx(1.0));

  // fully disjoint: pred always class 0, gt always class 1
  const OccupancyGrid zeros = OccupancyGrid::filled(4, 4, 4, 3, 0);
  const OccupancyGrid ones = OccupancyGrid::filled(4, 4, 4, 3, 1);
  const MiouResult disjoint = miou(confusion(zeros, ones), {0, 1});
  CHECK(disjoint.mean == doctest::Approx(0.0));

  // hand case: TP=2, FP=1, FN=1 -> IoU = 0.5
  ConfusionMatrix conf;
  conf.num_classes = 2;
  conf.counts = {2, 1, 1, 0};  // [gt=0][pred=0]=2, [0][1]=1 (FN), [1][0]=1 (FP)
  const MiouResult half = miou(conf, {0});
  CHECK(half.mean == doctest::Approx(0.5));
}

TEST_CASE("undefined classes are excluded, never scored as 0 or 1") {
  ConfusionMatrix conf;
  conf.num_classes = 4;
  conf.counts.assign(16, 0);
  conf.at(0, 0) = 10;  // class 0 perfect, classes 1..2 absent
  const MiouResult r = miou(conf, {0, 1, 2});
  CHECK(r.counted_classes == 1);
  CHECK(r.mean == doctest::Approx(1.0));
  CHECK(!r.per_class_iou[1].has_value());
  CHECK_THROWS_AS(miou(conf, {}), std::invalid_argument);
}

TEST_CASE("iou stays within [0,1] and is voxel-order invariant") {
  Rng rng(75);
  for (int trial = 0; trial < 10; ++trial) {
    const OccupancyGrid pred = random_grid(rng, 8, 8, 8, 4);
    const OccupancyGrid gt = random_grid(rng, 8, 8, 8, 4);
    const MiouResult r = miou(confusion(pred, gt), semantic_classes(4));
    for (const auto& iou : r.per_class_iou)
      if (iou) {
        CHECK(*iou >= 0.0);
        CHECK(*iou <= 1.0);
      }

    // apply the same voxel permutation to both grids
    std::vector<int> perm(static_cast<size_t>(pred.voxel_count()));
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    OccupancyGrid pred2 = pred, gt2 = gt;
    for (size_t i = 0; i < perm.size(); ++i) {
      pred2.labels[i] = pred.labels[static_cast<size_t>(perm[i])];
      gt2.labels[i] = gt.labels[static_cast<size_t>(perm[i])];
    }
    const MiouResult r2 = miou(confusion(pred2, gt2), semantic_classes(4));
    CHECK(r.mean == doctest::Approx(r2.mean).epsilon(1e-12));
  }
}

TEST_CASE("occg containers round-trip and validate") {
  const fs::path dir = fs::temp_directory_path() / "bevocc_eval_test";
  fs::create_directories(dir);
  Rng rng(76);
  const OccupancyGrid g = random_grid(rng, 5, 4, 3, 7);
  const std::string path = (dir / "g.occg").string();
  save_occg(g, path);
  const OccupancyGrid g2 = load_occg(path);
  CHECK(g2.width == 5);
  CHECK(g2.height == 4);
  CHECK(g2.z_bins == 3);
  CHECK(g2.num_classes == 7);
  CHECK(g2.labels == g.labels);

  VisibilityMask m = VisibilityMask::filled(5, 4, 3, true);
  m.visible[7] = 0;
  const std::string mpath = (dir / "m.occg").string();
  save_occg(m, mpath);
  const VisibilityMask m2 = load_occg_mask(mpath);
  CHECK(m2.visible == m.visible);
  // a 7-class grid is not a mask
  CHECK_THROWS_AS(load_occg_mask(path), DataError);

  // out-of-range label byte
  {
    std::ofstream f(path, std::ios::binary | std::ios::in);
    f.seekp(24);
    const char bad = 9;
    f.write(&bad, 1);
  }
  CHECK_THROWS_AS(load_occg(path), DataError);
  fs::remove_all(dir);
}

TEST_CASE("grid indexing follows the documented layout") {
  OccupancyGrid g = OccupancyGrid::filled(3, 4, 2, 5, 0);
  g.set(2, 1, 1, 4);
  CHECK(g.labels[static_cast<size_t>((1 * 4 + 1) * 3 + 2)] == 4);
  CHECK(g.at(2, 1, 1) == 4);
}
