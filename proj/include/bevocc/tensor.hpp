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
#include <stdexcept>
#include <string>
#include <vector>

namespace bevocc {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

/// Error raised by file readers; carries the offending file and byte offset.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& file, std::uint64_t offset, const std::string& what);
  const std::string& file() const { return file_; }
  std::uint64_t offset() const { return offset_; }

 private:
  std::string file_;
  std::uint64_t offset_;
};

/// Process-wide accounting of live tensor payload bytes. The benchmark
/// reports peak_bytes() as its memory metric, so every Tensor buffer
/// registers here on allocation and deregisters on destruction.
namespace memory {
std::int64_t current_bytes();
std::int64_t peak_bytes();
void reset_peak();
}  // namespace memory

/// Dense row-major tensor of 32-bit reals. The shape is fixed at
/// construction; reshape/permute return new tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);                          // zero-filled
  Tensor(Shape shape, std::vector<float> data);

  Tensor(const Tensor& other);
  Tensor(Tensor&& other) noexcept;
  Tensor& operator=(const Tensor& other);
  Tensor& operator=(Tensor&& other) noexcept;
  ~Tensor();

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float value);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t size(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  std::int64_t bytes() const { return numel() * static_cast<std::int64_t>(sizeof(float)); }

  const float* data() const { return data_.data(); }
  float* data() { return data_.data(); }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Row-major index helpers for the ranks used throughout the pipeline.
  float& at(std::int64_t i0, std::int64_t i1) { return data_[static_cast<size_t>(i0 * shape_[1] + i1)]; }
  float at(std::int64_t i0, std::int64_t i1) const { return data_[static_cast<size_t>(i0 * shape_[1] + i1)]; }
  float& at(std::int64_t i0, std::int64_t i1, std::int64_t i2) {
    return data_[static_cast<size_t>((i0 * shape_[1] + i1) * shape_[2] + i2)];
  }
  float at(std::int64_t i0, std::int64_t i1, std::int64_t i2) const {
    return data_[static_cast<size_t>((i0 * shape_[1] + i1) * shape_[2] + i2)];
  }
  float& at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3) {
    return data_[static_cast<size_t>(((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3)];
  }
  float at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3) const {
    return data_[static_cast<size_t>(((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3)];
  }
  float& at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3, std::int64_t i4) {
    return data_[static_cast<size_t>(
        (((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3) * shape_[4] + i4)];
  }
  float at(std::int64_t i0, std::int64_t i1, std::int64_t i2, std::int64_t i3, std::int64_t i4) const {
    return data_[static_cast<size_t>(
        (((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3) * shape_[4] + i4)];
  }

 private:
  void track();
  void untrack();

  Shape shape_;
  std::vector<float> data_;
  std::int64_t tracked_bytes_ = 0;
};

/// splitmix64-based PRNG. Self-contained so that streams are identical
/// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }
  /// Uniform in [0, 1).
  float uniform();
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive bounds
  /// Standard normal via Box-Muller.
  float normal();

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Stable per-parameter seed derived from the run seed and a parameter name.
std::uint64_t seed_for(std::uint64_t global_seed, const std::string& name);

/// He-style fan-in init: N(0, sqrt(2 / fan_in)).
Tensor he_normal(Shape shape, std::int64_t fan_in, Rng& rng);

// "FTEN" fixture file: magic, u32 version=1, u32 ndim, ndim x u32 dims,
// then row-major f32 payload. All fields little-endian.
void save_ften(const Tensor& t, const std::string& path);
Tensor load_ften(const std::string& path);

}  // namespace bevocc
