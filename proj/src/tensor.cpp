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

#include "bevocc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>

namespace bevocc {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

DataError::DataError(const std::string& file, std::uint64_t offset, const std::string& what)
    : std::runtime_error(file + " @" + std::to_string(offset) + ": " + what),
      file_(file),
      offset_(offset) {}

namespace memory {
namespace {
std::int64_t g_current = 0;
std::int64_t g_peak = 0;
}  // namespace

std::int64_t current_bytes() { return g_current; }
std::int64_t peak_bytes() { return g_peak; }
void reset_peak() { g_peak = g_current; }

static void on_alloc(std::int64_t bytes) {
  g_current += bytes;
  g_peak = std::max(g_peak, g_current);
}
static void on_free(std::int64_t bytes) { g_current -= bytes; }
}  // namespace memory

namespace {
std::int64_t checked_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive dim " + shape_str(shape));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_numel(shape_)), 0.0f);
  track();
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
  }
  track();
}

Tensor::Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_) { track(); }

Tensor::Tensor(Tensor&& other) noexcept
    : shape_(std::move(other.shape_)),
      data_(std::move(other.data_)),
      tracked_bytes_(other.tracked_bytes_) {
  other.tracked_bytes_ = 0;
  other.shape_.clear();
}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this == &other) return *this;
  untrack();
  shape_ = other.shape_;
  data_ = other.data_;
  track();
  return *this;
}

Tensor& Tensor::operator=(Tensor&& other) noexcept {
  if (this == &other) return *this;
  untrack();
  shape_ = std::move(other.shape_);
  data_ = std::move(other.data_);
  tracked_bytes_ = other.tracked_bytes_;
  other.tracked_bytes_ = 0;
  other.shape_.clear();
  return *this;
}

Tensor::~Tensor() { untrack(); }

void Tensor::track() {
  tracked_bytes_ = bytes();
  memory::on_alloc(tracked_bytes_);
}

void Tensor::untrack() {
  if (tracked_bytes_) {
    memory::on_free(tracked_bytes_);
    tracked_bytes_ = 0;
  }
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

float Rng::uniform() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

int Rng::uniform_int(int lo, int hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

float Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return static_cast<float>(spare_);
  }
  double u1 = 0.0;
  do {
    u1 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * M_PI * u2);
  have_spare_ = true;
  return static_cast<float>(mag * std::cos(2.0 * M_PI * u2));
}

std::uint64_t seed_for(std::uint64_t global_seed, const std::string& name) {
  // FNV-1a over the name, folded into the run seed.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  Rng mix(h ^ (global_seed * 0x9E3779B97F4A7C15ULL));
  return mix.next_u64();
}

Tensor he_normal(Shape shape, std::int64_t fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::invalid_argument("he_normal: fan_in must be positive");
  Tensor t(std::move(shape));
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
  return t;
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

}  // namespace

void save_ften(const Tensor& t, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError(path, 0, "cannot open for writing");
  std::fwrite("FTEN", 1, 4, f.get());
  put_u32(f.get(), 1);
  put_u32(f.get(), static_cast<std::uint32_t>(t.ndim()));
  for (std::int64_t d : t.shape()) put_u32(f.get(), static_cast<std::uint32_t>(d));
  // x86 floats are already IEEE-754 little-endian; write payload in bulk.
  std::fwrite(t.data(), sizeof(float), static_cast<size_t>(t.numel()), f.get());
  if (std::ferror(f.get())) throw DataError(path, 0, "write failed");
}

Tensor load_ften(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError(path, 0, "cannot open");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "FTEN", 4) != 0)
    throw DataError(path, 0, "bad magic, expected FTEN");
  const std::uint32_t version = get_u32(f.get(), path);
  if (version != 1) throw DataError(path, 4, "unsupported version " + std::to_string(version));
  const std::uint32_t ndim = get_u32(f.get(), path);
  if (ndim == 0 || ndim > 8) throw DataError(path, 8, "implausible ndim " + std::to_string(ndim));
  Shape shape(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = get_u32(f.get(), path);
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  std::vector<float> data(static_cast<size_t>(n));
  const long off = std::ftell(f.get());
  if (std::fread(data.data(), sizeof(float), static_cast<size_t>(n), f.get()) != static_cast<size_t>(n))
    throw DataError(path, static_cast<std::uint64_t>(off), "truncated payload");
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace bevocc
