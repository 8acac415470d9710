#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srkit {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents of a rank-4 (batch, channel, height, width) array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample() const noexcept { return c * h * w; }

  bool operator==(const Shape&) const = default;

  /// Throws DimensionError unless every extent is >= 1 and the element count
  /// fits in size_t.
  void validate() const;
  std::string str() const;
};

/// Throws DimensionError naming `axis` when `got != want`.
void require_extent(const char* op, const char* axis, std::size_t got, std::size_t want);

/// Dense row-major (n, c, h, w) array.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(shape) {
    shape_.validate();
    data_.assign(shape_.count(), fill);
  }
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    shape_.validate();
    if (data_.size() != shape_.count()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.str());
    }
  }

  /// A [rows, cols, 1, 1] tensor, the matrix convention used by linear ops.
  static BasicTensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return BasicTensor(Shape{rows, cols, 1, 1}, fill);
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[index(n, c, h, w)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[index(n, c, h, w)];
  }

  /// Same data, new extents with equal element count.
  BasicTensor reshaped(Shape shape) const {
    shape.validate();
    if (shape.count() != shape_.count()) {
      throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    return BasicTensor(shape, data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicTensor& o) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return BasicTensor<To>(t.shape(), std::move(out));
}

/// True when both tensors have the same shape and identical bit patterns.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Seeded generator. The raw stream is std::mt19937_64, whose output sequence
/// is fixed by the C++ standard; the float conversions below are implemented
/// here rather than through <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1): odd multiples of 2^-24, all exact
  /// in float.
  float uniform() {
    const std::uint64_t bits = engine_() >> 41;
    return static_cast<float>(2 * bits + 1) * 0x1.0p-24f;
  }
  /// Uniform in the open interval (-bound, bound); the endpoints are never
  /// produced.
  float symmetric(float bound) {
    const std::uint64_t bits = engine_() >> 41;
    const float v = static_cast<float>(static_cast<std::int64_t>(2 * bits + 1) - (1ll << 23)) * 0x1.0p-23f;
    return bound * v;
  }

  /// Standard normal via Box-Muller; one pair of uniforms per call.
  float normal();

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

/// FNV-1a over the raw bytes of every element, in order.
std::uint64_t hash_bytes(std::span<const float> values, std::uint64_t h = 14695981039346656037ull);

}  // namespace srkit
