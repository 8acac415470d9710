#include "srkit/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

namespace srkit {

void Shape::validate() const {
  if (n < 1 || c < 1 || h < 1 || w < 1) {
    throw DimensionError("shape " + str() + " has an extent below 1");
  }
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t acc = n;
  for (std::size_t e : {c, h, w}) {
    if (acc > kMax / e) throw DimensionError("shape " + str() + " overflows the address range");
    acc *= e;
  }
}

std::string Shape::str() const {
  return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + "]";
}

void require_extent(const char* op, const char* axis, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DimensionError(std::string(op) + ": axis '" + axis + "' has extent " + std::to_string(got) +
                         ", expected " + std::to_string(want));
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

float Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2));
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw UsageError("Rng::below(0)");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

std::uint64_t hash_bytes(std::span<const float> values, std::uint64_t h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace srkit
