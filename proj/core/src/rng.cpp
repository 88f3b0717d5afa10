#include "tdg/rng.hpp"

#include <cmath>
#include <numbers>

namespace tdg {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view stream_id) {
  // Decorrelate streams sharing a seed by folding the id hash through the
  // output mix twice before the counter starts.
  state_ = mix64(mix64(seed + kGolden) ^ fnv1a64(stream_id));
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 =
      static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw IndexError("RngStream::next_below: bound must be positive");
  }
  const std::uint64_t threshold = (-bound) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % bound;
  }
}

Vec RngStream::gaussian_vec(std::size_t n, double stddev) {
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = stddev * next_gaussian();
  }
  return out;
}

Mat RngStream::gaussian_mat(std::size_t rows, std::size_t cols, double stddev) {
  Mat out(rows, cols);
  for (double& v : out.data) {
    v = stddev * next_gaussian();
  }
  return out;
}

}  // namespace tdg
