#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "tdg/vec.hpp"

namespace tdg {

std::uint64_t fnv1a64(std::string_view text);

// Deterministic splittable stream keyed by (seed, stream id). Equal keys
// replay the identical sequence; there is no global state, so independent
// streams can be drawn from anywhere without coordination. Single-owner:
// never share an instance mutably.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_id);

  std::uint64_t next_u64();
  double next_double();    // uniform in [0, 1)
  double next_gaussian();  // standard normal (Box-Muller, cached spare)
  std::uint64_t next_below(std::uint64_t bound);  // unbiased uniform in [0, bound)

  Vec gaussian_vec(std::size_t n, double stddev);
  Mat gaussian_mat(std::size_t rows, std::size_t cols, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(next_below(i))]);
    }
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tdg
