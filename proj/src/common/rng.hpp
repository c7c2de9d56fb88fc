/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace nld {

using PhiloxBlock = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

/// Philox4x64-10 block function (Salmon et al., Random123). Bit-compatible
/// with numpy.random.Philox.
PhiloxBlock philox4x64(PhiloxBlock counter, PhiloxKey key);

/// Sequential reader over a Philox counter stream.
///
/// Stream splitting: the key is (seed, stream_id) and the counter starts at 0,
/// so every (seed, stream_id) pair is an independent, reproducible stream. The
/// i-th 64-bit output is word (i mod 4) of block floor(i / 4).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal();
  /// Index drawn from a discrete probability vector (inverse CDF).
  std::size_t categorical(const double* probs, std::size_t n);

 private:
  PhiloxKey key_;
  PhiloxBlock counter_{0, 0, 0, 0};
  PhiloxBlock buffer_{};
  int buffer_pos_ = 4;
  std::optional<double> spare_normal_;
};

/// Stable 64-bit mixing used to derive sub-stream ids (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

}  // namespace nld
