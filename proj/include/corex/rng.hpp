/* Copyright 2026 The CorEx-VAE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>

#include "corex/tensor.hpp"

namespace corex {

// Counter-based generator (Philox4x32-10). The 128-bit Philox counter holds
// (draw index, stream id) and the key holds the seed, so two streams with the
// same seed are disjoint blocks of one bijection and never overlap. Output is
// a pure function of (seed, stream, call sequence).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() noexcept;
    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    // Uniform on (0, 1).
    double uniform_open() noexcept;
    // Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    // Standard normal via Box-Muller; the second variate of each pair is kept.
    double normal() noexcept;

    // Independent generator on a derived stream id. Does not advance *this.
    Rng substream(std::uint64_t id) const noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Named substreams used across the library.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kData = 4;
inline constexpr std::uint64_t kEval = 5;
inline constexpr std::uint64_t kReport = 6;
}  // namespace streams

Tensor standard_normal(Rng& rng, Shape shape);
Tensor uniform(Rng& rng, Shape shape, double lo, double hi);

}  // namespace corex
