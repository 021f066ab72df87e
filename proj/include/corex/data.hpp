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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

struct GroundTruth {
    std::optional<double> tc_x;      // analytic TC(x) in nats when known
    Tensor factors;                  // generative factor matrix
    std::vector<double> covariance;  // row-major d x d, Gaussian data only
};

struct Dataset {
    Tensor values;  // [n x d]
    std::vector<std::int64_t> labels;
    std::optional<std::vector<double>> per_dim_entropy;
    std::optional<GroundTruth> ground_truth;
    bool binary = false;

    std::size_t n() const { return values.rows(); }
    std::size_t d() const { return values.cols(); }
    bool has_labels() const { return !labels.empty(); }
    // Throws unless the invariants hold (binary values, entropy range, label
    // count).
    void validate() const;
};

// Rows of t in the given order; never on a tape.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

enum class SyntheticKind { linear_gaussian, bars };

std::string to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(std::string_view s);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::linear_gaussian;
    std::size_t latent_dim = 3;
    std::size_t observed_dim = 8;
    std::size_t n = 1000;
    double noise_scale = 0.5;
    std::uint64_t mixing_seed = 0;
    // Bars only.
    double bar_prob = 0.3;
    // Bars only: 0 draws every bar independently; c > 0 draws a class
    // uniformly and only that class's contiguous group of 2*side/c bars, with
    // at least one bar present.
    std::size_t classes = 0;

    void validate() const;
};

// x = W s + eps with s ~ N(0, I_k), eps ~ N(0, noise^2 I). W is [d x k], drawn
// N(0, 1) from the mixing seed. per_dim_entropy holds the analytic marginal
// differential entropies.
Dataset gen_linear_gaussian(const SyntheticSpec& spec, Rng& rng);
Dataset gen_linear_gaussian(const Tensor& mixing, double noise_scale, std::size_t n, Rng& rng);

// Square binary images made of horizontal and vertical bars. Bars are indexed
// horizontal rows first, then vertical columns. Labels are the bar bitmask
// (independent bars) or the class index (class mixture).
Dataset gen_bars(const SyntheticSpec& spec, Rng& rng);

Dataset generate(const SyntheticSpec& spec, Rng& rng);

// Plug-in Bernoulli entropy of each column mean.
std::vector<double> plugin_binary_entropy(const Tensor& values);

// IDX image/label files. Pixels are scaled to [0, 1]; with a threshold, values
// >= threshold become 1 and the rest 0.
Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                 std::optional<double> binarize_threshold = std::nullopt);
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// Flat container:
//   "CXDS" | u32 version | u64 n | u64 d | u32 flags | f64 values[n*d] |
//   [i64 labels[n]] | [f64 entropy[d]] | [f64 tc] | [u64 rows | u64 cols | f64 factors] |
//   [f64 covariance[d*d]] | u32 CRC-32
inline constexpr std::uint32_t kDatasetVersion = 1;
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Shuffled mini-batches; each call to next_epoch draws a fresh permutation and
// keeps the final short batch.
class BatchIterator {
public:
    BatchIterator(std::size_t n, std::size_t batch_size, Rng rng);
    std::vector<std::vector<std::size_t>> next_epoch();

private:
    std::size_t n_;
    std::size_t batch_size_;
    Rng rng_;
};

}  // namespace corex
