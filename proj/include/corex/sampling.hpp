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
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corex/infotheory.hpp"
#include "corex/models.hpp"
#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

// Highest continuous layer of the model (the bottom layer when the top is
// categorical and L == 2).
std::size_t top_continuous_layer(const ModelSpec& spec);

struct PosteriorTable {
    std::size_t layer = 0;
    Tensor mean;     // [n x width]
    Tensor log_var;  // [n x width]
};

// Posterior parameters of `layer` for every row of data; the layers below are
// reached along the sampled encoder path.
PosteriorTable encode_posteriors(const HierarchicalModel& model, const Tensor& data, std::size_t layer, Rng& rng,
                                 std::size_t batch_size = 1024);

// One aggregated-posterior mixture per dimension of the top continuous layer.
struct MarginalBank {
    std::size_t layer = 0;
    std::vector<GaussianMixture1D> mixtures;
    std::size_t subsample = 0;
    std::uint64_t seed = 0;
    std::uint32_t model_fingerprint = 0;

    std::size_t width() const { return mixtures.size(); }
    std::string to_json() const;
    static MarginalBank from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static MarginalBank load(const std::filesystem::path& path);
};

inline constexpr std::size_t kDefaultBankSubsample = 1024;

MarginalBank fit_marginal_bank(const HierarchicalModel& model, const Tensor& data,
                               std::size_t subsample = kDefaultBankSubsample, std::uint64_t seed = 0);

struct LatentMIOptions {
    // mc_mixture: KL to the fitted aggregated marginal (estimate of I(x : z_i)).
    // mc_standard: KL to N(0, 1) (upper bound).
    Estimator estimator = Estimator::mc_mixture;
    MISampling mc;
    std::size_t subsample = kDefaultBankSubsample;
};

// Per-dimension I(x : z_i) of the top continuous layer. Encoding and the
// mixture subsample use the same streams as fit_marginal_bank(seed).
MIReport latent_mi_report(const HierarchicalModel& model, const Tensor& data, const LatentMIOptions& options,
                          std::uint64_t seed = 0);

// Independent draws of each coordinate from its mixture, [n x width].
Tensor draw_from_bank(const MarginalBank& bank, std::size_t n, Rng& rng);

// Ancestral sampling from the top prior (standard normal or uniform
// categorical); returns likelihood means [n x d].
Tensor sample_prior(const HierarchicalModel& model, std::size_t n, Rng& rng);
// Top continuous layer drawn from the bank, decoded to likelihood means.
Tensor sample_marginals(const HierarchicalModel& model, const MarginalBank& bank, std::size_t n, Rng& rng);

// ---------------------------------------------------------------------------

struct EnergyTestResult {
    double statistic = 0.0;  // energy distance (V-statistic)
    double p_value = 1.0;
    std::size_t permutations = 0;
    bool equivalent = true;  // p_value >= alpha
};

// Two-sample energy-distance test with a permutation-calibrated threshold.
EnergyTestResult energy_distance_test(const Tensor& a, const Tensor& b, std::size_t permutations, double alpha,
                                      Rng& rng);

// ---------------------------------------------------------------------------

struct VarianceRow {
    std::size_t dim = 0;
    double variance = 0.0;
    double mi = 0.0;
    double mi_se = 0.0;
};

struct VarianceReport {
    std::vector<VarianceRow> rows;                   // by dimension
    std::vector<std::pair<double, double>> cumulative;  // (variance, fraction <= variance), ascending
    double spearman = 0.0;

    // Header "dim,variance,mi_nats,mi_se".
    void write_csv(std::ostream& os) const;
    // Header "variance,fraction".
    void write_cumulative_csv(std::ostream& os) const;
};

VarianceReport variance_report(const MarginalBank& bank, const MIReport& mi);

// Rank correlation with average ranks for ties.
double spearman_correlation(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------

struct TraversalSpec {
    std::vector<std::size_t> dims;
    double lo = -3.0;
    double hi = 3.0;
    std::size_t steps = 7;

    void validate() const;
    std::vector<double> grid() const;
};

// Seed images traverse latent values directly; categories traverse the noise
// of q(z | category) in units of its standard deviation.
struct TraversalSource {
    Tensor seeds;                        // [r x d]; used when categories is empty
    std::vector<std::size_t> categories;
};

struct ImageGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::vector<double>> images;  // row-major cells, each height*width

    const std::vector<double>& at(std::size_t r, std::size_t c) const { return images[r * cols + c]; }
};

// Square images when d is a perfect square, otherwise one-pixel-high strips.
std::pair<std::size_t, std::size_t> image_extent(std::size_t d);

// Rows of `images` placed left to right, `cols` per grid row; empty cells are
// black.
ImageGrid grid_from_rows(const Tensor& images, std::size_t cols);

// Affine map of every pixel onto [0, 1] by the grid-wide range; a constant grid
// becomes 0.5.
void rescale_to_unit(ImageGrid& grid);

// Rows = (source item, dim) pairs with dims varying fastest; columns = grid
// values.
ImageGrid latent_traverse(const HierarchicalModel& model, const TraversalSpec& spec, const TraversalSource& source);

// Plain PGM with one-pixel gray-128 separators between cells.
void write_pgm_grid(const ImageGrid& grid, const std::filesystem::path& path);

}  // namespace corex
