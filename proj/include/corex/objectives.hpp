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
#include <optional>
#include <span>
#include <vector>

#include "corex/infotheory.hpp"
#include "corex/models.hpp"
#include "corex/nn.hpp"
#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

enum class PriorKind { standard_normal, fitted_marginal };

struct LayerShape {
    LatentKind kind = LatentKind::continuous;
    std::size_t width = 0;
};

struct ObjectiveConfig {
    // Weight per latent dimension of the bottom layer; empty means all ones.
    std::vector<double> kl_weights;
    // Expected layer shapes; empty means "take them from the model".
    std::vector<LayerShape> layers;
    PriorKind prior = PriorKind::standard_normal;
    // One mixture per bottom-layer dimension; required for fitted_marginal.
    const std::vector<GaussianMixture1D>* fitted = nullptr;
    std::size_t mc_samples = 1;
    // Plug-in H(x_i). When absent the constant is omitted.
    std::optional<std::vector<double>> entropy_offsets;

    void validate(const ModelSpec& spec) const;
};

// Weights 1 - lambda on the anchored dimensions and 1 elsewhere.
std::vector<double> anchor_weights(std::size_t width, std::span<const std::size_t> anchors, double lambda);

struct LayerGain {
    double value = 0.0;
    double std_err = 0.0;
};

struct ObjectiveValue {
    Tensor total;                          // scalar, on the tape when params are
    std::vector<double> reconstruction;    // per x dimension, <ln q(x_i | z)>
    std::vector<double> kl;                // per top-layer dimension, unweighted
    std::vector<double> kl_weights;        // weights applied to `kl`
    std::vector<LayerGain> per_layer_gain; // one per layer, bottom first
    double entropy_offset = 0.0;
    bool offset_included = false;
    double std_err = 0.0;                  // standard error of total over examples
    std::vector<double> per_example;
    std::vector<std::vector<double>> per_example_gain;  // [layer][example]
};

// Sum_i H(x_i) + Sum_i <ln q(x_i | z)> - Sum_j KL(p(z_j | x) || r(z_j)) for a
// single-layer model.
ObjectiveValue corex_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                           const ObjectiveConfig& config, Rng& rng);

// <ln q(x | z)> - KL(p(z | x) || r(z)); consumes the same draws as
// corex_bound for the same rng state.
Tensor elbo(const ModelSpec& spec, const ParamMap& params, const Tensor& batch, const ObjectiveConfig& config,
            Rng& rng);

// corex_bound with each KL term scaled by its weight in [0, 1].
ObjectiveValue anchor_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                            const ObjectiveConfig& config, Rng& rng);

// Hierarchical bound
//   offset + <ln q(x | z1)> + Sum_{l>=2} <ln q(z_{l-1} | z_l)>
//          + Sum_{l<L} H(p(z_l | z_{l-1})) - KL(p(z_L | z_{L-1}) || r).
// Per-layer gains split the total using a batch-mixture estimate of each
// intermediate marginal, so they sum to the total exactly.
ObjectiveValue stacked_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                             const ObjectiveConfig& config, Rng& rng);

struct LayerGainEntry {
    std::size_t layer = 0;  // 1-based; the bottom layer is not reported
    double value = 0.0;
    double std_err = 0.0;
    bool recommended = false;  // value > 3 std_err
};

// Gains of layers 2..L over the whole dataset, evaluated in batches.
std::vector<LayerGainEntry> layer_gain_report(const HierarchicalModel& model, const Tensor& data,
                                              const ObjectiveConfig& config, Rng& rng, std::size_t batch_size = 256);

// ---------------------------------------------------------------------------
// Tabular model over discrete x and z, evaluated by exact enumeration.
struct TabularCorex {
    std::vector<std::size_t> x_cards;
    std::vector<double> px;                      // over joint x states
    std::vector<std::size_t> z_cards;
    std::vector<std::vector<double>> encoders;   // [j]: [x state x |z_j|]
    std::vector<std::vector<double>> decoders;   // [i]: [z state x |x_i|]
    std::vector<std::vector<double>> priors;     // [j]: |z_j|

    DiscreteJoint joint() const;
};

TabularCorex random_tabular_corex(std::vector<std::size_t> x_cards, std::vector<std::size_t> z_cards, Rng& rng);
// Decoders set to the true posteriors p(x_i | z) and priors to the true
// marginals p(z_j).
void make_tabular_tight(TabularCorex& model);
// Sum_i H(x_i) + Sum_i <ln q(x_i | z)> - Sum_j <KL(p(z_j | x) || r_j)>.
double tabular_corex_bound(const TabularCorex& model);
// Sum_i I(x_i : z) - Sum_j I(z_j : x) of the induced joint.
double tabular_corex_objective(const TabularCorex& model);

}  // namespace corex
