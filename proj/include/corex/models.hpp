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
#include <string>
#include <vector>

#include "corex/distributions.hpp"
#include "corex/nn.hpp"
#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

enum class LatentKind { continuous, categorical };
enum class Likelihood { bernoulli, gaussian };
enum class TopPrior { standard_normal, uniform_categorical };

std::string to_string(LatentKind k);
std::string to_string(Likelihood l);
LatentKind latent_kind_from_string(std::string_view s);
Likelihood likelihood_from_string(std::string_view s);

// One stochastic layer z^(l). The encoder maps the layer below (x or
// z^(l-1)) to this layer's posterior: heads {mean, log_var} for continuous
// layers, {logits} for categorical ones. The decoder maps this layer's value
// (one-hot for categorical) to the parameters of the layer below.
struct LayerSpec {
    LatentKind kind = LatentKind::continuous;
    std::size_t width = 0;
    MlpSpec encoder;
    MlpSpec decoder;
};

struct ModelSpec {
    static constexpr std::size_t kMaxCategories = 64;

    std::size_t input_dim = 0;
    Likelihood likelihood = Likelihood::bernoulli;
    // Gaussian likelihood only: a fixed ln sigma^2 for every x dimension.
    // When absent the per-dimension log-variance is a learned parameter.
    std::optional<double> fixed_x_log_var;
    std::vector<LayerSpec> layers;  // bottom (z^(1)) first

    std::size_t num_layers() const { return layers.size(); }
    const LayerSpec& top() const { return layers.back(); }
    TopPrior top_prior() const;
    // Width of the variable directly below layer l (x for l == 0).
    std::size_t below_width(std::size_t l) const { return l == 0 ? input_dim : layers[l - 1].width; }
    void validate() const;

    std::string to_json() const;
    static ModelSpec from_json(std::string_view text);
};

// Convenience description of a layer for make_model_spec.
struct LayerConfig {
    LatentKind kind = LatentKind::continuous;
    std::size_t width = 0;
    std::vector<std::size_t> encoder_hidden;
    std::vector<std::size_t> decoder_hidden;
    Activation activation = Activation::relu;
};

ModelSpec make_model_spec(std::size_t input_dim, Likelihood likelihood, const std::vector<LayerConfig>& layers);

std::string encoder_id(std::size_t layer);
std::string decoder_id(std::size_t layer);
inline const std::string kLikelihoodLogVarKey = "lik/x_log_var";

// Spec plus parameters. Forward computations take the spec and a ParamMap so
// the same code runs on stored values or on tape leaves.
class HierarchicalModel {
public:
    HierarchicalModel(ModelSpec spec, Rng& init_rng);
    HierarchicalModel(ModelSpec spec, ParameterStore params);

    const ModelSpec& spec() const noexcept { return spec_; }
    ParameterStore& params() noexcept { return params_; }
    const ParameterStore& params() const noexcept { return params_; }

    // CRC-32 over parameter keys and values; identifies a parameter snapshot.
    std::uint32_t fingerprint() const;

    // Checkpoint whose header is the architecture JSON.
    void save(const std::filesystem::path& path) const;
    static HierarchicalModel load(const std::filesystem::path& path);

private:
    ModelSpec spec_;
    ParameterStore params_;
};

// Copy of `base` with one more layer on top. The new layer's output weights
// start at zero, so its posterior is N(0, I) and its decoder reproduces the
// standard prior of the layer below.
HierarchicalModel extend_model(const HierarchicalModel& base, const LayerConfig& layer, Rng& init_rng);

// Likelihood parameters for x.
struct XLikelihood {
    Likelihood kind = Likelihood::bernoulli;
    std::optional<BernoulliVec> bernoulli;
    std::optional<DiagGaussian> gaussian;

    // Per-element log q(x_i | z).
    Tensor log_prob(const Tensor& x) const;
    // Probabilities (Bernoulli) or means (Gaussian).
    Tensor mean() const;
};

struct LayerState {
    LatentKind kind = LatentKind::continuous;
    Tensor input;                          // rows fed to this layer's encoder
    std::optional<DiagGaussian> posterior; // continuous layers
    Tensor logits;                         // categorical layers
    Tensor sample;                         // continuous layers: one draw per input row
};

// Encoder pass. Layer 0 draws `mc` samples per example and the result has
// mc * batch rows, ordered sample-major (row s * batch + b); every higher
// layer draws one sample per row of the layer below. With use_mean the
// posterior means are propagated instead of samples.
struct EncodePath {
    std::size_t batch = 0;
    std::size_t mc = 1;
    std::vector<LayerState> layers;
};

EncodePath encode(const ModelSpec& spec, const ParamMap& params, const Tensor& x, Rng& rng, std::size_t mc = 1,
                  bool use_mean = false);

// Decoder of layer 0: q(x | z^(1)).
XLikelihood decode_x(const ModelSpec& spec, const ParamMap& params, const Tensor& z1);
// Decoder of layer l >= 1: q(z^(l) | z^(l+1)) in 0-based indexing, i.e. the
// Gaussian over layer l-1's latent given layer l's value.
DiagGaussian decode_latent(const ModelSpec& spec, const ParamMap& params, std::size_t layer, const Tensor& value);

// Runs the decoder chain from a value of layer `from` down to x. Intermediate
// layers use conditional means unless rng is given, in which case they are
// sampled.
XLikelihood decode(const ModelSpec& spec, const ParamMap& params, std::size_t from, const Tensor& value,
                   Rng* rng = nullptr);

// Exact expectation over a categorical layer. `layer` must be categorical and
// `lower` is the value of the variable below (x or z^(layer-1)), one row per
// logits row.
struct MarginalizedTerms {
    Tensor probs;              // [rows x K]
    Tensor branch_log_lik;     // [rows x K]: ln q(lower | one-hot k), summed over dims
    Tensor expected_log_lik;   // [rows]: sum_k p_k * branch_log_lik
    Tensor expected_log_lik_dims;  // [rows x width below], the same per dimension
    Tensor kl_uniform;         // [rows]: KL(Cat(p) || Uniform(K))
};

MarginalizedTerms decode_marginalized(const ModelSpec& spec, const ParamMap& params, std::size_t layer,
                                      const Tensor& logits, const Tensor& lower);

Tensor one_hot(std::size_t rows, std::size_t k, std::size_t hot);

// Argmax of the top-layer posterior logits along the mean path; ties go to the
// lowest index.
std::vector<std::size_t> cluster_assign(const HierarchicalModel& model, const Tensor& x);

// Best one-to-one mapping of clusters to labels (Hungarian assignment on the
// contingency table) and the resulting accuracy.
double mapped_cluster_accuracy(std::span<const std::size_t> clusters, std::span<const std::int64_t> labels);

}  // namespace corex
