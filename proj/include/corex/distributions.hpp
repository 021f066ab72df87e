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

#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kLogitBound = 15.0;

// Diagonal Gaussian over the columns of [batch x m] parameters. log_var is
// clamped into [kLogVarMin, kLogVarMax] at construction.
struct DiagGaussian {
    Tensor mean;
    Tensor log_var;

    DiagGaussian(Tensor mean_, Tensor log_var_);

    std::size_t rows() const { return mean.rows(); }
    std::size_t width() const { return mean.cols(); }
    Tensor variance() const { return exp(log_var); }
    Tensor stddev() const { return exp(0.5 * log_var); }
};

// Factorized Bernoulli; logits are clamped into [-kLogitBound, kLogitBound].
struct BernoulliVec {
    Tensor logits;

    explicit BernoulliVec(Tensor logits_);
    Tensor probs() const { return sigmoid(logits); }
};

struct CategoricalDist {
    Tensor logits;  // [batch x K]
};

struct CategoricalPosterior {
    Tensor probs;      // [batch x K], rows sum to one
    Tensor log_probs;  // [batch x K]
    Tensor entropy;    // [batch]
};

// KL(q || N(0, I)) per dimension: 0.5 (mu^2 + sigma^2 - 1 - ln sigma^2).
Tensor gauss_kl_std(const DiagGaussian& q);

// KL(q || r) per dimension for diagonal Gaussians of equal width. r may have a
// single row, which is broadcast across q's batch.
Tensor gauss_kl_general(const DiagGaussian& q, const DiagGaussian& r);

// Draws [n x batch x m] samples mu + sigma * eps with gradient flowing to the
// parameters.
Tensor reparam_sample(const DiagGaussian& q, Rng& rng, std::size_t n_samples);
// Same with caller-provided noise of shape [n x batch x m] (or [batch x m]).
Tensor reparam_with_noise(const DiagGaussian& q, const Tensor& eps);

// x ln s(l) + (1 - x) ln(1 - s(l)) = -softplus(-l) - (1 - x) l, per element.
Tensor bernoulli_log_prob(const BernoulliVec& p, const Tensor& x);

// -0.5 (ln 2 pi + ln sigma^2 + (x - mu)^2 / sigma^2), per element.
Tensor gauss_log_prob(const DiagGaussian& q, const Tensor& x);

// Differential entropy per dimension: 0.5 (ln 2 pi e + ln sigma^2).
Tensor gauss_entropy(const DiagGaussian& q);

CategoricalPosterior categorical_posterior(const CategoricalDist& c);

}  // namespace corex
