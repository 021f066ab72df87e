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

#include "corex/distributions.hpp"

#include <cmath>
#include <numbers>

namespace corex {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

DiagGaussian::DiagGaussian(Tensor mean_, Tensor log_var_)
    : mean(std::move(mean_)), log_var(clamp(log_var_, kLogVarMin, kLogVarMax)) {
    if (mean.shape() != log_var.shape()) {
        throw ShapeError("DiagGaussian: mean " + shape_str(mean.shape()) + " vs log_var " +
                         shape_str(log_var.shape()));
    }
}

BernoulliVec::BernoulliVec(Tensor logits_) : logits(clamp(logits_, -kLogitBound, kLogitBound)) {}

Tensor gauss_kl_std(const DiagGaussian& q) {
    return 0.5 * (square(q.mean) + exp(q.log_var) - 1.0 - q.log_var);
}

Tensor gauss_kl_general(const DiagGaussian& q, const DiagGaussian& r) {
    if (q.mean.rank() != 2 || r.mean.rank() != 2 || q.width() != r.width()) {
        throw ShapeError("gauss_kl_general: width mismatch " + shape_str(q.mean.shape()) + " vs " +
                         shape_str(r.mean.shape()));
    }
    if (r.rows() != q.rows() && r.rows() != 1) {
        throw ShapeError("gauss_kl_general: batch mismatch " + shape_str(q.mean.shape()) + " vs " +
                         shape_str(r.mean.shape()));
    }
    // 0.5 (ln s_r - ln s_q + (s_q + (mu_q - mu_r)^2) / s_r - 1)
    const Tensor ratio = (exp(q.log_var) + square(q.mean - r.mean)) / exp(r.log_var);
    return 0.5 * ((r.log_var - q.log_var) + ratio - 1.0);
}

Tensor reparam_with_noise(const DiagGaussian& q, const Tensor& eps) {
    return q.mean + q.stddev() * eps;
}

Tensor reparam_sample(const DiagGaussian& q, Rng& rng, std::size_t n_samples) {
    const Tensor eps = standard_normal(rng, {n_samples, q.rows(), q.width()});
    return reparam_with_noise(q, eps);
}

Tensor bernoulli_log_prob(const BernoulliVec& p, const Tensor& x) {
    if (x.shape() != p.logits.shape()) {
        throw ShapeError("bernoulli_log_prob: x " + shape_str(x.shape()) + " vs logits " +
                         shape_str(p.logits.shape()));
    }
    for (double v : x.values()) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("bernoulli_log_prob: x must be binary");
    }
    return -softplus(-p.logits) - (1.0 - x) * p.logits;
}

Tensor gauss_log_prob(const DiagGaussian& q, const Tensor& x) {
    if (x.rank() != 2 || (x.cols() != q.width())) {
        throw ShapeError("gauss_log_prob: x " + shape_str(x.shape()) + " vs mean " + shape_str(q.mean.shape()));
    }
    return -0.5 * (kLog2Pi + q.log_var + square(x - q.mean) / exp(q.log_var));
}

Tensor gauss_entropy(const DiagGaussian& q) { return 0.5 * (kLog2Pi + 1.0 + q.log_var); }

CategoricalPosterior categorical_posterior(const CategoricalDist& c) {
    const std::size_t n = c.logits.rows();
    const std::size_t k = c.logits.cols();
    const Tensor lse = reshape(log_sum_exp(c.logits, 1), {n, 1});
    // Subtract the per-row normalizer: broadcast by tiling the column.
    std::vector<Tensor> cols(k, lse);
    const Tensor log_probs = c.logits - concat_cols(cols);
    const Tensor probs = exp(log_probs);
    const Tensor entropy = -sum(probs * log_probs, 1);
    return {probs, log_probs, entropy};
}

}  // namespace corex
