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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corex/rng.hpp"
#include "corex/tensor.hpp"

// Information quantities are in nats throughout.

namespace corex {

// ---------------------------------------------------------------------------
// Exact discrete oracles

// Probability table over (x_1..x_d, z_1..z_m), row-major with the last
// variable fastest. Combined variable index k < d refers to x_k, k >= d to
// z_{k-d}.
struct DiscreteJoint {
    static constexpr std::size_t kMaxStates = std::size_t{1} << 20;

    std::vector<std::size_t> x_cardinalities;
    std::vector<std::size_t> z_cardinalities;
    std::vector<double> table;

    std::size_t num_x() const { return x_cardinalities.size(); }
    std::size_t num_z() const { return z_cardinalities.size(); }
    std::size_t num_vars() const { return num_x() + num_z(); }
    std::size_t num_states() const;
    std::vector<std::size_t> x_vars() const;
    std::vector<std::size_t> z_vars() const;

    // Throws on the enumeration guard, negative entries, or a total mass away
    // from one by more than 1e-12.
    void validate() const;
};

enum class VarGroup { x, z };

// Joint entropy of a subset of variables (combined indexing).
double discrete_entropy(const DiscreteJoint& j, std::span<const std::size_t> vars);
// I(A : B) = H(A) + H(B) - H(A, B).
double discrete_mutual_information(const DiscreteJoint& j, std::span<const std::size_t> a,
                                   std::span<const std::size_t> b);

// Sum_i H(v_i) - H(v) over the chosen group.
double discrete_tc(const DiscreteJoint& j, VarGroup over);
// TC(x | z) = Sum_i H(x_i | z) - H(x | z).
double discrete_conditional_tc(const DiscreteJoint& j);

struct CorexTerms {
    double tc_x = 0.0;
    double tc_x_given_z = 0.0;
    double tc_xz = 0.0;      // informativeness TC(x; z) = TC(x) - TC(x|z)
    double tc_z = 0.0;
    double objective = 0.0;  // TC(x; z) - TC(z)
};

CorexTerms discrete_corex_objective(const DiscreteJoint& j);

// |TC(x;z) - (Sum_i I(x_i; z) - I(x; z))|; an algebraic identity, so this is
// rounding noise on every valid joint.
double discrete_mi_decomposition_check(const DiscreteJoint& j);

// |[TC(x;z) - TC(z)] - [Sum_i I(x_i; z) - Sum_i I(z_i; x)]|; zero when
// p(z|x) factorizes over the z_i.
double factorized_objective_residual(const DiscreteJoint& j);

// Random table with Dirichlet(1) weights.
DiscreteJoint random_discrete_joint(Rng& rng, std::vector<std::size_t> x_cards, std::vector<std::size_t> z_cards);

// p(x) * Prod_i p(z_i | x). encoders[i] is row-major [x state x |z_i|].
DiscreteJoint joint_from_factorized_encoder(std::vector<std::size_t> x_cards, std::span<const double> px,
                                            std::vector<std::size_t> z_cards,
                                            const std::vector<std::vector<double>>& encoders);

// Index helpers over a mixed-radix state space (last digit fastest).
std::vector<std::size_t> decode_state(std::size_t state, std::span<const std::size_t> cards);

// ---------------------------------------------------------------------------
// Gaussian oracles

class NotPositiveDefinite : public NumericError {
public:
    using NumericError::NumericError;
};

struct GaussianJoint {
    std::size_t dim = 0;
    std::vector<double> covariance;  // row-major dim x dim
    std::vector<double> mean;        // may be empty (zero mean)

    static GaussianJoint from_covariance(std::size_t dim, std::vector<double> cov);
    double cov(std::size_t i, std::size_t j) const { return covariance[i * dim + j]; }
    // Symmetry within 1e-12 and a successful Cholesky factorization.
    void validate() const;
};

double gaussian_log_det(const GaussianJoint& g);
// 0.5 (Sum_i ln S_ii - ln det S).
double gaussian_tc(const GaussianJoint& g);
// Differential entropy 0.5 ln((2 pi e)^d det S).
double gaussian_entropy(const GaussianJoint& g);
// Marginal differential entropies 0.5 ln(2 pi e S_ii).
std::vector<double> gaussian_marginal_entropies(const GaussianJoint& g);
// Covariance of the block `keep` given the block `given` (Schur complement).
GaussianJoint gaussian_conditional(const GaussianJoint& g, std::span<const std::size_t> keep,
                                   std::span<const std::size_t> given);
GaussianJoint gaussian_marginal(const GaussianJoint& g, std::span<const std::size_t> keep);

// ---------------------------------------------------------------------------
// Aggregated posterior marginals

// Equal-weight mixture of one-dimensional Gaussians.
class GaussianMixture1D {
public:
    GaussianMixture1D(std::vector<double> means, std::vector<double> variances);

    std::size_t size() const { return means_.size(); }
    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& variances() const { return variances_; }

    double mean() const;
    // Mean of component variances plus variance of component means.
    double variance() const;
    double log_density(double z) const;
    double density(double z) const;
    double sample(Rng& rng) const;

private:
    std::vector<double> means_;
    std::vector<double> variances_;
    std::vector<double> inv_var_;
    std::vector<double> log_norm_;
};

// Mixture of the per-example posteriors N(mean[j, dim], exp(log_var[j, dim]))
// over a random subsample of `subsample` rows (all rows when subsample is 0
// or at least the row count).
GaussianMixture1D fit_aggregated_marginal(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                                          std::size_t subsample, Rng& rng);

// ---------------------------------------------------------------------------
// Estimates

enum class Estimator { exact, mc_mixture, mc_standard, bound };

std::string to_string(Estimator e);

struct MIEntry {
    std::size_t dim = 0;
    Estimator estimator = Estimator::exact;
    double value = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
    // True when the entropy term was unavailable and the value is only
    // defined up to an additive constant.
    bool relative = false;
};

struct MIReport {
    std::vector<MIEntry> entries;

    // Entries ordered by value, largest first; ties keep dimension order.
    MIReport sorted_descending() const;
    // Header "dim,estimator,value_nats,std_err,samples".
    void write_csv(std::ostream& os) const;
};

struct MISampling {
    std::size_t outer_points = 256;  // data points averaged over (0 = all)
    std::size_t inner_draws = 256;   // posterior draws per data point
};

// Reference density for the KL upper bound on I(x : z_i): a fitted mixture,
// or the standard normal when `mixture` is null.
struct LatentReference {
    const GaussianMixture1D* mixture = nullptr;
    double log_density(double z) const;
};

// E_x KL(p(z_i | x) || reference), each inner KL by Monte Carlo from the
// posterior. With the fitted aggregated marginal this estimates I(x : z_i).
MIEntry estimate_mi_latent(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                           const LatentReference& reference, const MISampling& mc, Rng& rng);

// Paired comparison of the bound under two references with shared draws.
struct ReferenceComparison {
    MIEntry first;
    MIEntry second;
    double diff = 0.0;  // first - second
    double diff_std_err = 0.0;
};

ReferenceComparison compare_latent_references(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                                              const LatentReference& first, const LatentReference& second,
                                              const MISampling& mc, Rng& rng);

// Lower bound H(x_i) + <ln q(x_i | z)> from per-sample decoder log-likelihoods.
// Without an entropy the value is reported relative (constant omitted).
MIEntry estimate_mi_input(std::size_t dim, std::span<const double> log_lik_samples, std::optional<double> entropy);

// Plug-in entropy of a Bernoulli with the given mean.
double bernoulli_entropy(double p);

}  // namespace corex
