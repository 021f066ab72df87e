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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <map>
#include <numeric>
#include <sstream>

#include "corex/error.hpp"
#include "corex/infotheory.hpp"
#include "corex/rng.hpp"

using namespace corex;

namespace {

const double kLn2 = std::log(2.0);

// Joint over bits (x..., z...) from a list of equiprobable outcomes.
DiscreteJoint from_outcomes(std::size_t nx, std::size_t nz, const std::vector<std::vector<int>>& outcomes) {
    DiscreteJoint j{std::vector<std::size_t>(nx, 2), std::vector<std::size_t>(nz, 2), {}};
    j.table.assign(std::size_t{1} << (nx + nz), 0.0);
    for (const auto& o : outcomes) {
        std::size_t s = 0;
        for (int b : o) s = s * 2 + static_cast<std::size_t>(b);
        j.table[s] += 1.0 / static_cast<double>(outcomes.size());
    }
    return j;
}

// Entropy of a variable subset by explicit marginalization, written
// independently of the library's enumeration.
double brute_entropy(const DiscreteJoint& j, const std::vector<std::size_t>& vars) {
    std::vector<std::size_t> cards = j.x_cardinalities;
    cards.insert(cards.end(), j.z_cardinalities.begin(), j.z_cardinalities.end());
    std::map<std::vector<std::size_t>, double> marg;
    for (std::size_t s = 0; s < j.table.size(); ++s) {
        std::vector<std::size_t> digits(cards.size());
        std::size_t rest = s;
        for (std::size_t k = cards.size(); k-- > 0;) {
            digits[k] = rest % cards[k];
            rest /= cards[k];
        }
        std::vector<std::size_t> key;
        for (auto v : vars) key.push_back(digits[v]);
        marg[key] += j.table[s];
    }
    double h = 0.0;
    for (const auto& [k, p] : marg)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace

TEST_CASE("discrete entropy matches explicit marginalization") {
    Rng rng(12);
    for (int rep = 0; rep < 30; ++rep) {
        const DiscreteJoint j = random_discrete_joint(rng, {2, 3, 2}, {3});
        for (const std::vector<std::size_t>& vars :
             {std::vector<std::size_t>{0}, {1, 3}, {0, 1, 2}, {0, 1, 2, 3}, {2, 3}}) {
            CHECK(discrete_entropy(j, vars) == doctest::Approx(brute_entropy(j, vars)).epsilon(1e-12));
        }
        // TC(x) from the oracle entropies.
        const double tc = brute_entropy(j, {0}) + brute_entropy(j, {1}) + brute_entropy(j, {2}) -
                          brute_entropy(j, {0, 1, 2});
        CHECK(discrete_tc(j, VarGroup::x) == doctest::Approx(tc).epsilon(1e-12));
    }
}

TEST_CASE("total correlation of bit patterns") {
    CHECK(std::abs(discrete_tc(from_outcomes(2, 1, {{0, 0, 0}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0}}), VarGroup::x)) < 1e-15);
    CHECK(discrete_tc(from_outcomes(2, 1, {{0, 0, 0}, {1, 1, 0}}), VarGroup::x) == doctest::Approx(kLn2));
    CHECK(discrete_tc(from_outcomes(3, 1, {{0, 0, 0, 0}, {1, 1, 1, 0}}), VarGroup::x) == doctest::Approx(2 * kLn2));
}

TEST_CASE("conditional total correlation") {
    // x deterministic given z
    CHECK(std::abs(discrete_conditional_tc(from_outcomes(2, 1, {{0, 0, 0}, {1, 1, 1}}))) < 1e-15);
    // z independent of x
    const auto ind = from_outcomes(2, 1, {{0, 0, 0}, {1, 1, 0}, {0, 0, 1}, {1, 1, 1}});
    CHECK(discrete_conditional_tc(ind) == doctest::Approx(discrete_tc(ind, VarGroup::x)));
    // xor triple
    const auto x = from_outcomes(2, 1, {{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
    CHECK(discrete_conditional_tc(x) == doctest::Approx(kLn2));
    // Synergy makes the informativeness negative.
    CHECK(discrete_corex_objective(x).tc_xz == doctest::Approx(-kLn2));
}

TEST_CASE("CorEx objective on copy, independent and redundant latents") {
    const auto copy = from_outcomes(2, 1, {{0, 0, 0}, {1, 1, 1}});
    const CorexTerms t = discrete_corex_objective(copy);
    CHECK(t.objective == doctest::Approx(kLn2));
    CHECK(t.tc_x == doctest::Approx(kLn2));
    CHECK(std::abs(t.tc_x_given_z) < 1e-15);
    CHECK(std::abs(t.tc_z) < 1e-15);

    const auto ind = from_outcomes(2, 2, {{0, 0, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {1, 1, 1, 1}});
    const CorexTerms u = discrete_corex_objective(ind);
    CHECK(std::abs(u.tc_xz) < 1e-14);
    CHECK(u.objective == doctest::Approx(-u.tc_z));
    CHECK(u.tc_z == doctest::Approx(kLn2));

    const auto redundant = from_outcomes(2, 2, {{0, 0, 0, 0}, {1, 1, 1, 1}, {1, 0, 1, 1}, {0, 1, 0, 0}});
    const CorexTerms r = discrete_corex_objective(redundant);
    CHECK(r.tc_z == doctest::Approx(kLn2));
}

TEST_CASE("mutual-information decomposition of informativeness") {
    Rng rng(21);
    for (int rep = 0; rep < 200; ++rep) {
        const DiscreteJoint j = random_discrete_joint(rng, {2, 2}, {2});
        CHECK(discrete_mi_decomposition_check(j) < 1e-10);
        const CorexTerms t = discrete_corex_objective(j);
        CHECK(t.tc_x >= -1e-12);
        CHECK(t.tc_x_given_z >= -1e-12);
        CHECK(t.tc_xz <= t.tc_x + 1e-12);
    }
    const auto copy = from_outcomes(2, 1, {{0, 0, 0}, {1, 1, 1}});
    const std::size_t x0[] = {0}, x1[] = {1}, xs[] = {0, 1}, z[] = {2};
    const double rhs = discrete_mutual_information(copy, x0, z) + discrete_mutual_information(copy, x1, z) -
                       discrete_mutual_information(copy, xs, z);
    CHECK(rhs == doctest::Approx(kLn2));
    CHECK(discrete_corex_objective(copy).tc_xz == doctest::Approx(kLn2));
}

TEST_CASE("factorized encoders satisfy the per-variable objective form") {
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<std::size_t> xc{2, 3}, zc{2, 2};
        std::vector<double> px(6);
        double s = 0.0;
        for (auto& v : px) s += (v = rng.uniform() + 0.01);
        for (auto& v : px) v /= s;
        std::vector<std::vector<double>> enc;
        for (auto c : zc) {
            std::vector<double> e;
            for (std::size_t xs = 0; xs < 6; ++xs) {
                std::vector<double> row(c);
                double t = 0.0;
                for (auto& v : row) t += (v = rng.uniform() + 0.01);
                for (auto& v : row) e.push_back(v / t);
            }
            enc.push_back(e);
        }
        const DiscreteJoint j = joint_from_factorized_encoder(xc, px, zc, enc);
        CHECK(factorized_objective_residual(j) < 1e-10);
    }
}

TEST_CASE("enumeration guard and validation") {
    DiscreteJoint big{std::vector<std::size_t>(21, 2), {}, {}};
    CHECK_THROWS(big.validate());
    DiscreteJoint bad{{2}, {2}, {0.5, 0.5, 0.5, -0.5}};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("Gaussian total correlation") {
    CHECK(gaussian_tc(GaussianJoint::from_covariance(3, {2, 0, 0, 0, 1, 0, 0, 0, 5})) == doctest::Approx(0.0));
    CHECK(gaussian_tc(GaussianJoint::from_covariance(2, {1, 0.5, 0.5, 1})) ==
          doctest::Approx(-0.5 * std::log(0.75)).epsilon(1e-14));
    CHECK(gaussian_tc(GaussianJoint::from_covariance(3, {1, .5, .5, .5, 1, .5, .5, .5, 1})) ==
          doctest::Approx(-0.5 * std::log(0.5)).epsilon(1e-14));
    CHECK(gaussian_tc(GaussianJoint::from_covariance(2, {2, 1, 1, 2})) ==
          doctest::Approx(0.5 * (2 * std::log(2.0) - std::log(3.0))).epsilon(1e-14));
    CHECK_THROWS_AS(GaussianJoint::from_covariance(2, {1, 2, 2, 1}).validate(), NotPositiveDefinite);
}

TEST_CASE("Gaussian conditioning against the 2x2 closed form") {
    // Var(x0 | x1) = s00 - s01^2 / s11
    const GaussianJoint g = GaussianJoint::from_covariance(3, {4, 1.2, 0.3, 1.2, 2, -0.4, 0.3, -0.4, 1});
    const std::size_t keep[] = {0}, given[] = {1};
    CHECK(gaussian_conditional(g, keep, given).cov(0, 0) == doctest::Approx(4.0 - 1.44 / 2.0).epsilon(1e-14));
    const std::size_t k2[] = {0, 2};
    const GaussianJoint m = gaussian_marginal(g, k2);
    CHECK(m.cov(0, 1) == 0.3);
    CHECK(gaussian_entropy(g) ==
          doctest::Approx(0.5 * (3 * std::log(2 * std::numbers::pi * std::numbers::e) + gaussian_log_det(g))));
}

TEST_CASE("aggregated-posterior mixtures") {
    Rng rng(7);
    const Tensor mu = Tensor::matrix(1, 1, {0.4}), lv = Tensor::matrix(1, 1, {std::log(0.3)});
    const GaussianMixture1D one = fit_aggregated_marginal(mu, lv, 0, 0, rng);
    CHECK(one.size() == 1);
    CHECK(one.mean() == 0.4);
    CHECK(one.variance() == doctest::Approx(0.3).epsilon(1e-14));

    std::vector<double> m(200), v(200);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = rng.normal() * 1.5 + 0.2;
        v[i] = std::log(0.05 + rng.uniform());
    }
    const GaussianMixture1D mix =
        fit_aggregated_marginal(Tensor::matrix(200, 1, m), Tensor::matrix(200, 1, v), 0, 0, rng);
    double mean_var = 0.0, mean_mu = 0.0, var_mu = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        mean_var += std::exp(v[i]) / 200.0;
        mean_mu += m[i] / 200.0;
    }
    for (std::size_t i = 0; i < 200; ++i) var_mu += (m[i] - mean_mu) * (m[i] - mean_mu) / 200.0;
    CHECK(mix.variance() == doctest::Approx(mean_var + var_mu).epsilon(1e-12));
    double s = 0.0, ss = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = mix.sample(rng);
        s += z;
        ss += z * z;
    }
    const double emp = ss / n - (s / n) * (s / n);
    CHECK(std::abs(emp / mix.variance() - 1.0) < 0.02);

    double integral = 0.0;
    const int steps = 20000;
    const double h = 20.0 / steps;
    for (int i = 0; i <= steps; ++i) {
        const double z = -10.0 + h * i;
        integral += (i == 0 || i == steps ? 0.5 : 1.0) * mix.density(z);
    }
    CHECK(std::abs(integral * h - 1.0) < 1e-3);
    CHECK(mix.log_density(0.3) == doctest::Approx(std::log(mix.density(0.3))).epsilon(1e-12));
}

TEST_CASE("latent mutual information estimates") {
    Rng rng(17);
    MISampling mc{0, 256};

    // Constant posterior: zero information.
    {
        const Tensor mu = Tensor::full({100, 1}, 0.3), lv = Tensor::full({100, 1}, -0.5);
        Rng pick(1);
        const GaussianMixture1D mix = fit_aggregated_marginal(mu, lv, 0, 0, pick);
        const MIEntry e = estimate_mi_latent(mu, lv, 0, LatentReference{&mix}, mc, rng);
        CHECK(std::abs(e.value) <= 3.0 * e.std_err + 1e-12);
    }

    // Two separated posteriors N(+-1, 0.01): quadrature of H(z) - H(z | x).
    std::vector<double> m(200);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = i % 2 == 0 ? 1.0 : -1.0;
    const Tensor mu = Tensor::matrix(200, 1, m), lv = Tensor::full({200, 1}, std::log(0.01));
    Rng pick(2);
    const GaussianMixture1D mix = fit_aggregated_marginal(mu, lv, 0, 0, pick);
    CHECK(mix.variance() == doctest::Approx(1.01).epsilon(1e-12));
    double hz = 0.0;
    const int steps = 200000;
    const double h = 8.0 / steps;
    for (int i = 0; i <= steps; ++i) {
        const double z = -4.0 + h * i;
        const double p = 0.5 * (std::exp(-0.5 * (z - 1) * (z - 1) / 0.01) + std::exp(-0.5 * (z + 1) * (z + 1) / 0.01)) /
                         std::sqrt(2 * std::numbers::pi * 0.01);
        if (p > 0.0) hz -= (i == 0 || i == steps ? 0.5 : 1.0) * p * std::log(p) * h;
    }
    const double oracle = hz - 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * 0.01);
    const MIEntry e = estimate_mi_latent(mu, lv, 0, LatentReference{&mix}, mc, rng);
    CHECK(std::abs(e.value - oracle) <= 3.0 * e.std_err + 1e-9);
    CHECK(e.estimator == Estimator::mc_mixture);

    // The standard-normal reference gives an upper bound on the mixture estimate.
    double kl = 0.0;
    for (std::size_t i = 0; i < 200; ++i) kl += 0.5 * (1.0 + 0.01 - 1.0 - std::log(0.01)) / 200.0;
    CHECK(e.value <= kl + 3.0 * e.std_err);
    const MIEntry s = estimate_mi_latent(mu, lv, 0, LatentReference{}, mc, rng);
    CHECK(s.estimator == Estimator::mc_standard);
    CHECK(std::abs(s.value - kl) <= 3.0 * s.std_err + 1e-9);
}

TEST_CASE("input-side mutual information lower bound") {
    const std::vector<double> perfect(64, 0.0);
    CHECK(estimate_mi_input(0, perfect, kLn2).value == doctest::Approx(kLn2));
    const std::vector<double> uniform(64, -kLn2);
    CHECK(std::abs(estimate_mi_input(0, uniform, kLn2).value) < 1e-15);
    CHECK(estimate_mi_input(0, uniform, std::nullopt).relative);
}

TEST_CASE("MI report ordering and CSV") {
    MIReport r;
    r.entries = {{0, Estimator::mc_mixture, 0.1, 0.01, 10, false},
                 {1, Estimator::mc_mixture, 0.5, 0.01, 10, false},
                 {2, Estimator::mc_mixture, 0.1, 0.01, 10, false}};
    const MIReport s = r.sorted_descending();
    CHECK(s.entries[0].dim == 1);
    CHECK(s.entries[1].dim == 0);
    CHECK(s.entries[2].dim == 2);
    std::ostringstream os;
    s.write_csv(os);
    CHECK(os.str().rfind("dim,estimator,value_nats,std_err,samples\n", 0) == 0);
}
