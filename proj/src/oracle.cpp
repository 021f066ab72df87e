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

#include "corex/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "corex/infotheory.hpp"
#include "corex/models.hpp"
#include "corex/objectives.hpp"

namespace corex {

std::vector<std::string> oracle_suite_names() { return {"discrete", "gaussian", "tabular", "elbo"}; }

namespace {

class Checker {
public:
    explicit Checker(SuiteResult& r) : r_(r) {}

    // Records |value| as a residual that must stay below tol.
    void residual(double value, double tol, const std::string& what) {
        const double a = std::abs(value);
        r_.max_residual = std::max(r_.max_residual, std::isfinite(a) ? a : HUGE_VAL);
        if (!(a < tol)) fail(what, value);
    }
    void at_least(double value, double bound, const std::string& what) {
        if (!(value >= bound)) fail(what, value);
    }

private:
    void fail(const std::string& what, double value) {
        r_.passed = false;
        if (r_.failures.size() < 20) {
            std::ostringstream os;
            os.precision(6);
            os << "case " << r_.cases << ": " << what << " (value " << value << ")";
            r_.failures.push_back(os.str());
        }
    }
    SuiteResult& r_;
};

std::vector<std::size_t> random_cards(Rng& rng, std::size_t count_lo, std::size_t count_hi, std::size_t card_hi) {
    const std::size_t count = count_lo + rng.below(count_hi - count_lo + 1);
    std::vector<std::size_t> c(count);
    for (auto& v : c) v = 2 + rng.below(card_hi - 1);
    return c;
}

std::vector<double> simplex(Rng& rng, std::size_t k) {
    std::vector<double> w(k);
    double s = 0.0;
    for (auto& v : w) s += (v = -std::log(rng.uniform_open()));
    for (auto& v : w) v /= s;
    return w;
}

std::size_t product(const std::vector<std::size_t>& c) {
    return std::accumulate(c.begin(), c.end(), std::size_t{1}, std::multiplies<>());
}

// p(z) * Prod_i p(x_i | z): every x_i depends on x only through z.
DiscreteJoint latent_factor_joint(Rng& rng, std::vector<std::size_t> xc, std::vector<std::size_t> zc) {
    DiscreteJoint j{xc, zc, {}};
    const std::size_t nx = product(xc), nz = product(zc);
    const auto pz = simplex(rng, nz);
    std::vector<std::vector<double>> cond;  // [i]: [z state x |x_i|]
    for (auto c : xc) {
        std::vector<double> t;
        for (std::size_t z = 0; z < nz; ++z) {
            auto w = simplex(rng, c);
            t.insert(t.end(), w.begin(), w.end());
        }
        cond.push_back(std::move(t));
    }
    j.table.assign(nx * nz, 0.0);
    for (std::size_t xs = 0; xs < nx; ++xs) {
        const auto xd = decode_state(xs, xc);
        for (std::size_t zs = 0; zs < nz; ++zs) {
            double p = pz[zs];
            for (std::size_t i = 0; i < xc.size(); ++i) p *= cond[i][zs * xc[i] + xd[i]];
            j.table[xs * nz + zs] = p;
        }
    }
    return j;
}

// Random p(x) with z an exact copy of a random non-empty subset of x.
DiscreteJoint subset_copy_joint(Rng& rng, std::vector<std::size_t> xc) {
    std::vector<std::size_t> subset;
    while (subset.empty())
        for (std::size_t i = 0; i < xc.size(); ++i)
            if (rng.uniform() < 0.5) subset.push_back(i);
    std::vector<std::size_t> zc;
    for (auto i : subset) zc.push_back(xc[i]);
    DiscreteJoint j{xc, zc, {}};
    const std::size_t nx = product(xc), nz = product(zc);
    const auto px = simplex(rng, nx);
    j.table.assign(nx * nz, 0.0);
    for (std::size_t xs = 0; xs < nx; ++xs) {
        const auto xd = decode_state(xs, xc);
        std::size_t zs = 0;
        for (std::size_t k = 0; k < subset.size(); ++k) zs = zs * zc[k] + xd[subset[k]];
        j.table[xs * nz + zs] = px[xs];
    }
    return j;
}

void check_joint(Checker& c, const DiscreteJoint& j, bool structured, bool inject) {
    const CorexTerms t = discrete_corex_objective(j);
    double mi_sum = 0.0;
    const auto xv = j.x_vars(), zv = j.z_vars();
    for (std::size_t i : xv) {
        const std::size_t a[] = {i};
        mi_sum += discrete_mutual_information(j, a, zv);
    }
    const double mi_all = discrete_mutual_information(j, xv, zv);
    const double decomposition = inject ? t.tc_xz + (mi_sum - mi_all) : t.tc_xz - (mi_sum - mi_all);
    c.residual(decomposition, 1e-10, "TC(x;z) != sum_i I(x_i;z) - I(x;z)");
    c.at_least(t.tc_x, -1e-12, "TC(x) < 0");
    c.at_least(t.tc_x_given_z, -1e-12, "TC(x|z) < 0");
    c.at_least(discrete_tc(j, VarGroup::z), -1e-12, "TC(z) < 0");
    c.at_least(t.tc_x - t.tc_xz, -1e-12, "TC(x;z) > TC(x)");
    if (structured) c.at_least(t.tc_xz, -1e-12, "TC(x;z) < 0 on a latent-structured joint");
}

void suite_discrete(SuiteResult& r, const OracleOptions& o) {
    Checker c(r);
    Rng rng(o.seed, 11);
    const std::size_t n = o.cases ? o.cases : 200;
    for (std::size_t k = 0; k < n; ++k, ++r.cases) {
        const auto xc = random_cards(rng, 2, 4, 3);
        const auto zc = random_cards(rng, 1, 2, 3);
        // Unrestricted joints: identities and the theorems that hold for any table.
        check_joint(c, random_discrete_joint(rng, xc, zc), false, o.inject_sign_fault);
        // Latent-structured joints, where informativeness is also non-negative.
        if (k % 2 == 0)
            check_joint(c, latent_factor_joint(rng, xc, zc), true, o.inject_sign_fault);
        else
            check_joint(c, subset_copy_joint(rng, xc), true, o.inject_sign_fault);
    }
}

GaussianJoint random_gaussian(Rng& rng, std::size_t d) {
    const std::size_t k = 1 + rng.below(d);
    std::vector<double> a(d * k);
    for (auto& v : a) v = rng.normal();
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += a[i * k + c] * a[j * k + c];
            cov[i * d + j] = s + (i == j ? 0.1 + rng.uniform() : 0.0);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) cov[i * d + j] = cov[j * d + i];
    return GaussianJoint::from_covariance(d, cov);
}

void suite_gaussian(SuiteResult& r, const OracleOptions& o) {
    Checker c(r);
    Rng rng(o.seed, 12);
    const std::size_t n = o.cases ? o.cases : 200;
    for (std::size_t k = 0; k < n; ++k, ++r.cases) {
        const std::size_t d = 2 + rng.below(5);
        const GaussianJoint g = random_gaussian(rng, d);
        const double tc = gaussian_tc(g);
        c.at_least(tc, -1e-12, "gaussian TC < 0");
        const auto h = gaussian_marginal_entropies(g);
        c.residual(tc - (std::accumulate(h.begin(), h.end(), 0.0) - gaussian_entropy(g)), 1e-10,
                   "gaussian TC != sum H(x_i) - H(x)");
        // Per-coordinate scaling leaves TC unchanged.
        std::vector<double> s(d);
        for (auto& v : s) v = std::exp(rng.uniform() * 4.0 - 2.0);
        GaussianJoint scaled = g;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) scaled.covariance[i * d + j] *= s[i] * s[j];
        c.residual(gaussian_tc(scaled) - tc, 1e-10, "gaussian TC not scale invariant");
        // Conditional TC of a block is non-negative and the split obeys the
        // chain rule H(a, b) = H(b) + H(a | b).
        const std::size_t split = 1 + rng.below(d - 1);
        std::vector<std::size_t> a(split), b(d - split);
        std::iota(a.begin(), a.end(), std::size_t{0});
        std::iota(b.begin(), b.end(), split);
        const GaussianJoint cond = gaussian_conditional(g, a, b);
        c.at_least(gaussian_tc(cond), -1e-12, "gaussian conditional TC < 0");
        c.residual(gaussian_entropy(g) - gaussian_entropy(gaussian_marginal(g, b)) - gaussian_entropy(cond), 1e-9,
                   "gaussian chain rule violated");
    }
}

void suite_tabular(SuiteResult& r, const OracleOptions& o) {
    Checker c(r);
    Rng rng(o.seed, 13);
    const std::size_t n = o.cases ? o.cases : 100;
    for (std::size_t k = 0; k < n; ++k, ++r.cases) {
        const std::size_t m = 1 + rng.below(2);
        TabularCorex t = random_tabular_corex({2, 2, 2}, std::vector<std::size_t>(m, 2), rng);
        const double exact = tabular_corex_objective(t);
        c.at_least(exact + 1e-9 - tabular_corex_bound(t), 0.0, "variational bound exceeds the exact objective");
        make_tabular_tight(t);
        c.residual(tabular_corex_bound(t) - exact, 1e-6, "tight bound differs from the exact objective");
    }
}

void suite_elbo(SuiteResult& r, const OracleOptions& o) {
    Checker c(r);
    Rng rng(o.seed, 14);
    const std::size_t n = o.cases ? o.cases : 50;
    for (std::size_t k = 0; k < n; ++k, ++r.cases) {
        const std::size_t d = 3 + rng.below(4), m = 1 + rng.below(3), b = 1 + rng.below(16);
        const auto lik = rng.uniform() < 0.5 ? Likelihood::bernoulli : Likelihood::gaussian;
        ModelSpec spec = make_model_spec(d, lik, {{LatentKind::continuous, m, {4 + rng.below(8)}, {4 + rng.below(8)},
                                                  rng.uniform() < 0.5 ? Activation::relu : Activation::tanh}});
        Rng init = rng.substream(k);
        HierarchicalModel model(spec, init);
        std::vector<double> x(b * d);
        for (auto& v : x) v = lik == Likelihood::bernoulli ? (rng.uniform() < 0.5 ? 1.0 : 0.0) : rng.normal();
        const Tensor batch = Tensor::matrix(b, d, std::move(x));
        ObjectiveConfig cfg;
        cfg.mc_samples = 1 + rng.below(4);
        std::vector<double> h(d);
        for (auto& v : h) v = rng.uniform() * std::log(2.0);
        cfg.entropy_offsets = h;
        Rng noise = rng.substream(1000 + k);
        Rng noise_copy = noise;
        const ObjectiveValue v = corex_bound(spec, model.params().tensors(), batch, cfg, noise);
        const double e = elbo(spec, model.params().tensors(), batch, cfg, noise_copy).item();
        c.residual(v.total.item() - v.entropy_offset - e, 1e-9, "bound - entropy offset != ELBO");
    }
}

}  // namespace

SuiteResult run_oracle_suite(const std::string& name, const OracleOptions& options) {
    SuiteResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    if (name == "discrete")
        suite_discrete(r, options);
    else if (name == "gaussian")
        suite_gaussian(r, options);
    else if (name == "tabular")
        suite_tabular(r, options);
    else if (name == "elbo")
        suite_elbo(r, options);
    else
        throw ConfigError("unknown oracle suite '" + name + "'");
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace corex
