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

#include "corex/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace corex {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<std::size_t> all_cards(const DiscreteJoint& j) {
    std::vector<std::size_t> cards = j.x_cardinalities;
    cards.insert(cards.end(), j.z_cardinalities.begin(), j.z_cardinalities.end());
    return cards;
}

double entropy_of(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

std::vector<std::size_t> concat(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<std::size_t> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Eigen::MatrixXd to_eigen(const GaussianJoint& g) {
    Eigen::MatrixXd m(g.dim, g.dim);
    for (std::size_t i = 0; i < g.dim; ++i)
        for (std::size_t k = 0; k < g.dim; ++k) m(i, k) = g.cov(i, k);
    return m;
}

GaussianJoint from_eigen(const Eigen::MatrixXd& m) {
    GaussianJoint g;
    g.dim = static_cast<std::size_t>(m.rows());
    g.covariance.resize(g.dim * g.dim);
    for (std::size_t i = 0; i < g.dim; ++i)
        for (std::size_t k = 0; k < g.dim; ++k) g.covariance[i * g.dim + k] = m(i, k);
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t DiscreteJoint::num_states() const {
    std::size_t n = 1;
    for (std::size_t c : all_cards(*this)) {
        if (c == 0) return 0;
        if (n > kMaxStates / c + 1) return kMaxStates + 1;
        n *= c;
    }
    return n;
}

std::vector<std::size_t> DiscreteJoint::x_vars() const {
    std::vector<std::size_t> v(num_x());
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::vector<std::size_t> DiscreteJoint::z_vars() const {
    std::vector<std::size_t> v(num_z());
    std::iota(v.begin(), v.end(), num_x());
    return v;
}

void DiscreteJoint::validate() const {
    const std::size_t n = num_states();
    if (n > kMaxStates) {
        throw std::invalid_argument("discrete joint exceeds the enumeration guard of 2^20 states");
    }
    if (n == 0) throw std::invalid_argument("discrete joint has a zero cardinality");
    if (table.size() != n) {
        throw std::invalid_argument("discrete joint table has " + std::to_string(table.size()) + " entries, expected " +
                                    std::to_string(n));
    }
    double total = 0.0;
    for (double p : table) {
        if (!(p >= 0.0)) throw std::invalid_argument("discrete joint has a negative or NaN entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete joint does not sum to one");
}

std::vector<std::size_t> decode_state(std::size_t state, std::span<const std::size_t> cards) {
    std::vector<std::size_t> digits(cards.size());
    for (std::size_t k = cards.size(); k-- > 0;) {
        digits[k] = state % cards[k];
        state /= cards[k];
    }
    return digits;
}

double discrete_entropy(const DiscreteJoint& j, std::span<const std::size_t> vars) {
    j.validate();
    if (vars.empty()) return 0.0;
    const auto cards = all_cards(j);
    std::vector<std::size_t> stride(cards.size(), 1);
    for (std::size_t k = cards.size() - 1; k-- > 0;) stride[k] = stride[k + 1] * cards[k + 1];
    std::size_t sub = 1;
    for (std::size_t v : vars) {
        if (v >= cards.size()) throw std::out_of_range("variable index out of range");
        sub *= cards[v];
    }
    std::vector<double> marg(sub, 0.0);
    for (std::size_t s = 0; s < j.table.size(); ++s) {
        const double p = j.table[s];
        if (p == 0.0) continue;
        std::size_t idx = 0;
        for (std::size_t v : vars) idx = idx * cards[v] + (s / stride[v]) % cards[v];
        marg[idx] += p;
    }
    return entropy_of(marg);
}

double discrete_mutual_information(const DiscreteJoint& j, std::span<const std::size_t> a,
                                   std::span<const std::size_t> b) {
    const auto ab = concat(a, b);
    return discrete_entropy(j, a) + discrete_entropy(j, b) - discrete_entropy(j, ab);
}

double discrete_tc(const DiscreteJoint& j, VarGroup over) {
    const auto vars = over == VarGroup::x ? j.x_vars() : j.z_vars();
    double s = 0.0;
    for (std::size_t v : vars) s += discrete_entropy(j, std::span<const std::size_t>(&v, 1));
    return s - discrete_entropy(j, vars);
}

double discrete_conditional_tc(const DiscreteJoint& j) {
    const auto xs = j.x_vars();
    const auto zs = j.z_vars();
    const double hz = discrete_entropy(j, zs);
    double s = 0.0;
    for (std::size_t v : xs) {
        std::vector<std::size_t> vz{v};
        vz.insert(vz.end(), zs.begin(), zs.end());
        s += discrete_entropy(j, vz) - hz;
    }
    const double hx_given_z = discrete_entropy(j, concat(xs, zs)) - hz;
    return s - hx_given_z;
}

CorexTerms discrete_corex_objective(const DiscreteJoint& j) {
    CorexTerms t;
    t.tc_x = discrete_tc(j, VarGroup::x);
    t.tc_x_given_z = discrete_conditional_tc(j);
    t.tc_xz = t.tc_x - t.tc_x_given_z;
    t.tc_z = discrete_tc(j, VarGroup::z);
    t.objective = t.tc_xz - t.tc_z;
    return t;
}

double discrete_mi_decomposition_check(const DiscreteJoint& j) {
    const auto xs = j.x_vars();
    const auto zs = j.z_vars();
    const double tc_xz = discrete_tc(j, VarGroup::x) - discrete_conditional_tc(j);
    double sum_i = 0.0;
    for (std::size_t v : xs) sum_i += discrete_mutual_information(j, std::span<const std::size_t>(&v, 1), zs);
    return std::abs(tc_xz - (sum_i - discrete_mutual_information(j, xs, zs)));
}

double factorized_objective_residual(const DiscreteJoint& j) {
    const auto xs = j.x_vars();
    const auto zs = j.z_vars();
    const double objective = discrete_corex_objective(j).objective;
    double relevance = 0.0;
    for (std::size_t v : xs) relevance += discrete_mutual_information(j, std::span<const std::size_t>(&v, 1), zs);
    double compression = 0.0;
    for (std::size_t v : zs) compression += discrete_mutual_information(j, std::span<const std::size_t>(&v, 1), xs);
    return std::abs(objective - (relevance - compression));
}

DiscreteJoint random_discrete_joint(Rng& rng, std::vector<std::size_t> x_cards, std::vector<std::size_t> z_cards) {
    DiscreteJoint j{std::move(x_cards), std::move(z_cards), {}};
    const std::size_t n = j.num_states();
    if (n > DiscreteJoint::kMaxStates) throw std::invalid_argument("random_discrete_joint: too many states");
    j.table.resize(n);
    double total = 0.0;
    for (double& p : j.table) {
        p = -std::log(rng.uniform_open());
        total += p;
    }
    for (double& p : j.table) p /= total;
    return j;
}

DiscreteJoint joint_from_factorized_encoder(std::vector<std::size_t> x_cards, std::span<const double> px,
                                            std::vector<std::size_t> z_cards,
                                            const std::vector<std::vector<double>>& encoders) {
    DiscreteJoint j{std::move(x_cards), std::move(z_cards), {}};
    std::size_t nx = 1;
    for (std::size_t c : j.x_cardinalities) nx *= c;
    std::size_t nz = 1;
    for (std::size_t c : j.z_cardinalities) nz *= c;
    if (px.size() != nx) throw std::invalid_argument("p(x) table has the wrong size");
    if (encoders.size() != j.num_z()) throw std::invalid_argument("need one encoder table per latent");
    for (std::size_t i = 0; i < encoders.size(); ++i) {
        if (encoders[i].size() != nx * j.z_cardinalities[i]) throw std::invalid_argument("encoder table size");
    }
    j.table.assign(nx * nz, 0.0);
    for (std::size_t xs = 0; xs < nx; ++xs) {
        for (std::size_t zs = 0; zs < nz; ++zs) {
            const auto zd = decode_state(zs, j.z_cardinalities);
            double p = px[xs];
            for (std::size_t i = 0; i < zd.size(); ++i) p *= encoders[i][xs * j.z_cardinalities[i] + zd[i]];
            j.table[xs * nz + zs] = p;
        }
    }
    double total = std::accumulate(j.table.begin(), j.table.end(), 0.0);
    for (double& p : j.table) p /= total;
    return j;
}

// ---------------------------------------------------------------------------

GaussianJoint GaussianJoint::from_covariance(std::size_t dim, std::vector<double> cov) {
    if (cov.size() != dim * dim) throw ShapeError("covariance must have dim*dim entries");
    GaussianJoint g;
    g.dim = dim;
    g.covariance = std::move(cov);
    return g;
}

void GaussianJoint::validate() const {
    if (dim == 0 || covariance.size() != dim * dim) throw ShapeError("GaussianJoint: bad covariance size");
    if (!mean.empty() && mean.size() != dim) throw ShapeError("GaussianJoint: bad mean size");
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t k = i + 1; k < dim; ++k) {
            if (std::abs(cov(i, k) - cov(k, i)) > 1e-12) throw NumericError("covariance is not symmetric");
        }
    Eigen::LLT<Eigen::MatrixXd> llt(to_eigen(*this));
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
}

double gaussian_log_det(const GaussianJoint& g) {
    g.validate();
    Eigen::LLT<Eigen::MatrixXd> llt(to_eigen(g));
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

double gaussian_tc(const GaussianJoint& g) {
    const double log_det = gaussian_log_det(g);
    double s = 0.0;
    for (std::size_t i = 0; i < g.dim; ++i) s += std::log(g.cov(i, i));
    return std::max(0.0, 0.5 * (s - log_det));
}

double gaussian_entropy(const GaussianJoint& g) {
    return 0.5 * (static_cast<double>(g.dim) * (kLog2Pi + 1.0) + gaussian_log_det(g));
}

std::vector<double> gaussian_marginal_entropies(const GaussianJoint& g) {
    g.validate();
    std::vector<double> h(g.dim);
    for (std::size_t i = 0; i < g.dim; ++i) h[i] = 0.5 * (kLog2Pi + 1.0 + std::log(g.cov(i, i)));
    return h;
}

GaussianJoint gaussian_marginal(const GaussianJoint& g, std::span<const std::size_t> keep) {
    Eigen::MatrixXd m(keep.size(), keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = 0; b < keep.size(); ++b) m(a, b) = g.cov(keep[a], keep[b]);
    return from_eigen(m);
}

GaussianJoint gaussian_conditional(const GaussianJoint& g, std::span<const std::size_t> keep,
                                   std::span<const std::size_t> given) {
    g.validate();
    const auto sel = [&](std::span<const std::size_t> r, std::span<const std::size_t> c) {
        Eigen::MatrixXd m(r.size(), c.size());
        for (std::size_t a = 0; a < r.size(); ++a)
            for (std::size_t b = 0; b < c.size(); ++b) m(a, b) = g.cov(r[a], c[b]);
        return m;
    };
    const Eigen::MatrixXd skk = sel(keep, keep);
    if (given.empty()) return from_eigen(skk);
    const Eigen::MatrixXd skg = sel(keep, given);
    const Eigen::MatrixXd sgg = sel(given, given);
    Eigen::LLT<Eigen::MatrixXd> llt(sgg);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("conditioning block is not positive definite");
    Eigen::MatrixXd cond = skk - skg * llt.solve(skg.transpose());
    cond = 0.5 * (cond + cond.transpose());
    return from_eigen(cond);
}

// ---------------------------------------------------------------------------

GaussianMixture1D::GaussianMixture1D(std::vector<double> means, std::vector<double> variances)
    : means_(std::move(means)), variances_(std::move(variances)) {
    if (means_.empty()) throw std::invalid_argument("mixture needs at least one component");
    if (means_.size() != variances_.size()) throw std::invalid_argument("mixture means/variances size mismatch");
    const double log_k = std::log(static_cast<double>(means_.size()));
    inv_var_.resize(size());
    log_norm_.resize(size());
    for (std::size_t k = 0; k < size(); ++k) {
        if (!(variances_[k] > 0.0)) throw std::invalid_argument("mixture variances must be positive");
        inv_var_[k] = 1.0 / variances_[k];
        log_norm_[k] = -0.5 * (kLog2Pi + std::log(variances_[k])) - log_k;
    }
}

double GaussianMixture1D::mean() const {
    return std::accumulate(means_.begin(), means_.end(), 0.0) / static_cast<double>(size());
}

double GaussianMixture1D::variance() const {
    const double mu = mean();
    double within = 0.0;
    double between = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
        within += variances_[k];
        between += (means_[k] - mu) * (means_[k] - mu);
    }
    return (within + between) / static_cast<double>(size());
}

double GaussianMixture1D::log_density(double z) const {
    double mx = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> terms;
    terms.resize(size());
    for (std::size_t k = 0; k < size(); ++k) {
        const double d = z - means_[k];
        terms[k] = log_norm_[k] - 0.5 * d * d * inv_var_[k];
        mx = std::max(mx, terms[k]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    return mx + std::log(acc);
}

double GaussianMixture1D::density(double z) const { return std::exp(log_density(z)); }

double GaussianMixture1D::sample(Rng& rng) const {
    const std::size_t k = static_cast<std::size_t>(rng.below(size()));
    return means_[k] + std::sqrt(variances_[k]) * rng.normal();
}

GaussianMixture1D fit_aggregated_marginal(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                                          std::size_t subsample, Rng& rng) {
    if (post_mean.shape() != post_log_var.shape()) throw ShapeError("posterior mean/log_var shape mismatch");
    const std::size_t n = post_mean.rows();
    if (n == 0) throw std::invalid_argument("fit_aggregated_marginal: empty dataset");
    if (dim >= post_mean.cols()) throw std::out_of_range("fit_aggregated_marginal: latent dimension out of range");
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (subsample != 0 && subsample < n) {
        for (std::size_t k = 0; k < subsample; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng.below(n - k));
            std::swap(rows[k], rows[pick]);
        }
        rows.resize(subsample);
        std::sort(rows.begin(), rows.end());
    }
    std::vector<double> means;
    std::vector<double> vars;
    for (std::size_t r : rows) {
        means.push_back(post_mean.at(r, dim));
        vars.push_back(std::exp(post_log_var.at(r, dim)));
    }
    return GaussianMixture1D(std::move(means), std::move(vars));
}

// ---------------------------------------------------------------------------

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::exact: return "exact";
        case Estimator::mc_mixture: return "mc-mixture";
        case Estimator::mc_standard: return "mc-standard";
        case Estimator::bound: return "bound";
    }
    return "?";
}

MIReport MIReport::sorted_descending() const {
    MIReport out = *this;
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const MIEntry& a, const MIEntry& b) { return a.value > b.value; });
    return out;
}

void MIReport::write_csv(std::ostream& os) const {
    os << "dim,estimator,value_nats,std_err,samples\n";
    os.precision(17);
    for (const auto& e : entries) {
        os << e.dim << ',' << to_string(e.estimator) << (e.relative ? "-relative" : "") << ',' << e.value << ','
           << e.std_err << ',' << e.samples << '\n';
    }
}

double LatentReference::log_density(double z) const {
    if (mixture != nullptr) return mixture->log_density(z);
    return -0.5 * (kLog2Pi + z * z);
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

std::vector<std::size_t> pick_points(std::size_t n, std::size_t want, Rng& rng) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (want == 0 || want >= n) return rows;
    for (std::size_t k = 0; k < want; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng.below(n - k));
        std::swap(rows[k], rows[pick]);
    }
    rows.resize(want);
    std::sort(rows.begin(), rows.end());
    return rows;
}

void check_posteriors(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim) {
    if (post_mean.shape() != post_log_var.shape()) throw ShapeError("posterior mean/log_var shape mismatch");
    if (post_mean.rows() == 0) throw std::invalid_argument("no posterior rows");
    if (dim >= post_mean.cols()) throw std::out_of_range("latent dimension out of range");
}

}  // namespace

ReferenceComparison compare_latent_references(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                                              const LatentReference& first, const LatentReference& second,
                                              const MISampling& mc, Rng& rng) {
    check_posteriors(post_mean, post_log_var, dim);
    if (mc.inner_draws == 0) throw std::invalid_argument("inner_draws must be positive");
    const auto rows = pick_points(post_mean.rows(), mc.outer_points, rng);
    std::vector<double> k1;
    std::vector<double> k2;
    std::vector<double> kd;
    for (std::size_t r : rows) {
        const double mu = post_mean.at(r, dim);
        const double lv = std::clamp(post_log_var.at(r, dim), -10.0, 10.0);
        const double sd = std::exp(0.5 * lv);
        double a = 0.0;
        double b = 0.0;
        for (std::size_t s = 0; s < mc.inner_draws; ++s) {
            const double eps = rng.normal();
            const double z = mu + sd * eps;
            const double log_post = -0.5 * (kLog2Pi + lv + eps * eps);
            a += log_post - first.log_density(z);
            b += log_post - second.log_density(z);
        }
        a /= static_cast<double>(mc.inner_draws);
        b /= static_cast<double>(mc.inner_draws);
        k1.push_back(a);
        k2.push_back(b);
        kd.push_back(a - b);
    }
    const std::size_t samples = rows.size() * mc.inner_draws;
    const auto tag = [](const LatentReference& ref) {
        return ref.mixture != nullptr ? Estimator::mc_mixture : Estimator::mc_standard;
    };
    const MeanSe s1 = mean_se(k1);
    const MeanSe s2 = mean_se(k2);
    const MeanSe sd = mean_se(kd);
    ReferenceComparison out;
    out.first = MIEntry{dim, tag(first), s1.mean, s1.se, samples, false};
    out.second = MIEntry{dim, tag(second), s2.mean, s2.se, samples, false};
    out.diff = sd.mean;
    out.diff_std_err = sd.se;
    return out;
}

MIEntry estimate_mi_latent(const Tensor& post_mean, const Tensor& post_log_var, std::size_t dim,
                           const LatentReference& reference, const MISampling& mc, Rng& rng) {
    check_posteriors(post_mean, post_log_var, dim);
    if (mc.inner_draws == 0) throw std::invalid_argument("inner_draws must be positive");
    const auto rows = pick_points(post_mean.rows(), mc.outer_points, rng);
    std::vector<double> per_point;
    per_point.reserve(rows.size());
    for (std::size_t r : rows) {
        const double mu = post_mean.at(r, dim);
        const double lv = std::clamp(post_log_var.at(r, dim), -10.0, 10.0);
        const double sd = std::exp(0.5 * lv);
        double acc = 0.0;
        for (std::size_t s = 0; s < mc.inner_draws; ++s) {
            const double eps = rng.normal();
            const double z = mu + sd * eps;
            acc += -0.5 * (kLog2Pi + lv + eps * eps) - reference.log_density(z);
        }
        per_point.push_back(acc / static_cast<double>(mc.inner_draws));
    }
    const MeanSe s = mean_se(per_point);
    return MIEntry{dim, reference.mixture != nullptr ? Estimator::mc_mixture : Estimator::mc_standard, s.mean, s.se,
                   rows.size() * mc.inner_draws, false};
}

MIEntry estimate_mi_input(std::size_t dim, std::span<const double> log_lik_samples, std::optional<double> entropy) {
    if (log_lik_samples.empty()) throw std::invalid_argument("estimate_mi_input: no samples");
    const MeanSe s = mean_se(std::vector<double>(log_lik_samples.begin(), log_lik_samples.end()));
    MIEntry e;
    e.dim = dim;
    e.estimator = Estimator::bound;
    e.value = s.mean + entropy.value_or(0.0);
    e.std_err = s.se;
    e.samples = log_lik_samples.size();
    e.relative = !entropy.has_value();
    return e;
}

double bernoulli_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

}  // namespace corex
