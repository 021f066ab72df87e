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

#include "corex/objectives.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace corex {

void ObjectiveConfig::validate(const ModelSpec& spec) const {
    spec.validate();
    if (mc_samples == 0) throw ConfigError("mc_samples must be positive");
    const std::size_t bottom = spec.layers.front().width;
    if (!kl_weights.empty()) {
        const std::size_t want = spec.num_layers() == 1 && spec.top().kind == LatentKind::categorical ? 1 : bottom;
        if (kl_weights.size() != want)
            throw ConfigError("kl_weights has " + std::to_string(kl_weights.size()) + " entries, expected " +
                              std::to_string(want));
        for (std::size_t i = 0; i < kl_weights.size(); ++i) {
            const double w = kl_weights[i];
            if (!(w >= 0.0 && w <= 1.0))
                throw ConfigError("kl_weights[" + std::to_string(i) + "] = " + std::to_string(w) +
                                  " lies outside [0, 1]");
        }
        if (spec.num_layers() > 1)
            for (double w : kl_weights)
                if (w != 1.0) throw ConfigError("kl_weights apply to single-layer models only");
    }
    if (!layers.empty()) {
        if (layers.size() != spec.num_layers())
            throw ConfigError("config lists " + std::to_string(layers.size()) + " layers but the model has " +
                              std::to_string(spec.num_layers()));
        for (std::size_t l = 0; l < layers.size(); ++l)
            if (layers[l].kind != spec.layers[l].kind || layers[l].width != spec.layers[l].width)
                throw ConfigError("layer " + std::to_string(l) + " of the config does not match the model");
    }
    if (prior == PriorKind::fitted_marginal) {
        if (spec.num_layers() != 1 || spec.top().kind != LatentKind::continuous)
            throw ConfigError("fitted-marginal prior requires a single continuous layer");
        if (fitted == nullptr || fitted->size() != bottom)
            throw ConfigError("fitted-marginal prior requires one mixture per latent dimension");
    }
    if (entropy_offsets && entropy_offsets->size() != spec.input_dim)
        throw ConfigError("entropy_offsets has " + std::to_string(entropy_offsets->size()) + " entries, expected " +
                          std::to_string(spec.input_dim));
}

std::vector<double> anchor_weights(std::size_t width, std::span<const std::size_t> anchors, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("anchor lambda must lie in [0, 1]");
    std::vector<double> w(width, 1.0);
    for (std::size_t a : anchors) {
        if (a >= width)
            throw ConfigError("anchor dimension " + std::to_string(a) + " out of range for width " +
                              std::to_string(width));
        w[a] = 1.0 - lambda;
    }
    return w;
}

namespace {

// [S*B x c] (sample-major) -> [B x c] averaged over samples; B-row inputs
// pass through.
Tensor per_example(const Tensor& t, std::size_t s, std::size_t b) {
    if (t.dim(0) == b) return t;
    if (t.rank() == 1) return mean(reshape(t, {s, b}), 0);
    return mean(reshape(t, {s, b, t.dim(1)}), 0);
}

std::vector<double> column_means(const Tensor& t) {
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += t.at(i, j);
    for (double& v : out) v /= static_cast<double>(r);
    return out;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_err_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

// ln of a per-column mixture density, differentiable in z.
Tensor mixture_log_density(const Tensor& z, const std::vector<GaussianMixture1D>& mix) {
    const std::size_t r = z.rows(), m = z.cols();
    std::vector<double> val(r * m), dval(r * m);
    for (std::size_t j = 0; j < m; ++j) {
        const auto& g = mix[j];
        const auto& mu = g.means();
        const auto& var = g.variances();
        std::vector<double> lw(g.size());
        for (std::size_t i = 0; i < r; ++i) {
            const double x = z.at(i, j);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double d = x - mu[k];
                lw[k] = -0.5 * (std::log(2.0 * M_PI * var[k]) + d * d / var[k]);
                mx = std::max(mx, lw[k]);
            }
            double s = 0.0, ds = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double w = std::exp(lw[k] - mx);
                s += w;
                ds += w * (-(x - mu[k]) / var[k]);
            }
            val[i * m + j] = mx + std::log(s) - std::log(static_cast<double>(g.size()));
            dval[i * m + j] = ds / s;
        }
    }
    if (!z.on_tape()) return Tensor({r, m}, std::move(val));
    const Tensor* ins[] = {&z};
    return z.tape()->record({r, m}, std::move(val), ins,
                            [dval = std::move(dval)](std::span<const double> g, std::span<std::vector<double>*> gin) {
                                if (!gin[0]) return;
                                auto& gz = *gin[0];
                                for (std::size_t i = 0; i < g.size(); ++i) gz[i] += g[i] * dval[i];
                            });
}

// Batch mixture of the posteriors in `q` (per column), evaluated at `z`.
// Values only; used for splitting the total into per-layer gains.
std::vector<double> batch_mixture_log_density(const DiagGaussian& q, const Tensor& z) {
    const std::size_t n = q.rows(), m = q.width(), r = z.rows();
    std::vector<double> out(r, 0.0);
    std::vector<double> lw(n);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> mu(n), iv(n), ln(n);
        for (std::size_t k = 0; k < n; ++k) {
            mu[k] = q.mean.at(k, j);
            const double lv = q.log_var.at(k, j);
            iv[k] = std::exp(-lv);
            ln[k] = -0.5 * (std::log(2.0 * M_PI) + lv);
        }
        for (std::size_t i = 0; i < r; ++i) {
            const double x = z.at(i, j);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) {
                const double d = x - mu[k];
                lw[k] = ln[k] - 0.5 * d * d * iv[k];
                mx = std::max(mx, lw[k]);
            }
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += std::exp(lw[k] - mx);
            out[i] += mx + std::log(s) - std::log(static_cast<double>(n));
        }
    }
    return out;
}

std::vector<double> reduce_rows(const std::vector<double>& v, std::size_t s, std::size_t b) {
    if (v.size() == b) return v;
    std::vector<double> out(b, 0.0);
    for (std::size_t k = 0; k < s; ++k)
        for (std::size_t i = 0; i < b; ++i) out[i] += v[k * b + i];
    for (double& x : out) x /= static_cast<double>(s);
    return out;
}

struct Pieces {
    std::size_t batch = 0;
    Tensor x_term;                   // [B x d]
    std::vector<Tensor> links;       // index l >= 1: [B], <ln q(z_{l-1} | z_l)>
    std::vector<Tensor> entropies;   // index l < L-1: [B], H(p(z_l | z_{l-1}))
    Tensor top_kl;                   // [B x c], unweighted
    std::vector<std::vector<double>> log_mix;  // index l < L-1: [B], <ln r_l(z_l)>
};

Pieces compute_pieces(const ModelSpec& spec, const ParamMap& params, const Tensor& x, const ObjectiveConfig& cfg,
                      Rng& rng, bool want_mixtures) {
    const std::size_t S = cfg.mc_samples;
    const std::size_t B = x.rows();
    if (B == 0) throw std::invalid_argument("objective: empty batch");
    const std::size_t L = spec.num_layers();
    EncodePath p = encode(spec, params, x, rng, S);
    const Tensor xt = S > 1 ? tile_rows(x, S) : x;

    Pieces out;
    out.batch = B;
    out.links.resize(L);
    out.entropies.resize(L);
    out.log_mix.resize(L);

    const LayerState& bottom = p.layers[0];
    if (bottom.kind == LatentKind::continuous) {
        out.x_term = per_example(decode_x(spec, params, bottom.sample).log_prob(xt), S, B);
    } else {
        MarginalizedTerms mt = decode_marginalized(spec, params, 0, bottom.logits, xt);
        out.x_term = per_example(mt.expected_log_lik_dims, S, B);
        out.top_kl = reshape(per_example(mt.kl_uniform, S, B), {B, 1});
        return out;
    }

    for (std::size_t l = 1; l < L; ++l) {
        const LayerState& st = p.layers[l];
        const Tensor& lower = p.layers[l - 1].sample;
        if (st.kind == LatentKind::continuous) {
            DiagGaussian q = decode_latent(spec, params, l, st.sample);
            out.links[l] = per_example(sum(gauss_log_prob(q, lower), 1), S, B);
        } else {
            MarginalizedTerms mt = decode_marginalized(spec, params, l, st.logits, lower);
            out.links[l] = per_example(mt.expected_log_lik, S, B);
            out.top_kl = reshape(per_example(mt.kl_uniform, S, B), {B, 1});
        }
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const LayerState& st = p.layers[l];
        out.entropies[l] = per_example(sum(gauss_entropy(*st.posterior), 1), S, B);
        if (want_mixtures)
            out.log_mix[l] = reduce_rows(batch_mixture_log_density(*st.posterior, st.sample), S, B);
    }
    const LayerState& top = p.layers.back();
    if (top.kind == LatentKind::continuous) {
        const DiagGaussian& q = *top.posterior;
        if (cfg.prior == PriorKind::fitted_marginal) {
            const std::size_t rows = top.sample.rows();
            DiagGaussian wide = rows == q.rows() ? q
                                                 : DiagGaussian(tile_rows(q.mean, rows / q.rows()),
                                                                tile_rows(q.log_var, rows / q.rows()));
            Tensor kl = gauss_log_prob(wide, top.sample) - mixture_log_density(top.sample, *cfg.fitted);
            out.top_kl = per_example(kl, S, B);
        } else {
            out.top_kl = per_example(gauss_kl_std(q), S, B);
        }
    }
    return out;
}

ObjectiveValue assemble(const ModelSpec& spec, const Pieces& pc, const ObjectiveConfig& cfg,
                        const std::vector<double>& weights) {
    const std::size_t B = pc.batch;
    const std::size_t L = spec.num_layers();
    ObjectiveValue v;
    v.offset_included = cfg.entropy_offsets.has_value();
    if (v.offset_included)
        v.entropy_offset = std::accumulate(cfg.entropy_offsets->begin(), cfg.entropy_offsets->end(), 0.0);

    const Tensor w = Tensor({weights.size()}, weights);
    Tensor weighted_kl = pc.top_kl * w;
    Tensor pe = sum(pc.x_term, 1) - sum(weighted_kl, 1);
    for (std::size_t l = 1; l < L; ++l) pe = pe + pc.links[l];
    for (std::size_t l = 0; l + 1 < L; ++l) pe = pe + pc.entropies[l];
    if (v.offset_included) pe = pe + v.entropy_offset;
    v.total = mean(pe);

    v.reconstruction = column_means(pc.x_term);
    v.kl = column_means(pc.top_kl);
    v.kl_weights = weights;
    v.per_example = pe.to_vector();
    v.std_err = std_err_of(v.per_example);

    // Per-layer gains.
    const auto sum_rows = [B](const Tensor& t) {
        std::vector<double> out(B, 0.0);
        const std::size_t c = t.rank() == 2 ? t.cols() : 1;
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i] += t[i * c + j];
        return out;
    };
    const std::vector<double> xsum = sum_rows(pc.x_term);
    const std::vector<double> klsum = sum_rows(weighted_kl);
    v.per_example_gain.assign(L, std::vector<double>(B, 0.0));
    for (std::size_t i = 0; i < B; ++i) {
        v.per_example_gain[0][i] = v.entropy_offset + xsum[i];
        if (L == 1) {
            v.per_example_gain[0][i] -= klsum[i];
            continue;
        }
        for (std::size_t l = 0; l < L; ++l) {
            double g = l == 0 ? v.per_example_gain[0][i] : pc.links[l][i] - pc.log_mix[l - 1][i];
            if (l + 1 < L)
                g += pc.entropies[l][i] + pc.log_mix[l][i];
            else
                g -= klsum[i];
            v.per_example_gain[l][i] = g;
        }
    }
    for (const auto& g : v.per_example_gain) v.per_layer_gain.push_back({mean_of(g), std_err_of(g)});
    return v;
}

std::vector<double> resolved_weights(const ModelSpec& spec, const ObjectiveConfig& cfg, bool use_config) {
    const std::size_t n = spec.top().kind == LatentKind::categorical ? 1 : spec.top().width;
    if (use_config && !cfg.kl_weights.empty() && spec.num_layers() == 1) return cfg.kl_weights;
    return std::vector<double>(n, 1.0);
}

void require_single_layer(const ModelSpec& spec, const char* what) {
    if (spec.num_layers() != 1)
        throw ConfigError(std::string(what) + ": single-layer model required, got " +
                          std::to_string(spec.num_layers()) + " layers");
}

}  // namespace

ObjectiveValue corex_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                           const ObjectiveConfig& config, Rng& rng) {
    config.validate(spec);
    require_single_layer(spec, "corex_bound");
    Pieces pc = compute_pieces(spec, params, batch, config, rng, false);
    return assemble(spec, pc, config, resolved_weights(spec, config, false));
}

Tensor elbo(const ModelSpec& spec, const ParamMap& params, const Tensor& batch, const ObjectiveConfig& config,
            Rng& rng) {
    config.validate(spec);
    require_single_layer(spec, "elbo");
    Pieces pc = compute_pieces(spec, params, batch, config, rng, false);
    return mean(sum(pc.x_term, 1) - sum(pc.top_kl, 1));
}

ObjectiveValue anchor_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                            const ObjectiveConfig& config, Rng& rng) {
    config.validate(spec);
    require_single_layer(spec, "anchor_bound");
    Pieces pc = compute_pieces(spec, params, batch, config, rng, false);
    return assemble(spec, pc, config, resolved_weights(spec, config, true));
}

ObjectiveValue stacked_bound(const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                             const ObjectiveConfig& config, Rng& rng) {
    config.validate(spec);
    Pieces pc = compute_pieces(spec, params, batch, config, rng, spec.num_layers() > 1);
    return assemble(spec, pc, config, resolved_weights(spec, config, true));
}

std::vector<LayerGainEntry> layer_gain_report(const HierarchicalModel& model, const Tensor& data,
                                              const ObjectiveConfig& config, Rng& rng, std::size_t batch_size) {
    const ModelSpec& spec = model.spec();
    const std::size_t L = spec.num_layers();
    if (L < 2) return {};
    if (batch_size == 0) throw std::invalid_argument("layer_gain_report: batch_size must be positive");
    std::vector<std::vector<double>> gains(L);
    const std::size_t n = data.rows();
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        const std::size_t count = std::min(batch_size, n - begin);
        ObjectiveValue v = stacked_bound(spec, model.params().tensors(), slice_rows(data, begin, count), config, rng);
        for (std::size_t l = 0; l < L; ++l)
            gains[l].insert(gains[l].end(), v.per_example_gain[l].begin(), v.per_example_gain[l].end());
    }
    std::vector<LayerGainEntry> out;
    for (std::size_t l = 1; l < L; ++l) {
        LayerGainEntry e;
        e.layer = l + 1;
        e.value = mean_of(gains[l]);
        e.std_err = std_err_of(gains[l]);
        e.recommended = e.value > 3.0 * e.std_err;
        out.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t product(const std::vector<std::size_t>& c) {
    std::size_t p = 1;
    for (auto v : c) p *= v;
    return p;
}

std::vector<double> dirichlet(Rng& rng, std::size_t k) {
    std::vector<double> w(k);
    double s = 0.0;
    for (auto& v : w) s += (v = -std::log(rng.uniform_open()));
    for (auto& v : w) v /= s;
    return w;
}

std::vector<double> dirichlet_rows(Rng& rng, std::size_t rows, std::size_t k) {
    std::vector<double> out;
    out.reserve(rows * k);
    for (std::size_t r = 0; r < rows; ++r) {
        auto w = dirichlet(rng, k);
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

}  // namespace

DiscreteJoint TabularCorex::joint() const { return joint_from_factorized_encoder(x_cards, px, z_cards, encoders); }

TabularCorex random_tabular_corex(std::vector<std::size_t> x_cards, std::vector<std::size_t> z_cards, Rng& rng) {
    TabularCorex t;
    t.x_cards = std::move(x_cards);
    t.z_cards = std::move(z_cards);
    const std::size_t nx = product(t.x_cards), nz = product(t.z_cards);
    t.px = dirichlet(rng, nx);
    for (auto c : t.z_cards) t.encoders.push_back(dirichlet_rows(rng, nx, c));
    for (auto c : t.x_cards) t.decoders.push_back(dirichlet_rows(rng, nz, c));
    for (auto c : t.z_cards) t.priors.push_back(dirichlet(rng, c));
    return t;
}

void make_tabular_tight(TabularCorex& t) {
    const DiscreteJoint j = t.joint();
    const std::size_t nx = product(t.x_cards), nz = product(t.z_cards);
    std::vector<double> pz(nz, 0.0);
    for (std::size_t xs = 0; xs < nx; ++xs)
        for (std::size_t zs = 0; zs < nz; ++zs) pz[zs] += j.table[xs * nz + zs];
    for (std::size_t i = 0; i < t.x_cards.size(); ++i) {
        const std::size_t c = t.x_cards[i];
        std::vector<double> dec(nz * c, 0.0);
        for (std::size_t xs = 0; xs < nx; ++xs) {
            const std::size_t a = decode_state(xs, t.x_cards)[i];
            for (std::size_t zs = 0; zs < nz; ++zs) dec[zs * c + a] += j.table[xs * nz + zs];
        }
        for (std::size_t zs = 0; zs < nz; ++zs)
            for (std::size_t a = 0; a < c; ++a)
                dec[zs * c + a] = pz[zs] > 0.0 ? dec[zs * c + a] / pz[zs] : 1.0 / static_cast<double>(c);
        t.decoders[i] = std::move(dec);
    }
    for (std::size_t k = 0; k < t.z_cards.size(); ++k) {
        std::vector<double> r(t.z_cards[k], 0.0);
        for (std::size_t zs = 0; zs < nz; ++zs) r[decode_state(zs, t.z_cards)[k]] += pz[zs];
        t.priors[k] = std::move(r);
    }
}

double tabular_corex_bound(const TabularCorex& t) {
    const DiscreteJoint j = t.joint();
    const std::size_t nx = product(t.x_cards), nz = product(t.z_cards);
    double h = 0.0;
    for (std::size_t i = 0; i < t.x_cards.size(); ++i) {
        const std::size_t v[] = {i};
        h += discrete_entropy(j, v);
    }
    double recon = 0.0;
    for (std::size_t xs = 0; xs < nx; ++xs) {
        const auto xd = decode_state(xs, t.x_cards);
        for (std::size_t zs = 0; zs < nz; ++zs) {
            const double p = j.table[xs * nz + zs];
            if (p == 0.0) continue;
            for (std::size_t i = 0; i < t.x_cards.size(); ++i)
                recon += p * std::log(t.decoders[i][zs * t.x_cards[i] + xd[i]]);
        }
    }
    double kl = 0.0;
    for (std::size_t xs = 0; xs < nx; ++xs) {
        for (std::size_t k = 0; k < t.z_cards.size(); ++k) {
            const std::size_t c = t.z_cards[k];
            for (std::size_t a = 0; a < c; ++a) {
                const double q = t.encoders[k][xs * c + a];
                if (q > 0.0) kl += t.px[xs] * q * std::log(q / t.priors[k][a]);
            }
        }
    }
    return h + recon - kl;
}

double tabular_corex_objective(const TabularCorex& t) {
    const DiscreteJoint j = t.joint();
    const auto xv = j.x_vars();
    const auto zv = j.z_vars();
    double s = 0.0;
    for (std::size_t i : xv) {
        const std::size_t a[] = {i};
        s += discrete_mutual_information(j, a, zv);
    }
    for (std::size_t k : zv) {
        const std::size_t a[] = {k};
        s -= discrete_mutual_information(j, a, xv);
    }
    return s;
}

}  // namespace corex
