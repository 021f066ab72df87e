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

#include "corex/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>


namespace corex {

std::size_t top_continuous_layer(const ModelSpec& spec) {
    for (std::size_t l = spec.num_layers(); l-- > 0;)
        if (spec.layers[l].kind == LatentKind::continuous) return l;
    throw std::invalid_argument("model has no continuous latent layer");
}

PosteriorTable encode_posteriors(const HierarchicalModel& model, const Tensor& data, std::size_t layer, Rng& rng,
                                 std::size_t batch_size) {
    const ModelSpec& spec = model.spec();
    if (layer >= spec.num_layers() || spec.layers[layer].kind != LatentKind::continuous)
        throw std::invalid_argument("encode_posteriors: layer " + std::to_string(layer) + " is not continuous");
    if (batch_size == 0) throw std::invalid_argument("encode_posteriors: batch_size must be positive");
    const std::size_t n = data.rows(), m = spec.layers[layer].width;
    std::vector<double> mu, lv;
    mu.reserve(n * m);
    lv.reserve(n * m);
    for (std::size_t b = 0; b < n; b += batch_size) {
        const std::size_t count = std::min(batch_size, n - b);
        EncodePath p = encode(spec, model.params().tensors(), slice_rows(data, b, count), rng, 1);
        const DiagGaussian& q = *p.layers[layer].posterior;
        mu.insert(mu.end(), q.mean.values().begin(), q.mean.values().end());
        lv.insert(lv.end(), q.log_var.values().begin(), q.log_var.values().end());
    }
    return {layer, Tensor::matrix(n, m, std::move(mu)), Tensor::matrix(n, m, std::move(lv))};
}

// ---------------------------------------------------------------------------

std::string MarginalBank::to_json() const {
    nlohmann::json mix = nlohmann::json::array();
    for (const auto& g : mixtures) mix.push_back({{"means", g.means()}, {"variances", g.variances()}});
    nlohmann::json j = {{"layer", layer},
                        {"subsample", subsample},
                        {"seed", seed},
                        {"model_fingerprint", model_fingerprint},
                        {"mixtures", mix}};
    return j.dump();
}

MarginalBank MarginalBank::from_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        MarginalBank b;
        b.layer = j.at("layer").get<std::size_t>();
        b.subsample = j.at("subsample").get<std::size_t>();
        b.seed = j.at("seed").get<std::uint64_t>();
        b.model_fingerprint = j.at("model_fingerprint").get<std::uint32_t>();
        for (const auto& g : j.at("mixtures"))
            b.mixtures.emplace_back(g.at("means").get<std::vector<double>>(),
                                    g.at("variances").get<std::vector<double>>());
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("marginal bank: ") + e.what());
    }
}

void MarginalBank::save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << to_json() << '\n';
    if (!os) throw Error("cannot write " + path.string());
}

MarginalBank MarginalBank::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read marginal bank " + path.string());
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json(text);
}

MarginalBank fit_marginal_bank(const HierarchicalModel& model, const Tensor& data, std::size_t subsample,
                               std::uint64_t seed) {
    const std::size_t layer = top_continuous_layer(model.spec());
    Rng base(seed, streams::kReport);
    Rng enc = base.substream(1);
    PosteriorTable post = encode_posteriors(model, data, layer, enc);
    const Rng pick = base.substream(2);
    MarginalBank bank;
    bank.layer = layer;
    bank.subsample = subsample;
    bank.seed = seed;
    bank.model_fingerprint = model.fingerprint();
    for (std::size_t j = 0; j < post.mean.cols(); ++j) {
        Rng r = pick;  // identical subsample for every dimension
        bank.mixtures.push_back(fit_aggregated_marginal(post.mean, post.log_var, j, subsample, r));
    }
    return bank;
}

MIReport latent_mi_report(const HierarchicalModel& model, const Tensor& data, const LatentMIOptions& options,
                          std::uint64_t seed) {
    if (options.estimator != Estimator::mc_mixture && options.estimator != Estimator::mc_standard)
        throw ConfigError("latent MI supports the mc-mixture and mc-standard estimators, got " +
                          to_string(options.estimator));
    const std::size_t layer = top_continuous_layer(model.spec());
    Rng base(seed, streams::kReport);
    Rng enc = base.substream(1);
    PosteriorTable post = encode_posteriors(model, data, layer, enc);
    const Rng pick = base.substream(2);
    MIReport report;
    for (std::size_t j = 0; j < post.mean.cols(); ++j) {
        std::optional<GaussianMixture1D> mix;
        if (options.estimator == Estimator::mc_mixture) {
            Rng r = pick;
            mix.emplace(fit_aggregated_marginal(post.mean, post.log_var, j, options.subsample, r));
        }
        LatentReference ref{mix ? &*mix : nullptr};
        Rng mc = base.substream(3 + j);
        report.entries.push_back(estimate_mi_latent(post.mean, post.log_var, j, ref, options.mc, mc));
    }
    return report;
}

Tensor draw_from_bank(const MarginalBank& bank, std::size_t n, Rng& rng) {
    const std::size_t m = bank.width();
    std::vector<double> z(n * m);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < m; ++j) z[r * m + j] = bank.mixtures[j].sample(rng);
    return Tensor::matrix(n, m, std::move(z));
}

Tensor sample_prior(const HierarchicalModel& model, std::size_t n, Rng& rng) {
    const ModelSpec& spec = model.spec();
    if (n == 0) return Tensor::zeros({0, spec.input_dim});
    const std::size_t top = spec.num_layers() - 1;
    const std::size_t w = spec.top().width;
    Tensor z;
    if (spec.top().kind == LatentKind::continuous) {
        z = standard_normal(rng, {n, w});
    } else {
        std::vector<double> v(n * w, 0.0);
        for (std::size_t r = 0; r < n; ++r) v[r * w + rng.below(w)] = 1.0;
        z = Tensor::matrix(n, w, std::move(v));
    }
    return decode(spec, model.params().tensors(), top, z, &rng).mean();
}

Tensor sample_marginals(const HierarchicalModel& model, const MarginalBank& bank, std::size_t n, Rng& rng) {
    if (bank.model_fingerprint != model.fingerprint())
        throw std::invalid_argument("marginal bank was fitted on a different model version; refit it");
    const ModelSpec& spec = model.spec();
    if (bank.layer >= spec.num_layers() || spec.layers[bank.layer].width != bank.width())
        throw std::invalid_argument("marginal bank does not match the model's layer shape");
    if (n == 0) return Tensor::zeros({0, spec.input_dim});
    return decode(spec, model.params().tensors(), bank.layer, draw_from_bank(bank, n, rng), &rng).mean();
}

// ---------------------------------------------------------------------------

namespace {

// Within-group pair sums for a fixed labelling. Returns (sum_aa, sum_bb,
// sum_ab) over unordered pairs.
struct PairSums {
    double aa = 0.0, bb = 0.0, ab = 0.0;
};

double energy_from_sums(const PairSums& s, std::size_t n, std::size_t m) {
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 2.0 * s.ab / (dn * dm) - 2.0 * s.aa / (dn * dn) - 2.0 * s.bb / (dm * dm);
}

class OneDimSums {
public:
    OneDimSums(std::vector<double> pooled) : v_(std::move(pooled)), order_(v_.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return v_[a] < v_[b]; });
        const std::size_t n = v_.size();
        for (std::size_t k = 0; k < n; ++k)
            total_ += v_[order_[k]] * (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0);
    }

    PairSums operator()(const std::vector<char>& in_a, std::size_t na) const {
        const std::size_t nb = v_.size() - na;
        double sa = 0.0, sb = 0.0;
        std::size_t ra = 0, rb = 0;
        for (std::size_t idx : order_) {
            if (in_a[idx]) {
                sa += v_[idx] * (2.0 * static_cast<double>(ra++) - static_cast<double>(na) + 1.0);
            } else {
                sb += v_[idx] * (2.0 * static_cast<double>(rb++) - static_cast<double>(nb) + 1.0);
            }
        }
        return {sa, sb, total_ - sa - sb};
    }

private:
    std::vector<double> v_;
    std::vector<std::size_t> order_;
    double total_ = 0.0;
};

class PairwiseSums {
public:
    PairwiseSums(std::vector<double> pooled, std::size_t dim) : x_(std::move(pooled)), d_(dim), n_(x_.size() / dim) {
        row_all_.assign(n_, 0.0);
        std::vector<double> ones(n_, 1.0);
        masked_rows(ones, row_all_);
    }

    PairSums operator()(const std::vector<char>& in_a, std::size_t) const {
        std::vector<double> mask(n_);
        for (std::size_t i = 0; i < n_; ++i) mask[i] = in_a[i] ? 1.0 : 0.0;
        std::vector<double> row_a(n_, 0.0);
        masked_rows(mask, row_a);
        double aa = 0.0, bb = 0.0, ab = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double rb = row_all_[i] - row_a[i];
            if (in_a[i]) {
                aa += row_a[i];
                ab += rb;
            } else {
                bb += rb;
            }
        }
        return {0.5 * aa, 0.5 * bb, ab};
    }

private:
    // out[i] = sum_j mask[j] |x_i - x_j|
    void masked_rows(const std::vector<double>& mask, std::vector<double>& out) const {
        std::vector<double> dist(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* xi = &x_[i * d_];
            for (std::size_t j = 0; j < n_; ++j) {
                const double* xj = &x_[j * d_];
                double s = 0.0;
                for (std::size_t k = 0; k < d_; ++k) {
                    const double t = xi[k] - xj[k];
                    s += t * t;
                }
                dist[j] = s;
            }
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += mask[j] * std::sqrt(dist[j]);
            out[i] = acc;
        }
    }

    std::vector<double> x_;
    std::size_t d_;
    std::size_t n_;
    std::vector<double> row_all_;
};

template <class Sums>
EnergyTestResult run_permutations(const Sums& sums, std::size_t n, std::size_t m, std::size_t permutations,
                                  double alpha, Rng& rng) {
    const std::size_t total = n + m;
    std::vector<char> in_a(total, 0);
    std::fill(in_a.begin(), in_a.begin() + static_cast<std::ptrdiff_t>(n), 1);
    EnergyTestResult res;
    res.statistic = energy_from_sums(sums(in_a, n), n, m);
    res.permutations = permutations;
    std::size_t exceed = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        for (std::size_t i = total; i > 1; --i) std::swap(in_a[i - 1], in_a[rng.below(i)]);
        if (energy_from_sums(sums(in_a, n), n, m) >= res.statistic) ++exceed;
    }
    res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
    res.equivalent = res.p_value >= alpha;
    return res;
}

}  // namespace

EnergyTestResult energy_distance_test(const Tensor& a, const Tensor& b, std::size_t permutations, double alpha,
                                      Rng& rng) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw ShapeError("energy_distance_test: samples must be matrices of equal width, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance_test: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("energy_distance_test: alpha must lie in (0, 1)");
    std::vector<double> pooled(a.values().begin(), a.values().end());
    pooled.insert(pooled.end(), b.values().begin(), b.values().end());
    if (a.cols() == 1) return run_permutations(OneDimSums(std::move(pooled)), a.rows(), b.rows(), permutations, alpha, rng);
    return run_permutations(PairwiseSums(std::move(pooled), a.cols()), a.rows(), b.rows(), permutations, alpha, rng);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman_correlation: size mismatch");
    const std::size_t n = a.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double mean = 0.5 * static_cast<double>(n + 1);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

VarianceReport variance_report(const MarginalBank& bank, const MIReport& mi) {
    VarianceReport rep;
    std::vector<double> var, val;
    for (std::size_t j = 0; j < bank.width(); ++j) {
        auto it = std::find_if(mi.entries.begin(), mi.entries.end(), [j](const MIEntry& e) { return e.dim == j; });
        if (it == mi.entries.end())
            throw std::invalid_argument("variance_report: no MI estimate for dimension " + std::to_string(j));
        rep.rows.push_back({j, bank.mixtures[j].variance(), it->value, it->std_err});
        var.push_back(rep.rows.back().variance);
        val.push_back(it->value);
    }
    std::vector<double> sorted = var;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k)
        rep.cumulative.emplace_back(sorted[k], static_cast<double>(k + 1) / static_cast<double>(sorted.size()));
    rep.spearman = spearman_correlation(var, val);
    return rep;
}

void VarianceReport::write_csv(std::ostream& os) const {
    os << "dim,variance,mi_nats,mi_se\n";
    os.precision(17);
    for (const auto& r : rows) os << r.dim << ',' << r.variance << ',' << r.mi << ',' << r.mi_se << '\n';
}

void VarianceReport::write_cumulative_csv(std::ostream& os) const {
    os << "variance,fraction\n";
    os.precision(17);
    for (const auto& [v, f] : cumulative) os << v << ',' << f << '\n';
}

// ---------------------------------------------------------------------------

void TraversalSpec::validate() const {
    if (dims.empty()) throw std::invalid_argument("traversal: no target dimensions");
    if (!(lo < hi)) throw std::invalid_argument("traversal: range requires lo < hi");
    if (steps < 2) throw std::invalid_argument("traversal: steps must be at least 2");
}

std::vector<double> TraversalSpec::grid() const {
    std::vector<double> g(steps);
    for (std::size_t k = 0; k < steps; ++k)
        g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
    return g;
}

std::pair<std::size_t, std::size_t> image_extent(std::size_t d) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
    if (side * side == d) return {side, side};
    return {1, d};
}

void rescale_to_unit(ImageGrid& grid) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& img : grid.images)
        for (double v : img) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (auto& img : grid.images)
        for (double& v : img) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
}

ImageGrid grid_from_rows(const Tensor& images, std::size_t cols) {
    if (cols == 0) throw std::invalid_argument("grid_from_rows: cols must be positive");
    const std::size_t n = images.rows(), d = images.cols();
    ImageGrid g;
    std::tie(g.height, g.width) = image_extent(d);
    g.cols = cols;
    g.rows = (n + cols - 1) / cols;
    g.images.assign(g.rows * g.cols, std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < n; ++r)
        std::copy(images.data() + r * d, images.data() + (r + 1) * d, g.images[r].begin());
    return g;
}

ImageGrid latent_traverse(const HierarchicalModel& model, const TraversalSpec& spec, const TraversalSource& source) {
    spec.validate();
    const ModelSpec& ms = model.spec();
    const ParamMap& params = model.params().tensors();
    const std::size_t layer = top_continuous_layer(ms);
    const std::size_t width = ms.layers[layer].width;
    for (std::size_t d : spec.dims)
        if (d >= width)
            throw std::invalid_argument("traversal: dimension " + std::to_string(d) + " out of range for width " +
                                        std::to_string(width));
    const std::vector<double> values = spec.grid();

    // Base code and per-dimension step scale for each source item.
    std::vector<std::vector<double>> base, scale;
    if (!source.categories.empty()) {
        const std::size_t top = ms.num_layers() - 1;
        if (ms.top().kind != LatentKind::categorical || top == 0)
            throw std::invalid_argument("traversal: category source needs a categorical top over a continuous layer");
        for (std::size_t k : source.categories) {
            if (k >= ms.top().width) throw std::invalid_argument("traversal: category out of range");
            DiagGaussian q = decode_latent(ms, params, top, one_hot(1, ms.top().width, k));
            base.push_back(q.mean.to_vector());
            scale.push_back(q.stddev().to_vector());
        }
    } else {
        if (source.seeds.rank() != 2 || source.seeds.rows() == 0)
            throw std::invalid_argument("traversal: no seed images or categories given");
        Rng unused(0);
        EncodePath p = encode(ms, params, source.seeds, unused, 1, true);
        const Tensor& z = p.layers[layer].sample;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            base.emplace_back(z.data() + r * width, z.data() + (r + 1) * width);
            scale.emplace_back(width, 1.0);
        }
    }

    ImageGrid g;
    std::tie(g.height, g.width) = image_extent(ms.input_dim);
    g.cols = values.size();
    g.rows = base.size() * spec.dims.size();
    const bool noise_units = !source.categories.empty();
    for (std::size_t s = 0; s < base.size(); ++s) {
        for (std::size_t d : spec.dims) {
            std::vector<double> z;
            z.reserve(values.size() * width);
            for (double v : values) {
                std::vector<double> row = base[s];
                row[d] = noise_units ? base[s][d] + v * scale[s][d] : v;
                z.insert(z.end(), row.begin(), row.end());
            }
            Tensor x = decode(ms, params, layer, Tensor::matrix(values.size(), width, std::move(z))).mean();
            for (std::size_t c = 0; c < values.size(); ++c)
                g.images.emplace_back(x.data() + c * ms.input_dim, x.data() + (c + 1) * ms.input_dim);
        }
    }
    return g;
}

void write_pgm_grid(const ImageGrid& g, const std::filesystem::path& path) {
    if (g.images.size() != g.rows * g.cols) throw ShapeError("write_pgm_grid: cell count does not match the grid");
    for (const auto& img : g.images) {
        if (img.size() != g.height * g.width) throw ShapeError("write_pgm_grid: image size does not match the grid");
        for (double v : img)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("write_pgm_grid: pixel value " + std::to_string(v) + " outside [0, 1]");
    }
    const std::size_t W = g.cols == 0 ? 0 : g.cols * g.width + (g.cols - 1);
    const std::size_t H = g.rows == 0 ? 0 : g.rows * g.height + (g.rows - 1);
    std::vector<int> px(W * H, 128);
    for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) {
            const auto& img = g.at(r, c);
            for (std::size_t y = 0; y < g.height; ++y)
                for (std::size_t x = 0; x < g.width; ++x) {
                    const std::size_t Y = r * (g.height + 1) + y, X = c * (g.width + 1) + x;
                    px[Y * W + X] = static_cast<int>(std::lround(img[y * g.width + x] * 255.0));
                }
        }
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << "P2\n" << W << ' ' << H << "\n255\n";
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) os << (x ? " " : "") << px[y * W + x];
        os << '\n';
    }
    if (!os) throw Error("cannot write " + path.string());
}

}  // namespace corex
