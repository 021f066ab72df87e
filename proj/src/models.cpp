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

#include "corex/models.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <json.hpp>

#include "binary_io.hpp"

namespace corex {

using nlohmann::json;

std::string to_string(LatentKind k) { return k == LatentKind::continuous ? "continuous" : "categorical"; }
std::string to_string(Likelihood l) { return l == Likelihood::bernoulli ? "bernoulli" : "gaussian"; }

LatentKind latent_kind_from_string(std::string_view s) {
    if (s == "continuous") return LatentKind::continuous;
    if (s == "categorical") return LatentKind::categorical;
    throw ConfigError("unknown latent kind '" + std::string(s) + "'");
}

Likelihood likelihood_from_string(std::string_view s) {
    if (s == "bernoulli") return Likelihood::bernoulli;
    if (s == "gaussian") return Likelihood::gaussian;
    throw ConfigError("unknown likelihood '" + std::string(s) + "'");
}

std::string encoder_id(std::size_t layer) { return "enc" + std::to_string(layer); }
std::string decoder_id(std::size_t layer) { return "dec" + std::to_string(layer); }

TopPrior ModelSpec::top_prior() const {
    return top().kind == LatentKind::categorical ? TopPrior::uniform_categorical : TopPrior::standard_normal;
}

namespace {

std::vector<OutputHead> encoder_heads(const LayerSpec& l) {
    if (l.kind == LatentKind::categorical) return {{"logits", l.width}};
    return {{"mean", l.width}, {"log_var", l.width}};
}

std::vector<OutputHead> decoder_heads(const ModelSpec& s, std::size_t l) {
    if (l == 0) {
        if (s.likelihood == Likelihood::bernoulli) return {{"logits", s.input_dim}};
        return {{"mean", s.input_dim}};
    }
    const std::size_t w = s.layers[l - 1].width;
    return {{"mean", w}, {"log_var", w}};
}

bool same_heads(const std::vector<OutputHead>& a, const std::vector<OutputHead>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].name != b[i].name || a[i].width != b[i].width) return false;
    return true;
}

json mlp_to_json(const MlpSpec& m) {
    json acts = json::array();
    for (auto a : m.activations) acts.push_back(to_string(a));
    json heads = json::array();
    for (const auto& h : m.output_heads) heads.push_back({{"name", h.name}, {"width", h.width}});
    return {{"layer_widths", m.layer_widths}, {"activations", acts}, {"output_heads", heads}};
}

MlpSpec mlp_from_json(const json& j) {
    MlpSpec m;
    m.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("activations")) m.activations.push_back(activation_from_string(a.get<std::string>()));
    for (const auto& h : j.at("output_heads"))
        m.output_heads.push_back({h.at("name").get<std::string>(), h.at("width").get<std::size_t>()});
    return m;
}

}  // namespace

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("model input_dim must be positive");
    if (layers.empty()) throw ConfigError("model needs at least one latent layer");
    if (fixed_x_log_var) {
        if (likelihood != Likelihood::gaussian) throw ConfigError("fixed_x_log_var requires a gaussian likelihood");
        if (!(*fixed_x_log_var >= kLogVarMin && *fixed_x_log_var <= kLogVarMax))
            throw ConfigError("fixed_x_log_var must lie in [-10, 10]");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::string where = "layer " + std::to_string(l);
        if (L.width == 0) throw ConfigError(where + ": width must be positive");
        if (L.kind == LatentKind::categorical) {
            if (l + 1 != layers.size()) throw ConfigError(where + ": only the top layer may be categorical");
            if (L.width > kMaxCategories)
                throw ConfigError(where + ": at most " + std::to_string(kMaxCategories) + " categories");
        }
        try {
            L.encoder.validate();
            L.decoder.validate();
        } catch (const Error& e) {
            throw ConfigError(where + ": " + e.what());
        }
        if (L.encoder.input_width() != below_width(l))
            throw ConfigError(where + ": encoder input width " + std::to_string(L.encoder.input_width()) +
                              " does not match the layer below (" + std::to_string(below_width(l)) + ")");
        if (!same_heads(L.encoder.output_heads, encoder_heads(L)))
            throw ConfigError(where + ": encoder heads do not match the latent kind and width");
        if (L.decoder.input_width() != L.width)
            throw ConfigError(where + ": decoder input width must equal the layer width");
        if (!same_heads(L.decoder.output_heads, decoder_heads(*this, l)))
            throw ConfigError(where + ": decoder heads do not describe the layer below");
    }
}

std::string ModelSpec::to_json() const {
    json layers_j = json::array();
    for (const auto& l : layers)
        layers_j.push_back({{"kind", corex::to_string(l.kind)},
                            {"width", l.width},
                            {"encoder", mlp_to_json(l.encoder)},
                            {"decoder", mlp_to_json(l.decoder)}});
    json j = {{"input_dim", input_dim}, {"likelihood", corex::to_string(likelihood)}, {"layers", layers_j}};
    if (fixed_x_log_var) j["fixed_x_log_var"] = *fixed_x_log_var;
    return j.dump();
}

ModelSpec ModelSpec::from_json(std::string_view text) {
    ModelSpec s;
    try {
        const json j = json::parse(text);
        s.input_dim = j.at("input_dim").get<std::size_t>();
        s.likelihood = likelihood_from_string(j.at("likelihood").get<std::string>());
        if (j.contains("fixed_x_log_var")) s.fixed_x_log_var = j.at("fixed_x_log_var").get<double>();
        for (const auto& l : j.at("layers")) {
            LayerSpec L;
            L.kind = latent_kind_from_string(l.at("kind").get<std::string>());
            L.width = l.at("width").get<std::size_t>();
            L.encoder = mlp_from_json(l.at("encoder"));
            L.decoder = mlp_from_json(l.at("decoder"));
            s.layers.push_back(std::move(L));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("model spec: ") + e.what());
    }
    s.validate();
    return s;
}

ModelSpec make_model_spec(std::size_t input_dim, Likelihood likelihood, const std::vector<LayerConfig>& layers) {
    ModelSpec s;
    s.input_dim = input_dim;
    s.likelihood = likelihood;
    for (const auto& c : layers) {
        LayerSpec L;
        L.kind = c.kind;
        L.width = c.width;
        s.layers.push_back(L);
    }
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        auto& L = s.layers[l];
        if (L.width == 0) throw ConfigError("layer " + std::to_string(l) + ": width must be positive");
        L.encoder = make_mlp(s.below_width(l), layers[l].encoder_hidden, encoder_heads(L), layers[l].activation);
        L.decoder = make_mlp(L.width, layers[l].decoder_hidden, decoder_heads(s, l), layers[l].activation);
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------

HierarchicalModel::HierarchicalModel(ModelSpec spec, Rng& init_rng) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
        init_params(spec_.layers[l].encoder, encoder_id(l), init_rng, params_);
        init_params(spec_.layers[l].decoder, decoder_id(l), init_rng, params_);
    }
    if (spec_.likelihood == Likelihood::gaussian && !spec_.fixed_x_log_var)
        params_.add(kLikelihoodLogVarKey, Tensor::zeros({1, spec_.input_dim}));
}

HierarchicalModel::HierarchicalModel(ModelSpec spec, ParameterStore params)
    : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    Rng scratch(0);
    HierarchicalModel reference(spec_, scratch);
    const auto& want = reference.params_.tensors();
    const auto& have = params_.tensors();
    for (const auto& [key, t] : want) {
        auto it = have.find(key);
        if (it == have.end()) throw ShapeError("model parameters: missing '" + key + "'");
        if (it->second.shape() != t.shape())
            throw ShapeError("model parameters: '" + key + "' has shape " + shape_str(it->second.shape()) +
                             ", expected " + shape_str(t.shape()));
    }
    for (const auto& [key, t] : have)
        if (!want.count(key)) throw ShapeError("model parameters: unexpected '" + key + "'");
}

std::uint32_t HierarchicalModel::fingerprint() const {
    io::ByteWriter w;
    for (const auto& [key, t] : params_.tensors()) {
        w.str(key);
        for (double v : t.values()) w.f64(v);
    }
    return io::crc32(w.bytes());
}

void HierarchicalModel::save(const std::filesystem::path& path) const { save_params(params_, path, spec_.to_json()); }

HierarchicalModel HierarchicalModel::load(const std::filesystem::path& path) {
    Checkpoint c = load_params(path);
    return HierarchicalModel(ModelSpec::from_json(c.header), std::move(c.params));
}

HierarchicalModel extend_model(const HierarchicalModel& base, const LayerConfig& layer, Rng& init_rng) {
    const ModelSpec& b = base.spec();
    if (b.top().kind == LatentKind::categorical) throw ConfigError("extend_model: cannot stack above a categorical layer");
    std::vector<LayerConfig> cfgs;
    for (const auto& l : b.layers) cfgs.push_back({l.kind, l.width, {}, {}, Activation::relu});
    cfgs.push_back(layer);
    ModelSpec spec = b;
    ModelSpec top = make_model_spec(b.input_dim, b.likelihood, cfgs);
    spec.layers.push_back(top.layers.back());
    spec.validate();
    HierarchicalModel out(spec, init_rng);
    for (const auto& [key, t] : base.params().tensors()) out.params().set(key, t);
    const std::size_t l = spec.num_layers() - 1;
    const auto& L = spec.layers[l];
    for (const auto& [id, mlp] : {std::pair{encoder_id(l), &L.encoder}, std::pair{decoder_id(l), &L.decoder}}) {
        const std::size_t last = mlp->num_linear() - 1;
        for (const char* role : {"W", "b"}) {
            const std::string key = param_key(id, last, role);
            out.params().set(key, Tensor::zeros(out.params().get(key).shape()));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Tensor XLikelihood::log_prob(const Tensor& x) const {
    if (kind == Likelihood::bernoulli) return bernoulli_log_prob(*bernoulli, x);
    return gauss_log_prob(*gaussian, x);
}

Tensor XLikelihood::mean() const {
    if (kind == Likelihood::bernoulli) return bernoulli->probs();
    return gaussian->mean;
}

namespace {

void check_rows(const Tensor& t, std::size_t width, const char* what) {
    if (t.rank() != 2 || t.cols() != width)
        throw ShapeError(std::string(what) + ": expected [rows x " + std::to_string(width) + "], got " +
                         shape_str(t.shape()));
}

Tensor broadcast_rows(const Tensor& row, std::size_t rows) { return Tensor::zeros({rows, row.cols()}) + row; }

}  // namespace

Tensor one_hot(std::size_t rows, std::size_t k, std::size_t hot) {
    if (hot >= k) throw std::out_of_range("one_hot: index out of range");
    std::vector<double> v(rows * k, 0.0);
    for (std::size_t r = 0; r < rows; ++r) v[r * k + hot] = 1.0;
    return Tensor::matrix(rows, k, std::move(v));
}

EncodePath encode(const ModelSpec& spec, const ParamMap& params, const Tensor& x, Rng& rng, std::size_t mc,
                  bool use_mean) {
    check_rows(x, spec.input_dim, "encode");
    if (mc == 0) throw std::invalid_argument("encode: mc must be positive");
    EncodePath path;
    path.batch = x.rows();
    path.mc = mc;
    Tensor below = x;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& L = spec.layers[l];
        LayerState st;
        st.kind = L.kind;
        st.input = below;
        auto heads = mlp_forward(L.encoder, encoder_id(l), params, below);
        if (L.kind == LatentKind::categorical) {
            Tensor logits = heads.at("logits");
            // Layer 0 categorical: replicate per MC sample to keep the row layout.
            st.logits = (l == 0 && mc > 1) ? tile_rows(logits, mc) : logits;
            path.layers.push_back(std::move(st));
            break;
        }
        DiagGaussian q(heads.at("mean"), heads.at("log_var"));
        const std::size_t n = (l == 0) ? mc : 1;
        if (use_mean) {
            st.sample = n > 1 ? tile_rows(q.mean, n) : q.mean;
        } else {
            Tensor s = reparam_sample(q, rng, n);
            st.sample = reshape(s, {n * q.rows(), q.width()});
        }
        st.posterior = std::move(q);
        below = st.sample;
        path.layers.push_back(std::move(st));
    }
    return path;
}

XLikelihood decode_x(const ModelSpec& spec, const ParamMap& params, const Tensor& z1) {
    const auto& L = spec.layers.front();
    check_rows(z1, L.width, "decode_x");
    auto heads = mlp_forward(L.decoder, decoder_id(0), params, z1);
    XLikelihood out;
    out.kind = spec.likelihood;
    if (spec.likelihood == Likelihood::bernoulli) {
        out.bernoulli.emplace(heads.at("logits"));
    } else {
        const Tensor& mu = heads.at("mean");
        if (spec.fixed_x_log_var)
            out.gaussian.emplace(mu, Tensor::full(mu.shape(), *spec.fixed_x_log_var));
        else
            out.gaussian.emplace(mu, broadcast_rows(params.at(kLikelihoodLogVarKey), mu.rows()));
    }
    return out;
}

DiagGaussian decode_latent(const ModelSpec& spec, const ParamMap& params, std::size_t layer, const Tensor& value) {
    if (layer == 0 || layer >= spec.layers.size())
        throw std::out_of_range("decode_latent: layer must be in [1, " + std::to_string(spec.layers.size()) + ")");
    const auto& L = spec.layers[layer];
    check_rows(value, L.width, "decode_latent");
    auto heads = mlp_forward(L.decoder, decoder_id(layer), params, value);
    return DiagGaussian(heads.at("mean"), heads.at("log_var"));
}

XLikelihood decode(const ModelSpec& spec, const ParamMap& params, std::size_t from, const Tensor& value, Rng* rng) {
    if (from >= spec.layers.size()) throw std::out_of_range("decode: layer out of range");
    Tensor v = value;
    for (std::size_t l = from; l >= 1; --l) {
        DiagGaussian q = decode_latent(spec, params, l, v);
        v = rng ? reshape(reparam_sample(q, *rng, 1), {q.rows(), q.width()}) : q.mean;
    }
    return decode_x(spec, params, v);
}

MarginalizedTerms decode_marginalized(const ModelSpec& spec, const ParamMap& params, std::size_t layer,
                                      const Tensor& logits, const Tensor& lower) {
    if (layer >= spec.layers.size() || spec.layers[layer].kind != LatentKind::categorical)
        throw std::invalid_argument("decode_marginalized: layer " + std::to_string(layer) + " is not categorical");
    const std::size_t k = spec.layers[layer].width;
    check_rows(logits, k, "decode_marginalized logits");
    check_rows(lower, spec.below_width(layer), "decode_marginalized lower");
    if (logits.rows() != lower.rows()) throw ShapeError("decode_marginalized: row counts differ");
    const std::size_t rows = logits.rows();

    CategoricalPosterior post = categorical_posterior({logits});
    const std::size_t w = spec.below_width(layer);
    const Tensor ones = Tensor::full({1, w}, 1.0);
    std::vector<Tensor> branches;
    branches.reserve(k);
    Tensor weighted;
    for (std::size_t c = 0; c < k; ++c) {
        // The decoder output does not depend on the row, so evaluate one row.
        Tensor e = one_hot(1, k, c);
        Tensor ll;
        if (layer == 0) {
            XLikelihood lik = decode_x(spec, params, e);
            XLikelihood wide = lik;
            if (lik.kind == Likelihood::bernoulli)
                wide.bernoulli.emplace(broadcast_rows(lik.bernoulli->logits, rows));
            else
                wide.gaussian.emplace(broadcast_rows(lik.gaussian->mean, rows),
                                      broadcast_rows(lik.gaussian->log_var, rows));
            ll = wide.log_prob(lower);
        } else {
            DiagGaussian q = decode_latent(spec, params, layer, e);
            DiagGaussian wide(broadcast_rows(q.mean, rows), broadcast_rows(q.log_var, rows));
            ll = gauss_log_prob(wide, lower);
        }
        branches.push_back(reshape(sum(ll, 1), {rows, 1}));
        Tensor term = matmul(slice_cols(post.probs, c, 1), ones) * ll;
        weighted = c == 0 ? term : weighted + term;
    }
    MarginalizedTerms out;
    out.probs = post.probs;
    out.branch_log_lik = concat_cols(branches);
    out.expected_log_lik_dims = weighted;
    out.expected_log_lik = sum(weighted, 1);
    out.kl_uniform = std::log(static_cast<double>(k)) - post.entropy;
    return out;
}

std::vector<std::size_t> cluster_assign(const HierarchicalModel& model, const Tensor& x) {
    const auto& spec = model.spec();
    if (spec.top().kind != LatentKind::categorical)
        throw ConfigError("cluster_assign: top layer is not categorical");
    Rng unused(0);
    EncodePath p = encode(spec, model.params().tensors(), x, unused, 1, true);
    const Tensor& logits = p.layers.back().logits;
    const std::size_t k = logits.cols();
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        out[r] = best;
    }
    return out;
}

namespace {

// Minimum-cost perfect assignment on an n x n matrix; returns column per row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) assign[p[j] - 1] = j - 1;
    return assign;
}

}  // namespace

double mapped_cluster_accuracy(std::span<const std::size_t> clusters, std::span<const std::int64_t> labels) {
    if (clusters.size() != labels.size()) throw std::invalid_argument("mapped_cluster_accuracy: size mismatch");
    if (clusters.empty()) throw std::invalid_argument("mapped_cluster_accuracy: empty input");
    std::map<std::size_t, std::size_t> cl_index;
    std::map<std::int64_t, std::size_t> lb_index;
    for (auto c : clusters) cl_index.emplace(c, cl_index.size());
    for (auto l : labels) lb_index.emplace(l, lb_index.size());
    const std::size_t n = std::max(cl_index.size(), lb_index.size());
    std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < clusters.size(); ++i) counts[cl_index[clusters[i]]][lb_index[labels[i]]] += 1.0;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i][j] = -counts[i][j];
    const auto assign = hungarian(cost);
    double hit = 0.0;
    for (std::size_t i = 0; i < n; ++i) hit += counts[i][assign[i]];
    return hit / static_cast<double>(clusters.size());
}

}  // namespace corex
