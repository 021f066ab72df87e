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

#include "corex/nn.hpp"

#include <cmath>
#include <numeric>

#include "binary_io.hpp"

namespace corex {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "?";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) throw ConfigError("MLP needs at least one layer");
    for (std::size_t w : layer_widths) {
        if (w == 0) throw ConfigError("MLP layer widths must be positive");
    }
    if (activations.size() != layer_widths.size() - 2) {
        throw ConfigError("MLP needs one activation per hidden layer");
    }
    std::size_t heads = 0;
    for (const auto& h : output_heads) heads += h.width;
    if (output_heads.empty() || heads != output_width()) {
        throw ConfigError("MLP head widths sum to " + std::to_string(heads) + " but the final layer has " +
                          std::to_string(output_width()) + " outputs");
    }
}

MlpSpec make_mlp(std::size_t input, const std::vector<std::size_t>& hidden, std::vector<OutputHead> heads,
                 Activation activation) {
    MlpSpec spec;
    spec.layer_widths.push_back(input);
    spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(), hidden.end());
    std::size_t out = 0;
    for (const auto& h : heads) out += h.width;
    spec.layer_widths.push_back(out);
    spec.activations.assign(hidden.size(), activation);
    spec.output_heads = std::move(heads);
    spec.validate();
    return spec;
}

std::string param_key(std::string_view model_id, std::size_t layer, std::string_view role) {
    return std::string(model_id) + "/l" + std::to_string(layer) + "/" + std::string(role);
}

// ---------------------------------------------------------------------------

void ParameterStore::add(const std::string& key, Tensor value) {
    if (!params_.emplace(key, value.detach()).second) throw Error("duplicate parameter key '" + key + "'");
    ++version_;
}

void ParameterStore::set(const std::string& key, Tensor value) {
    auto it = params_.find(key);
    if (it == params_.end()) throw Error("unknown parameter '" + key + "'");
    if (it->second.shape() != value.shape()) {
        throw ShapeError("parameter '" + key + "' has shape " + shape_str(it->second.shape()) + ", got " +
                         shape_str(value.shape()));
    }
    it->second = value.detach();
    ++version_;
}

const Tensor& ParameterStore::get(const std::string& key) const {
    auto it = params_.find(key);
    if (it == params_.end()) throw Error("unknown parameter '" + key + "'");
    return it->second;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params_) n += v.size();
    return n;
}

ParamMap ParameterStore::watch(Tape& tape, const std::function<bool(const std::string&)>& trainable) const {
    ParamMap out;
    for (const auto& [key, value] : params_) {
        if (!trainable || trainable(key)) {
            out.emplace(key, tape.parameter(key, value));
        } else {
            out.emplace(key, value);
        }
    }
    return out;
}

bool ParameterStore::identical(const ParameterStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (auto a = params_.begin(), b = other.params_.begin(); a != params_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
        for (std::size_t i = 0; i < a->second.size(); ++i) {
            if (std::bit_cast<std::uint64_t>(a->second[i]) != std::bit_cast<std::uint64_t>(b->second[i])) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

void init_params(const MlpSpec& spec, std::string_view model_id, Rng& rng, ParameterStore& store) {
    spec.validate();
    for (std::size_t l = 0; l < spec.num_linear(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l];
        const std::size_t fan_out = spec.layer_widths[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        store.add(param_key(model_id, l, "W"), uniform(rng, {fan_in, fan_out}, -a, a));
        store.add(param_key(model_id, l, "b"), Tensor::zeros({fan_out}));
    }
}

std::map<std::string, Tensor> mlp_forward(const MlpSpec& spec, std::string_view model_id, const ParamMap& params,
                                          const Tensor& x) {
    if (x.rank() != 2 || x.cols() != spec.input_width()) {
        throw ShapeError("mlp '" + std::string(model_id) + "' expects input width " +
                         std::to_string(spec.input_width()) + ", got shape " + shape_str(x.shape()));
    }
    auto lookup = [&](const std::string& key) -> const Tensor& {
        auto it = params.find(key);
        if (it == params.end()) throw Error("missing parameter '" + key + "'");
        return it->second;
    };
    Tensor h = x;
    for (std::size_t l = 0; l < spec.num_linear(); ++l) {
        h = matmul(h, lookup(param_key(model_id, l, "W"))) + lookup(param_key(model_id, l, "b"));
        if (l + 1 < spec.num_linear()) {
            switch (spec.activations[l]) {
                case Activation::relu: h = relu(h); break;
                case Activation::tanh: h = tanh(h); break;
                case Activation::identity: break;
            }
        }
    }
    std::map<std::string, Tensor> heads;
    if (spec.output_heads.size() == 1) {
        heads.emplace(spec.output_heads[0].name, h);
        return heads;
    }
    std::size_t offset = 0;
    for (const auto& head : spec.output_heads) {
        heads.emplace(head.name, slice_cols(h, offset, head.width));
        offset += head.width;
    }
    return heads;
}

// ---------------------------------------------------------------------------

void adam_step(AdamState& state, ParameterStore& params, const ParamMap& grads) {
    for (const auto& [key, g] : grads) {
        const Tensor& p = params.get(key);
        if (p.shape() != g.shape()) {
            throw ShapeError("gradient for '" + key + "' has shape " + shape_str(g.shape()) + ", parameter has " +
                             shape_str(p.shape()));
        }
        for (double v : g.values()) {
            if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter '" + key + "'");
        }
    }
    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(c.beta1, t);
    const double correct2 = 1.0 - std::pow(c.beta2, t);
    for (const auto& [key, g] : grads) {
        const Tensor& p = params.get(key);
        auto& m = state.first[key];
        auto& v = state.second[key];
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        std::vector<double> next = p.to_vector();
        for (std::size_t i = 0; i < next.size(); ++i) {
            const double gi = g[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            const double mhat = m[i] / correct1;
            const double vhat = v[i] / correct2;
            next[i] -= c.step_size * mhat / (std::sqrt(vhat) + c.epsilon);
        }
        params.set(key, Tensor(p.shape(), std::move(next)));
    }
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kCheckpointMagic = "CXAE";
}

void save_params(const ParameterStore& store, const std::filesystem::path& path, std::string_view header) {
    io::ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.str(header);
    w.u32(static_cast<std::uint32_t>(store.tensors().size()));
    for (const auto& [key, value] : store.tensors()) {
        w.str(key);
        w.u32(static_cast<std::uint32_t>(value.rank()));
        for (std::size_t e : value.shape()) w.u64(e);
        for (double v : value.values()) w.f64(v);
    }
    w.seal();
    w.write_file(path);
}

Checkpoint load_params(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const std::string what = "checkpoint '" + path.string() + "'";
    const auto body = io::verify_sealed(bytes, kCheckpointMagic, what);
    io::ByteReader r(body, what);
    r.raw(kCheckpointMagic.size());
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(what + ": format version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
    }
    Checkpoint ck;
    ck.header = r.str();
    const std::uint32_t count = r.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string key = r.str();
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& e : shape) e = r.u64();
        std::vector<double> values(shape_size(shape));
        for (double& v : values) v = r.f64();
        ck.params.add(key, Tensor(std::move(shape), std::move(values)));
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after parameter records");
    return ck;
}

std::string load_params_into(ParameterStore& store, const std::filesystem::path& path) {
    Checkpoint ck = load_params(path);
    const auto& loaded = ck.params.tensors();
    if (loaded.size() != store.tensors().size()) {
        throw ShapeError("checkpoint has " + std::to_string(loaded.size()) + " parameters, model has " +
                         std::to_string(store.tensors().size()));
    }
    for (const auto& [key, value] : loaded) {
        if (!store.contains(key)) throw ShapeError("checkpoint parameter '" + key + "' is not part of the model");
        if (store.get(key).shape() != value.shape()) {
            throw ShapeError("checkpoint parameter '" + key + "' has shape " + shape_str(value.shape()) +
                             ", model expects " + shape_str(store.get(key).shape()));
        }
    }
    for (const auto& [key, value] : loaded) store.set(key, value);
    return ck.header;
}

}  // namespace corex
