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

#include "corex/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace corex {

std::string to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::corex: return "corex";
        case ObjectiveKind::anchor: return "anchor";
        case ObjectiveKind::stacked: return "stacked";
    }
    return "?";
}

ObjectiveKind objective_kind_from_string(std::string_view s) {
    if (s == "corex") return ObjectiveKind::corex;
    if (s == "anchor") return ObjectiveKind::anchor;
    if (s == "stacked") return ObjectiveKind::stacked;
    throw ConfigError("unknown objective kind '" + std::string(s) + "'");
}

ObjectiveValue objective_value(ObjectiveKind kind, const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                               const ObjectiveConfig& config, Rng& rng) {
    switch (kind) {
        case ObjectiveKind::corex: return corex_bound(spec, params, batch, config, rng);
        case ObjectiveKind::anchor: return anchor_bound(spec, params, batch, config, rng);
        case ObjectiveKind::stacked: return stacked_bound(spec, params, batch, config, rng);
    }
    throw ConfigError("unknown objective kind");
}

Evaluation evaluate(const HierarchicalModel& model, const Tensor& data, const ObjectiveConfig& config, Rng& rng,
                    std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");
    ObjectiveConfig cfg = config;
    cfg.kl_weights.clear();
    const std::size_t L = model.spec().num_layers();
    std::vector<double> totals;
    std::vector<std::vector<double>> gains(L);
    Evaluation ev;
    for (std::size_t b = 0; b < n; b += batch_size) {
        const std::size_t count = std::min(batch_size, n - b);
        ObjectiveValue v = stacked_bound(model.spec(), model.params().tensors(), slice_rows(data, b, count), cfg, rng);
        totals.insert(totals.end(), v.per_example.begin(), v.per_example.end());
        for (std::size_t l = 0; l < L; ++l)
            gains[l].insert(gains[l].end(), v.per_example_gain[l].begin(), v.per_example_gain[l].end());
        const double w = static_cast<double>(count);
        if (ev.reconstruction.empty()) {
            ev.reconstruction.assign(v.reconstruction.size(), 0.0);
            ev.kl.assign(v.kl.size(), 0.0);
        }
        for (std::size_t i = 0; i < v.reconstruction.size(); ++i) ev.reconstruction[i] += w * v.reconstruction[i];
        for (std::size_t i = 0; i < v.kl.size(); ++i) ev.kl[i] += w * v.kl[i];
    }
    const double dn = static_cast<double>(n);
    for (double& r : ev.reconstruction) r /= dn;
    for (double& k : ev.kl) k /= dn;
    const auto stats = [dn](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / dn;
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        const double se = v.size() > 1 ? std::sqrt(ss / (dn - 1.0) / dn) : 0.0;
        return LayerGain{m, se};
    };
    const LayerGain t = stats(totals);
    ev.bound = t.value;
    ev.std_err = t.std_err;
    for (const auto& g : gains) ev.gains.push_back(stats(g));
    ev.examples = n;
    return ev;
}

void write_metrics_header(std::ostream& os, std::size_t layers) {
    os << "epoch,bound,bound_se,reconstruction,kl";
    for (std::size_t l = 1; l <= layers; ++l) os << ",gain_" << l << ",gain_" << l << "_se";
    os << '\n';
}

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
    std::ostringstream line;
    line.precision(17);
    line << m.epoch << ',' << m.bound << ',' << m.bound_se << ',' << m.reconstruction << ',' << m.kl;
    for (const auto& g : m.gains) line << ',' << g.value << ',' << g.std_err;
    os << line.str() << '\n';
}

namespace {

std::string nonfinite_term(const ObjectiveValue& v) {
    for (std::size_t i = 0; i < v.reconstruction.size(); ++i)
        if (!std::isfinite(v.reconstruction[i])) return "reconstruction term (x dim " + std::to_string(i) + ")";
    for (std::size_t i = 0; i < v.kl.size(); ++i)
        if (!std::isfinite(v.kl[i])) return "KL term (latent dim " + std::to_string(i) + ")";
    for (std::size_t l = 0; l < v.per_layer_gain.size(); ++l)
        if (!std::isfinite(v.per_layer_gain[l].value)) return "layer " + std::to_string(l + 1) + " gain";
    return "total";
}

bool frozen_key(const std::string& key, std::size_t freeze_layers) {
    if (key == kLikelihoodLogVarKey) return freeze_layers > 0;
    for (std::size_t l = 0; l < freeze_layers; ++l) {
        const std::string e = encoder_id(l) + "/", d = decoder_id(l) + "/";
        if (key.compare(0, e.size(), e) == 0 || key.compare(0, d.size(), d) == 0) return true;
    }
    return false;
}

}  // namespace

std::vector<EpochMetrics> train_model(HierarchicalModel& model, const Dataset& data, const ObjectiveConfig& config,
                                      const TrainConfig& train, const EpochCallback& on_epoch) {
    const ModelSpec& spec = model.spec();
    config.validate(spec);
    if (data.d() != spec.input_dim)
        throw ShapeError("dataset has " + std::to_string(data.d()) + " columns, model expects " +
                         std::to_string(spec.input_dim));
    if (data.n() == 0) throw std::invalid_argument("train: empty dataset");
    if (train.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (train.freeze_layers > spec.num_layers()) throw ConfigError("freeze_layers exceeds the layer count");
    if (train.objective != ObjectiveKind::stacked && spec.num_layers() != 1)
        throw ConfigError(to_string(train.objective) + " objective requires a single-layer model; use stacked");

    const Rng root(train.seed);
    BatchIterator batches(data.n(), train.batch_size, root.substream(streams::kShuffle));
    Rng noise = root.substream(streams::kNoise);

    // Fixed evaluation subset and noise.
    Rng pick = root.substream(streams::kEval);
    std::vector<std::size_t> perm(data.n());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[pick.below(i)]);
    perm.resize(std::min(train.eval_size == 0 ? data.n() : train.eval_size, data.n()));
    const Tensor eval_data = gather_rows(data.values, perm);
    ObjectiveConfig eval_cfg = config;
    eval_cfg.mc_samples = train.eval_mc == 0 ? 1 : train.eval_mc;
    const Rng eval_noise = root.substream(streams::kEval).substream(1);

    AdamState adam;
    adam.config = train.adam;
    const auto trainable = [&](const std::string& key) { return !frozen_key(key, train.freeze_layers); };

    std::vector<EpochMetrics> out;
    for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::size_t step = 0;
        for (const auto& idx : batches.next_epoch()) {
            ++step;
            Tape tape;
            ParamMap params = model.params().watch(tape, trainable);
            const Tensor batch = gather_rows(data.values, idx);
            ObjectiveValue v = objective_value(train.objective, spec, params, batch, config, noise);
            if (!std::isfinite(v.total.item()))
                throw NumericError("non-finite objective at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(step) + ": " + nonfinite_term(v));
            auto grads = tape.backward(-v.total);
            adam_step(adam, model.params(), grads);
        }
        Rng r = eval_noise;
        const Evaluation ev = evaluate(model, eval_data, eval_cfg, r);
        EpochMetrics m;
        m.epoch = epoch;
        m.bound = ev.bound;
        m.bound_se = ev.std_err;
        m.reconstruction = std::accumulate(ev.reconstruction.begin(), ev.reconstruction.end(), 0.0);
        m.kl = std::accumulate(ev.kl.begin(), ev.kl.end(), 0.0);
        m.gains = ev.gains;
        if (!std::isfinite(m.bound))
            throw NumericError("non-finite evaluation bound at epoch " + std::to_string(epoch));
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(m);
        if (on_epoch) on_epoch(m, model);
    }
    return out;
}

}  // namespace corex
