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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "corex/error.hpp"
#include "corex/models.hpp"
#include "helpers.hpp"

using namespace corex;

namespace {

LayerConfig cont(std::size_t w, std::size_t h = 6, Activation a = Activation::tanh) {
    return {LatentKind::continuous, w, {h}, {h}, a};
}
LayerConfig cat(std::size_t k, std::size_t h = 6) { return {LatentKind::categorical, k, {h}, {h}, Activation::tanh}; }

// Zeroes the final linear layer of `id` and sets its bias.
void set_output(HierarchicalModel& m, const std::string& id, std::size_t last, std::vector<double> bias) {
    const std::string w = param_key(id, last, "W"), b = param_key(id, last, "b");
    m.params().set(w, Tensor::zeros(m.params().get(w).shape()));
    m.params().set(b, Tensor(m.params().get(b).shape(), std::move(bias)));
}

double exhaustive_accuracy(const std::vector<std::size_t>& c, const std::vector<std::int64_t>& y, std::size_t k) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < c.size(); ++i) hits += perm[c[i]] == static_cast<std::size_t>(y[i]);
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(c.size());
}

}  // namespace

TEST_CASE("spec construction, validation and JSON") {
    const ModelSpec s = make_model_spec(5, Likelihood::bernoulli, {cont(3), cat(4)});
    CHECK(s.num_layers() == 2);
    CHECK(s.top_prior() == TopPrior::uniform_categorical);
    CHECK(s.layers[0].encoder.output_heads.size() == 2);
    CHECK(s.layers[1].decoder.output_heads[1].name == "log_var");
    const ModelSpec back = ModelSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK_THROWS_AS(make_model_spec(5, Likelihood::bernoulli, {cat(3), cont(2)}), ConfigError);
    CHECK_THROWS_AS(make_model_spec(5, Likelihood::bernoulli, {cont(0)}), ConfigError);
    CHECK_THROWS_AS(ModelSpec::from_json("{not json"), FormatError);
    ModelSpec f = make_model_spec(5, Likelihood::bernoulli, {cont(2)});
    f.fixed_x_log_var = 0.0;
    CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("encode: shapes, determinism and the variance floor") {
    Rng init(1);
    HierarchicalModel m(make_model_spec(4, Likelihood::gaussian, {cont(3), cont(2)}), init);
    Rng xr(2);
    const Tensor x = standard_normal(xr, {5, 4});
    Rng a(9), b(9);
    const EncodePath p = encode(m.spec(), m.params().tensors(), x, a, 3);
    const EncodePath q = encode(m.spec(), m.params().tensors(), x, b, 3);
    REQUIRE(p.layers.size() == 2);
    CHECK(p.layers[0].sample.shape() == Shape{15, 3});
    CHECK(p.layers[1].sample.shape() == Shape{15, 2});
    CHECK(p.layers[0].posterior->rows() == 5);
    CHECK(p.layers[1].posterior->rows() == 15);
    CHECK(p.layers[1].sample.to_vector() == q.layers[1].sample.to_vector());

    Rng i1(3);
    HierarchicalModel one(make_model_spec(4, Likelihood::gaussian, {cont(3)}), i1);
    const EncodePath single = encode(one.spec(), one.params().tensors(), x, a);
    CHECK(single.layers.size() == 1);
    CHECK(single.layers[0].posterior.has_value());

    // Log-variance head pushed far below the clamp floor: samples stay within
    // a few floor standard deviations of the means.
    set_output(one, encoder_id(0), 1, {0.1, -0.2, 0.3, -30, -30, -30});
    const EncodePath d = encode(one.spec(), one.params().tensors(), x, a, 4);
    const double sigma = std::exp(-5.0);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(d.layers[0].sample.at(r, j) - d.layers[0].posterior->mean.at(r % 5, j)) < 6.0 * sigma);
}

TEST_CASE("decoders") {
    Rng init(4);
    HierarchicalModel m(make_model_spec(4, Likelihood::bernoulli, {cont(3), cont(2)}), init);
    set_output(m, decoder_id(0), 1, {0, 0, 0, 0});
    Rng zr(5);
    const Tensor z1 = standard_normal(zr, {6, 3});
    const XLikelihood flat = decode_x(m.spec(), m.params().tensors(), z1);
    for (double l : flat.bernoulli->logits.values()) CHECK(l == 0.0);

    Rng i2(6);
    HierarchicalModel g(make_model_spec(4, Likelihood::gaussian, {cont(3), cont(2)}), i2);
    const Tensor z2 = standard_normal(zr, {6, 2});
    const auto& P = g.params().tensors();
    const DiagGaussian mid = decode_latent(g.spec(), P, 1, z2);
    const XLikelihood chain = decode(g.spec(), P, 1, z2);
    const XLikelihood direct = decode_x(g.spec(), P, mid.mean);
    CHECK(chain.mean().to_vector() == direct.mean().to_vector());

    // Jacobian of the decoder chain.
    const Tensor x = standard_normal(zr, {6, 4});
    auto f = [&](const Tensor& v) { return sum(decode(g.spec(), P, 1, v).log_prob(x)); };
    CHECK(grad_check(f, z2) < 1e-5);
}

TEST_CASE("decode_marginalized matches branch decoding") {
    Rng init(7);
    Rng xr(8);
    const Tensor x = test::random_binary(xr, 5, 4);

    // K = 1 reduces to plain decoding.
    HierarchicalModel k1(make_model_spec(4, Likelihood::bernoulli, {cat(1)}), init);
    const auto& P1 = k1.params().tensors();
    const MarginalizedTerms t1 = decode_marginalized(k1.spec(), P1, 0, Tensor::zeros({5, 1}), x);
    const Tensor direct = sum(decode_x(k1.spec(), P1, one_hot(5, 1, 0)).log_prob(x), 1);
    for (std::size_t r = 0; r < 5; ++r) CHECK(t1.expected_log_lik[r] == doctest::Approx(direct[r]).epsilon(1e-14));
    for (double k : t1.kl_uniform.values()) CHECK(std::abs(k) < 1e-15);

    // Uniform logits with identical branch decoders.
    HierarchicalModel k2(make_model_spec(4, Likelihood::bernoulli, {cat(2)}), init);
    const std::string w0 = param_key(decoder_id(0), 0, "W");
    k2.params().set(w0, Tensor::zeros(k2.params().get(w0).shape()));
    const auto& P2 = k2.params().tensors();
    const MarginalizedTerms t2 = decode_marginalized(k2.spec(), P2, 0, Tensor::zeros({5, 2}), x);
    for (std::size_t r = 0; r < 5; ++r)
        CHECK(t2.expected_log_lik[r] == doctest::Approx(t2.branch_log_lik.at(r, 0)).epsilon(1e-14));

    // One dominant logit among ten.
    Rng i3(9);
    HierarchicalModel k10(make_model_spec(3, Likelihood::gaussian, {cont(4), cat(10)}), i3);
    const auto& P = k10.params().tensors();
    Rng zr(10);
    const Tensor z = standard_normal(zr, {5, 4});
    std::vector<double> l(50, 0.0);
    for (std::size_t r = 0; r < 5; ++r) l[r * 10 + 6] = 15.0;
    const MarginalizedTerms t = decode_marginalized(k10.spec(), P, 1, Tensor::matrix(5, 10, l), z);
    const Tensor branch = sum(gauss_log_prob(decode_latent(k10.spec(), P, 1, one_hot(5, 10, 6)), z), 1);
    for (std::size_t r = 0; r < 5; ++r) CHECK(std::abs(t.expected_log_lik[r] - branch[r]) < 1e-5);
}

TEST_CASE("cluster assignment and mapped accuracy") {
    Rng init(11);
    HierarchicalModel m(make_model_spec(4, Likelihood::bernoulli, {cont(3), cat(10)}), init);
    set_output(m, encoder_id(1), 1, std::vector<double>(10, 0.0));
    Rng xr(12);
    const Tensor x = test::random_binary(xr, 7, 4);
    for (auto c : cluster_assign(m, x)) CHECK(c == 0);
    std::vector<double> b(10, 0.0);
    b[7] = 15.0;
    set_output(m, encoder_id(1), 1, b);
    for (auto c : cluster_assign(m, x)) CHECK(c == 7);

    Rng one(13);
    HierarchicalModel flat(make_model_spec(4, Likelihood::bernoulli, {cont(3)}), one);
    CHECK_THROWS_AS(cluster_assign(flat, x), ConfigError);

    Rng rng(14);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t k = 2 + rng.below(5), n = 1 + rng.below(40);
        std::vector<std::size_t> c(n);
        std::vector<std::int64_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = rng.below(k);
            y[i] = static_cast<std::int64_t>(rng.below(k));
        }
        CHECK(mapped_cluster_accuracy(c, y) == doctest::Approx(exhaustive_accuracy(c, y, k)).epsilon(1e-15));
    }
    const std::vector<std::size_t> c{2, 2, 0, 1};
    const std::vector<std::int64_t> y{5, 5, 3, 9};
    CHECK(mapped_cluster_accuracy(c, y) == 1.0);
}

TEST_CASE("checkpoint round trip and architecture checks") {
    Rng init(15);
    ModelSpec spec = make_model_spec(6, Likelihood::gaussian, {cont(3), cat(4)});
    HierarchicalModel m(spec, init);
    const auto dir = std::filesystem::temp_directory_path() / "corexvae_unit";
    std::filesystem::create_directories(dir);
    m.save(dir / "model.cxae");
    const HierarchicalModel back = HierarchicalModel::load(dir / "model.cxae");
    CHECK(back.params().identical(m.params()));
    CHECK(back.fingerprint() == m.fingerprint());
    CHECK(back.spec().to_json() == m.spec().to_json());

    ParameterStore missing;
    CHECK_THROWS(HierarchicalModel(spec, missing));
}

TEST_CASE("extend_model starts the new layer at the standard prior") {
    Rng init(16);
    HierarchicalModel base(make_model_spec(4, Likelihood::gaussian, {cont(3)}), init);
    Rng r2(17);
    const HierarchicalModel ext = extend_model(base, cont(2), r2);
    CHECK(ext.spec().num_layers() == 2);
    for (const auto& [k, t] : base.params().tensors()) CHECK(ext.params().get(k).to_vector() == t.to_vector());
    Rng zr(18);
    const Tensor z2 = standard_normal(zr, {5, 2});
    const auto& P = ext.params().tensors();
    Rng e2(20);
    const Tensor x = standard_normal(zr, {5, 4});
    const EncodePath q = encode(ext.spec(), P, x, e2);
    for (double v : q.layers[1].posterior->mean.values()) CHECK(v == 0.0);
    for (double v : q.layers[1].posterior->log_var.values()) CHECK(v == 0.0);
    const DiagGaussian d = decode_latent(ext.spec(), P, 1, z2);
    for (double v : d.mean.values()) CHECK(v == 0.0);
    for (double v : d.log_var.values()) CHECK(v == 0.0);
}
