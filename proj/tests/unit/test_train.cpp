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
#include <limits>
#include <sstream>

#include "corex/error.hpp"
#include "corex/train.hpp"
#include "helpers.hpp"

using namespace corex;

namespace {

Dataset small_gaussian(std::uint64_t seed) {
    SyntheticSpec s;
    s.n = 300;
    s.observed_dim = 6;
    s.latent_dim = 2;
    s.mixing_seed = 3;
    Rng rng(seed, streams::kData);
    return generate(s, rng);
}

ModelSpec small_spec() {
    return make_model_spec(6, Likelihood::gaussian, {{LatentKind::continuous, 2, {8}, {8}, Activation::tanh}});
}

TrainConfig small_train(std::size_t epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 64;
    t.eval_size = 200;
    t.eval_mc = 2;
    t.seed = 11;
    return t;
}

std::string metrics_text(const std::vector<EpochMetrics>& ms, std::size_t layers) {
    std::ostringstream os;
    write_metrics_header(os, layers);
    for (const auto& m : ms) write_metrics_row(os, m);
    return os.str();
}

}  // namespace

TEST_CASE("training is deterministic given the seed") {
    const Dataset data = small_gaussian(1);
    ObjectiveConfig cfg;
    cfg.entropy_offsets = data.per_dim_entropy;
    auto run = [&](std::uint64_t seed) {
        Rng init(seed, streams::kInit);
        HierarchicalModel m(small_spec(), init);
        TrainConfig t = small_train(3);
        t.seed = seed;
        return std::pair{metrics_text(train_model(m, data, cfg, t), 1), test::FlatParams(m.params().tensors()).values.to_vector()};
    };
    const auto a = run(11), b = run(11), c = run(12);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(a.first != c.first);
    CHECK(std::count(a.first.begin(), a.first.end(), '\n') == 4);
}

TEST_CASE("zero epochs leaves the model untouched") {
    const Dataset data = small_gaussian(2);
    Rng init(5);
    HierarchicalModel m(small_spec(), init);
    const auto before = test::FlatParams(m.params().tensors()).values.to_vector();
    std::size_t calls = 0;
    const auto ms = train_model(m, data, {}, small_train(0), [&](const EpochMetrics&, const HierarchicalModel&) { ++calls; });
    CHECK(ms.empty());
    CHECK(calls == 0);
    CHECK(test::FlatParams(m.params().tensors()).values.to_vector() == before);
}

TEST_CASE("training improves the bound and reports per-epoch metrics") {
    const Dataset data = small_gaussian(3);
    ObjectiveConfig cfg;
    cfg.entropy_offsets = data.per_dim_entropy;
    Rng init(6);
    HierarchicalModel m(small_spec(), init);
    TrainConfig t = small_train(15);
    t.adam.step_size = 3e-3;
    std::vector<std::size_t> seen;
    const auto ms = train_model(m, data, cfg, t, [&](const EpochMetrics& e, const HierarchicalModel&) { seen.push_back(e.epoch); });
    REQUIRE(ms.size() == 15);
    CHECK(seen.front() == 1);
    CHECK(seen.back() == 15);
    CHECK(ms.back().bound > ms.front().bound);
    for (const auto& e : ms) {
        CHECK(e.bound_se > 0.0);
        REQUIRE(e.gains.size() == 1);
        CHECK(e.gains[0].value == doctest::Approx(e.bound).epsilon(1e-9));
    }
}

TEST_CASE("non-finite objective names the failing term") {
    const Dataset data = small_gaussian(4);
    Rng init(7);
    HierarchicalModel m(small_spec(), init);
    const std::string key = param_key(decoder_id(0), 1, "b");
    std::vector<double> b = m.params().get(key).to_vector();
    b[2] = std::numeric_limits<double>::quiet_NaN();
    m.params().set(key, Tensor({b.size()}, b));
    try {
        train_model(m, data, {}, small_train(1));
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch 1") != std::string::npos);
        CHECK(msg.find("reconstruction term (x dim 2)") != std::string::npos);
    }
}

TEST_CASE("training configuration errors") {
    const Dataset data = small_gaussian(5);
    Rng init(8);
    HierarchicalModel m(small_spec(), init);
    TrainConfig t = small_train(1);
    t.batch_size = 0;
    CHECK_THROWS_AS(train_model(m, data, {}, t), ConfigError);
    t = small_train(1);
    t.freeze_layers = 2;
    CHECK_THROWS_AS(train_model(m, data, {}, t), ConfigError);

    Rng init2(9);
    HierarchicalModel two(make_model_spec(6, Likelihood::gaussian,
                                          {{LatentKind::continuous, 3, {8}, {8}, Activation::tanh},
                                           {LatentKind::continuous, 2, {8}, {8}, Activation::tanh}}),
                          init2);
    CHECK_THROWS_AS(train_model(two, data, {}, small_train(1)), ConfigError);
    CHECK(objective_kind_from_string("stacked") == ObjectiveKind::stacked);
    CHECK_THROWS_AS(objective_kind_from_string("elbo"), ConfigError);
}

TEST_CASE("frozen layers keep their parameters") {
    const Dataset data = small_gaussian(6);
    Rng init(10);
    HierarchicalModel two(make_model_spec(6, Likelihood::gaussian,
                                          {{LatentKind::continuous, 3, {8}, {8}, Activation::tanh},
                                           {LatentKind::continuous, 2, {8}, {8}, Activation::tanh}}),
                          init);
    const std::string bottom = param_key(encoder_id(0), 0, "W"), top = param_key(encoder_id(1), 0, "W");
    const auto b0 = two.params().get(bottom).to_vector(), t0 = two.params().get(top).to_vector();
    TrainConfig t = small_train(2);
    t.objective = ObjectiveKind::stacked;
    t.freeze_layers = 1;
    train_model(two, data, {}, t);
    CHECK(two.params().get(bottom).to_vector() == b0);
    CHECK(two.params().get(top).to_vector() != t0);
}
