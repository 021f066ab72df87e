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
#include <filesystem>
#include <fstream>

#include "corex/error.hpp"
#include "corex/nn.hpp"
#include "corex/rng.hpp"

using namespace corex;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "corexvae_unit";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("init_params bounds and determinism") {
    const MlpSpec spec = make_mlp(512, {}, {{"out", 512}});
    ParameterStore a, b;
    Rng r1(11, 1), r2(11, 1);
    init_params(spec, "m", r1, a);
    init_params(spec, "m", r2, b);
    CHECK(a.identical(b));
    const double bound = std::sqrt(6.0 / 1024.0);
    for (double w : a.get(param_key("m", 0, "W")).values()) CHECK(std::abs(w) <= bound);
    for (double v : a.get(param_key("m", 0, "b")).values()) CHECK(v == 0.0);

    ParameterStore c;
    Rng r3(11, 1);
    init_params(make_mlp(3, {}, {{"out", 1}}), "w1", r3, c);
    CHECK(c.get(param_key("w1", 0, "b")).item() == 0.0);
}

TEST_CASE("mlp_forward: zero network, single linear layer, relu unit") {
    const MlpSpec lin = make_mlp(3, {}, {{"a", 1}, {"b", 2}}, Activation::identity);
    ParameterStore s;
    Rng rng(1);
    init_params(lin, "f", rng, s);
    Rng xr(2);
    const Tensor x = standard_normal(xr, {4, 3});
    {
        ParamMap zero = s.tensors();
        for (auto& [k, t] : zero) t = Tensor::zeros(t.shape());
        auto out = mlp_forward(lin, "f", zero, x);
        for (double v : out.at("a").values()) CHECK(v == 0.0);
        for (double v : out.at("b").values()) CHECK(v == 0.0);
    }
    ParamMap p = s.tensors();
    p[param_key("f", 0, "b")] = Tensor::from_rows({{0.5, -1.0, 2.0}});
    const auto out = mlp_forward(lin, "f", p, x);
    const Tensor full = matmul(x, p.at(param_key("f", 0, "W"))) + p.at(param_key("f", 0, "b"));
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(out.at("a").at(r, 0) == doctest::Approx(full.at(r, 0)).epsilon(1e-14));
        CHECK(out.at("b").at(r, 1) == doctest::Approx(full.at(r, 2)).epsilon(1e-14));
    }

    const MlpSpec unit = make_mlp(1, {1}, {{"y", 1}}, Activation::relu);
    ParamMap q{{param_key("u", 0, "W"), Tensor::from_rows({{1}})},
               {param_key("u", 0, "b"), Tensor::from_rows({{0}})},
               {param_key("u", 1, "W"), Tensor::from_rows({{1}})},
               {param_key("u", 1, "b"), Tensor::from_rows({{0}})}};
    const auto y = mlp_forward(unit, "u", q, Tensor::from_rows({{-1}, {2}})).at("y");
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(1, 0) == 2.0);
}

TEST_CASE("adam_step: zero gradient, first step size, quadratic bowl") {
    ParameterStore s;
    s.add("w", Tensor({3}, {1.0, -2.0, 3.0}));
    AdamState st;
    st.config.step_size = 0.01;
    adam_step(st, s, {{"w", Tensor::zeros({3})}});
    CHECK(s.get("w").to_vector() == std::vector<double>{1.0, -2.0, 3.0});

    for (double g : {1e-3, 1.0, 1e3}) {
        ParameterStore p;
        p.add("w", Tensor({1}, {0.0}));
        AdamState a;
        a.config.step_size = 0.01;
        adam_step(a, p, {{"w", Tensor({1}, {g})}});
        CHECK(std::abs(p.get("w")[0]) == doctest::Approx(0.01).epsilon(1e-4));
    }

    ParameterStore bowl;
    bowl.add("w", Tensor({2}, {3.0, -4.0}));
    AdamState a;
    a.config.step_size = 0.05;
    const double target[2] = {1.0, 2.0};
    double prev = 1e300;
    std::size_t increases = 0;
    for (int t = 0; t < 500; ++t) {
        Tape tape;
        ParamMap w = bowl.watch(tape);
        const Tensor loss = sum(square(w.at("w") - Tensor({2}, {target[0], target[1]})));
        if (loss.item() > prev) ++increases;
        prev = loss.item();
        adam_step(a, bowl, tape.backward(loss));
    }
    CHECK(std::abs(bowl.get("w")[0] - 1.0) < 1e-3);
    CHECK(std::abs(bowl.get("w")[1] - 2.0) < 1e-3);
    CHECK(increases < 250);
}

TEST_CASE("checkpoint round trip, truncation and shape mismatch") {
    ParameterStore s;
    Rng rng(4);
    init_params(make_mlp(5, {7}, {{"h", 3}}), "enc0", rng, s);
    const fs::path p = temp_file("ckpt.cxae");
    save_params(s, p, "header text");
    const Checkpoint back = load_params(p);
    CHECK(back.params.identical(s));
    CHECK(back.header == "header text");

    ParameterStore same;
    Rng r2(99);
    init_params(make_mlp(5, {7}, {{"h", 3}}), "enc0", r2, same);
    CHECK(load_params_into(same, p) == "header text");
    CHECK(same.identical(s));

    ParameterStore other;
    init_params(make_mlp(5, {8}, {{"h", 3}}), "enc0", r2, other);
    CHECK_THROWS_AS(load_params_into(other, p), ShapeError);

    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 5);
    CHECK_THROWS_AS(load_params(p), FormatError);
    save_params(s, p);
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    CHECK_THROWS_AS(load_params(p), ChecksumError);
}

TEST_CASE("parameter store invariants") {
    ParameterStore s;
    s.add("a", Tensor::zeros({2}));
    CHECK_THROWS(s.add("a", Tensor::zeros({2})));
    CHECK_THROWS_AS(s.set("a", Tensor::zeros({3})), ShapeError);
    const auto v = s.version();
    s.set("a", Tensor::full({2}, 1.0));
    CHECK(s.version() > v);
    CHECK(s.parameter_count() == 2);
}
