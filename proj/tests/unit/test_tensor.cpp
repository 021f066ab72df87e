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

#include "corex/error.hpp"
#include "corex/rng.hpp"
#include "corex/tensor.hpp"

using namespace corex;

namespace {

std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
    std::vector<double> out(a.rows() * b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            for (std::size_t k = 0; k < a.cols(); ++k) out[i * b.cols() + j] += a.at(i, k) * b.at(k, j);
    return out;
}

}  // namespace

TEST_CASE("matmul against a triple loop") {
    const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    const Tensor b = Tensor::from_rows({{5}, {6}});
    const Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.at(0, 0) == 17.0);
    CHECK(c.at(1, 0) == 39.0);

    const Tensor id = Tensor::from_rows({{1, 0}, {0, 1}});
    CHECK(matmul(id, a).to_vector() == a.to_vector());

    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + rng.below(7), k = 1 + rng.below(7), m = 1 + rng.below(7);
        const Tensor x = standard_normal(rng, {n, k}), y = standard_normal(rng, {k, m});
        const auto expect = naive_matmul(x, y);
        const auto got = matmul(x, y).to_vector();
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("matmul rejects mismatched inner extents") {
    const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("log_sum_exp") {
    CHECK(log_sum_exp(Tensor::from_rows({{0, 0}}), 1).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Tensor::from_rows({{1000, 1000}}), 1).item() ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Tensor::from_rows({{-3.25}}), 1).item() == -3.25);
    const Tensor x = Tensor::from_rows({{1, 2, 3}, {-1, 0, 5}});
    const Tensor l = log_sum_exp(x, 1);
    CHECK(l.shape() == Shape{2});
    CHECK(l[1] == doctest::Approx(std::log(std::exp(-1.0) + 1.0 + std::exp(5.0))));
}

TEST_CASE("backward on hand-differentiable losses") {
    {
        Tape tape;
        const Tensor w = tape.parameter("w", Tensor({3}, {0.5, -1, 2}));
        const auto g = tape.backward(sum(w));
        CHECK(g.at("w").to_vector() == std::vector<double>{1, 1, 1});
    }
    {
        Tape tape;
        const Tensor w = tape.parameter("w", Tensor({2}, {1, 2}));
        const auto g = tape.backward(sum(w * w));
        CHECK(g.at("w").to_vector() == std::vector<double>{2, 4});
    }
    {
        Tape tape;
        const Tensor w = tape.parameter("w", Tensor::scalar(0.0));
        const auto g = tape.backward(sigmoid(w));
        CHECK(g.at("w").item() == doctest::Approx(0.25).epsilon(1e-15));
    }
}

TEST_CASE("backward clears the tape and detaches earlier tensors") {
    Tape tape;
    const Tensor w = tape.parameter("w", Tensor::scalar(2.0));
    const Tensor y = w * w;
    tape.backward(y);
    CHECK(tape.size() == 0);
    CHECK_FALSE(y.detach().on_tape());
}

TEST_CASE("scalar broadcasting keeps the higher rank") {
    const Tensor one = Tensor::matrix(1, 1, {3.0});
    CHECK((0.5 * one).shape() == Shape{1, 1});
    CHECK((one * 0.5).shape() == Shape{1, 1});
    CHECK((Tensor::scalar(2.0) - one).shape() == Shape{1, 1});
    CHECK_THROWS_AS(Tensor::zeros({2, 3}) + Tensor::zeros({3, 2}), ShapeError);
    const Tensor row = Tensor::from_rows({{1, 2, 3}});
    CHECK((Tensor::zeros({4, 3}) + row).shape() == Shape{4, 3});
}

TEST_CASE("grad_check on linear, nonlinear and faulty functions") {
    Rng rng(5);
    const Tensor p = standard_normal(rng, {2, 3});
    const Tensor c = standard_normal(rng, {2, 3});
    CHECK(grad_check([&](const Tensor& x) { return sum(x * c); }, p) < 1e-10);

    const Tensor w = standard_normal(rng, {3, 2});
    auto smooth = [&](const Tensor& x) {
        return sum(log_sum_exp(tanh(matmul(x, w)), 1)) + mean(softplus(x)) + sum(square(sigmoid(x))) +
               sum(exp(0.3 * x)) + sum(log(1.0 + square(x))) - sum(mean(softmax(x, 1) * x, 0)) +
               sum(sum(transpose(x), 1) / 3.0) + sum(reshape(x, {3, 2}) * reshape(c, {3, 2})) +
               sum(slice_cols(x, 1, 2)) + sum(slice_rows(x, 1, 1) * 2.0) + sum(tile_rows(x, 2) * tile_rows(c, 2)) +
               sum(concat_cols(std::vector<Tensor>{x, square(x)})) + sum(neg(x) / (2.0 + square(c)));
    };
    CHECK(grad_check(smooth, p) < 1e-7);

    // relu and clamp away from their kinks
    const Tensor q = Tensor::from_rows({{0.7, -0.4, 1.3}, {-1.1, 0.2, 2.2}});
    CHECK(grad_check([](const Tensor& x) { return sum(relu(x) * x) + sum(clamp(x, -1.0, 1.0) * 3.0); }, q) < 1e-7);

    // A hand-built op whose backward rule is off by a factor of two.
    auto faulty = [](const Tensor& x) {
        if (!x.on_tape()) return sum(square(x));
        std::vector<double> v(x.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] * x[i];
        const Tensor* in[] = {&x};
        const Tensor copy = x;
        Tensor y = x.tape()->record(x.shape(), std::move(v), in,
                                    [copy](std::span<const double> g, std::span<std::vector<double>*> gi) {
                                        for (std::size_t i = 0; i < g.size(); ++i)
                                            (*gi[0])[i] += g[i] * 4.0 * copy[i];
                                    });
        return sum(y);
    };
    CHECK(grad_check(faulty, p) > 1e-2);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(9);
    const Tensor s = softmax(standard_normal(rng, {5, 4}), 1);
    for (std::size_t r = 0; r < 5; ++r) {
        double t = 0.0;
        for (std::size_t c = 0; c < 4; ++c) t += s.at(r, c);
        CHECK(t == doctest::Approx(1.0).epsilon(1e-14));
    }
}
