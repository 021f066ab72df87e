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
#include <fstream>

#include "corex/data.hpp"
#include "corex/error.hpp"

using namespace corex;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "corexvae_unit";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("linear-Gaussian data carries analytic total correlation") {
    Rng rng(1, streams::kData);
    const Dataset none = gen_linear_gaussian(Tensor::zeros({3, 2}), 0.5, 10, rng);
    CHECK(none.ground_truth->tc_x.value() == doctest::Approx(0.0));

    const Dataset two = gen_linear_gaussian(Tensor::from_rows({{1}, {1}}), 1.0, 100000, rng);
    const auto& cov = two.ground_truth->covariance;
    CHECK(cov == std::vector<double>{2, 1, 1, 2});
    CHECK(two.ground_truth->tc_x.value() == doctest::Approx(0.5 * (2 * std::log(2.0) - std::log(3.0))).epsilon(1e-14));
    CHECK(two.ground_truth->tc_x.value() == doctest::Approx(0.143841).epsilon(1e-5));
    double s[2] = {0, 0}, ss[2][2] = {{0, 0}, {0, 0}};
    const double n = 100000.0;
    for (std::size_t r = 0; r < two.n(); ++r)
        for (std::size_t i = 0; i < 2; ++i) {
            s[i] += two.values.at(r, i);
            for (std::size_t j = 0; j < 2; ++j) ss[i][j] += two.values.at(r, i) * two.values.at(r, j);
        }
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double emp = ss[i][j] / n - s[i] * s[j] / (n * n);
            CHECK(std::abs(emp / cov[i * 2 + j] - 1.0) < 0.03);
        }

    SyntheticSpec spec;
    spec.n = 50;
    spec.mixing_seed = 7;
    Rng a(2), b(3);
    const Dataset d1 = gen_linear_gaussian(spec, a), d2 = gen_linear_gaussian(spec, b);
    CHECK(d1.ground_truth->factors.to_vector() == d2.ground_truth->factors.to_vector());
    CHECK(d1.per_dim_entropy->size() == 8);
}

TEST_CASE("bars images") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::bars;
    spec.observed_dim = 16;
    spec.n = 200;
    spec.bar_prob = 0.0;
    Rng rng(4);
    const Dataset empty = gen_bars(spec, rng);
    for (double v : empty.values.values()) CHECK(v == 0.0);
    CHECK(empty.ground_truth->tc_x.value() == 0.0);

    // Eight classes on 4x4 images: one bar per class, classes 4..7 vertical.
    spec.bar_prob = 0.5;
    spec.classes = 8;
    const Dataset one = gen_bars(spec, rng);
    for (std::size_t r = 0; r < one.n(); ++r) {
        double on = 0.0;
        for (std::size_t c = 0; c < 16; ++c) on += one.values.at(r, c);
        CHECK(on == 4.0);
        const auto label = static_cast<std::size_t>(one.labels[r]);
        if (label >= 4)
            for (std::size_t row = 0; row < 4; ++row) CHECK(one.values.at(r, row * 4 + (label - 4)) == 1.0);
    }

    // Every pixel sits on one row and one column bar.
    spec.classes = 0;
    spec.bar_prob = 0.3;
    spec.n = 100000;
    const Dataset many = gen_bars(spec, rng);
    const double expect = 1.0 - 0.7 * 0.7;
    const double se = std::sqrt(expect * (1 - expect) / 1e5);
    for (std::size_t c : {0u, 5u, 15u}) {
        double m = 0.0;
        for (std::size_t r = 0; r < many.n(); ++r) m += many.values.at(r, c);
        CHECK(std::abs(m / 1e5 - expect) < 3.0 * se);
    }
    CHECK(many.binary);
    CHECK_THROWS(gen_bars(SyntheticSpec{SyntheticKind::bars, 3, 15, 10}, rng));
}

TEST_CASE("IDX images and labels") {
    std::vector<std::uint8_t> px(2 * 28 * 28, 0);
    px[0] = 153;  // 0.6
    px[1] = 102;  // 0.4
    const fs::path img = temp_file("img.idx"), lab = temp_file("lab.idx");
    write_idx_images(img, 28, 28, px);
    write_idx_labels(lab, std::vector<std::uint8_t>{3, 7});
    const Dataset d = load_idx(img, lab);
    CHECK(d.d() == 784);
    CHECK(d.n() == 2);
    CHECK(d.labels == std::vector<std::int64_t>{3, 7});
    CHECK(d.values.at(0, 0) == doctest::Approx(0.6));
    const Dataset b = load_idx(img, std::nullopt, 0.5);
    CHECK(b.values.at(0, 0) == 1.0);
    CHECK(b.values.at(0, 1) == 0.0);
    CHECK(b.binary);

    try {
        load_idx(lab, std::nullopt);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("0x00000803") != std::string::npos);
        CHECK(msg.find("0x00000801") != std::string::npos);
    }
    write_idx_labels(lab, std::vector<std::uint8_t>{3});
    CHECK_THROWS_AS(load_idx(img, lab), FormatError);
    fs::resize_file(img, fs::file_size(img) - 10);
    CHECK_THROWS_AS(load_idx(img, std::nullopt), FormatError);
}

TEST_CASE("dataset container round trip") {
    SyntheticSpec spec;
    spec.n = 30;
    Rng rng(5);
    Dataset d = gen_linear_gaussian(spec, rng);
    d.labels.assign(30, 2);
    const fs::path p = temp_file("d.cxds");
    save_dataset(d, p);
    const Dataset back = load_dataset(p);
    CHECK(back.values.to_vector() == d.values.to_vector());
    CHECK(back.labels == d.labels);
    CHECK(*back.per_dim_entropy == *d.per_dim_entropy);
    CHECK(*back.ground_truth->tc_x == *d.ground_truth->tc_x);
    CHECK(back.ground_truth->covariance == d.ground_truth->covariance);
    CHECK(back.ground_truth->factors.to_vector() == d.ground_truth->factors.to_vector());
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        f.put('\x55');
    }
    CHECK_THROWS_AS(load_dataset(p), FormatError);
}

TEST_CASE("batch iteration") {
    BatchIterator whole(10, 10, Rng(1));
    const auto e = whole.next_epoch();
    REQUIRE(e.size() == 1);
    CHECK(e[0].size() == 10);

    BatchIterator a(23, 5, Rng(7)), b(23, 5, Rng(7));
    for (int epoch = 0; epoch < 2; ++epoch) {
        const auto x = a.next_epoch(), y = b.next_epoch();
        CHECK(x == y);
        CHECK(x.size() == 5);
        CHECK(x.back().size() == 3);
        std::vector<std::size_t> all;
        for (const auto& batch : x) all.insert(all.end(), batch.begin(), batch.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < 23; ++i) CHECK(all[i] == i);
    }
}

TEST_CASE("plug-in binary entropy") {
    const auto h = plugin_binary_entropy(Tensor::from_rows({{1, 0}, {0, 0}}));
    CHECK(h[0] == doctest::Approx(std::log(2.0)));
    CHECK(h[1] == 0.0);
}
