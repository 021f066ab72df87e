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

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "corex/models.hpp"
#include "corex/tensor.hpp"

namespace corex::test {

// Parameters of a model laid out in key order as one flat vector.
struct FlatParams {
    std::vector<std::string> keys;
    std::vector<Shape> shapes;
    Tensor values;

    explicit FlatParams(const ParamMap& params) {
        std::vector<double> v;
        for (const auto& [k, t] : params) {
            keys.push_back(k);
            shapes.push_back(t.shape());
            v.insert(v.end(), t.values().begin(), t.values().end());
        }
        const std::size_t n = v.size();
        values = Tensor({n}, std::move(v));
    }

    // Views of `flat` (on the caller's tape when it is a leaf) keyed like the model.
    ParamMap unflatten(const Tensor& flat) const {
        ParamMap out;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            out.emplace(keys[i], slice_flat(flat, offset, shapes[i]));
            offset += shape_size(shapes[i]);
        }
        return out;
    }
};

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = scale * rng.normal();
    return Tensor::matrix(rows, cols, std::move(v));
}

inline Tensor random_binary(Rng& rng, std::size_t rows, std::size_t cols, double p = 0.5) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.uniform() < p ? 1.0 : 0.0;
    return Tensor::matrix(rows, cols, std::move(v));
}

}  // namespace corex::test
