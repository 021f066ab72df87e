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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "corex/rng.hpp"
#include "corex/tensor.hpp"

namespace corex {

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct OutputHead {
    std::string name;
    std::size_t width = 0;
};

// Fully connected network. layer_widths runs from the input width to the
// final fan-out; the final layer is linear and is split column-wise into the
// output heads, in order.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    std::vector<Activation> activations;  // one per hidden layer
    std::vector<OutputHead> output_heads;

    void validate() const;
    std::size_t input_width() const { return layer_widths.front(); }
    std::size_t output_width() const { return layer_widths.back(); }
    std::size_t num_linear() const { return layer_widths.size() - 1; }
};

// Hidden layers share one activation; heads must sum to the output width.
MlpSpec make_mlp(std::size_t input, const std::vector<std::size_t>& hidden, std::vector<OutputHead> heads,
                 Activation activation = Activation::relu);

using ParamMap = std::map<std::string, Tensor>;

// "<model_id>/l<layer>/<role>", e.g. "enc0/l1/W".
std::string param_key(std::string_view model_id, std::size_t layer, std::string_view role);

// Named parameter tensors. Keys are unique and shapes are fixed once added;
// every write bumps the version.
class ParameterStore {
public:
    void add(const std::string& key, Tensor value);
    void set(const std::string& key, Tensor value);
    const Tensor& get(const std::string& key) const;
    bool contains(const std::string& key) const { return params_.count(key) != 0; }

    const ParamMap& tensors() const noexcept { return params_; }
    std::uint64_t version() const noexcept { return version_; }
    std::size_t parameter_count() const;

    // Tape leaves for every parameter accepted by `trainable` (all by default);
    // the rest are returned as constants.
    ParamMap watch(Tape& tape, const std::function<bool(const std::string&)>& trainable = {}) const;

    // Bit-level equality of keys, shapes and values.
    bool identical(const ParameterStore& other) const;

private:
    ParamMap params_;
    std::uint64_t version_ = 0;
};

// Glorot-uniform weights, zero biases.
void init_params(const MlpSpec& spec, std::string_view model_id, Rng& rng, ParameterStore& store);

std::map<std::string, Tensor> mlp_forward(const MlpSpec& spec, std::string_view model_id, const ParamMap& params,
                                          const Tensor& x);

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::map<std::string, std::vector<double>> first;
    std::map<std::string, std::vector<double>> second;
};

// Bias-corrected Adam update of every parameter named in `grads`.
void adam_step(AdamState& state, ParameterStore& params, const ParamMap& grads);

// Checkpoint container:
//   "CXAE" | u32 version | u32 header length | header bytes | u32 count |
//   count x (u32 key length | key | u32 rank | u64 extents[rank] | f64 payload) |
//   u32 CRC-32 of every preceding byte.
// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ParameterStore params;
    std::string header;
};

void save_params(const ParameterStore& store, const std::filesystem::path& path, std::string_view header = {});
Checkpoint load_params(const std::filesystem::path& path);
// Loads into an existing store; keys and shapes must match exactly. Returns
// the header.
std::string load_params_into(ParameterStore& store, const std::filesystem::path& path);

}  // namespace corex
