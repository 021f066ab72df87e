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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corex/data.hpp"
#include "corex/models.hpp"
#include "corex/nn.hpp"
#include "corex/objectives.hpp"
#include "corex/train.hpp"

namespace corex {

struct DatasetConfig {
    // "linear-gaussian" and "bars" are generated; "idx" reads IDX files;
    // "file" reads a dataset container.
    std::string kind = "linear-gaussian";
    SyntheticSpec synthetic;
    std::uint64_t seed = 1;  // generation seed of synthetic data
    std::string images;
    std::string labels;
    std::optional<double> binarize;
    std::size_t limit = 0;  // keep the first `limit` rows (0 = all)
    std::string path;
};

struct ModelConfig {
    Likelihood likelihood = Likelihood::gaussian;
    std::optional<double> fixed_x_log_var;
    std::vector<LayerConfig> layers;
};

struct ObjectiveSettings {
    ObjectiveKind kind = ObjectiveKind::corex;
    std::vector<std::size_t> anchors;
    double lambda = 0.5;
    std::vector<double> kl_weights;  // explicit weights override anchors
    std::size_t mc_samples = 1;
    bool entropy_offset = true;      // add sum_i H(x_i) when available
};

// Everything a training run depends on. Serialized with every default
// spelled out; unknown keys are rejected.
struct RunConfig {
    DatasetConfig dataset;
    ModelConfig model;
    ObjectiveSettings objective;
    AdamConfig optimizer;
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    std::size_t eval_size = 2048;
    std::size_t eval_mc = 8;
    std::string output_dir = "run";
    std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
    std::string init_checkpoint;       // same architecture, or one layer fewer
    std::size_t freeze_layers = 0;

    std::string to_json() const;
    static RunConfig from_json(std::string_view text);
    static RunConfig load(const std::filesystem::path& path);
};

// CXAE_SEED, when set; a malformed value is a ConfigError.
std::optional<std::uint64_t> seed_from_env();

Dataset build_dataset(const DatasetConfig& config);

// Reads a dataset container, or an IDX image file when the name does not end
// in ".cxds".
Dataset load_data_file(const std::filesystem::path& path, const std::optional<std::filesystem::path>& labels = {},
                       std::optional<double> binarize = std::nullopt);

// Sum_i H(x_i) source: the dataset's analytic entropies, else plug-in
// entropies for binary data, else none.
std::optional<std::vector<double>> entropy_offsets_for(const Dataset& data);

ObjectiveConfig make_objective_config(const ObjectiveSettings& settings, const ModelSpec& spec, const Dataset& data);
TrainConfig make_train_config(const RunConfig& config);

// Initial model: fresh, loaded from init_checkpoint, or that checkpoint
// extended by the last configured layer.
HierarchicalModel initial_model(const RunConfig& config, const Dataset& data);

struct RunResult {
    HierarchicalModel model;
    Dataset data;
    std::vector<EpochMetrics> metrics;
};

// Trains per `config`. With `write_outputs` the output directory receives
// config.json, dataset.cxds, metrics.csv, timing.csv, checkpoint.cxae and the
// periodic checkpoint_epoch<N>.cxae files.
RunResult run_training(const RunConfig& config, bool write_outputs = true);

// Command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace corex
