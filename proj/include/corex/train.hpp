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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "corex/data.hpp"
#include "corex/models.hpp"
#include "corex/nn.hpp"
#include "corex/objectives.hpp"

namespace corex {

enum class ObjectiveKind { corex, anchor, stacked };

std::string to_string(ObjectiveKind k);
ObjectiveKind objective_kind_from_string(std::string_view s);

struct TrainConfig {
    ObjectiveKind objective = ObjectiveKind::corex;
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    AdamConfig adam;
    std::uint64_t seed = 0;
    // Fixed evaluation subset and Monte Carlo draws used for the per-epoch
    // metrics; the same noise is reused every epoch.
    std::size_t eval_size = 2048;
    std::size_t eval_mc = 8;
    // Parameters of the bottom `freeze_layers` layers are held fixed.
    std::size_t freeze_layers = 0;
};

// Objective value aggregated over a dataset evaluated in batches.
struct Evaluation {
    double bound = 0.0;
    double std_err = 0.0;
    std::vector<double> reconstruction;  // per x dimension
    std::vector<double> kl;              // per top-layer dimension, unweighted
    std::vector<LayerGain> gains;
    std::size_t examples = 0;
};

// Unweighted bound: the KL weights of `config` are ignored.
Evaluation evaluate(const HierarchicalModel& model, const Tensor& data, const ObjectiveConfig& config, Rng& rng,
                    std::size_t batch_size = 512);

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double bound = 0.0;
    double bound_se = 0.0;
    double reconstruction = 0.0;  // summed over x dimensions
    double kl = 0.0;              // summed over top-layer dimensions
    std::vector<LayerGain> gains;
    double seconds = 0.0;         // wall-clock of the epoch
};

// Header "epoch,bound,bound_se,reconstruction,kl,gain_1,gain_1_se,...".
// Wall-clock is excluded so identical runs give identical files.
void write_metrics_header(std::ostream& os, std::size_t layers);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

using EpochCallback = std::function<void(const EpochMetrics&, const HierarchicalModel&)>;

// Adam ascent on the configured objective. Throws NumericError naming the
// offending term when the objective becomes non-finite.
std::vector<EpochMetrics> train_model(HierarchicalModel& model, const Dataset& data, const ObjectiveConfig& config,
                                      const TrainConfig& train, const EpochCallback& on_epoch = {});

// The objective selected by `kind`, evaluated on one batch.
ObjectiveValue objective_value(ObjectiveKind kind, const ModelSpec& spec, const ParamMap& params, const Tensor& batch,
                               const ObjectiveConfig& config, Rng& rng);

}  // namespace corex
