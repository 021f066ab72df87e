# Copyright 2026 The CorEx-VAE Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#         https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Total-correlation bounds and hierarchical latent models."""

import json as _json

from ._core import (
    ConfigError,
    Model,
    NumericError,
    ShapeError,
    dataset_from_array,
    discrete_corex_terms,
    estimate_mi,
    evaluate,
    gaussian_tc,
    generate,
    mapped_cluster_accuracy,
    oracle_suites,
    run_oracle,
)
from ._core import train as _train

__all__ = [
    "ConfigError",
    "Model",
    "NumericError",
    "ShapeError",
    "dataset_from_array",
    "discrete_corex_terms",
    "estimate_mi",
    "evaluate",
    "gaussian_tc",
    "generate",
    "mapped_cluster_accuracy",
    "oracle_suites",
    "run_oracle",
    "train",
]


def train(config, write_outputs=False):
    """Trains from a run config given as a dict or JSON text.

    Returns (model, dataset, metrics).
    """
    text = config if isinstance(config, str) else _json.dumps(config)
    return _train(text, write_outputs)
