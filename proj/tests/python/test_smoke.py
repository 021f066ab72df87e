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
"""Smoke tests of the Python bindings."""

import math

import numpy as np
import pytest

import corexvae as cx


def tiny_config(epochs=2):
    return {
        "dataset": {"kind": "linear-gaussian", "n": 200, "observed_dim": 4, "latent_dim": 2},
        "model": {
            "likelihood": "gaussian",
            "layers": [{"kind": "continuous", "width": 2, "encoder_hidden": [6], "decoder_hidden": [6]}],
        },
        "epochs": epochs,
        "batch_size": 50,
        "eval_size": 100,
        "eval_mc": 2,
        "seed": 3,
    }


def test_xor_informativeness_is_negative():
    # x1, x2 uniform bits and z = x1 xor x2.
    table = np.zeros(8)
    for a in range(2):
        for b in range(2):
            table[(a * 2 + b) * 2 + (a ^ b)] = 0.25
    t = cx.discrete_corex_terms(table.tolist(), [2, 2], [2])
    assert t["tc_x"] == pytest.approx(0.0, abs=1e-12)
    assert t["tc_xz"] == pytest.approx(-math.log(2.0), abs=1e-12)
    assert t["decomposition_residual"] < 1e-12


def test_gaussian_tc_of_correlated_pair():
    rho = 0.6
    cov = np.array([[1.0, rho], [rho, 1.0]])
    assert cx.gaussian_tc(cov) == pytest.approx(-0.5 * math.log(1 - rho * rho), rel=1e-12)


def test_generate_and_oracles():
    d = cx.generate("linear-gaussian", n=50, observed_dim=5, latent_dim=2, mixing_seed=1)
    assert d["values"].shape == (50, 5)
    assert d["tc_x"] > 0.0
    b = cx.generate("bars", n=20, observed_dim=16, classes=2)
    assert set(np.unique(b["values"])) <= {0.0, 1.0}
    assert len(b["labels"]) == 20
    assert set(cx.oracle_suites()) == {"discrete", "gaussian", "tabular", "elbo"}
    r = cx.run_oracle("tabular", cases=5)
    assert r["passed"] and r["cases"] == 5


def test_train_evaluate_and_mi(tmp_path):
    model, data, metrics = cx.train(tiny_config())
    assert [m["epoch"] for m in metrics] == [1, 2]
    again = cx.train(tiny_config())[2]
    assert again == metrics

    x = data["values"]
    ev = cx.evaluate(model, x, mc=2, entropy_offsets=data["per_dim_entropy"])
    assert ev["examples"] == 200
    assert ev["std_err"] > 0.0
    assert len(ev["gains"]) == 1

    mi = cx.estimate_mi(model, x, outer=16, inner=16)
    assert [e["dim"] for e in mi] == [0, 1]
    with pytest.raises(ValueError):
        cx.estimate_mi(model, x, estimator="exact")

    means = model.encode_mean(x)
    assert means[0].shape == (200, 2)
    assert model.reconstruct(x).shape == (200, 4)
    assert model.sample_prior(7, seed=1).shape == (7, 4)
    assert np.array_equal(model.sample_prior(7, seed=1), model.sample_prior(7, seed=1))

    path = tmp_path / "m.cxae"
    model.save(path)
    back = cx.Model.load(path)
    assert back.fingerprint == model.fingerprint
    assert back.layers == [("continuous", 2)]


def test_config_errors():
    cfg = tiny_config()
    cfg["epochz"] = 1
    with pytest.raises(cx.ConfigError):
        cx.train(cfg)


def test_clustering_helpers():
    assert cx.mapped_cluster_accuracy([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0
    d = cx.dataset_from_array(np.array([[0.0, 1.0], [1.0, 1.0]]))
    assert d["binary"]
    assert d["per_dim_entropy"][0] == pytest.approx(math.log(2.0))
