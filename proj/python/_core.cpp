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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>
#include <vector>

#include "corex/app.hpp"
#include "corex/error.hpp"
#include "corex/infotheory.hpp"
#include "corex/oracle.hpp"
#include "corex/sampling.hpp"

namespace py = pybind11;
using namespace corex;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
    return Tensor::matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Tensor& t) {
    const auto& s = t.shape();
    std::vector<py::ssize_t> shape(s.begin(), s.end());
    Array out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

py::dict dataset_dict(const Dataset& d) {
    py::dict out;
    out["values"] = to_array(d.values);
    out["labels"] = d.labels;
    out["binary"] = d.binary;
    out["per_dim_entropy"] = d.per_dim_entropy;
    out["tc_x"] = d.ground_truth ? d.ground_truth->tc_x : std::nullopt;
    return out;
}

Dataset generate_data(const std::string& kind, std::size_t n, std::size_t observed_dim, std::size_t latent_dim,
                      double noise_scale, std::uint64_t mixing_seed, double bar_prob, std::size_t classes,
                      std::uint64_t seed) {
    DatasetConfig c;
    c.kind = kind;
    c.synthetic.n = n;
    c.synthetic.observed_dim = observed_dim;
    c.synthetic.latent_dim = latent_dim;
    c.synthetic.noise_scale = noise_scale;
    c.synthetic.mixing_seed = mixing_seed;
    c.synthetic.bar_prob = bar_prob;
    c.synthetic.classes = classes;
    c.seed = seed;
    return build_dataset(c);
}

Dataset as_dataset(const Array& x) {
    Dataset d;
    d.values = to_tensor(x);
    d.binary = std::all_of(d.values.values().begin(), d.values.values().end(),
                           [](double v) { return v == 0.0 || v == 1.0; });
    if (d.binary) d.per_dim_entropy = plugin_binary_entropy(d.values);
    return d;
}

py::dict mi_entry_dict(const MIEntry& e) {
    py::dict out;
    out["dim"] = e.dim;
    out["estimator"] = to_string(e.estimator);
    out["value"] = e.value;
    out["std_err"] = e.std_err;
    out["samples"] = e.samples;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Total-correlation bounds, hierarchical latent models and their oracles";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<HierarchicalModel>(m, "Model")
        .def_static("load", &HierarchicalModel::load, py::arg("path"))
        .def("save", &HierarchicalModel::save, py::arg("path"))
        .def_property_readonly("input_dim", [](const HierarchicalModel& h) { return h.spec().input_dim; })
        .def_property_readonly("likelihood", [](const HierarchicalModel& h) { return to_string(h.spec().likelihood); })
        .def_property_readonly("layers",
                               [](const HierarchicalModel& h) {
                                   std::vector<std::pair<std::string, std::size_t>> out;
                                   for (const auto& l : h.spec().layers) out.emplace_back(to_string(l.kind), l.width);
                                   return out;
                               })
        .def_property_readonly("fingerprint", &HierarchicalModel::fingerprint)
        .def(
            "encode_mean",
            [](const HierarchicalModel& h, const Array& x) {
                Rng rng(0);
                const EncodePath p = encode(h.spec(), h.params().tensors(), to_tensor(x), rng, 1, true);
                std::vector<Array> out;
                for (const auto& l : p.layers) out.push_back(to_array(l.posterior ? l.posterior->mean : l.logits));
                return out;
            },
            py::arg("x"), "Posterior means per layer (logits for a categorical layer) along the mean path.")
        .def(
            "reconstruct",
            [](const HierarchicalModel& h, const Array& x) {
                Rng rng(0);
                const EncodePath p = encode(h.spec(), h.params().tensors(), to_tensor(x), rng, 1, true);
                if (!p.layers[0].posterior) throw ConfigError("reconstruct needs a continuous bottom layer");
                return to_array(decode_x(h.spec(), h.params().tensors(), p.layers[0].posterior->mean).mean());
            },
            py::arg("x"))
        .def(
            "sample_prior",
            [](const HierarchicalModel& h, std::size_t n, std::uint64_t seed) {
                Rng rng(seed, streams::kReport);
                return to_array(sample_prior(h, n, rng));
            },
            py::arg("n"), py::arg("seed") = 0)
        .def(
            "cluster_assign", [](const HierarchicalModel& h, const Array& x) { return cluster_assign(h, to_tensor(x)); },
            py::arg("x"));

    m.def(
        "generate",
        [](const std::string& kind, std::size_t n, std::size_t observed_dim, std::size_t latent_dim, double noise_scale,
           std::uint64_t mixing_seed, double bar_prob, std::size_t classes, std::uint64_t seed) {
            return dataset_dict(
                generate_data(kind, n, observed_dim, latent_dim, noise_scale, mixing_seed, bar_prob, classes, seed));
        },
        py::arg("kind") = "linear-gaussian", py::arg("n") = 1000, py::arg("observed_dim") = 8,
        py::arg("latent_dim") = 3, py::arg("noise_scale") = 0.5, py::arg("mixing_seed") = 0, py::arg("bar_prob") = 0.3,
        py::arg("classes") = 0, py::arg("seed") = 1, "Synthetic dataset: linear-gaussian or bars.");

    m.def(
        "train",
        [](const std::string& config_json, bool write_outputs) {
            RunResult r = run_training(RunConfig::from_json(config_json), write_outputs);
            py::list metrics;
            for (const auto& e : r.metrics) {
                py::dict d;
                d["epoch"] = e.epoch;
                d["bound"] = e.bound;
                d["bound_se"] = e.bound_se;
                d["reconstruction"] = e.reconstruction;
                d["kl"] = e.kl;
                std::vector<std::pair<double, double>> gains;
                for (const auto& g : e.gains) gains.emplace_back(g.value, g.std_err);
                d["gains"] = gains;
                metrics.append(d);
            }
            return py::make_tuple(std::move(r.model), dataset_dict(r.data), metrics);
        },
        py::arg("config_json"), py::arg("write_outputs") = false,
        "Trains from a JSON run config; returns (model, dataset, per-epoch metrics).");

    m.def(
        "evaluate",
        [](const HierarchicalModel& h, const Array& x, std::size_t mc, std::uint64_t seed,
           std::optional<std::vector<double>> entropy_offsets) {
            ObjectiveConfig cfg;
            cfg.mc_samples = mc;
            cfg.entropy_offsets = std::move(entropy_offsets);
            Rng rng(seed, streams::kEval);
            const Evaluation ev = evaluate(h, to_tensor(x), cfg, rng);
            py::dict out;
            out["bound"] = ev.bound;
            out["std_err"] = ev.std_err;
            out["examples"] = ev.examples;
            out["reconstruction"] = ev.reconstruction;
            out["kl"] = ev.kl;
            std::vector<std::pair<double, double>> gains;
            for (const auto& g : ev.gains) gains.emplace_back(g.value, g.std_err);
            out["gains"] = gains;
            return out;
        },
        py::arg("model"), py::arg("x"), py::arg("mc") = 8, py::arg("seed") = 0,
        py::arg("entropy_offsets") = std::nullopt, "Bound over the whole dataset with its standard error.");

    m.def(
        "estimate_mi",
        [](const HierarchicalModel& h, const Array& x, const std::string& estimator, std::size_t outer,
           std::size_t inner, std::size_t subsample, std::uint64_t seed) {
            LatentMIOptions o;
            if (estimator == "mc-mixture")
                o.estimator = Estimator::mc_mixture;
            else if (estimator == "mc-standard")
                o.estimator = Estimator::mc_standard;
            else
                throw ConfigError("estimator must be mc-mixture or mc-standard, got '" + estimator + "'");
            o.mc = {outer, inner};
            o.subsample = subsample;
            py::list out;
            for (const auto& e : latent_mi_report(h, to_tensor(x), o, seed).entries) out.append(mi_entry_dict(e));
            return out;
        },
        py::arg("model"), py::arg("x"), py::arg("estimator") = "mc-mixture", py::arg("outer") = 256,
        py::arg("inner") = 256, py::arg("subsample") = kDefaultBankSubsample, py::arg("seed") = 0,
        "Per-dimension I(x : z_i) of the top continuous layer.");

    m.def(
        "discrete_corex_terms",
        [](const std::vector<double>& table, const std::vector<std::size_t>& x_cards,
           const std::vector<std::size_t>& z_cards) {
            DiscreteJoint j{x_cards, z_cards, table};
            j.validate();
            const CorexTerms t = discrete_corex_objective(j);
            py::dict out;
            out["tc_x"] = t.tc_x;
            out["tc_x_given_z"] = t.tc_x_given_z;
            out["tc_xz"] = t.tc_xz;
            out["tc_z"] = t.tc_z;
            out["objective"] = t.objective;
            out["decomposition_residual"] = discrete_mi_decomposition_check(j);
            return out;
        },
        py::arg("table"), py::arg("x_cards"), py::arg("z_cards"),
        "Exact TC terms of a joint table over (x_1..x_d, z_1..z_m), last variable fastest.");

    m.def(
        "gaussian_tc",
        [](const Array& cov) {
            const Tensor c = to_tensor(cov);
            return gaussian_tc(GaussianJoint::from_covariance(c.rows(), c.to_vector()));
        },
        py::arg("covariance"));

    m.def("mapped_cluster_accuracy", [](const std::vector<std::size_t>& clusters, const std::vector<std::int64_t>& labels) {
        return mapped_cluster_accuracy(clusters, labels);
    });

    m.def(
        "run_oracle",
        [](const std::string& suite, std::size_t cases, std::uint64_t seed) {
            OracleOptions o;
            o.cases = cases;
            o.seed = seed;
            const SuiteResult r = run_oracle_suite(suite, o);
            py::dict out;
            out["name"] = r.name;
            out["passed"] = r.passed;
            out["cases"] = r.cases;
            out["max_residual"] = r.max_residual;
            out["failures"] = r.failures;
            return out;
        },
        py::arg("suite"), py::arg("cases") = 0, py::arg("seed") = 0);

    m.def("oracle_suites", &oracle_suite_names);
    m.def(
        "dataset_from_array", [](const Array& x) { return dataset_dict(as_dataset(x)); }, py::arg("x"),
        "Wraps raw values; binary arrays get plug-in entropies.");
}
