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

#include "corex/app.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "corex/error.hpp"
#include "corex/oracle.hpp"
#include "corex/sampling.hpp"

namespace corex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed, strict view of one JSON object: every key must be consumed.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type (" + it->dump() + ")");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void done() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <class T>
void get_enum(Section& s, const char* key, T& out, T (*parse)(std::string_view)) {
    std::string text;
    s.get(key, text);
    if (!text.empty()) out = parse(text);
}

json layer_to_json(const LayerConfig& l) {
    return json{{"kind", to_string(l.kind)},
                {"width", l.width},
                {"encoder_hidden", l.encoder_hidden},
                {"decoder_hidden", l.decoder_hidden},
                {"activation", to_string(l.activation)}};
}

LayerConfig layer_from_json(const json& j, const std::string& where) {
    Section s(j, where);
    LayerConfig l;
    get_enum(s, "kind", l.kind, latent_kind_from_string);
    s.get("width", l.width);
    s.get("encoder_hidden", l.encoder_hidden);
    s.get("decoder_hidden", l.decoder_hidden);
    get_enum(s, "activation", l.activation, activation_from_string);
    s.done();
    if (l.width == 0) throw ConfigError(where + ".width must be positive");
    return l;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string RunConfig::to_json() const {
    json ds{{"kind", dataset.kind}, {"seed", dataset.seed}, {"limit", dataset.limit}};
    if (dataset.kind == "linear-gaussian" || dataset.kind == "bars") {
        ds["latent_dim"] = dataset.synthetic.latent_dim;
        ds["observed_dim"] = dataset.synthetic.observed_dim;
        ds["n"] = dataset.synthetic.n;
        ds["noise_scale"] = dataset.synthetic.noise_scale;
        ds["mixing_seed"] = dataset.synthetic.mixing_seed;
        ds["bar_prob"] = dataset.synthetic.bar_prob;
        ds["classes"] = dataset.synthetic.classes;
    } else if (dataset.kind == "idx") {
        ds["images"] = dataset.images;
        ds["labels"] = dataset.labels;
        ds["binarize"] = dataset.binarize ? json(*dataset.binarize) : json(nullptr);
    } else {
        ds["path"] = dataset.path;
    }
    json layers = json::array();
    for (const auto& l : model.layers) layers.push_back(layer_to_json(l));
    json j{{"dataset", ds},
           {"model",
            {{"likelihood", to_string(model.likelihood)},
             {"fixed_x_log_var", model.fixed_x_log_var ? json(*model.fixed_x_log_var) : json(nullptr)},
             {"layers", layers}}},
           {"objective",
            {{"kind", to_string(objective.kind)},
             {"anchors", objective.anchors},
             {"lambda", objective.lambda},
             {"kl_weights", objective.kl_weights},
             {"mc_samples", objective.mc_samples},
             {"entropy_offset", objective.entropy_offset}}},
           {"optimizer",
            {{"step_size", optimizer.step_size},
             {"beta1", optimizer.beta1},
             {"beta2", optimizer.beta2},
             {"epsilon", optimizer.epsilon}}},
           {"epochs", epochs},
           {"batch_size", batch_size},
           {"seed", seed},
           {"eval_size", eval_size},
           {"eval_mc", eval_mc},
           {"output_dir", output_dir},
           {"checkpoint_every", checkpoint_every},
           {"init_checkpoint", init_checkpoint},
           {"freeze_layers", freeze_layers}};
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section top(j, "config");
    if (const json* d = top.child("dataset")) {
        Section s(*d, "dataset");
        s.get("kind", c.dataset.kind);
        s.get("seed", c.dataset.seed);
        s.get("limit", c.dataset.limit);
        s.get("latent_dim", c.dataset.synthetic.latent_dim);
        s.get("observed_dim", c.dataset.synthetic.observed_dim);
        s.get("n", c.dataset.synthetic.n);
        s.get("noise_scale", c.dataset.synthetic.noise_scale);
        s.get("mixing_seed", c.dataset.synthetic.mixing_seed);
        s.get("bar_prob", c.dataset.synthetic.bar_prob);
        s.get("classes", c.dataset.synthetic.classes);
        s.get("images", c.dataset.images);
        s.get("labels", c.dataset.labels);
        if (const json* b = s.child("binarize"); b && !b->is_null()) {
            if (!b->is_number()) throw ConfigError("dataset.binarize: expected a number or null");
            c.dataset.binarize = b->get<double>();
        }
        s.get("path", c.dataset.path);
        s.done();
    }
    static const std::set<std::string> kinds{"linear-gaussian", "bars", "idx", "file"};
    if (!kinds.count(c.dataset.kind))
        throw ConfigError("dataset.kind must be linear-gaussian, bars, idx or file, got '" + c.dataset.kind + "'");
    if (c.dataset.kind != "idx" && c.dataset.kind != "file")
        c.dataset.synthetic.kind = synthetic_kind_from_string(c.dataset.kind);

    const json* m = top.child("model");
    if (m == nullptr) throw ConfigError("config: missing 'model'");
    {
        Section s(*m, "model");
        get_enum(s, "likelihood", c.model.likelihood, likelihood_from_string);
        if (const json* f = s.child("fixed_x_log_var"); f && !f->is_null()) {
            if (!f->is_number()) throw ConfigError("model.fixed_x_log_var: expected a number or null");
            c.model.fixed_x_log_var = f->get<double>();
        }
        const json* layers = s.child("layers");
        if (layers == nullptr || !layers->is_array() || layers->empty())
            throw ConfigError("model.layers: expected a non-empty array");
        for (std::size_t i = 0; i < layers->size(); ++i)
            c.model.layers.push_back(layer_from_json((*layers)[i], "model.layers[" + std::to_string(i) + "]"));
        s.done();
    }
    if (const json* o = top.child("objective")) {
        Section s(*o, "objective");
        get_enum(s, "kind", c.objective.kind, objective_kind_from_string);
        s.get("anchors", c.objective.anchors);
        s.get("lambda", c.objective.lambda);
        s.get("kl_weights", c.objective.kl_weights);
        s.get("mc_samples", c.objective.mc_samples);
        s.get("entropy_offset", c.objective.entropy_offset);
        s.done();
    }
    if (const json* o = top.child("optimizer")) {
        Section s(*o, "optimizer");
        s.get("step_size", c.optimizer.step_size);
        s.get("beta1", c.optimizer.beta1);
        s.get("beta2", c.optimizer.beta2);
        s.get("epsilon", c.optimizer.epsilon);
        s.done();
    }
    top.get("epochs", c.epochs);
    top.get("batch_size", c.batch_size);
    top.get("seed", c.seed);
    top.get("eval_size", c.eval_size);
    top.get("eval_mc", c.eval_mc);
    top.get("output_dir", c.output_dir);
    top.get("checkpoint_every", c.checkpoint_every);
    top.get("init_checkpoint", c.init_checkpoint);
    top.get("freeze_layers", c.freeze_layers);
    top.done();

    if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (c.eval_mc == 0) throw ConfigError("eval_mc must be positive");
    if (c.eval_size == 0) throw ConfigError("eval_size must be positive");
    if (c.objective.mc_samples == 0) throw ConfigError("objective.mc_samples must be positive");
    if (!(c.optimizer.step_size > 0.0)) throw ConfigError("optimizer.step_size must be positive");
    if (c.objective.lambda < 0.0 || c.objective.lambda > 1.0) throw ConfigError("objective.lambda must lie in [0, 1]");
    if (c.freeze_layers >= c.model.layers.size()) throw ConfigError("freeze_layers must leave a trainable layer");
    return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json(read_text(path)); }

std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("CXAE_SEED");
    if (v == nullptr || *v == '\0') return std::nullopt;
    const std::string s(v);
    if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 20)
        throw ConfigError("CXAE_SEED must be a non-negative integer, got '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError("CXAE_SEED out of range: '" + s + "'");
    }
}

Dataset load_data_file(const fs::path& path, const std::optional<fs::path>& labels, std::optional<double> binarize) {
    if (path.extension() == ".cxds") return load_dataset(path);
    return load_idx(path, labels, binarize);
}

Dataset build_dataset(const DatasetConfig& config) {
    Dataset ds;
    if (config.kind == "idx") {
        if (config.images.empty()) throw ConfigError("dataset.images is required for idx data");
        std::optional<fs::path> labels;
        if (!config.labels.empty()) labels = config.labels;
        ds = load_idx(config.images, labels, config.binarize);
    } else if (config.kind == "file") {
        if (config.path.empty()) throw ConfigError("dataset.path is required for file data");
        ds = load_dataset(config.path);
    } else {
        SyntheticSpec spec = config.synthetic;
        spec.kind = synthetic_kind_from_string(config.kind);
        Rng rng(config.seed, streams::kData);
        ds = generate(spec, rng);
    }
    if (config.limit > 0 && config.limit < ds.n()) {
        std::vector<std::size_t> rows(config.limit);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        ds.values = gather_rows(ds.values, rows);
        if (ds.has_labels()) ds.labels.resize(config.limit);
        if (ds.binary) ds.per_dim_entropy = plugin_binary_entropy(ds.values);
    }
    ds.validate();
    return ds;
}

std::optional<std::vector<double>> entropy_offsets_for(const Dataset& data) {
    if (data.per_dim_entropy) return data.per_dim_entropy;
    if (data.binary) return plugin_binary_entropy(data.values);
    return std::nullopt;
}

ObjectiveConfig make_objective_config(const ObjectiveSettings& settings, const ModelSpec& spec, const Dataset& data) {
    if (data.d() != spec.input_dim)
        throw ShapeError("dataset has " + std::to_string(data.d()) + " columns but the model expects " +
                         std::to_string(spec.input_dim));
    ObjectiveConfig cfg;
    cfg.mc_samples = settings.mc_samples;
    if (settings.entropy_offset) cfg.entropy_offsets = entropy_offsets_for(data);
    const std::size_t width = spec.layers.front().width;
    if (!settings.kl_weights.empty()) {
        cfg.kl_weights = settings.kl_weights;
    } else if (settings.kind == ObjectiveKind::anchor) {
        for (auto a : settings.anchors)
            if (a >= width)
                throw ConfigError("objective.anchors: dimension " + std::to_string(a) + " >= latent width " +
                                  std::to_string(width));
        cfg.kl_weights = anchor_weights(width, settings.anchors, settings.lambda);
    }
    cfg.validate(spec);
    return cfg;
}

TrainConfig make_train_config(const RunConfig& config) {
    TrainConfig t;
    t.objective = config.objective.kind;
    t.epochs = config.epochs;
    t.batch_size = config.batch_size;
    t.adam = config.optimizer;
    t.seed = config.seed;
    t.eval_size = config.eval_size;
    t.eval_mc = config.eval_mc;
    t.freeze_layers = config.freeze_layers;
    return t;
}

HierarchicalModel initial_model(const RunConfig& config, const Dataset& data) {
    ModelSpec spec = make_model_spec(data.d(), config.model.likelihood, config.model.layers);
    spec.fixed_x_log_var = config.model.fixed_x_log_var;
    spec.validate();
    Rng init(config.seed, streams::kInit);
    if (config.init_checkpoint.empty()) return HierarchicalModel(spec, init);
    HierarchicalModel base = HierarchicalModel::load(config.init_checkpoint);
    const std::size_t have = base.spec().num_layers(), want = spec.num_layers();
    if (base.spec().input_dim != spec.input_dim)
        throw ConfigError("init_checkpoint input dimension " + std::to_string(base.spec().input_dim) +
                          " does not match the data (" + std::to_string(spec.input_dim) + ")");
    if (have == want) return base;
    if (have + 1 == want) return extend_model(base, config.model.layers.back(), init);
    throw ConfigError("init_checkpoint has " + std::to_string(have) + " layers; the config asks for " +
                      std::to_string(want) + " (equal or one more is supported)");
}

RunResult run_training(const RunConfig& config, bool write_outputs) {
    Dataset data = build_dataset(config.dataset);
    HierarchicalModel model = initial_model(config, data);
    const ObjectiveConfig ocfg = make_objective_config(config.objective, model.spec(), data);
    const TrainConfig tcfg = make_train_config(config);
    const fs::path dir = config.output_dir;

    std::ofstream metrics, timing;
    if (write_outputs) {
        fs::create_directories(dir);
        open_out(dir / "config.json") << config.to_json();
        save_dataset(data, dir / "dataset.cxds");
        metrics = open_out(dir / "metrics.csv");
        write_metrics_header(metrics, model.spec().num_layers());
        metrics.flush();
        timing = open_out(dir / "timing.csv");
        timing << "epoch,seconds\n";
    }
    auto on_epoch = [&](const EpochMetrics& m, const HierarchicalModel& current) {
        if (!write_outputs) return;
        write_metrics_row(metrics, m);
        metrics.flush();
        timing << m.epoch << ',' << std::setprecision(6) << m.seconds << '\n';
        if (config.checkpoint_every > 0 && m.epoch % config.checkpoint_every == 0)
            current.save(dir / ("checkpoint_epoch" + std::to_string(m.epoch) + ".cxae"));
    };
    std::vector<EpochMetrics> log = train_model(model, data, ocfg, tcfg, on_epoch);
    if (write_outputs) model.save(dir / "checkpoint.cxae");
    return RunResult{std::move(model), std::move(data), std::move(log)};
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Common {
    std::string checkpoint;
    std::string data;
    std::string labels;
    std::optional<double> binarize;
    std::uint64_t seed = 0;
};

void add_model_data(CLI::App* cmd, Common& c, bool need_data) {
    cmd->add_option("--checkpoint", c.checkpoint, "model checkpoint (.cxae)")->required()->check(CLI::ExistingFile);
    auto* d = cmd->add_option("--data", c.data, "dataset container (.cxds) or IDX image file")
                  ->check(CLI::ExistingFile);
    if (need_data) d->required();
    cmd->add_option("--labels", c.labels, "IDX label file for IDX data")->check(CLI::ExistingFile);
    cmd->add_option("--binarize", c.binarize, "threshold for IDX pixels");
    cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

Dataset load_common(const Common& c) {
    std::optional<fs::path> labels;
    if (!c.labels.empty()) labels = c.labels;
    Dataset ds = load_data_file(c.data, labels, c.binarize);
    return ds;
}

void check_compatible(const HierarchicalModel& model, const Dataset& data) {
    if (model.spec().input_dim != data.d())
        throw ShapeError("checkpoint expects " + std::to_string(model.spec().input_dim) +
                         "-dimensional inputs but the data has " + std::to_string(data.d()) + " columns");
}

std::vector<std::size_t> parse_index_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError(std::string(what) + ": expected comma-separated indices, got '" + text + "'");
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

void write_file(const fs::path& path, const std::string& body) { open_out(path) << body; }

int cmd_train(const std::string& config_path, const std::string& out_override) {
    RunConfig cfg = RunConfig::load(config_path);
    if (auto s = seed_from_env()) cfg.seed = *s;
    if (!out_override.empty()) cfg.output_dir = out_override;
    RunResult r = run_training(cfg, true);
    std::cout << "trained " << r.metrics.size() << " epochs; outputs in " << cfg.output_dir << '\n';
    if (!r.metrics.empty())
        std::cout << std::setprecision(6) << "final bound " << r.metrics.back().bound << " +/- "
                  << r.metrics.back().bound_se << '\n';
    return 0;
}

int cmd_eval(const Common& c, std::size_t mc, bool entropy) {
    HierarchicalModel model = HierarchicalModel::load(c.checkpoint);
    Dataset data = load_common(c);
    check_compatible(model, data);
    ObjectiveSettings s;
    s.mc_samples = mc;
    s.entropy_offset = entropy;
    ObjectiveConfig cfg = make_objective_config(s, model.spec(), data);
    Rng rng(c.seed, streams::kEval);
    Evaluation ev = evaluate(model, data.values, cfg, rng);
    json out{{"bound", ev.bound},
             {"std_err", ev.std_err},
             {"examples", ev.examples},
             {"entropy_offset_included", cfg.entropy_offsets.has_value()}};
    double rec = 0.0, kl = 0.0;
    for (double v : ev.reconstruction) rec += v;
    for (double v : ev.kl) kl += v;
    out["reconstruction"] = rec;
    out["kl"] = kl;
    json gains = json::array();
    for (std::size_t l = 0; l < ev.gains.size(); ++l)
        gains.push_back({{"layer", l + 1},
                         {"value", ev.gains[l].value},
                         {"std_err", ev.gains[l].std_err},
                         {"recommended", ev.gains[l].value > 3.0 * ev.gains[l].std_err}});
    out["layer_gains"] = gains;
    if (model.spec().top().kind == LatentKind::categorical && data.has_labels()) {
        const auto clusters = cluster_assign(model, data.values);
        out["cluster_accuracy"] = mapped_cluster_accuracy(clusters, data.labels);
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

struct MIArgs {
    std::string out = "-";
    std::string estimator = "mc-mixture";
    bool sorted = false;
    std::size_t outer = 256;
    std::size_t inner = 256;
    std::size_t subsample = kDefaultBankSubsample;
};

MIReport compute_mi(const HierarchicalModel& model, const Dataset& data, const MIArgs& a, std::uint64_t seed) {
    LatentMIOptions o;
    if (a.estimator == "mc-mixture")
        o.estimator = Estimator::mc_mixture;
    else if (a.estimator == "mc-standard")
        o.estimator = Estimator::mc_standard;
    else
        throw ConfigError("--estimator must be mc-mixture or mc-standard, got '" + a.estimator + "'");
    o.mc.outer_points = a.outer;
    o.mc.inner_draws = a.inner;
    o.subsample = a.subsample;
    MIReport r = latent_mi_report(model, data.values, o, seed);
    return a.sorted ? r.sorted_descending() : r;
}

int cmd_estimate_mi(const Common& c, const MIArgs& a) {
    HierarchicalModel model = HierarchicalModel::load(c.checkpoint);
    Dataset data = load_common(c);
    check_compatible(model, data);
    MIReport r = compute_mi(model, data, a, c.seed);
    std::ostringstream os;
    r.write_csv(os);
    if (a.out == "-")
        std::cout << os.str();
    else
        write_file(a.out, os.str());
    return 0;
}

std::size_t grid_cols(std::size_t n) {
    std::size_t c = 1;
    while (c * c < n) ++c;
    return c;
}

int cmd_sample(const Common& c, const std::string& mode, const std::string& bank_path, std::size_t n,
               const std::string& out, const std::string& csv) {
    HierarchicalModel model = HierarchicalModel::load(c.checkpoint);
    Rng rng(c.seed, streams::kReport);
    Tensor samples;
    if (mode == "prior") {
        samples = sample_prior(model, n, rng);
    } else if (mode == "marginal") {
        if (bank_path.empty())
            throw ConfigError(
                "--mode marginal needs a fitted marginal bank: run `corex report --checkpoint <ckpt> --data <data> "
                "--out <dir>` and pass --bank <dir>/bank.json");
        MarginalBank bank = MarginalBank::load(bank_path);
        samples = sample_marginals(model, bank, n, rng);
    } else {
        throw ConfigError("--mode must be prior or marginal, got '" + mode + "'");
    }
    if (n == 0) throw ConfigError("--n must be positive");
    ImageGrid grid = grid_from_rows(samples, grid_cols(n));
    if (model.spec().likelihood == Likelihood::gaussian) rescale_to_unit(grid);
    write_pgm_grid(grid, out);
    if (!csv.empty()) {
        std::ofstream f = open_out(csv);
        f << std::setprecision(17);
        for (std::size_t r = 0; r < samples.rows(); ++r)
            for (std::size_t j = 0; j < samples.cols(); ++j) f << samples.at(r, j) << (j + 1 < samples.cols() ? ',' : '\n');
    }
    std::cout << "wrote " << n << " samples to " << out << '\n';
    return 0;
}

int cmd_traverse(const Common& c, const std::string& dims, const std::vector<double>& range, std::size_t steps,
                 const std::string& rows, const std::string& categories, const std::string& out) {
    HierarchicalModel model = HierarchicalModel::load(c.checkpoint);
    TraversalSpec spec;
    spec.dims = parse_index_list(dims, "--dims");
    if (range.size() != 2) throw ConfigError("--range takes two values: lo hi");
    spec.lo = range[0];
    spec.hi = range[1];
    spec.steps = steps;
    TraversalSource src;
    if (!categories.empty()) {
        src.categories = parse_index_list(categories, "--categories");
    } else {
        if (c.data.empty()) throw ConfigError("traverse needs --data (seed rows) or --categories");
        Dataset data = load_common(c);
        check_compatible(model, data);
        const auto idx = rows.empty() ? std::vector<std::size_t>{0} : parse_index_list(rows, "--rows");
        for (auto i : idx)
            if (i >= data.n()) throw ConfigError("--rows: row " + std::to_string(i) + " out of range");
        src.seeds = gather_rows(data.values, idx);
    }
    ImageGrid grid = latent_traverse(model, spec, src);
    if (model.spec().likelihood == Likelihood::gaussian) rescale_to_unit(grid);
    write_pgm_grid(grid, out);
    std::cout << "wrote " << grid.rows << "x" << grid.cols << " traversal grid to " << out << '\n';
    return 0;
}

int cmd_report(const Common& c, const MIArgs& a, const std::string& out_dir) {
    HierarchicalModel model = HierarchicalModel::load(c.checkpoint);
    Dataset data = load_common(c);
    check_compatible(model, data);
    const fs::path dir = out_dir;
    fs::create_directories(dir);
    MarginalBank bank = fit_marginal_bank(model, data.values, a.subsample, c.seed);
    bank.save(dir / "bank.json");
    MIArgs unsorted = a;
    unsorted.sorted = false;
    MIReport mi = compute_mi(model, data, unsorted, c.seed);
    {
        std::ostringstream os;
        (a.sorted ? mi.sorted_descending() : mi).write_csv(os);
        write_file(dir / "mi.csv", os.str());
    }
    VarianceReport vr = variance_report(bank, mi);
    {
        std::ostringstream os;
        vr.write_csv(os);
        write_file(dir / "variance.csv", os.str());
    }
    {
        std::ostringstream os;
        vr.write_cumulative_csv(os);
        write_file(dir / "cumulative.csv", os.str());
    }
    {
        ObjectiveSettings s;
        ObjectiveConfig cfg = make_objective_config(s, model.spec(), data);
        Rng rng(c.seed, streams::kEval);
        std::ostringstream os;
        os << "layer,gain,std_err,recommended\n" << std::setprecision(17);
        for (const auto& e : layer_gain_report(model, data.values, cfg, rng))
            os << e.layer << ',' << e.value << ',' << e.std_err << ',' << (e.recommended ? 1 : 0) << '\n';
        write_file(dir / "layer_gains.csv", os.str());
    }
    std::cout << "wrote bank.json, mi.csv, variance.csv, cumulative.csv, layer_gains.csv to " << dir.string()
              << "\nspearman(variance, mi) " << vr.spearman << '\n';
    return 0;
}

int cmd_oracle(const std::string& suite, std::size_t cases, std::uint64_t seed, bool inject) {
    std::vector<std::string> names;
    if (suite == "all")
        names = oracle_suite_names();
    else
        names = {suite};
    bool ok = true;
    for (const auto& n : names) {
        OracleOptions o;
        o.cases = cases;
        o.seed = seed;
        o.inject_sign_fault = inject;
        SuiteResult r = run_oracle_suite(n, o);
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases
                  << " max_residual=" << std::setprecision(3) << r.max_residual << " seconds=" << r.seconds << '\n';
        for (const auto& f : r.failures) std::cout << "  " << f << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Hierarchical total-correlation autoencoders"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    auto* train = app.add_subcommand("train", "train a model from a JSON run config");
    train->add_option("config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--output-dir", out_override, "override output_dir of the config");

    Common ev_c;
    std::size_t ev_mc = 8;
    std::string ev_entropy = "auto";
    auto* ev = app.add_subcommand("eval", "bound, per-layer gains and cluster accuracy of a checkpoint");
    add_model_data(ev, ev_c, true);
    ev->add_option("--mc", ev_mc, "Monte Carlo draws per example")->capture_default_str()->check(CLI::PositiveNumber);
    ev->add_option("--entropy", ev_entropy, "auto | none")->capture_default_str()->check(CLI::IsMember({"auto", "none"}));

    Common mi_c;
    MIArgs mi_a;
    auto* mi = app.add_subcommand("estimate-mi", "per-dimension I(x : z_i) of the top continuous layer");
    add_model_data(mi, mi_c, true);
    mi->add_option("--out", mi_a.out, "CSV path or - for stdout")->capture_default_str();
    mi->add_option("--estimator", mi_a.estimator, "mc-mixture | mc-standard")->capture_default_str();
    mi->add_flag("--sorted", mi_a.sorted, "sort by value, largest first");
    mi->add_option("--outer", mi_a.outer, "data points averaged over (0 = all)")->capture_default_str();
    mi->add_option("--inner", mi_a.inner, "posterior draws per data point")->capture_default_str()->check(CLI::PositiveNumber);
    mi->add_option("--subsample", mi_a.subsample, "mixture components")->capture_default_str();

    Common sa_c;
    std::string sa_mode = "prior", sa_bank, sa_out, sa_csv;
    std::size_t sa_n = 64;
    auto* sa = app.add_subcommand("sample", "decode prior or marginal latent draws into a PGM grid");
    add_model_data(sa, sa_c, false);
    sa->add_option("--mode", sa_mode, "prior | marginal")->capture_default_str();
    sa->add_option("--bank", sa_bank, "marginal bank (bank.json from report)")->check(CLI::ExistingFile);
    sa->add_option("--n", sa_n, "number of samples")->capture_default_str();
    sa->add_option("--out", sa_out, "PGM output path")->required();
    sa->add_option("--csv", sa_csv, "also write the raw samples as CSV");

    Common tr_c;
    std::string tr_dims, tr_rows, tr_cats, tr_out;
    std::vector<double> tr_range{-3.0, 3.0};
    std::size_t tr_steps = 7;
    auto* tr = app.add_subcommand("traverse", "latent traversal grid");
    add_model_data(tr, tr_c, false);
    tr->add_option("--dims", tr_dims, "comma-separated latent dimensions")->required();
    tr->add_option("--range", tr_range, "lo hi")->expected(2);
    tr->add_option("--steps", tr_steps, "grid columns")->capture_default_str();
    tr->add_option("--rows", tr_rows, "comma-separated seed rows of --data (default 0)");
    tr->add_option("--categories", tr_cats, "comma-separated categories of a categorical top layer");
    tr->add_option("--out", tr_out, "PGM output path")->required();

    Common re_c;
    MIArgs re_a;
    std::string re_out;
    auto* re = app.add_subcommand("report", "marginal bank, MI, variance and layer-gain reports");
    add_model_data(re, re_c, true);
    re->add_option("--out", re_out, "output directory")->required();
    re->add_option("--estimator", re_a.estimator, "mc-mixture | mc-standard")->capture_default_str();
    re->add_flag("--sorted", re_a.sorted, "sort mi.csv by value");
    re->add_option("--outer", re_a.outer, "data points averaged over (0 = all)")->capture_default_str();
    re->add_option("--inner", re_a.inner, "posterior draws per data point")->capture_default_str()->check(CLI::PositiveNumber);
    re->add_option("--subsample", re_a.subsample, "mixture components")->capture_default_str();

    std::string or_suite = "all";
    std::size_t or_cases = 0;
    std::uint64_t or_seed = 0;
    bool or_fault = false;
    auto* orc = app.add_subcommand("oracle", "exact identity checks; exit 0 iff all pass");
    orc->add_option("--suite", or_suite, "all | discrete | gaussian | tabular | elbo")->capture_default_str();
    orc->add_option("--cases", or_cases, "cases per suite (0 = suite default)")->capture_default_str();
    orc->add_option("--seed", or_seed, "random seed")->capture_default_str();
    orc->add_flag("--inject-fault", or_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train) return cmd_train(config_path, out_override);
        if (*ev) return cmd_eval(ev_c, ev_mc, ev_entropy == "auto");
        if (*mi) return cmd_estimate_mi(mi_c, mi_a);
        if (*sa) return cmd_sample(sa_c, sa_mode, sa_bank, sa_n, sa_out, sa_csv);
        if (*tr) return cmd_traverse(tr_c, tr_dims, tr_range, tr_steps, tr_rows, tr_cats, tr_out);
        if (*re) return cmd_report(re_c, re_a, re_out);
        if (*orc) return cmd_oracle(or_suite, or_cases, or_seed, or_fault);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace corex
