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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "corex/app.hpp"
#include "corex/error.hpp"

using namespace corex;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "corex");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    CliResult r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "corexvae_app" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig tiny_config(const fs::path& out) {
    RunConfig c;
    c.dataset.synthetic.n = 200;
    c.dataset.synthetic.observed_dim = 4;
    c.dataset.synthetic.latent_dim = 2;
    c.model.layers = {{LatentKind::continuous, 2, {6}, {6}, Activation::tanh}};
    c.epochs = 2;
    c.batch_size = 50;
    c.eval_size = 100;
    c.eval_mc = 2;
    c.seed = 3;
    c.output_dir = out.string();
    return c;
}

fs::path write_config(const RunConfig& c, const fs::path& dir) {
    const fs::path p = dir / "config_in.json";
    std::ofstream(p) << c.to_json();
    return p;
}

class EnvSeed {
public:
    explicit EnvSeed(const char* v) { v ? setenv("CXAE_SEED", v, 1) : unsetenv("CXAE_SEED"); }
    ~EnvSeed() { unsetenv("CXAE_SEED"); }
};

}  // namespace

TEST_CASE("run configuration round trip and strictness") {
    const RunConfig c = tiny_config("x");
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.model.layers.size() == 1);

    auto j = nlohmann::json::parse(c.to_json());
    j["epochz"] = 3;
    CHECK_THROWS_AS(RunConfig::from_json(j.dump()), ConfigError);
    j = nlohmann::json::parse(c.to_json());
    j["epochs"] = "many";
    CHECK_THROWS_AS(RunConfig::from_json(j.dump()), ConfigError);
    j = nlohmann::json::parse(c.to_json());
    j["model"]["layers"][0]["kind"] = "ordinal";
    CHECK_THROWS_AS(RunConfig::from_json(j.dump()), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json("{not json"), ConfigError);

    for (const char* name : {"linear_gaussian", "stacked_linear_gaussian", "anchored_bars", "clustered_bars"}) {
        CAPTURE(name);
        const fs::path p = fs::path(CORE_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
        CHECK_NOTHROW(RunConfig::load(p));
    }
}

TEST_CASE("environment seed") {
    {
        EnvSeed e(nullptr);
        CHECK_FALSE(seed_from_env().has_value());
    }
    {
        EnvSeed e("42");
        CHECK(seed_from_env() == 42u);
    }
    {
        EnvSeed e("-1");
        CHECK_THROWS_AS(seed_from_env(), ConfigError);
    }
    {
        EnvSeed e("12abc");
        CHECK_THROWS_AS(seed_from_env(), ConfigError);
    }
}

TEST_CASE("train subcommand outputs and determinism") {
    EnvSeed e(nullptr);
    const fs::path dir = scratch("train");
    const RunConfig c = tiny_config(dir / "a");
    const fs::path cfg = write_config(c, dir);
    CHECK(cli({"train", cfg.string()}).code == 0);
    CHECK(cli({"train", cfg.string(), "--output-dir", (dir / "b").string()}).code == 0);
    for (const char* f : {"config.json", "dataset.cxds", "metrics.csv", "timing.csv", "checkpoint.cxae"})
        CHECK(fs::exists(dir / "a" / f));
    const std::string ma = read_all(dir / "a" / "metrics.csv");
    CHECK(ma == read_all(dir / "b" / "metrics.csv"));
    CHECK(std::count(ma.begin(), ma.end(), '\n') == 3);

    {
        EnvSeed s("99");
        CHECK(cli({"train", cfg.string(), "--output-dir", (dir / "c").string()}).code == 0);
    }
    CHECK(read_all(dir / "c" / "metrics.csv") != ma);
    CHECK(RunConfig::load(dir / "c" / "config.json").seed == 99u);

    RunConfig z = c;
    z.epochs = 0;
    z.output_dir = (dir / "z").string();
    CHECK(cli({"train", write_config(z, dir).string()}).code == 0);
    const std::string mz = read_all(dir / "z" / "metrics.csv");
    CHECK(std::count(mz.begin(), mz.end(), '\n') == 1);
    CHECK(fs::exists(dir / "z" / "checkpoint.cxae"));
}

TEST_CASE("analysis subcommands") {
    EnvSeed e(nullptr);
    const fs::path dir = scratch("analysis");
    const fs::path run = dir / "run";
    CHECK(cli({"train", write_config(tiny_config(run), dir).string()}).code == 0);
    const std::string ck = (run / "checkpoint.cxae").string(), data = (run / "dataset.cxds").string();

    const CliResult ev = cli({"eval", "--checkpoint", ck, "--data", data});
    REQUIRE(ev.code == 0);
    const auto j = nlohmann::json::parse(ev.out);
    CHECK(j.contains("bound"));
    CHECK(j["entropy_offset_included"].get<bool>());
    CHECK(j["layer_gains"].size() == 1);

    const CliResult mi = cli({"estimate-mi", "--checkpoint", ck, "--data", data, "--outer", "16", "--inner", "16"});
    CHECK(mi.code == 0);
    CHECK(mi.out.rfind("dim,", 0) == 0);

    const CliResult nobank = cli({"sample", "--checkpoint", ck, "--data", data, "--mode", "marginal", "--out", (dir / "s.pgm").string()});
    CHECK(nobank.code == 2);
    CHECK(nobank.err.find("--bank") != std::string::npos);

    CHECK(cli({"report", "--checkpoint", ck, "--data", data, "--out", (dir / "rep").string()}).code == 0);
    for (const char* f : {"bank.json", "mi.csv", "variance.csv", "cumulative.csv", "layer_gains.csv"})
        CHECK(fs::exists(dir / "rep" / f));
    CHECK(cli({"sample", "--checkpoint", ck, "--data", data, "--mode", "marginal", "--bank", (dir / "rep" / "bank.json").string(), "--n", "4", "--out",
               (dir / "m.pgm").string()})
              .code == 0);
    CHECK(cli({"sample", "--checkpoint", ck, "--data", data, "--n", "4", "--out", (dir / "p.pgm").string()}).code == 0);
    CHECK(cli({"traverse", "--checkpoint", ck, "--data", data, "--dims", "0", "--steps", "5", "--out", (dir / "t.pgm").string()}).code == 0);
    CHECK(cli({"traverse", "--checkpoint", ck, "--data", data, "--dims", "0", "--steps", "1", "--out", (dir / "t.pgm").string()}).code == 2);

    CHECK(cli({"oracle", "--suite", "tabular", "--cases", "5"}).code == 0);
    const CliResult bad = cli({"oracle", "--suite", "discrete", "--cases", "5", "--inject-fault"});
    CHECK(bad.code == 1);
    CHECK(bad.out.rfind("FAIL discrete", 0) == 0);
}

TEST_CASE("cli errors") {
    const fs::path dir = scratch("errors");
    std::ofstream(dir / "bad.json") << "{\"epochs\": -3}";
    const CliResult r = cli({"train", (dir / "bad.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(cli({"eval", "--checkpoint", (dir / "missing.cxae").string()}).code != 0);
    CHECK(cli({"frobnicate"}).code != 0);
}
