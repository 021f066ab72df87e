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

#include "corex/oracle.hpp"

using namespace corex;

TEST_CASE("every oracle suite passes") {
    for (const std::string& name : oracle_suite_names()) {
        CAPTURE(name);
        OracleOptions o;
        o.cases = 30;
        o.seed = 4;
        const SuiteResult r = run_oracle_suite(name, o);
        CHECK(r.passed);
        CHECK(r.cases == 30);
        CHECK(r.failures.empty());
        CHECK(r.max_residual < 1e-9);
    }
}

TEST_CASE("sign fault is detected by the discrete suite only") {
    OracleOptions o;
    o.cases = 10;
    o.inject_sign_fault = true;
    const SuiteResult d = run_oracle_suite("discrete", o);
    CHECK_FALSE(d.passed);
    CHECK_FALSE(d.failures.empty());
    CHECK(run_oracle_suite("gaussian", o).passed);
}

TEST_CASE("unknown suite") { CHECK_THROWS(run_oracle_suite("nope")); }
