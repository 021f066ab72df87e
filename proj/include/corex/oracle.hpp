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
#include <string>
#include <vector>

namespace corex {

struct OracleOptions {
    std::size_t cases = 0;  // 0 = suite default
    std::uint64_t seed = 0;
    // Negative control: flips the sign of the informativeness term in the
    // decomposition check so the discrete suite must fail.
    bool inject_sign_fault = false;
};

struct SuiteResult {
    std::string name;
    bool passed = true;
    std::size_t cases = 0;
    double max_residual = 0.0;
    double seconds = 0.0;
    std::vector<std::string> failures;
};

// Suites: "discrete" (decomposition identity and non-negativity on random
// joints), "gaussian" (closed forms on random covariances), "tabular"
// (variational bound against the exact objective), "elbo" (bound minus
// entropy offset equals the ELBO on random models).
std::vector<std::string> oracle_suite_names();
SuiteResult run_oracle_suite(const std::string& name, const OracleOptions& options = {});

}  // namespace corex
