#pragma once

// Invariant and oracle suite behind `ssr verify`.

#include "ssr/io.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ssr {

using SolverFn = std::function<SinkhornResult(const CostMatrix&, const SinkhornOptions&)>;

struct VerifyContext {
    SolverFn solver = sinkhorn_maxcost;
    std::uint64_t seed = 20250101;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    json counterexample;  // null when passed
    double seconds = 0.0;
};

struct CheckSpec {
    std::string name;
    std::string description;
    std::function<CheckResult(const VerifyContext&)> run;
};

const std::vector<CheckSpec>& verification_checks();

/// Runs every check whose name contains `filter` (all when empty).
std::vector<CheckResult> run_verification(const VerifyContext& ctx, const std::string& filter);

}  // namespace ssr
