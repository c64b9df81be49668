#pragma once

#include <cstdint>
#include <string>

namespace tlnet {

struct SuiteResult {
    bool ok = false;
    std::string report;
};

/// Finite-difference verification of every differentiable operation plus the
/// composed coherence -> reweight -> add -> head block, over randomized
/// configurations. Tolerances: tol_single for single ops, tol_composed for
/// the composed block.
SuiteResult run_gradient_suite(int configs_per_op = 20, double tol_single = 1e-5,
                               double tol_composed = 1e-4, uint64_t seed = 7);

}  // namespace tlnet
