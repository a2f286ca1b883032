#pragma once

#include <functional>
#include <vector>

#include "drft/rng.hpp"
#include "drft/tensor.hpp"

namespace drft {

// Compares analytic gradients with central finite differences.
//
// `build_scalar` must deterministically rebuild the loss graph from the
// current parameter values; it is evaluated twice up front and a mismatch
// raises DeterminismError. When the total coordinate count exceeds
// `max_coordinates`, a random subset is probed (seeded, reproducible).
struct GradCheckOptions {
    double epsilon = 1e-4;
    size_t max_coordinates = 400;
    uint64_t sample_seed = 1234;
    // Coordinates where both the analytic gradient and the central
    // difference fall below this magnitude are skipped: at double precision
    // the difference quotient is pure roundoff there. Zero keeps every
    // sampled coordinate.
    double negligible_below = 0.0;
};

double grad_check(const std::function<Tensor()>& build_scalar, std::vector<Tensor> params,
                  const GradCheckOptions& options = {});

}  // namespace drft
