#pragma once

#include <string>
#include <vector>

namespace drft {

struct GradCheckRow {
    std::string component;
    double max_rel_error = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

// Finite-difference verification of every differentiable component:
// numeric-core primitives at 1e-6, module compositions and the full
// training loss (T=4, c=8, N=5, S=2, H=2) at 1e-3.
std::vector<GradCheckRow> run_gradcheck_suite();

}  // namespace drft
