#include "drft/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "drft/errors.hpp"

namespace drft {

double grad_check(const std::function<Tensor()>& build_scalar, std::vector<Tensor> params,
                  const GradCheckOptions& options) {
    {
        NoGradGuard ng;
        const double v1 = build_scalar().item();
        const double v2 = build_scalar().item();
        if (v1 != v2) {
            throw DeterminismError("loss function returned " + std::to_string(v1) + " then " +
                                   std::to_string(v2) + " at identical parameters");
        }
    }

    for (Tensor& p : params) p.zero_grad();
    Tensor root = build_scalar();
    backward(root);

    // Collect (param, flat index) coordinates, subsampling when large.
    std::vector<std::pair<size_t, size_t>> coords;
    size_t total = 0;
    for (const Tensor& p : params) total += p.size();
    if (total <= options.max_coordinates) {
        for (size_t pi = 0; pi < params.size(); ++pi)
            for (size_t i = 0; i < params[pi].size(); ++i) coords.emplace_back(pi, i);
    } else {
        Rng rng(options.sample_seed);
        for (size_t k = 0; k < options.max_coordinates; ++k) {
            size_t flat = static_cast<size_t>(rng.uniform() * static_cast<double>(total));
            flat = std::min(flat, total - 1);
            size_t pi = 0;
            while (flat >= params[pi].size()) {
                flat -= params[pi].size();
                ++pi;
            }
            coords.emplace_back(pi, flat);
        }
    }

    double max_rel = 0.0;
    NoGradGuard ng;
    for (auto [pi, i] : coords) {
        Tensor& p = params[pi];
        const double analytic = p.grad()[i];
        std::span<double> w = p.mutable_values();
        const double saved = w[i];
        w[i] = saved + options.epsilon;
        const double up = build_scalar().item();
        w[i] = saved - options.epsilon;
        const double down = build_scalar().item();
        w[i] = saved;
        const double cd = (up - down) / (2.0 * options.epsilon);
        if (std::abs(analytic) < options.negligible_below &&
            std::abs(cd) < options.negligible_below) {
            continue;
        }
        const double denom = std::max({std::abs(analytic), std::abs(cd), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - cd) / denom);
    }
    return max_rel;
}

}  // namespace drft
