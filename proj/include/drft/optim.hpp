#pragma once

#include <string>
#include <vector>

#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

struct AdamHyper {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer state over a fixed parameter list. Accumulator
// shapes mirror the parameters; the step counter strictly increases.
class AdamOptimizer {
public:
    using Hyper = AdamHyper;

    explicit AdamOptimizer(std::vector<Parameter> params, Hyper hyper = AdamHyper());

    // In-place bias-corrected update; every parameter must carry a gradient.
    void step();
    void zero_grad();

    long step_count() const { return step_count_; }
    const Hyper& hyper() const { return hyper_; }
    const std::vector<Parameter>& params() const { return params_; }

    // Moment access for checkpoint persistence.
    const std::vector<double>& first_moment(size_t i) const { return m_[i]; }
    const std::vector<double>& second_moment(size_t i) const { return v_[i]; }
    void restore_state(long step_count, std::vector<std::vector<double>> m,
                       std::vector<std::vector<double>> v);

private:
    std::vector<Parameter> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long step_count_ = 0;
    Hyper hyper_;
};

}  // namespace drft
