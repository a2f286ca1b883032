#include "drft/optim.hpp"

#include <cmath>

#include "drft/errors.hpp"

namespace drft {

AdamOptimizer::AdamOptimizer(std::vector<Parameter> params, Hyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter& p : params_) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = params_[pi];
        std::span<const double> g = p.tensor.grad();
        if (g.size() != p.tensor.size()) {
            throw ContractError("adam step: missing gradient for parameter '" + p.name + "'");
        }
        std::span<double> w = p.tensor.mutable_values();
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g[i];
            v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Parameter& p : params_) p.tensor.zero_grad();
}

void AdamOptimizer::restore_state(long step_count, std::vector<std::vector<double>> m,
                                  std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
        throw IncompatibilityError("optimizer state entry count does not match parameters");
    }
    for (size_t i = 0; i < params_.size(); ++i) {
        if (m[i].size() != params_[i].tensor.size() || v[i].size() != params_[i].tensor.size()) {
            throw IncompatibilityError("optimizer state shape mismatch for '" + params_[i].name +
                                       "'");
        }
    }
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace drft
