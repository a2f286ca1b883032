#pragma once

#include <string>
#include <vector>

#include "drft/rng.hpp"
#include "drft/tensor.hpp"

namespace drft {

// Named trainable leaf tensor. Names are dotted paths, unique per model.
struct Parameter {
    std::string name;
    Tensor tensor;
};

// Owns every parameter of a model in creation order. Creation order is the
// checkpoint order and the optimizer order, so it must be deterministic.
class ParamStore {
public:
    // Xavier-uniform init over fan_in = rows, fan_out = cols.
    Tensor create(const std::string& name, int rows, int cols, Rng& rng);
    Tensor create_const(const std::string& name, int rows, int cols, double fill);

    const std::vector<Parameter>& entries() const { return entries_; }
    std::vector<Parameter>& entries() { return entries_; }
    Tensor find(const std::string& name) const;
    bool contains(const std::string& name) const;
    size_t total_values() const;

private:
    Tensor insert(const std::string& name, Tensor t);
    std::vector<Parameter> entries_;
};

// y = x W + b with W (in, out) and b (1, out).
struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng,
           double bias_fill = 0.0);

    Tensor operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }
};

// Learnable affine on top of row-wise layer normalization.
struct LayerNorm {
    Tensor gain;
    Tensor bias;

    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& prefix, int dim);

    Tensor operator()(const Tensor& x) const {
        return add(mul(layer_norm_rows(x), gain), bias);
    }
};

}  // namespace drft
