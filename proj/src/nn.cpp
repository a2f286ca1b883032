#include "drft/nn.hpp"

#include <cmath>

#include "drft/errors.hpp"

namespace drft {

Tensor ParamStore::insert(const std::string& name, Tensor t) {
    if (contains(name)) {
        throw ContractError("duplicate parameter name '" + name + "'");
    }
    entries_.push_back({name, t});
    return t;
}

Tensor ParamStore::create(const std::string& name, int rows, int cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return insert(name, Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true));
}

Tensor ParamStore::create_const(const std::string& name, int rows, int cols, double fill) {
    return insert(name, Tensor::full(rows, cols, fill, /*requires_grad=*/true));
}

Tensor ParamStore::find(const std::string& name) const {
    for (const Parameter& p : entries_) {
        if (p.name == name) return p.tensor;
    }
    throw ContractError("unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
    for (const Parameter& p : entries_) {
        if (p.name == name) return true;
    }
    return false;
}

size_t ParamStore::total_values() const {
    size_t n = 0;
    for (const Parameter& p : entries_) n += p.tensor.size();
    return n;
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng,
               double bias_fill) {
    weight = store.create(prefix + ".weight", in, out, rng);
    bias = store.create_const(prefix + ".bias", 1, out, bias_fill);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, int dim) {
    gain = store.create_const(prefix + ".gain", 1, dim, 1.0);
    bias = store.create_const(prefix + ".bias", 1, dim, 0.0);
}

}  // namespace drft
