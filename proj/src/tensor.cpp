#include "drft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "drft/errors.hpp"

namespace drft {

namespace {

thread_local int no_grad_depth = 0;

NodePtr make_leaf(int rows, int cols, std::vector<double> values, bool requires_grad) {
    if (rows <= 0 || cols <= 0) {
        throw ShapeError("tensor dimensions must be positive, got " + std::to_string(rows) +
                         "x" + std::to_string(cols));
    }
    if (values.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeError("data length " + std::to_string(values.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}

// Interior node builder: drops the tape when grads are globally disabled or
// no input needs them, so frozen forwards stay flat constants.
Tensor make_op(int rows, int cols, std::vector<const Tensor*> inputs,
               std::function<void(TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(static_cast<size_t>(rows) * cols, 0.0);
    bool track = grad_enabled();
    if (track) {
        bool any = false;
        for (const Tensor* t : inputs) any = any || t->node()->requires_grad;
        track = any;
    }
    if (track) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (const Tensor* t : inputs) n->parents.push_back(t->node());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

enum class Broadcast { None, Scalar, Row };

Broadcast broadcast_kind(const Tensor& big, const Tensor& small) {
    if (small.rows() == big.rows() && small.cols() == big.cols()) return Broadcast::None;
    if (small.rows() == 1 && small.cols() == 1) return Broadcast::Scalar;
    if (small.rows() == 1 && small.cols() == big.cols()) return Broadcast::Row;
    throw ShapeError("cannot broadcast " + shape_string(small) + " against " +
                     shape_string(big));
}

}  // namespace

void TensorNode::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }
bool grad_enabled() { return no_grad_depth == 0; }

namespace detail {
double tanh_backward_fault_scale = 1.0;
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    return Tensor(make_leaf(rows, cols,
                            std::vector<double>(static_cast<size_t>(rows) * cols, 0.0),
                            requires_grad));
}

Tensor Tensor::full(int rows, int cols, double fill, bool requires_grad) {
    return Tensor(make_leaf(rows, cols,
                            std::vector<double>(static_cast<size_t>(rows) * cols, fill),
                            requires_grad));
}

Tensor Tensor::from(int rows, int cols, std::vector<double> values, bool requires_grad) {
    return Tensor(make_leaf(rows, cols, std::move(values), requires_grad));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    std::vector<double> data;
    data.reserve(static_cast<size_t>(r) * c);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw ShapeError("ragged initializer rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return from(r, c, std::move(data));
}

Tensor Tensor::scalar(double v) { return from(1, 1, {v}); }

Tensor Tensor::row(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return from(1, n, std::move(values));
}

Tensor Tensor::identity(int n) {
    std::vector<double> data(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) data[static_cast<size_t>(i) * n + i] = 1.0;
    return from(n, n, std::move(data));
}

double Tensor::item() const {
    if (!is_scalar()) {
        throw ContractError("item() requires a 1x1 tensor, got " + shape_string(*this));
    }
    return node_->value[0];
}

std::span<double> Tensor::mutable_values() {
    if (!node_->parents.empty() || node_->backward_fn) {
        throw ContractError("mutable_values() is only valid on leaf tensors");
    }
    return node_->value;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
    return Tensor(make_leaf(rows(), cols(), node_->value, false));
}

std::string shape_string(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

// --- matmul family ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_string(a) + " * " +
                         shape_string(b));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_op(m, n, {&a, &b}, [an = a.node(), bn = b.node(), m, k, n](TensorNode& o) {
        const double* g = o.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* bv = bn->value.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[static_cast<size_t>(i) * n + j];
                    for (int p = 0; p < k; ++p)
                        da[static_cast<size_t>(i) * k + p] += gij * bv[static_cast<size_t>(p) * n + j];
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* av = an->value.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double aip = av[static_cast<size_t>(i) * k + p];
                    for (int j = 0; j < n; ++j)
                        db[static_cast<size_t>(p) * n + j] += aip * g[static_cast<size_t>(i) * n + j];
                }
        }
    });
    double* ov = out.node()->value.data();
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(p) * n;
            double* orow = ov + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_string(a) + " * " +
                         shape_string(b) + "^T");
    }
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out = make_op(m, n, {&a, &b}, [an = a.node(), bn = b.node(), m, k, n](TensorNode& o) {
        const double* g = o.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* bv = bn->value.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[static_cast<size_t>(i) * n + j];
                    const double* brow = bv + static_cast<size_t>(j) * k;
                    double* darow = da + static_cast<size_t>(i) * k;
                    for (int p = 0; p < k; ++p) darow[p] += gij * brow[p];
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* av = an->value.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[static_cast<size_t>(i) * n + j];
                    const double* arow = av + static_cast<size_t>(i) * k;
                    double* dbrow = db + static_cast<size_t>(j) * k;
                    for (int p = 0; p < k; ++p) dbrow[p] += gij * arow[p];
                }
        }
    });
    double* ov = out.node()->value.data();
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double* arow = av + static_cast<size_t>(i) * k;
            const double* brow = bv + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            ov[static_cast<size_t>(i) * n + j] = acc;
        }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: inner dimensions disagree, " + shape_string(a) + "^T * " +
                         shape_string(b));
    }
    const int k = a.rows(), m = a.cols(), n = b.cols();
    Tensor out = make_op(m, n, {&a, &b}, [an = a.node(), bn = b.node(), k, m, n](TensorNode& o) {
        const double* g = o.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* bv = bn->value.data();
            for (int p = 0; p < k; ++p)
                for (int i = 0; i < m; ++i) {
                    double acc = 0.0;
                    const double* grow = g + static_cast<size_t>(i) * n;
                    const double* brow = bv + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    da[static_cast<size_t>(p) * m + i] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* av = an->value.data();
            for (int p = 0; p < k; ++p)
                for (int i = 0; i < m; ++i) {
                    const double ap = av[static_cast<size_t>(p) * m + i];
                    const double* grow = g + static_cast<size_t>(i) * n;
                    double* dbrow = db + static_cast<size_t>(p) * n;
                    for (int j = 0; j < n; ++j) dbrow[j] += ap * grow[j];
                }
        }
    });
    double* ov = out.node()->value.data();
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i) {
            const double ap = av[static_cast<size_t>(p) * m + i];
            if (ap == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(p) * n;
            double* orow = ov + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += ap * brow[j];
        }
    return out;
}

// --- elementwise with broadcast ------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    // Same shape fast path; otherwise one side broadcasts.
    const Tensor* big = &a;
    const Tensor* small = &b;
    if (a.size() < b.size()) std::swap(big, small);
    Broadcast kind = broadcast_kind(*big, *small);
    const int rows = big->rows(), cols = big->cols();
    Tensor out = make_op(rows, cols, {big, small},
                         [bn = big->node(), sn = small->node(), kind, rows, cols](TensorNode& o) {
        const double* g = o.grad.data();
        const size_t n = o.value.size();
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* d = bn->grad.data();
            for (size_t i = 0; i < n; ++i) d[i] += g[i];
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            double* d = sn->grad.data();
            switch (kind) {
                case Broadcast::None:
                    for (size_t i = 0; i < n; ++i) d[i] += g[i];
                    break;
                case Broadcast::Scalar: {
                    double acc = 0.0;
                    for (size_t i = 0; i < n; ++i) acc += g[i];
                    d[0] += acc;
                    break;
                }
                case Broadcast::Row:
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j) d[j] += g[static_cast<size_t>(i) * cols + j];
                    break;
            }
        }
    });
    double* ov = out.node()->value.data();
    const double* bv = big->values().data();
    const double* sv = small->values().data();
    switch (kind) {
        case Broadcast::None:
            for (size_t i = 0; i < out.size(); ++i) ov[i] = bv[i] + sv[i];
            break;
        case Broadcast::Scalar:
            for (size_t i = 0; i < out.size(); ++i) ov[i] = bv[i] + sv[0];
            break;
        case Broadcast::Row:
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) {
                    const size_t idx = static_cast<size_t>(i) * cols + j;
                    ov[idx] = bv[idx] + sv[j];
                }
            break;
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Tensor* big = &a;
    const Tensor* small = &b;
    if (a.size() < b.size()) std::swap(big, small);
    Broadcast kind = broadcast_kind(*big, *small);
    const int rows = big->rows(), cols = big->cols();
    Tensor out = make_op(rows, cols, {big, small},
                         [bn = big->node(), sn = small->node(), kind, rows, cols](TensorNode& o) {
        const double* g = o.grad.data();
        const double* bv = bn->value.data();
        const double* sv = sn->value.data();
        const size_t n = o.value.size();
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* d = bn->grad.data();
            switch (kind) {
                case Broadcast::None:
                    for (size_t i = 0; i < n; ++i) d[i] += g[i] * sv[i];
                    break;
                case Broadcast::Scalar:
                    for (size_t i = 0; i < n; ++i) d[i] += g[i] * sv[0];
                    break;
                case Broadcast::Row:
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j) {
                            const size_t idx = static_cast<size_t>(i) * cols + j;
                            d[idx] += g[idx] * sv[j];
                        }
                    break;
            }
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            double* d = sn->grad.data();
            switch (kind) {
                case Broadcast::None:
                    for (size_t i = 0; i < n; ++i) d[i] += g[i] * bv[i];
                    break;
                case Broadcast::Scalar: {
                    double acc = 0.0;
                    for (size_t i = 0; i < n; ++i) acc += g[i] * bv[i];
                    d[0] += acc;
                    break;
                }
                case Broadcast::Row:
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j) {
                            const size_t idx = static_cast<size_t>(i) * cols + j;
                            d[j] += g[idx] * bv[idx];
                        }
                    break;
            }
        }
    });
    double* ov = out.node()->value.data();
    const double* bv = big->values().data();
    const double* sv = small->values().data();
    switch (kind) {
        case Broadcast::None:
            for (size_t i = 0; i < out.size(); ++i) ov[i] = bv[i] * sv[i];
            break;
        case Broadcast::Scalar:
            for (size_t i = 0; i < out.size(); ++i) ov[i] = bv[i] * sv[0];
            break;
        case Broadcast::Row:
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) {
                    const size_t idx = static_cast<size_t>(i) * cols + j;
                    ov[idx] = bv[idx] * sv[j];
                }
            break;
    }
    return out;
}

// --- row-wise nonlinear ops ----------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    const int rows = x.rows(), cols = x.cols();
    for (double v : x.values()) {
        if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
    }
    Tensor out = make_op(rows, cols, {&x}, [xn = x.node(), rows, cols](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            const double* y = o.value.data() + static_cast<size_t>(i) * cols;
            const double* g = o.grad.data() + static_cast<size_t>(i) * cols;
            double* d = xn->grad.data() + static_cast<size_t>(i) * cols;
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
            for (int j = 0; j < cols; ++j) d[j] += y[j] * (g[j] - dot);
        }
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (int i = 0; i < rows; ++i) {
        const double* xr = xv + static_cast<size_t>(i) * cols;
        double* orow = ov + static_cast<size_t>(i) * cols;
        double mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            sum += orow[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < cols; ++j) orow[j] *= inv;
    }
    return out;
}

namespace {

template <typename F, typename DF>
Tensor unary_elementwise(const Tensor& x, F f, DF df_from_xy) {
    Tensor out = make_op(x.rows(), x.cols(), {&x}, [xn = x.node(), df_from_xy](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double* g = o.grad.data();
        const double* xv = xn->value.data();
        const double* yv = o.value.data();
        double* d = xn->grad.data();
        for (size_t i = 0; i < o.value.size(); ++i) d[i] += g[i] * df_from_xy(xv[i], yv[i]);
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (size_t i = 0; i < x.size(); ++i) ov[i] = f(xv[i]);
    return out;
}

}  // namespace

Tensor log(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return std::log(v); },
        [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return std::exp(v); },
        [](double, double y) { return y; });
}

Tensor relu(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return detail::tanh_backward_fault_scale * (1.0 - y * y); });
}

Tensor sigmoid(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    const int rows = x.rows(), cols = x.cols();
    Tensor out = make_op(rows, cols, {&x}, [xn = x.node(), rows, cols, eps](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            const double* xr = xn->value.data() + static_cast<size_t>(i) * cols;
            const double* y = o.value.data() + static_cast<size_t>(i) * cols;
            const double* g = o.grad.data() + static_cast<size_t>(i) * cols;
            double* d = xn->grad.data() + static_cast<size_t>(i) * cols;
            double norm = 0.0;
            for (int j = 0; j < cols; ++j) norm += xr[j] * xr[j];
            norm = std::sqrt(norm);
            if (norm > eps) {
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
                const double inv = 1.0 / norm;
                for (int j = 0; j < cols; ++j) d[j] += (g[j] - y[j] * dot) * inv;
            } else {
                const double inv = 1.0 / eps;
                for (int j = 0; j < cols; ++j) d[j] += g[j] * inv;
            }
        }
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (int i = 0; i < rows; ++i) {
        const double* xr = xv + static_cast<size_t>(i) * cols;
        double* orow = ov + static_cast<size_t>(i) * cols;
        double norm = 0.0;
        for (int j = 0; j < cols; ++j) norm += xr[j] * xr[j];
        norm = std::sqrt(norm);
        const double inv = 1.0 / std::max(norm, eps);
        for (int j = 0; j < cols; ++j) orow[j] = xr[j] * inv;
    }
    return out;
}

Tensor layer_norm_rows(const Tensor& x, double eps) {
    const int rows = x.rows(), cols = x.cols();
    Tensor out = make_op(rows, cols, {&x}, [xn = x.node(), rows, cols, eps](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            const double* xr = xn->value.data() + static_cast<size_t>(i) * cols;
            const double* y = o.value.data() + static_cast<size_t>(i) * cols;
            const double* g = o.grad.data() + static_cast<size_t>(i) * cols;
            double* d = xn->grad.data() + static_cast<size_t>(i) * cols;
            double mean = 0.0;
            for (int j = 0; j < cols; ++j) mean += xr[j];
            mean /= cols;
            double var = 0.0;
            for (int j = 0; j < cols; ++j) {
                const double c = xr[j] - mean;
                var += c * c;
            }
            var /= cols;
            const double rstd = 1.0 / std::sqrt(var + eps);
            double gmean = 0.0, gymean = 0.0;
            for (int j = 0; j < cols; ++j) {
                gmean += g[j];
                gymean += g[j] * y[j];
            }
            gmean /= cols;
            gymean /= cols;
            for (int j = 0; j < cols; ++j) d[j] += (g[j] - gmean - y[j] * gymean) * rstd;
        }
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (int i = 0; i < rows; ++i) {
        const double* xr = xv + static_cast<size_t>(i) * cols;
        double* orow = ov + static_cast<size_t>(i) * cols;
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += xr[j];
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= cols;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < cols; ++j) orow[j] = (xr[j] - mean) * rstd;
    }
    return out;
}

// --- reductions ------------------------------------------------------------

Tensor mean_all(const Tensor& x) {
    const size_t n = x.size();
    Tensor out = make_op(1, 1, {&x}, [xn = x.node(), n](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = o.grad[0] / static_cast<double>(n);
        double* d = xn->grad.data();
        for (size_t i = 0; i < n; ++i) d[i] += g;
    });
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    out.node()->value[0] = acc / static_cast<double>(n);
    return out;
}

Tensor mean_rows(const Tensor& x) {
    const int rows = x.rows(), cols = x.cols();
    Tensor out = make_op(1, cols, {&x}, [xn = x.node(), rows, cols](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double inv = 1.0 / rows;
        double* d = xn->grad.data();
        const double* g = o.grad.data();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) d[static_cast<size_t>(i) * cols + j] += g[j] * inv;
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) acc += xv[static_cast<size_t>(i) * cols + j];
        ov[j] = acc / rows;
    }
    return out;
}

// --- structural ops ---------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    const int cols = parts[0].cols();
    int rows = 0;
    std::vector<const Tensor*> inputs;
    std::vector<NodePtr> nodes;
    for (const Tensor& t : parts) {
        if (t.cols() != cols) {
            throw ShapeError("concat_rows: column mismatch " + shape_string(parts[0]) + " vs " +
                             shape_string(t));
        }
        rows += t.rows();
        inputs.push_back(&t);
        nodes.push_back(t.node());
    }
    Tensor out = make_op(rows, cols, inputs, [nodes, cols](TensorNode& o) {
        size_t offset = 0;
        for (const NodePtr& p : nodes) {
            const size_t n = p->value.size();
            if (p->requires_grad) {
                p->ensure_grad();
                double* d = p->grad.data();
                const double* g = o.grad.data() + offset;
                for (size_t i = 0; i < n; ++i) d[i] += g[i];
            }
            offset += n;
        }
    });
    double* ov = out.node()->value.data();
    size_t offset = 0;
    for (const Tensor& t : parts) {
        std::copy(t.values().begin(), t.values().end(), ov + offset);
        offset += t.size();
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: empty input");
    const int rows = parts[0].rows();
    int cols = 0;
    std::vector<const Tensor*> inputs;
    std::vector<NodePtr> nodes;
    std::vector<int> widths;
    for (const Tensor& t : parts) {
        if (t.rows() != rows) {
            throw ShapeError("concat_cols: row mismatch " + shape_string(parts[0]) + " vs " +
                             shape_string(t));
        }
        cols += t.cols();
        inputs.push_back(&t);
        nodes.push_back(t.node());
        widths.push_back(t.cols());
    }
    Tensor out = make_op(rows, cols, inputs, [nodes, widths, rows, cols](TensorNode& o) {
        int col_offset = 0;
        for (size_t pi = 0; pi < nodes.size(); ++pi) {
            const NodePtr& p = nodes[pi];
            const int w = widths[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (int i = 0; i < rows; ++i) {
                    const double* g = o.grad.data() + static_cast<size_t>(i) * cols + col_offset;
                    double* d = p->grad.data() + static_cast<size_t>(i) * w;
                    for (int j = 0; j < w; ++j) d[j] += g[j];
                }
            }
            col_offset += w;
        }
    });
    double* ov = out.node()->value.data();
    int col_offset = 0;
    for (const Tensor& t : parts) {
        const int w = t.cols();
        for (int i = 0; i < rows; ++i) {
            const double* src = t.values().data() + static_cast<size_t>(i) * w;
            std::copy(src, src + w, ov + static_cast<size_t>(i) * cols + col_offset);
        }
        col_offset += w;
    }
    return out;
}

Tensor slice_rows(const Tensor& x, int row_begin, int row_end) {
    if (row_begin < 0 || row_end > x.rows() || row_begin >= row_end) {
        throw ShapeError("slice_rows: range [" + std::to_string(row_begin) + ", " +
                         std::to_string(row_end) + ") invalid for " + shape_string(x));
    }
    const int cols = x.cols();
    const int rows = row_end - row_begin;
    Tensor out = make_op(rows, cols, {&x}, [xn = x.node(), row_begin, rows, cols](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        double* d = xn->grad.data() + static_cast<size_t>(row_begin) * cols;
        const double* g = o.grad.data();
        for (size_t i = 0; i < o.value.size(); ++i) d[i] += g[i];
    });
    const double* src = x.values().data() + static_cast<size_t>(row_begin) * cols;
    std::copy(src, src + static_cast<size_t>(rows) * cols, out.node()->value.data());
    return out;
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
    if (col_begin < 0 || col_end > x.cols() || col_begin >= col_end) {
        throw ShapeError("slice_cols: range [" + std::to_string(col_begin) + ", " +
                         std::to_string(col_end) + ") invalid for " + shape_string(x));
    }
    const int rows = x.rows();
    const int xcols = x.cols();
    const int w = col_end - col_begin;
    Tensor out = make_op(rows, w, {&x}, [xn = x.node(), col_begin, rows, xcols, w](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            double* d = xn->grad.data() + static_cast<size_t>(i) * xcols + col_begin;
            const double* g = o.grad.data() + static_cast<size_t>(i) * w;
            for (int j = 0; j < w; ++j) d[j] += g[j];
        }
    });
    double* ov = out.node()->value.data();
    const double* xv = x.values().data();
    for (int i = 0; i < rows; ++i) {
        const double* src = xv + static_cast<size_t>(i) * xcols + col_begin;
        std::copy(src, src + w, ov + static_cast<size_t>(i) * w);
    }
    return out;
}

Tensor broadcast_rows(const Tensor& row_vec, int rows) {
    if (row_vec.rows() != 1) {
        throw ShapeError("broadcast_rows: expected a 1xN row, got " + shape_string(row_vec));
    }
    const int cols = row_vec.cols();
    Tensor out = make_op(rows, cols, {&row_vec}, [xn = row_vec.node(), rows, cols](TensorNode& o) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        double* d = xn->grad.data();
        const double* g = o.grad.data();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) d[j] += g[static_cast<size_t>(i) * cols + j];
    });
    double* ov = out.node()->value.data();
    const double* xv = row_vec.values().data();
    for (int i = 0; i < rows; ++i) std::copy(xv, xv + cols, ov + static_cast<size_t>(i) * cols);
    return out;
}

// --- composed helpers --------------------------------------------------------

Tensor scale(const Tensor& x, double k) { return mul(x, Tensor::scalar(k)); }

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor sum_all(const Tensor& x) {
    return scale(mean_all(x), static_cast<double>(x.size()));
}

Tensor transposed(const Tensor& x) { return matmul_tn(x, Tensor::identity(x.rows())); }

Tensor clamp_min(const Tensor& x, double lo) {
    return add(relu(add(x, Tensor::scalar(-lo))), Tensor::scalar(lo));
}

Tensor smooth_l1_scalar(const Tensor& x) {
    if (!x.is_scalar()) {
        throw ContractError("smooth_l1_scalar expects a 1x1 tensor, got " + shape_string(x));
    }
    if (std::abs(x.item()) < 1.0) {
        return scale(mul(x, x), 0.5);
    }
    // |x| - 0.5, with |x| = relu(x) + relu(-x)
    return add(add(relu(x), relu(neg(x))), Tensor::scalar(-0.5));
}

// --- reverse pass --------------------------------------------------------------

void backward(const Tensor& root) {
    if (!root.is_scalar()) {
        throw ContractError("backward requires a scalar root, got " + shape_string(root));
    }
    if (!root.node()->requires_grad) return;

    // Iterative post-order DFS over grad-requiring ancestors.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are scratch per invocation; leaf gradients persist
    // so results accumulate across graphs sharing the same leaves.
    for (TensorNode* n : order) {
        if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
    }
    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace drft
