#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace drft {

// Dense row-major matrix participating in a reverse-mode differentiation
// tape. A Tensor is a cheap handle onto a shared node; each forward pass
// builds fresh interior nodes, leaves (parameters, constants) persist.
// Scalars are 1x1, row vectors 1xN.

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation / zero_grad
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backward_fn;  // empty on leaves

    size_t size() const { return value.size(); }
    void ensure_grad();  // allocate zero-filled grad buffer if absent
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    static Tensor full(int rows, int cols, double fill, bool requires_grad = false);
    static Tensor from(int rows, int cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values);
    static Tensor identity(int n);

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    size_t size() const { return node_->value.size(); }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }

    double at(int i, int j) const { return node_->value[static_cast<size_t>(i) * cols() + j]; }
    double item() const;  // 1x1 only

    std::span<const double> values() const { return node_->value; }
    // Leaf-only mutable access (optimizer updates, checkpoint restore).
    std::span<double> mutable_values();

    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const { return node_->grad; }
    double grad_at(int i, int j) const {
        return node_->grad[static_cast<size_t>(i) * cols() + j];
    }
    void zero_grad();

    // Value copy severed from the graph.
    Tensor detach() const;

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

// While a guard is alive, newly built ops record no tape: results are
// constants. Used for the frozen positive/negative passes and evaluation.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// Test hook: scales the tanh backward pass; 1.0 is faithful. Exists so the
// gradient checker can be shown to catch a corrupted op.
namespace detail {
extern double tanh_backward_fault_scale;
}

// --- op set -----------------------------------------------------------
// matmul family
Tensor matmul(const Tensor& a, const Tensor& b);     // a(m,k) * b(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a(m,k) * b(n,k)^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a(k,m)^T * b(k,n)

// elementwise; b may be same-shape, 1x1, or a 1xc row broadcast over rows
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor softmax_rows(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);

Tensor mean_all(const Tensor& x);   // 1x1
Tensor mean_rows(const Tensor& x);  // (m,c) -> (1,c)

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int row_begin, int row_end);  // [begin, end)
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);
Tensor broadcast_rows(const Tensor& row_vec, int rows);

// composed helpers (no new primitive ops)
Tensor scale(const Tensor& x, double k);             // mul by scalar constant
Tensor neg(const Tensor& x);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor sum_all(const Tensor& x);                     // mean * numel
Tensor transposed(const Tensor& x);                  // matmul_tn with identity
Tensor clamp_min(const Tensor& x, double lo);        // relu(x - lo) + lo
Tensor smooth_l1_scalar(const Tensor& x);            // 1x1, branch on |value|

// Reverse pass from a scalar root. Interior gradients are recomputed per
// call; leaf gradients accumulate until zero_grad.
void backward(const Tensor& root);

std::string shape_string(const Tensor& t);

}  // namespace drft
