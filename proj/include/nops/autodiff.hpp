#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nops/array.hpp"

namespace nops {

class Variable;

namespace detail {

/// One node of the eagerly-recorded computation graph. The graph lives only
/// for the duration of a forward pass and is released once the Variables
/// referencing it go out of scope.
struct VarNode {
    DenseArray value;
    DenseArray grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    bool grad_alloc = false;
    std::vector<std::shared_ptr<VarNode>> parents;
    // Accumulates this node's grad into its parents. Empty for leaves.
    std::function<void(VarNode&)> backprop;
    const char* op = "leaf";

    DenseArray& grad_ref() {
        if (!grad_alloc) {
            grad = DenseArray::zeros(value.shape);
            grad_alloc = true;
        }
        return grad;
    }
};

/// While active, newly created Variables record no provenance, so backward()
/// cannot reach through them. Used for pure evaluation (finite differences,
/// validation metrics) where graph construction is wasted work.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

}  // namespace detail

/// Handle to a graph node. Copies share the node.
class Variable {
  public:
    Variable() = default;
    explicit Variable(DenseArray value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const DenseArray& value() const { return node_->value; }
    DenseArray& mutable_value() { return node_->value; }
    const std::vector<int>& shape() const { return node_->value.shape; }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    /// Gradient accumulator (zero until backward populates it).
    const DenseArray& grad() const { return node_->grad_ref(); }
    DenseArray& mutable_grad() { return node_->grad_ref(); }
    void zero_grad();

    std::shared_ptr<detail::VarNode> node() const { return node_; }

  private:
    friend Variable make_op_result(DenseArray, std::vector<Variable>,
                                   std::function<void(detail::VarNode&)>, const char*);
    std::shared_ptr<detail::VarNode> node_;
};

/// Internal factory for op results; records provenance unless grads are off.
Variable make_op_result(DenseArray value, std::vector<Variable> parents,
                        std::function<void(detail::VarNode&)> backprop, const char* op);

// ---------------------------------------------------------------------------
// Operation set
// ---------------------------------------------------------------------------

/// Cross-correlation of x [Cin,H,W] with kernel [Cout,Cin,kH,kW], zero
/// padding, optional per-channel bias [Cout]. kH,kW must be odd.
Variable conv2d(const Variable& x, const Variable& kernel, int stride, int padding,
                const std::optional<Variable>& bias = std::nullopt);

/// Adjoint of conv2d with the same geometry. x is [Cin,H,W], kernel
/// [Cin,Cout,kH,kW]; output [Cout,H',W'] with
/// H' = (H-1)*stride - 2*padding + kH + output_padding.
/// Passing the kernel of a forward conv2d unchanged makes
/// <conv2d(x,K),y> == <x, conv2d_transpose(y,K)> hold exactly.
Variable conv2d_transpose(const Variable& x, const Variable& kernel, int stride, int padding,
                          int output_padding = 0);

enum class UnaryKind { Gelu, Relu, Neg, Scale };

/// Elementwise map. Gelu is the exact Gaussian-CDF form x*Phi(x).
Variable map_unary(UnaryKind kind, const Variable& x, double scale = 1.0);

inline Variable gelu(const Variable& x) { return map_unary(UnaryKind::Gelu, x); }
inline Variable relu(const Variable& x) { return map_unary(UnaryKind::Relu, x); }
inline Variable neg(const Variable& x) { return map_unary(UnaryKind::Neg, x); }
inline Variable scale(const Variable& x, double c) { return map_unary(UnaryKind::Scale, x, c); }

enum class BinaryKind { Add, Sub, Mul };

/// Elementwise combination. Shapes must match, except that a [C] vector may
/// pair with a [C,H,W] array (per-channel broadcast, used for biases).
Variable zip_binary(BinaryKind kind, const Variable& a, const Variable& b);

inline Variable add(const Variable& a, const Variable& b) { return zip_binary(BinaryKind::Add, a, b); }
inline Variable sub(const Variable& a, const Variable& b) { return zip_binary(BinaryKind::Sub, a, b); }
inline Variable mul(const Variable& a, const Variable& b) { return zip_binary(BinaryKind::Mul, a, b); }

/// Sum of all entries, as a [1]-shaped Variable.
Variable reduce_sum(const Variable& x);

/// Mean over all entries of (a-b)^2.
Variable mse(const Variable& a, const Variable& b);

/// Square root of a [1]-shaped Variable. The derivative at exactly zero is
/// taken as 0 (subgradient choice) so relative losses evaluated at a perfect
/// match do not poison gradients with infinities.
Variable sqrt_scalar(const Variable& x);

/// Forward differences along rows (H) and columns (W):
/// diff_h: [C,H,W] -> [C,H-1,W],  diff_w: [C,H,W] -> [C,H,W-1].
Variable diff_h(const Variable& x);
Variable diff_w(const Variable& x);

/// 2x2 mean pooling; H and W must be even.
Variable avg_pool2(const Variable& x);

/// Reverse topological sweep from a scalar root. Gradients accumulate into
/// every reachable Variable with requires_grad; repeated calls without
/// zero_grad() keep accumulating.
void backward(const Variable& root);

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;  // entries flagged as non-differentiable points
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool pass = false;
    double tol = 0.0;
};

/// Compares analytic gradients of f (a deterministic scalar-valued function
/// of the given parameters) against central finite differences with step
/// h = 1e-5, using relative error |ga - gfd| / max(1,|ga|,|gfd|). Entries
/// where one-sided differences disagree (kinks, e.g. relu at 0) are excluded
/// from the comparison and counted in `skipped`. Throws if two evaluations
/// of f disagree bit-for-bit.
GradCheckReport grad_check(const std::function<Variable()>& f,
                           const std::vector<std::pair<std::string, Variable>>& params,
                           double tol);

}  // namespace nops
