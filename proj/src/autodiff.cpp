#include "nops/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace nops {

namespace detail {

namespace {
thread_local int g_no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

}  // namespace detail

Variable::Variable(DenseArray value, bool requires_grad) {
    node_ = std::make_shared<detail::VarNode>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

void Variable::zero_grad() {
    if (!node_) return;
    if (node_->grad_alloc) std::fill(node_->grad.data.begin(), node_->grad.data.end(), 0.0);
}

Variable make_op_result(DenseArray value, std::vector<Variable> parents,
                        std::function<void(detail::VarNode&)> backprop, const char* op) {
    Variable out(std::move(value), false);
    if (!detail::grad_enabled()) return out;
    bool needs = false;
    for (const Variable& p : parents)
        if (p.requires_grad()) needs = true;
    if (!needs) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (Variable& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backprop = std::move(backprop);
    out.node_->op = op;
    return out;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

struct ConvGeom {
    int cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

ConvGeom conv_geometry(const std::vector<int>& xs, const std::vector<int>& ks, int stride,
                       int padding) {
    if (xs.size() != 3) throw dimension_error("conv2d: input must be [C,H,W], got " + shape_str(xs));
    if (ks.size() != 4) throw dimension_error("conv2d: kernel must be [Cout,Cin,kH,kW], got " + shape_str(ks));
    if (stride <= 0) throw argument_error("conv2d: stride must be positive");
    if (padding < 0) throw argument_error("conv2d: padding must be non-negative");
    ConvGeom g;
    g.cin = xs[0]; g.h = xs[1]; g.w = xs[2];
    g.cout = ks[0]; g.kh = ks[2]; g.kw = ks[3];
    if (ks[1] != g.cin)
        throw dimension_error("conv2d: kernel expects " + std::to_string(ks[1]) +
                              " input channels, input has " + std::to_string(g.cin));
    if (g.kh % 2 == 0 || g.kw % 2 == 0) throw argument_error("conv2d: kernel dims must be odd");
    g.stride = stride; g.pad = padding;
    g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
    g.wo = (g.w + 2 * padding - g.kw) / stride + 1;
    if (g.ho <= 0 || g.wo <= 0) throw dimension_error("conv2d: kernel larger than padded input");
    return g;
}

// Valid output range [lo, hi] along one axis for kernel offset ko: indices o
// with 0 <= o*stride - pad + ko < extent.
struct AxisRange {
    int lo, hi;
};

AxisRange valid_range(int out_extent, int in_extent, int stride, int pad, int ko) {
    const int a = pad - ko;
    const int lo = a > 0 ? (a + stride - 1) / stride : 0;
    const int hi = std::min(out_extent - 1, (in_extent - 1 + a) / stride);
    return {lo, hi};
}

// out[co,oi,oj] (+)= sum_{ci,ki,kj} x[ci, oi*s-p+ki, oj*s-p+kj] * K[co,ci,ki,kj]
void conv_forward_accum(const double* x, const double* k, double* out, const ConvGeom& g) {
    for (int co = 0; co < g.cout; ++co) {
        double* outc = out + static_cast<std::size_t>(co) * g.ho * g.wo;
        for (int ci = 0; ci < g.cin; ++ci) {
            const double* xc = x + static_cast<std::size_t>(ci) * g.h * g.w;
            const double* kc = k + (static_cast<std::size_t>(co) * g.cin + ci) * g.kh * g.kw;
            for (int ki = 0; ki < g.kh; ++ki) {
                const AxisRange ri = valid_range(g.ho, g.h, g.stride, g.pad, ki);
                for (int kj = 0; kj < g.kw; ++kj) {
                    const double wv = kc[ki * g.kw + kj];
                    if (wv == 0.0) continue;
                    const AxisRange rj = valid_range(g.wo, g.w, g.stride, g.pad, kj);
                    for (int oi = ri.lo; oi <= ri.hi; ++oi) {
                        const int ii = oi * g.stride - g.pad + ki;
                        const std::ptrdiff_t base =
                            static_cast<std::ptrdiff_t>(ii) * g.w + kj - g.pad;
                        double* orow = outc + static_cast<std::size_t>(oi) * g.wo;
                        if (g.stride == 1) {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj) orow[oj] += wv * xc[base + oj];
                        } else {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj)
                                orow[oj] += wv * xc[base + static_cast<std::ptrdiff_t>(oj) * g.stride];
                        }
                    }
                }
            }
        }
    }
}

// xg[ci,ii,jj] += sum over grad-out entries that read x[ci,ii,jj]
void conv_backward_input(const double* go, const double* k, double* xg, const ConvGeom& g) {
    for (int co = 0; co < g.cout; ++co) {
        const double* goc = go + static_cast<std::size_t>(co) * g.ho * g.wo;
        for (int ci = 0; ci < g.cin; ++ci) {
            double* xc = xg + static_cast<std::size_t>(ci) * g.h * g.w;
            const double* kc = k + (static_cast<std::size_t>(co) * g.cin + ci) * g.kh * g.kw;
            for (int ki = 0; ki < g.kh; ++ki) {
                const AxisRange ri = valid_range(g.ho, g.h, g.stride, g.pad, ki);
                for (int kj = 0; kj < g.kw; ++kj) {
                    const double wv = kc[ki * g.kw + kj];
                    if (wv == 0.0) continue;
                    const AxisRange rj = valid_range(g.wo, g.w, g.stride, g.pad, kj);
                    for (int oi = ri.lo; oi <= ri.hi; ++oi) {
                        const int ii = oi * g.stride - g.pad + ki;
                        const std::ptrdiff_t base =
                            static_cast<std::ptrdiff_t>(ii) * g.w + kj - g.pad;
                        const double* grow = goc + static_cast<std::size_t>(oi) * g.wo;
                        if (g.stride == 1) {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj) xc[base + oj] += wv * grow[oj];
                        } else {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj)
                                xc[base + static_cast<std::ptrdiff_t>(oj) * g.stride] += wv * grow[oj];
                        }
                    }
                }
            }
        }
    }
}

// kg[co,ci,ki,kj] += sum_{oi,oj} go[co,oi,oj] * x[ci, oi*s-p+ki, oj*s-p+kj]
void conv_backward_kernel(const double* go, const double* x, double* kg, const ConvGeom& g) {
    for (int co = 0; co < g.cout; ++co) {
        const double* goc = go + static_cast<std::size_t>(co) * g.ho * g.wo;
        for (int ci = 0; ci < g.cin; ++ci) {
            const double* xc = x + static_cast<std::size_t>(ci) * g.h * g.w;
            double* kc = kg + (static_cast<std::size_t>(co) * g.cin + ci) * g.kh * g.kw;
            for (int ki = 0; ki < g.kh; ++ki) {
                const AxisRange ri = valid_range(g.ho, g.h, g.stride, g.pad, ki);
                for (int kj = 0; kj < g.kw; ++kj) {
                    const AxisRange rj = valid_range(g.wo, g.w, g.stride, g.pad, kj);
                    double acc = 0.0;
                    for (int oi = ri.lo; oi <= ri.hi; ++oi) {
                        const int ii = oi * g.stride - g.pad + ki;
                        const std::ptrdiff_t base =
                            static_cast<std::ptrdiff_t>(ii) * g.w + kj - g.pad;
                        const double* grow = goc + static_cast<std::size_t>(oi) * g.wo;
                        if (g.stride == 1) {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj) acc += grow[oj] * xc[base + oj];
                        } else {
                            for (int oj = rj.lo; oj <= rj.hi; ++oj)
                                acc += grow[oj] * xc[base + static_cast<std::ptrdiff_t>(oj) * g.stride];
                        }
                    }
                    kc[ki * g.kw + kj] += acc;
                }
            }
        }
    }
}

}  // namespace

Variable conv2d(const Variable& x, const Variable& kernel, int stride, int padding,
                const std::optional<Variable>& bias) {
    const ConvGeom g = conv_geometry(x.shape(), kernel.shape(), stride, padding);
    if (bias) {
        const auto& bs = bias->shape();
        if (bs.size() != 1 || bs[0] != g.cout)
            throw dimension_error("conv2d: bias must be [Cout]=" + std::to_string(g.cout) +
                                  ", got " + shape_str(bs));
    }

    DenseArray out = DenseArray::zeros({g.cout, g.ho, g.wo});
    if (bias) {
        const auto& b = bias->value().data;
        for (int co = 0; co < g.cout; ++co)
            std::fill_n(out.data.begin() + static_cast<std::size_t>(co) * g.ho * g.wo,
                        static_cast<std::size_t>(g.ho) * g.wo, b[co]);
    }
    conv_forward_accum(x.value().data.data(), kernel.value().data.data(), out.data.data(), g);

    std::vector<Variable> parents = {x, kernel};
    if (bias) parents.push_back(*bias);
    const bool has_bias = bias.has_value();
    return make_op_result(
        std::move(out), std::move(parents),
        [g, has_bias](detail::VarNode& self) {
            const double* go = self.grad_ref().data.data();
            auto& xn = *self.parents[0];
            auto& kn = *self.parents[1];
            if (xn.requires_grad)
                conv_backward_input(go, kn.value.data.data(), xn.grad_ref().data.data(), g);
            if (kn.requires_grad)
                conv_backward_kernel(go, xn.value.data.data(), kn.grad_ref().data.data(), g);
            if (has_bias && self.parents[2]->requires_grad) {
                double* bg = self.parents[2]->grad_ref().data.data();
                for (int co = 0; co < g.cout; ++co) {
                    double acc = 0.0;
                    const double* goc = go + static_cast<std::size_t>(co) * g.ho * g.wo;
                    for (int p = 0; p < g.ho * g.wo; ++p) acc += goc[p];
                    bg[co] += acc;
                }
            }
        },
        "conv2d");
}

Variable conv2d_transpose(const Variable& x, const Variable& kernel, int stride, int padding,
                          int output_padding) {
    const auto& xs = x.shape();
    const auto& ks = kernel.shape();
    if (xs.size() != 3)
        throw dimension_error("conv2d_transpose: input must be [C,H,W], got " + shape_str(xs));
    if (ks.size() != 4)
        throw dimension_error("conv2d_transpose: kernel must be [Cin,Cout,kH,kW], got " + shape_str(ks));
    if (stride <= 0) throw argument_error("conv2d_transpose: stride must be positive");
    if (padding < 0 || output_padding < 0)
        throw argument_error("conv2d_transpose: padding must be non-negative");
    if (ks[0] != xs[0])
        throw dimension_error("conv2d_transpose: kernel expects " + std::to_string(ks[0]) +
                              " input channels, input has " + std::to_string(xs[0]));
    if (ks[2] % 2 == 0 || ks[3] % 2 == 0)
        throw argument_error("conv2d_transpose: kernel dims must be odd");

    const int cin = xs[0], h = xs[1], w = xs[2];
    const int cout = ks[1], kh = ks[2], kw = ks[3];
    const int ho = (h - 1) * stride - 2 * padding + kh + output_padding;
    const int wo = (w - 1) * stride - 2 * padding + kw + output_padding;
    if (ho <= 0 || wo <= 0) throw dimension_error("conv2d_transpose: empty output");

    // Scatter form; exactly the adjoint of the conv2d gather with the same
    // stride/padding (output_padding only widens the index range kept).
    auto scatter = [=](const double* in, const double* k, double* out) {
        for (int ci = 0; ci < cin; ++ci) {
            const double* xc = in + static_cast<std::size_t>(ci) * h * w;
            for (int co = 0; co < cout; ++co) {
                double* oc = out + static_cast<std::size_t>(co) * ho * wo;
                const double* kc = k + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
                for (int ki = 0; ki < kh; ++ki) {
                    for (int kj = 0; kj < kw; ++kj) {
                        const double wv = kc[ki * kw + kj];
                        if (wv == 0.0) continue;
                        for (int i = 0; i < h; ++i) {
                            const int a = i * stride - padding + ki;
                            if (a < 0 || a >= ho) continue;
                            const double* xrow = xc + static_cast<std::size_t>(i) * w;
                            double* orow = oc + static_cast<std::size_t>(a) * wo;
                            for (int j = 0; j < w; ++j) {
                                const int b = j * stride - padding + kj;
                                if (b < 0 || b >= wo) continue;
                                orow[b] += wv * xrow[j];
                            }
                        }
                    }
                }
            }
        }
    };

    DenseArray out = DenseArray::zeros({cout, ho, wo});
    scatter(x.value().data.data(), kernel.value().data.data(), out.data.data());

    return make_op_result(
        std::move(out), {x, kernel},
        [=](detail::VarNode& self) {
            const double* go = self.grad_ref().data.data();
            auto& xn = *self.parents[0];
            auto& kn = *self.parents[1];
            const double* k = kn.value.data.data();
            if (xn.requires_grad) {
                // Gather: xg[ci,i,j] += sum_{co,ki,kj} go[co, i*s-p+ki, j*s-p+kj] * K
                double* xg = xn.grad_ref().data.data();
                for (int ci = 0; ci < cin; ++ci) {
                    double* xgc = xg + static_cast<std::size_t>(ci) * h * w;
                    for (int co = 0; co < cout; ++co) {
                        const double* goc = go + static_cast<std::size_t>(co) * ho * wo;
                        const double* kc = k + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
                        for (int ki = 0; ki < kh; ++ki) {
                            for (int kj = 0; kj < kw; ++kj) {
                                const double wv = kc[ki * kw + kj];
                                if (wv == 0.0) continue;
                                for (int i = 0; i < h; ++i) {
                                    const int a = i * stride - padding + ki;
                                    if (a < 0 || a >= ho) continue;
                                    double* xrow = xgc + static_cast<std::size_t>(i) * w;
                                    const double* grow = goc + static_cast<std::size_t>(a) * wo;
                                    for (int j = 0; j < w; ++j) {
                                        const int b = j * stride - padding + kj;
                                        if (b < 0 || b >= wo) continue;
                                        xrow[j] += wv * grow[b];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (kn.requires_grad) {
                double* kg = kn.grad_ref().data.data();
                const double* xv = xn.value.data.data();
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xc = xv + static_cast<std::size_t>(ci) * h * w;
                    for (int co = 0; co < cout; ++co) {
                        const double* goc = go + static_cast<std::size_t>(co) * ho * wo;
                        double* kc = kg + (static_cast<std::size_t>(ci) * cout + co) * kh * kw;
                        for (int ki = 0; ki < kh; ++ki) {
                            for (int kj = 0; kj < kw; ++kj) {
                                double acc = 0.0;
                                for (int i = 0; i < h; ++i) {
                                    const int a = i * stride - padding + ki;
                                    if (a < 0 || a >= ho) continue;
                                    const double* xrow = xc + static_cast<std::size_t>(i) * w;
                                    const double* grow = goc + static_cast<std::size_t>(a) * wo;
                                    for (int j = 0; j < w; ++j) {
                                        const int b = j * stride - padding + kj;
                                        if (b < 0 || b >= wo) continue;
                                        acc += xrow[j] * grow[b];
                                    }
                                }
                                kc[ki * kw + kj] += acc;
                            }
                        }
                    }
                }
            }
        },
        "conv2d_transpose");
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double gelu_val(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }
inline double gelu_deriv(double v) {
    const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    return phi + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
}
}  // namespace

Variable map_unary(UnaryKind kind, const Variable& x, double c) {
    const auto& xv = x.value();
    DenseArray out = DenseArray::zeros(xv.shape);
    const std::size_t n = xv.size();
    // Gelu backward reuses the CDF values computed here instead of a second
    // erf sweep.
    std::shared_ptr<std::vector<double>> cdf;
    if (kind == UnaryKind::Gelu && detail::grad_enabled())
        cdf = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = xv.data[i];
        switch (kind) {
            case UnaryKind::Gelu: {
                const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                if (cdf) (*cdf)[i] = phi;
                out.data[i] = v * phi;
                break;
            }
            case UnaryKind::Relu: out.data[i] = v > 0.0 ? v : 0.0; break;
            case UnaryKind::Neg: out.data[i] = -v; break;
            case UnaryKind::Scale: out.data[i] = c * v; break;
        }
    }
    return make_op_result(
        std::move(out), {x},
        [kind, c, cdf](detail::VarNode& self) {
            auto& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            const double* go = self.grad_ref().data.data();
            double* xg = xn.grad_ref().data.data();
            const double* xv = xn.value.data.data();
            const std::size_t n = xn.value.size();
            for (std::size_t i = 0; i < n; ++i) {
                double d = 0.0;
                switch (kind) {
                    case UnaryKind::Gelu: {
                        const double v = xv[i];
                        d = (*cdf)[i] + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
                        break;
                    }
                    case UnaryKind::Relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
                    case UnaryKind::Neg: d = -1.0; break;
                    case UnaryKind::Scale: d = c; break;
                }
                xg[i] += d * go[i];
            }
        },
        "map_unary");
}

namespace {
// [C] against [C,H,W]: returns which argument (0/1) is the broadcast vector,
// or -1 for plain same-shape.
int broadcast_mode(const std::vector<int>& a, const std::vector<int>& b) {
    if (a == b) return -1;
    if (b.size() == 1 && a.size() == 3 && a[0] == b[0]) return 1;
    if (a.size() == 1 && b.size() == 3 && b[0] == a[0]) return 0;
    throw dimension_error("zip_binary: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
}
}  // namespace

Variable zip_binary(BinaryKind kind, const Variable& a, const Variable& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    const int bcast = broadcast_mode(av.shape, bv.shape);
    const std::vector<int>& oshape = (bcast == 0) ? bv.shape : av.shape;
    DenseArray out = DenseArray::zeros(oshape);

    const int C = oshape[0];
    const std::size_t plane = (oshape.size() == 3)
                                  ? static_cast<std::size_t>(oshape[1]) * oshape[2]
                                  : 1;
    auto fetch = [&](const DenseArray& v, bool is_vec, int ch, std::size_t idx) {
        return is_vec ? v.data[ch] : v.data[static_cast<std::size_t>(ch) * plane + idx];
    };
    for (int ch = 0; ch < C; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
            const double x = fetch(av, bcast == 0, ch, p);
            const double y = fetch(bv, bcast == 1, ch, p);
            double r = 0.0;
            switch (kind) {
                case BinaryKind::Add: r = x + y; break;
                case BinaryKind::Sub: r = x - y; break;
                case BinaryKind::Mul: r = x * y; break;
            }
            out.data[static_cast<std::size_t>(ch) * plane + p] = r;
        }
    }

    return make_op_result(
        std::move(out), {a, b},
        [kind, bcast, C, plane](detail::VarNode& self) {
            const double* go = self.grad_ref().data.data();
            auto& an = *self.parents[0];
            auto& bn = *self.parents[1];
            auto accum = [&](detail::VarNode& target, bool is_vec, bool is_second) {
                if (!target.requires_grad) return;
                double* tg = target.grad_ref().data.data();
                const detail::VarNode& other = is_second ? an : bn;
                const bool other_vec = is_second ? (bcast == 0) : (bcast == 1);
                const double* ov = other.value.data.data();
                for (int ch = 0; ch < C; ++ch) {
                    for (std::size_t p = 0; p < plane; ++p) {
                        const std::size_t oi = static_cast<std::size_t>(ch) * plane + p;
                        double factor = 1.0;
                        switch (kind) {
                            case BinaryKind::Add: factor = 1.0; break;
                            case BinaryKind::Sub: factor = is_second ? -1.0 : 1.0; break;
                            case BinaryKind::Mul:
                                factor = other_vec ? ov[ch] : ov[oi];
                                break;
                        }
                        const double gv = factor * go[oi];
                        if (is_vec)
                            tg[ch] += gv;
                        else
                            tg[oi] += gv;
                    }
                }
            };
            accum(an, bcast == 0, false);
            accum(bn, bcast == 1, true);
        },
        "zip_binary");
}

Variable reduce_sum(const Variable& x) {
    const auto& xv = x.value();
    if (xv.size() == 0) throw argument_error("reduce_sum: empty array");
    double s = 0.0;
    for (double v : xv.data) s += v;
    return make_op_result(
        DenseArray::scalar(s), {x},
        [](detail::VarNode& self) {
            auto& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            const double g = self.grad_ref().data[0];
            double* xg = xn.grad_ref().data.data();
            const std::size_t n = xn.value.size();
            for (std::size_t i = 0; i < n; ++i) xg[i] += g;
        },
        "reduce_sum");
}

Variable mse(const Variable& a, const Variable& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (!av.same_shape(bv))
        throw dimension_error("mse: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    if (av.size() == 0) throw argument_error("mse: empty array");
    const std::size_t n = av.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = av.data[i] - bv.data[i];
        s += d * d;
    }
    return make_op_result(
        DenseArray::scalar(s / static_cast<double>(n)), {a, b},
        [n](detail::VarNode& self) {
            const double g = self.grad_ref().data[0];
            auto& an = *self.parents[0];
            auto& bn = *self.parents[1];
            const double* avd = an.value.data.data();
            const double* bvd = bn.value.data.data();
            const double c = 2.0 * g / static_cast<double>(n);
            if (an.requires_grad) {
                double* ag = an.grad_ref().data.data();
                for (std::size_t i = 0; i < n; ++i) ag[i] += c * (avd[i] - bvd[i]);
            }
            if (bn.requires_grad) {
                double* bg = bn.grad_ref().data.data();
                for (std::size_t i = 0; i < n; ++i) bg[i] -= c * (avd[i] - bvd[i]);
            }
        },
        "mse");
}

Variable sqrt_scalar(const Variable& x) {
    if (x.value().size() != 1) throw dimension_error("sqrt_scalar: expects a [1]-shaped Variable");
    const double v = x.value().data[0];
    if (v < 0.0) throw numeric_error("sqrt_scalar: negative input");
    const double r = std::sqrt(v);
    return make_op_result(
        DenseArray::scalar(r), {x},
        [r](detail::VarNode& self) {
            auto& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            const double g = self.grad_ref().data[0];
            xn.grad_ref().data[0] += (r > 0.0) ? g * 0.5 / r : 0.0;
        },
        "sqrt_scalar");
}

namespace {
Variable diff_impl(const Variable& x, bool along_h) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw dimension_error("diff: input must be [C,H,W]");
    const int C = xs[0], H = xs[1], W = xs[2];
    if ((along_h ? H : W) < 2) throw dimension_error("diff: dimension too small");
    const int Ho = along_h ? H - 1 : H;
    const int Wo = along_h ? W : W - 1;
    DenseArray out = DenseArray::zeros({C, Ho, Wo});
    const auto& xv = x.value();
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < Ho; ++i)
            for (int j = 0; j < Wo; ++j)
                out.at3(c, i, j) = along_h ? xv.at3(c, i + 1, j) - xv.at3(c, i, j)
                                           : xv.at3(c, i, j + 1) - xv.at3(c, i, j);
    return make_op_result(
        std::move(out), {x},
        [C, Ho, Wo, along_h](detail::VarNode& self) {
            auto& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            auto& xg = xn.grad_ref();
            const auto& go = self.grad_ref();
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < Ho; ++i)
                    for (int j = 0; j < Wo; ++j) {
                        const double g = go.at3(c, i, j);
                        if (along_h) {
                            xg.at3(c, i + 1, j) += g;
                            xg.at3(c, i, j) -= g;
                        } else {
                            xg.at3(c, i, j + 1) += g;
                            xg.at3(c, i, j) -= g;
                        }
                    }
        },
        "diff");
}
}  // namespace

Variable diff_h(const Variable& x) { return diff_impl(x, true); }
Variable diff_w(const Variable& x) { return diff_impl(x, false); }

Variable avg_pool2(const Variable& x) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw dimension_error("avg_pool2: input must be [C,H,W]");
    const int C = xs[0], H = xs[1], W = xs[2];
    if (H % 2 != 0 || W % 2 != 0 || H < 2 || W < 2)
        throw dimension_error("avg_pool2: H and W must be even, got " + shape_str(xs));
    const int Ho = H / 2, Wo = W / 2;
    DenseArray out = DenseArray::zeros({C, Ho, Wo});
    const auto& xv = x.value();
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < Ho; ++i)
            for (int j = 0; j < Wo; ++j)
                out.at3(c, i, j) = 0.25 * (xv.at3(c, 2 * i, 2 * j) + xv.at3(c, 2 * i, 2 * j + 1) +
                                           xv.at3(c, 2 * i + 1, 2 * j) + xv.at3(c, 2 * i + 1, 2 * j + 1));
    return make_op_result(
        std::move(out), {x},
        [C, Ho, Wo](detail::VarNode& self) {
            auto& xn = *self.parents[0];
            if (!xn.requires_grad) return;
            auto& xg = xn.grad_ref();
            const auto& go = self.grad_ref();
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < Ho; ++i)
                    for (int j = 0; j < Wo; ++j) {
                        const double g = 0.25 * go.at3(c, i, j);
                        xg.at3(c, 2 * i, 2 * j) += g;
                        xg.at3(c, 2 * i, 2 * j + 1) += g;
                        xg.at3(c, 2 * i + 1, 2 * j) += g;
                        xg.at3(c, 2 * i + 1, 2 * j + 1) += g;
                    }
        },
        "avg_pool2");
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const Variable& root) {
    if (!root.defined()) throw argument_error("backward: undefined root");
    if (root.value().size() != 1)
        throw argument_error("backward: root must be scalar, got shape " + shape_str(root.shape()));

    // Iterative post-order DFS; reverse post-order is a topological order.
    std::vector<detail::VarNode*> order;
    std::unordered_set<detail::VarNode*> visited;
    struct Frame {
        detail::VarNode* node;
        std::size_t next_child;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_child < f.node->parents.size()) {
            detail::VarNode* child = f.node->parents[f.next_child++].get();
            if (child->requires_grad && visited.insert(child).second)
                stack.push_back({child, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root.node()->grad_ref().data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::VarNode* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Variable()>& f,
                           const std::vector<std::pair<std::string, Variable>>& params,
                           double tol) {
    constexpr double kStep = 1e-5;
    constexpr double kKinkTol = 1e-2;

    double f0;
    {
        detail::NoGradGuard ng;
        const Variable r1 = f();
        const Variable r2 = f();
        if (r1.value().size() != 1)
            throw argument_error("grad_check: f must return a scalar Variable");
        if (std::memcmp(r1.value().data.data(), r2.value().data.data(), sizeof(double)) != 0)
            throw numeric_error("grad_check: f is not deterministic (two evaluations differ)");
        f0 = r1.value().data[0];
    }

    // Analytic gradients.
    for (const auto& [name, p] : params) const_cast<Variable&>(p).zero_grad();
    std::vector<DenseArray> analytic;
    {
        Variable root = f();
        backward(root);
        for (const auto& [name, p] : params) analytic.push_back(p.grad());
    }

    GradCheckReport report;
    report.tol = tol;
    detail::NoGradGuard ng;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& name = params[pi].first;
        Variable p = params[pi].second;
        GradCheckEntry entry;
        entry.name = name;
        auto& vals = p.mutable_value().data;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + kStep;
            const double fp = f().value().data[0];
            vals[i] = saved - kStep;
            const double fm = f().value().data[0];
            vals[i] = saved;

            const double fwd = (fp - f0) / kStep;
            const double bwd = (f0 - fm) / kStep;
            if (std::abs(fwd - bwd) / std::max({1.0, std::abs(fwd), std::abs(bwd)}) > kKinkTol) {
                ++entry.skipped;  // one-sided slopes disagree: kink, not differentiable here
                continue;
            }
            const double central = (fp - fm) / (2.0 * kStep);
            const double ga = analytic[pi].data[i];
            const double err = std::abs(ga - central) / std::max({1.0, std::abs(ga), std::abs(central)});
            entry.max_rel_err = std::max(entry.max_rel_err, err);
            ++entry.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace nops
