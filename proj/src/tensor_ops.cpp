#include "hazardops/tensor_ops.hpp"

#include "hazardops/errors.hpp"

#include <cmath>
#include <cstring>
#include <utility>

namespace hazardops::ad {

namespace {

Tensor make_output(Shape shape, std::vector<double> values, bool needs_grad,
                   const char* op_name) {
    Tensor out(std::move(shape), std::move(values));
    out.node()->needs_grad = needs_grad;
    check_finite(*out.node(), op_name);
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op_name) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op_name) + ": shape mismatch " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

} // namespace

Activation activation_from_string(const std::string& kind) {
    if (kind == "tanh") return Activation::Tanh;
    if (kind == "gelu") return Activation::Gelu;
    if (kind == "relu") return Activation::Relu;
    throw ConfigError("activation: unknown kind '" + kind + "'");
}

std::string to_string(Activation kind) {
    switch (kind) {
        case Activation::Tanh: return "tanh";
        case Activation::Gelu: return "gelu";
        case Activation::Relu: return "relu";
    }
    return "?";
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + bv[i];
    const bool ng = a.needs_grad() || b.needs_grad();
    Tensor out = make_output(a.shape(), std::move(v), ng, "add");
    if (ng) {
        auto an = a.node(), bn = b.node(), on = out.node();
        active_tape().record({on}, [an, bn, on] {
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] - bv[i];
    const bool ng = a.needs_grad() || b.needs_grad();
    Tensor out = make_output(a.shape(), std::move(v), ng, "sub");
    if (ng) {
        auto an = a.node(), bn = b.node(), on = out.node();
        active_tape().record({on}, [an, bn, on] {
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    const bool ng = a.needs_grad() || b.needs_grad();
    Tensor out = make_output(a.shape(), std::move(v), ng, "mul");
    if (ng) {
        auto an = a.node(), bn = b.node(), on = out.node();
        active_tape().record({on}, [an, bn, on] {
            if (an->needs_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    an->grad[i] += on->grad[i] * bn->values[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    bn->grad[i] += on->grad[i] * an->values[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.size());
    const auto av = a.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * c;
    const bool ng = a.needs_grad();
    Tensor out = make_output(a.shape(), std::move(v), ng, "scale");
    if (ng) {
        auto an = a.node(), on = out.node();
        active_tape().record({on}, [an, on, c] {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * c;
        });
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.rank() != 1 || x.rank() < 1 || x.shape().back() != bias.shape()[0]) {
        throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                             " does not match trailing axis of " + shape_str(x.shape()));
    }
    const std::size_t c = bias.size();
    const std::size_t rows = x.size() / c;
    std::vector<double> v(x.size());
    const auto xv = x.values();
    const auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) v[r * c + j] = xv[r * c + j] + bv[j];
    }
    const bool ng = x.needs_grad() || bias.needs_grad();
    Tensor out = make_output(x.shape(), std::move(v), ng, "add_bias");
    if (ng) {
        auto xn = x.node(), bn = bias.node(), on = out.node();
        active_tape().record({on}, [xn, bn, on, rows, c] {
            if (xn->needs_grad) {
                xn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < c; ++j) bn->grad[j] += on->grad[r * c + j];
            }
        });
    }
    return out;
}

void matmul_kernel(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b + l * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[l] += acc;
        }
    }
}

void matmul_tn_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            double* crow = c + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

namespace {

Tensor matmul_impl(const Tensor& a, const Tensor& b, Shape out_shape,
                   std::size_t m, std::size_t k, std::size_t n, const char* op_name) {
    std::vector<double> v(m * n);
    matmul_kernel(a.values().data(), b.values().data(), v.data(), m, k, n, false);
    const bool ng = a.needs_grad() || b.needs_grad();
    Tensor out = make_output(std::move(out_shape), std::move(v), ng, op_name);
    if (ng) {
        auto an = a.node(), bn = b.node(), on = out.node();
        active_tape().record({on}, [an, bn, on, m, k, n] {
            if (an->needs_grad) {
                an->ensure_grad();
                matmul_nt_kernel(on->grad.data(), bn->values.data(), an->grad.data(), m, n, k);
            }
            if (bn->needs_grad) {
                bn->ensure_grad();
                matmul_tn_kernel(an->values.data(), on->grad.data(), bn->grad.data(), m, k, n);
            }
        });
    }
    return out;
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul: expects rank-2 operands, got " +
                             shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    const std::size_t n = b.shape()[1];
    return matmul_impl(a, b, Shape{m, n}, m, k, n, "matmul");
}

Tensor linear(const Tensor& x, const Tensor& w) {
    if (w.rank() != 2 || x.rank() < 1) {
        throw DimensionError("linear: weight must be rank 2");
    }
    const std::size_t c_in = w.shape()[0], c_out = w.shape()[1];
    if (x.shape().back() != c_in) {
        throw DimensionError("linear: trailing axis of " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(w.shape()));
    }
    const std::size_t rows = x.size() / c_in;
    Shape out_shape = x.shape();
    out_shape.back() = c_out;
    return matmul_impl(x, w, std::move(out_shape), rows, c_in, c_out, "linear");
}

Tensor activation(const Tensor& x, Activation kind) {
    const std::size_t n = x.size();
    std::vector<double> v(n);
    std::vector<double> dv(n); // derivative captured for the backward rule
    const auto xv = x.values();
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) {
                const double t = std::tanh(xv[i]);
                v[i] = t;
                dv[i] = 1.0 - t * t;
            }
            break;
        case Activation::Gelu:
            for (std::size_t i = 0; i < n; ++i) {
                const double z = xv[i];
                const double cdf = 0.5 * (1.0 + std::erf(z * inv_sqrt2));
                v[i] = z * cdf;
                dv[i] = cdf + z * inv_sqrt2pi * std::exp(-0.5 * z * z);
            }
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) {
                v[i] = xv[i] > 0.0 ? xv[i] : 0.0;
                dv[i] = xv[i] > 0.0 ? 1.0 : 0.0;
            }
            break;
    }
    const bool ng = x.needs_grad();
    Tensor out = make_output(x.shape(), std::move(v), ng, "activation");
    if (ng) {
        auto xn = x.node(), on = out.node();
        auto deriv = std::make_shared<std::vector<double>>(std::move(dv));
        active_tape().record({on}, [xn, on, deriv] {
            xn->ensure_grad();
            const auto& d = *deriv;
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * d[i];
        });
    }
    return out;
}

Tensor activation(const Tensor& x, const std::string& kind) {
    return activation(x, activation_from_string(kind));
}

Tensor transpose_12(const Tensor& x) {
    if (x.rank() != 3) {
        throw DimensionError("transpose_12: expects rank 3, got " + shape_str(x.shape()));
    }
    const std::size_t b = x.shape()[0], r = x.shape()[1], c = x.shape()[2];
    std::vector<double> v(x.size());
    const auto xv = x.values();
    for (std::size_t s = 0; s < b; ++s) {
        const double* src = xv.data() + s * r * c;
        double* dst = v.data() + s * r * c;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    const bool ng = x.needs_grad();
    Tensor out = make_output(Shape{b, c, r}, std::move(v), ng, "transpose_12");
    if (ng) {
        auto xn = x.node(), on = out.node();
        active_tape().record({on}, [xn, on, b, r, c] {
            xn->ensure_grad();
            for (std::size_t s = 0; s < b; ++s) {
                const double* src = on->grad.data() + s * r * c;
                double* dst = xn->grad.data() + s * r * c;
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += src[j * r + i];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " +
                             shape_str(new_shape) + " changes element count");
    }
    std::vector<double> v(x.values().begin(), x.values().end());
    const bool ng = x.needs_grad();
    Tensor out = make_output(std::move(new_shape), std::move(v), ng, "reshape");
    if (ng) {
        auto xn = x.node(), on = out.node();
        active_tape().record({on}, [xn, on] {
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const bool ng = x.needs_grad();
    Tensor out = make_output(Shape{1}, std::vector<double>{acc}, ng, "sum");
    if (ng) {
        auto xn = x.node(), on = out.node();
        active_tape().record({on}, [xn, on] {
            xn->ensure_grad();
            const double g = on->grad[0];
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
        });
    }
    return out;
}

Tensor scale_axis1(const Tensor& x, const Tensor& w) {
    if (x.rank() != 3 || w.rank() != 1 || x.shape()[1] != w.shape()[0]) {
        throw DimensionError("scale_axis1: expects x (B,n,c) and w (n), got " +
                             shape_str(x.shape()) + " and " + shape_str(w.shape()));
    }
    const std::size_t b = x.shape()[0], n = x.shape()[1], c = x.shape()[2];
    std::vector<double> v(x.size());
    const auto xv = x.values();
    const auto wv = w.values();
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t j = 0; j < n; ++j) {
            const double wj = wv[j];
            const std::size_t base = (s * n + j) * c;
            for (std::size_t q = 0; q < c; ++q) v[base + q] = xv[base + q] * wj;
        }
    const bool ng = x.needs_grad() || w.needs_grad();
    Tensor out = make_output(x.shape(), std::move(v), ng, "scale_axis1");
    if (ng) {
        auto xn = x.node(), wn = w.node(), on = out.node();
        active_tape().record({on}, [xn, wn, on, b, n, c] {
            if (xn->needs_grad) xn->ensure_grad();
            if (wn->needs_grad) wn->ensure_grad();
            for (std::size_t s = 0; s < b; ++s)
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t base = (s * n + j) * c;
                    if (xn->needs_grad) {
                        const double wj = wn->values[j];
                        for (std::size_t q = 0; q < c; ++q)
                            xn->grad[base + q] += on->grad[base + q] * wj;
                    }
                    if (wn->needs_grad) {
                        double acc = 0.0;
                        for (std::size_t q = 0; q < c; ++q)
                            acc += on->grad[base + q] * xn->values[base + q];
                        wn->grad[j] += acc;
                    }
                }
        });
    }
    return out;
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
        a.shape()[1] != b.shape()[1]) {
        throw DimensionError("concat_lastdim: incompatible shapes " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    }
    const std::size_t bsz = a.shape()[0], n = a.shape()[1];
    const std::size_t ca = a.shape()[2], cb = b.shape()[2];
    std::vector<double> v(bsz * n * (ca + cb));
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t r = 0; r < bsz * n; ++r) {
        std::memcpy(v.data() + r * (ca + cb), av.data() + r * ca, ca * sizeof(double));
        std::memcpy(v.data() + r * (ca + cb) + ca, bv.data() + r * cb, cb * sizeof(double));
    }
    const bool ng = a.needs_grad() || b.needs_grad();
    Tensor out = make_output(Shape{bsz, n, ca + cb}, std::move(v), ng, "concat_lastdim");
    if (ng) {
        auto an = a.node(), bn = b.node(), on = out.node();
        active_tape().record({on}, [an, bn, on, bsz, n, ca, cb] {
            if (an->needs_grad) an->ensure_grad();
            if (bn->needs_grad) bn->ensure_grad();
            for (std::size_t r = 0; r < bsz * n; ++r) {
                const double* g = on->grad.data() + r * (ca + cb);
                if (an->needs_grad)
                    for (std::size_t q = 0; q < ca; ++q) an->grad[r * ca + q] += g[q];
                if (bn->needs_grad)
                    for (std::size_t q = 0; q < cb; ++q) bn->grad[r * cb + q] += g[ca + q];
            }
        });
    }
    return out;
}

Tensor dot_combine(const Tensor& branch, const Tensor& trunk, const Tensor& bias,
                   std::size_t n_ch) {
    if (branch.rank() != 2 || trunk.rank() != 2 || bias.rank() != 1) {
        throw DimensionError("dot_combine: expects branch (B, n_ch*p), trunk (n_t, p), bias (n_ch)");
    }
    const std::size_t bsz = branch.shape()[0];
    const std::size_t p = trunk.shape()[1];
    const std::size_t n_t = trunk.shape()[0];
    if (branch.shape()[1] != n_ch * p || bias.shape()[0] != n_ch) {
        throw DimensionError("dot_combine: branch width " + std::to_string(branch.shape()[1]) +
                             " != n_ch*p = " + std::to_string(n_ch * p));
    }
    std::vector<double> v(bsz * n_t * n_ch, 0.0);
    const auto brv = branch.values();
    const auto trv = trunk.values();
    const auto biv = bias.values();
    for (std::size_t s = 0; s < bsz; ++s)
        for (std::size_t t = 0; t < n_t; ++t) {
            const double* trow = trv.data() + t * p;
            double* orow = v.data() + (s * n_t + t) * n_ch;
            for (std::size_t c = 0; c < n_ch; ++c) {
                const double* brow = brv.data() + s * n_ch * p + c * p;
                double acc = biv[c];
                for (std::size_t i = 0; i < p; ++i) acc += brow[i] * trow[i];
                orow[c] = acc;
            }
        }
    const bool ng = branch.needs_grad() || trunk.needs_grad() || bias.needs_grad();
    Tensor out = make_output(Shape{bsz, n_t, n_ch}, std::move(v), ng, "dot_combine");
    if (ng) {
        auto brn = branch.node(), trn = trunk.node(), bin = bias.node(), on = out.node();
        active_tape().record({on}, [brn, trn, bin, on, bsz, n_t, n_ch, p] {
            if (brn->needs_grad) brn->ensure_grad();
            if (trn->needs_grad) trn->ensure_grad();
            if (bin->needs_grad) bin->ensure_grad();
            for (std::size_t s = 0; s < bsz; ++s)
                for (std::size_t t = 0; t < n_t; ++t) {
                    const double* g = on->grad.data() + (s * n_t + t) * n_ch;
                    const double* trow = trn->values.data() + t * p;
                    for (std::size_t c = 0; c < n_ch; ++c) {
                        const double gc = g[c];
                        if (gc == 0.0) continue;
                        const std::size_t boff = s * n_ch * p + c * p;
                        if (brn->needs_grad) {
                            double* bg = brn->grad.data() + boff;
                            for (std::size_t i = 0; i < p; ++i) bg[i] += gc * trow[i];
                        }
                        if (trn->needs_grad) {
                            const double* brow = brn->values.data() + boff;
                            double* tg = trn->grad.data() + t * p;
                            for (std::size_t i = 0; i < p; ++i) tg[i] += gc * brow[i];
                        }
                        if (bin->needs_grad) bin->grad[c] += gc;
                    }
                }
        });
    }
    return out;
}

} // namespace hazardops::ad
