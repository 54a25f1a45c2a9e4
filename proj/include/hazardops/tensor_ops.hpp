#pragma once

#include "hazardops/tensor.hpp"

#include <string>

namespace hazardops::ad {

enum class Activation { Tanh, Gelu, Relu };

// Throws ConfigError for anything other than tanh/gelu/relu.
Activation activation_from_string(const std::string& kind);
std::string to_string(Activation kind);

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Multiply by a plain (non-differentiated) constant.
Tensor scale(const Tensor& a, double c);

// x: (..., c), bias: (c); adds bias along the last axis.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// a: (m, k), b: (k, n) -> (m, n).
Tensor matmul(const Tensor& a, const Tensor& b);

// x: (..., c_in), w: (c_in, c_out) -> (..., c_out). Affine layers over the
// trailing feature axis without materializing reshape nodes.
Tensor linear(const Tensor& x, const Tensor& w);

Tensor activation(const Tensor& x, Activation kind);
Tensor activation(const Tensor& x, const std::string& kind);

// Swap the last two axes of a rank-3 tensor.
Tensor transpose_12(const Tensor& x);

Tensor reshape(const Tensor& x, Shape new_shape);

Tensor sum(const Tensor& x); // scalar

// x: (B, n, c), w: (n); multiplies every (b, j, c) entry by w[j]. Gradients
// flow to both operands, which makes per-time-point loss weights trainable.
Tensor scale_axis1(const Tensor& x, const Tensor& w);

// a: (B, n, c1), b: (B, n, c2) -> (B, n, c1+c2).
Tensor concat_lastdim(const Tensor& a, const Tensor& b);

// branch: (B, n_ch*p), trunk: (n_t, p), bias: (n_ch) -> (B, n_t, n_ch)
// out[b,t,c] = sum_i branch[b, c*p + i] * trunk[t, i] + bias[c]
Tensor dot_combine(const Tensor& branch, const Tensor& trunk, const Tensor& bias,
                   std::size_t n_ch);

// Raw kernels shared with the backward rules; exposed for reuse in
// non-taped numerics. C = A*B (optionally accumulating into C).
void matmul_kernel(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C (m,k) += A (m,n) * B^T where B is (k,n).
void matmul_nt_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k);
// C (k,n) += A^T where A is (m,k), times B (m,n).
void matmul_tn_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);

} // namespace hazardops::ad
