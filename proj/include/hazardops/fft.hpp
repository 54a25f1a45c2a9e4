#pragma once

#include "hazardops/tensor.hpp"

#include <complex>
#include <cstddef>
#include <vector>

namespace hazardops::ad {

namespace fftcore {

// Unnormalized DFT along a contiguous buffer of length n:
//   sign = -1:  y[k] = sum_t x[t] exp(-2*pi*i*t*k/n)   (forward)
//   sign = +1:  y[k] = sum_t x[t] exp(+2*pi*i*t*k/n)   (unscaled inverse)
// Mixed-radix Cooley-Tukey over the full prime factorization; prime factors
// above 61 go through Bluestein's chirp-z algorithm, so any length works
// (including 5980 = 2^2 * 5 * 13 * 23). Plans are cached per thread.
void transform(std::complex<double>* data, std::size_t n, int sign);

} // namespace fftcore

// One-sided spectrum of a real signal, carried on the tape as a pair of
// real tensors. shape(re) == shape(im) == (..., n_freq) with
// n_freq = n_t/2 + 1.
struct ComplexSpectrum {
    Tensor re;
    Tensor im;
    std::size_t n_t = 0; // original time-domain length

    std::size_t n_freq() const { return re.shape().back(); }
};

// Real FFT along the last axis (n_t >= 2). Differentiable: the backward
// rule is the exact adjoint of the one-sided transform.
ComplexSpectrum rfft(const Tensor& x);

// Inverse of rfft back to length spectrum.n_t. Imaginary parts of the DC
// and (even n_t) Nyquist bins do not influence the output, matching the
// hermitian reconstruction; their gradients are identically zero.
Tensor irfft(const ComplexSpectrum& spectrum);

// Per-mode channel mixing: out[b,i,k] = sum_j R[k,i,j] * s[b,j,k] for
// k < k_max (complex arithmetic), zero for k >= k_max. Spectrum shape
// (B, d_v, n_freq); weights shape (k_max, d_v, d_v), real and imaginary
// parts independently trainable.
ComplexSpectrum spectral_multiply(const ComplexSpectrum& s,
                                  const Tensor& weight_re, const Tensor& weight_im);

} // namespace hazardops::ad
