#include "hazardops/fft.hpp"

#include "hazardops/errors.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <unordered_map>
#include <utility>

namespace hazardops::ad {

namespace fftcore {

namespace {

using cplx = std::complex<double>;

constexpr std::size_t kBluesteinThreshold = 61; // largest prime handled by direct radix

struct Plan {
    std::size_t n = 0;
    std::vector<std::size_t> factors;    // prime factorization, ascending
    std::vector<cplx> twiddle;           // exp(-2*pi*i*j/n), j in [0, n)
    // Bluestein workspace for prime factors > threshold, keyed by factor.
    struct Chirp {
        std::size_t prime = 0;
        std::size_t padded = 0;          // power of two >= 2*prime-1
        std::vector<cplx> chirp;         // exp(-i*pi*t^2/prime), t in [0, prime)
        std::vector<cplx> kernel_fft;    // FFT of the wrapped conjugate chirp
    };
    std::vector<Chirp> chirps;
};

std::vector<std::size_t> factorize(std::size_t n) {
    std::vector<std::size_t> factors;
    for (std::size_t p = 2; p * p <= n; p += (p == 2) ? 1 : 2) {
        while (n % p == 0) {
            factors.push_back(p);
            n /= p;
        }
    }
    if (n > 1) factors.push_back(n);
    return factors;
}

void bluestein(const cplx* x, std::size_t stride, cplx* y, std::size_t prime,
               const Plan::Chirp& chirp) {
    const std::size_t padded = chirp.padded;
    std::vector<cplx> a(padded, cplx(0.0, 0.0));
    for (std::size_t t = 0; t < prime; ++t) a[t] = x[t * stride] * chirp.chirp[t];
    transform(a.data(), padded, -1);
    for (std::size_t i = 0; i < padded; ++i) a[i] *= chirp.kernel_fft[i];
    transform(a.data(), padded, +1);
    const double inv = 1.0 / static_cast<double>(padded);
    for (std::size_t k = 0; k < prime; ++k) y[k] = a[k] * inv * chirp.chirp[k];
}

// Recursive mixed-radix DIT. Reads x with the given stride, writes the
// size-n DFT into y. scratch must hold n entries.
void fft_rec(const cplx* x, std::size_t stride, cplx* y, std::size_t n,
             const Plan& plan, std::size_t depth, std::size_t root_n, cplx* scratch) {
    if (n == 1) {
        y[0] = x[0];
        return;
    }
    const std::size_t r = plan.factors[depth];
    if (r == n && r > kBluesteinThreshold) {
        for (const auto& chirp : plan.chirps) {
            if (chirp.prime == r) {
                bluestein(x, stride, y, r, chirp);
                return;
            }
        }
        throw NumericalError("fft: missing Bluestein workspace");
    }
    const std::size_t m = n / r;
    for (std::size_t q = 0; q < r; ++q) {
        fft_rec(x + q * stride, stride * r, y + q * m, m, plan, depth + 1, root_n, scratch);
    }
    // Combine the r sub-transforms; twiddles index the root table via
    // w_n^j == w_N^(j * N / n).
    const std::size_t step = root_n / n;
    const cplx* tw = plan.twiddle.data();
    if (r == 2) {
        // In-place butterfly, no scratch or copy-back.
        for (std::size_t k1 = 0; k1 < m; ++k1) {
            const cplx t = tw[k1 * step] * y[m + k1];
            y[m + k1] = y[k1] - t;
            y[k1] += t;
        }
        return;
    }
    for (std::size_t p = 0; p < r; ++p) {
        for (std::size_t k1 = 0; k1 < m; ++k1) {
            const std::size_t k = k1 + p * m;
            cplx acc = y[k1];
            std::size_t idx = 0;
            for (std::size_t q = 1; q < r; ++q) {
                idx += k;
                if (idx >= n) idx -= n;
                acc += y[q * m + k1] * tw[idx * step];
            }
            scratch[k] = acc;
        }
    }
    std::memcpy(y, scratch, n * sizeof(cplx));
}

Plan build_plan(std::size_t n) {
    Plan plan;
    plan.n = n;
    plan.factors = factorize(n);
    plan.twiddle.resize(n);
    const double theta = -2.0 * M_PI / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        plan.twiddle[j] = cplx(std::cos(theta * static_cast<double>(j)),
                               std::sin(theta * static_cast<double>(j)));
    }
    for (std::size_t f : plan.factors) {
        if (f <= kBluesteinThreshold) continue;
        bool have = false;
        for (const auto& c : plan.chirps) have = have || c.prime == f;
        if (have) continue;
        Plan::Chirp chirp;
        chirp.prime = f;
        std::size_t padded = 1;
        while (padded < 2 * f - 1) padded <<= 1;
        chirp.padded = padded;
        chirp.chirp.resize(f);
        for (std::size_t t = 0; t < f; ++t) {
            // Angle reduced modulo 2n before the trig call to keep precision.
            const std::size_t t2 = (t * t) % (2 * f);
            const double ang = -M_PI * static_cast<double>(t2) / static_cast<double>(f);
            chirp.chirp[t] = cplx(std::cos(ang), std::sin(ang));
        }
        std::vector<cplx> kernel(padded, cplx(0.0, 0.0));
        for (std::size_t t = 0; t < f; ++t) {
            const cplx v = std::conj(chirp.chirp[t]);
            kernel[t] = v;
            if (t > 0) kernel[padded - t] = v;
        }
        transform(kernel.data(), padded, -1);
        chirp.kernel_fft = std::move(kernel);
        plan.chirps.push_back(std::move(chirp));
    }
    return plan;
}

const Plan& plan_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<Plan>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        auto plan = std::make_unique<Plan>(build_plan(n));
        it = cache.emplace(n, std::move(plan)).first;
    }
    return *it->second;
}

struct Workspace {
    std::vector<cplx> work;
    std::vector<cplx> scratch;
};

// One workspace per recursion depth: Bluestein leaves re-enter transform()
// for their padded convolutions and must not clobber the caller's buffers.
Workspace& workspace(std::size_t depth) {
    thread_local std::vector<std::unique_ptr<Workspace>> pool;
    while (pool.size() <= depth) pool.push_back(std::make_unique<Workspace>());
    return *pool[depth];
}

thread_local std::size_t g_transform_depth = 0;

} // namespace

void transform(std::complex<double>* data, std::size_t n, int sign) {
    if (n == 0) throw DimensionError("fft: empty transform");
    if (n == 1) return;
    const Plan& plan = plan_for(n);
    Workspace& ws = workspace(g_transform_depth);
    ++g_transform_depth;
    try {
        if (ws.work.size() < n) ws.work.resize(n);
        if (ws.scratch.size() < n) ws.scratch.resize(n);
        // The plan's twiddles encode sign = -1; conjugate input and output
        // around the forward kernel for the inverse direction.
        if (sign > 0) {
            for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]);
        }
        std::memcpy(ws.work.data(), data, n * sizeof(cplx));
        fft_rec(ws.work.data(), 1, data, n, plan, 0, n, ws.scratch.data());
        if (sign > 0) {
            for (std::size_t i = 0; i < n; ++i) data[i] = std::conj(data[i]);
        }
    } catch (...) {
        --g_transform_depth;
        throw;
    }
    --g_transform_depth;
}

} // namespace fftcore

namespace {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Real-signal transforms. For even n the work happens in a half-length
// complex FFT (even samples in the real lane, odd samples in the imaginary
// lane); odd lengths fall back to the full complex transform.
//
// With E/O the half-length DFTs of the even/odd subsequences and
// w_k = exp(-2*pi*i*k/n):
//   X_k = E_k + w_k O_k (k < h),  X_h = E_0 - O_0,
//   E_k = (Z_k + conj(Z_{h-k}))/2,  O_k = -(i/2)(Z_k - conj(Z_{h-k})).
// ---------------------------------------------------------------------------

const std::vector<cplx>& forward_twiddles(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<std::vector<cplx>>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        auto table = std::make_unique<std::vector<cplx>>(n / 2);
        const double theta = -2.0 * M_PI / static_cast<double>(n);
        for (std::size_t k = 0; k < n / 2; ++k) {
            (*table)[k] = cplx(std::cos(theta * static_cast<double>(k)),
                               std::sin(theta * static_cast<double>(k)));
        }
        it = cache.emplace(n, std::move(table)).first;
    }
    return *it->second;
}

// spec[k] = sum_t x[t] exp(-2*pi*i*k*t/n), k = 0..n/2.
void real_forward(const double* x, std::size_t n, cplx* spec) {
    if (n % 2 != 0) {
        std::vector<cplx> buf(n);
        for (std::size_t t = 0; t < n; ++t) buf[t] = cplx(x[t], 0.0);
        fftcore::transform(buf.data(), n, -1);
        for (std::size_t k = 0; k <= n / 2; ++k) spec[k] = buf[k];
        return;
    }
    const std::size_t h = n / 2;
    const auto& tw = forward_twiddles(n);
    std::vector<cplx> z(h);
    for (std::size_t t = 0; t < h; ++t) z[t] = cplx(x[2 * t], x[2 * t + 1]);
    fftcore::transform(z.data(), h, -1);
    for (std::size_t k = 1; k < h; ++k) {
        const cplx zk = z[k];
        const cplx zc = std::conj(z[h - k]);
        const cplx e = 0.5 * (zk + zc);
        const cplx o = cplx(0.0, -0.5) * (zk - zc);
        spec[k] = e + tw[k] * o;
    }
    spec[0] = cplx(z[0].real() + z[0].imag(), 0.0);
    spec[h] = cplx(z[0].real() - z[0].imag(), 0.0);
}

// x[t] = (1/n) * hermitian reconstruction of the one-sided spectrum.
// Imaginary parts of DC and Nyquist are ignored.
void herm_inverse(const cplx* spec, std::size_t n, double* x) {
    if (n % 2 != 0) {
        const std::size_t n_freq = n / 2 + 1;
        std::vector<cplx> buf(n);
        buf[0] = cplx(spec[0].real(), 0.0);
        for (std::size_t k = 1; k < n_freq; ++k) {
            buf[k] = spec[k];
            buf[n - k] = std::conj(spec[k]);
        }
        fftcore::transform(buf.data(), n, +1);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t t = 0; t < n; ++t) x[t] = buf[t].real() * inv_n;
        return;
    }
    const std::size_t h = n / 2;
    const auto& tw = forward_twiddles(n);
    std::vector<cplx> z(h);
    const cplx x0(spec[0].real(), 0.0);
    const cplx xh(spec[h].real(), 0.0);
    // Invert the untangling: E_k = (X_k + conj(X_{h-k}))/2,
    // O_k = conj(w_k) (X_k - conj(X_{h-k}))/2, Z_k = E_k + i O_k.
    for (std::size_t k = 0; k < h; ++k) {
        const cplx xk = (k == 0) ? x0 : spec[k];
        const cplx xkc = (k == 0) ? xh : spec[h - k];
        const cplx e = 0.5 * (xk + std::conj(xkc));
        const cplx o = std::conj(tw[k]) * (0.5 * (xk - std::conj(xkc)));
        z[k] = e + cplx(0.0, 1.0) * o;
    }
    fftcore::transform(z.data(), h, +1);
    const double inv_h = 1.0 / static_cast<double>(h);
    for (std::size_t t = 0; t < h; ++t) {
        x[2 * t] = z[t].real() * inv_h;
        x[2 * t + 1] = z[t].imag() * inv_h;
    }
}

// Forward one-sided transform of each length-n row: re/im of bins 0..n/2.
void rfft_rows(const double* x, std::size_t rows, std::size_t n,
               double* re, double* im) {
    const std::size_t n_freq = n / 2 + 1;
    std::vector<cplx> spec(n_freq);
    for (std::size_t r = 0; r < rows; ++r) {
        real_forward(x + r * n, n, spec.data());
        for (std::size_t k = 0; k < n_freq; ++k) {
            re[r * n_freq + k] = spec[k].real();
            im[r * n_freq + k] = spec[k].imag();
        }
    }
}

// Hermitian reconstruction + normalized inverse; real part of the result.
void irfft_rows(const double* re, const double* im, std::size_t rows, std::size_t n,
                double* x) {
    const std::size_t n_freq = n / 2 + 1;
    std::vector<cplx> spec(n_freq);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < n_freq; ++k)
            spec[k] = cplx(re[r * n_freq + k], im[r * n_freq + k]);
        herm_inverse(spec.data(), n, x + r * n);
    }
}

// Adjoint of rfft_rows: maps one-sided (dre, dim) back to the time domain.
// Equals n * herm_inverse applied to {Re dG_0, dG_k/2, Re dG_nyq}.
void rfft_adjoint_rows(const double* dre, const double* dim, std::size_t rows,
                       std::size_t n, double* dx) {
    const std::size_t n_freq = n / 2 + 1;
    std::vector<cplx> spec(n_freq);
    std::vector<double> tmp(n);
    const double scale_n = static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* rre = dre + r * n_freq;
        const double* rim = dim + r * n_freq;
        spec[0] = cplx(rre[0], 0.0);
        for (std::size_t k = 1; k < n_freq; ++k)
            spec[k] = cplx(0.5 * rre[k], 0.5 * rim[k]);
        if (n % 2 == 0) spec[n / 2] = cplx(rre[n / 2], 0.0);
        herm_inverse(spec.data(), n, tmp.data());
        for (std::size_t t = 0; t < n; ++t) dx[r * n + t] += scale_n * tmp[t];
    }
}

// Adjoint of irfft_rows: forward transform with 1/n and the one-sided
// doubling weights; DC/Nyquist imaginary receivers stay zero.
void irfft_adjoint_rows(const double* dx, std::size_t rows, std::size_t n,
                        double* dre, double* dim) {
    const std::size_t n_freq = n / 2 + 1;
    std::vector<cplx> spec(n_freq);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r) {
        real_forward(dx + r * n, n, spec.data());
        for (std::size_t k = 0; k < n_freq; ++k) {
            const bool edge = (k == 0) || (n % 2 == 0 && k == n / 2);
            const double w = (edge ? 1.0 : 2.0) * inv_n;
            dre[r * n_freq + k] += w * spec[k].real();
            if (!edge) dim[r * n_freq + k] += w * spec[k].imag();
        }
    }
}

} // namespace

ComplexSpectrum rfft(const Tensor& x) {
    const std::size_t n = x.shape().back();
    if (n < 2) {
        throw DimensionError("rfft: last axis must have length >= 2, got " +
                             std::to_string(n));
    }
    const std::size_t rows = x.size() / n;
    const std::size_t n_freq = n / 2 + 1;
    Shape out_shape = x.shape();
    out_shape.back() = n_freq;
    std::vector<double> re(rows * n_freq), im(rows * n_freq);
    rfft_rows(x.values().data(), rows, n, re.data(), im.data());
    const bool ng = x.needs_grad();
    Tensor tre(out_shape, std::move(re));
    Tensor tim(std::move(out_shape), std::move(im));
    tre.node()->needs_grad = ng;
    tim.node()->needs_grad = ng;
    check_finite(*tre.node(), "rfft");
    check_finite(*tim.node(), "rfft");
    if (ng) {
        auto xn = x.node();
        auto ren = tre.node(), imn = tim.node();
        active_tape().record({ren, imn}, [xn, ren, imn, rows, n] {
            xn->ensure_grad();
            rfft_adjoint_rows(ren->grad.data(), imn->grad.data(), rows, n, xn->grad.data());
        });
    }
    return ComplexSpectrum{std::move(tre), std::move(tim), n};
}

Tensor irfft(const ComplexSpectrum& spectrum) {
    const std::size_t n = spectrum.n_t;
    const std::size_t n_freq = spectrum.n_freq();
    if (n < 2 || n_freq != n / 2 + 1) {
        throw DimensionError("irfft: inconsistent spectrum (n_t=" + std::to_string(n) +
                             ", n_freq=" + std::to_string(n_freq) + ")");
    }
    if (spectrum.re.shape() != spectrum.im.shape()) {
        throw DimensionError("irfft: real/imaginary shapes differ");
    }
    const std::size_t rows = spectrum.re.size() / n_freq;
    Shape out_shape = spectrum.re.shape();
    out_shape.back() = n;
    std::vector<double> x(rows * n);
    irfft_rows(spectrum.re.values().data(), spectrum.im.values().data(), rows, n, x.data());
    const bool ng = spectrum.re.needs_grad() || spectrum.im.needs_grad();
    Tensor out(std::move(out_shape), std::move(x));
    out.node()->needs_grad = ng;
    check_finite(*out.node(), "irfft");
    if (ng) {
        auto ren = spectrum.re.node(), imn = spectrum.im.node(), on = out.node();
        active_tape().record({on}, [ren, imn, on, rows, n] {
            ren->ensure_grad();
            imn->ensure_grad();
            irfft_adjoint_rows(on->grad.data(), rows, n, ren->grad.data(), imn->grad.data());
        });
    }
    return out;
}

ComplexSpectrum spectral_multiply(const ComplexSpectrum& s,
                                  const Tensor& weight_re, const Tensor& weight_im) {
    if (s.re.rank() != 3) {
        throw DimensionError("spectral_multiply: spectrum must be (B, d_v, n_freq)");
    }
    if (weight_re.rank() != 3 || weight_re.shape() != weight_im.shape()) {
        throw DimensionError("spectral_multiply: weights must be (k_max, d_v, d_v) pairs");
    }
    const std::size_t bsz = s.re.shape()[0];
    const std::size_t d_v = s.re.shape()[1];
    const std::size_t n_freq = s.re.shape()[2];
    const std::size_t k_max = weight_re.shape()[0];
    if (weight_re.shape()[1] != d_v || weight_re.shape()[2] != d_v) {
        throw DimensionError("spectral_multiply: weight channel dims must equal d_v");
    }
    if (k_max > n_freq) {
        throw ConfigError("spectral_multiply: k_max = " + std::to_string(k_max) +
                          " exceeds n_freq = " + std::to_string(n_freq));
    }
    std::vector<double> ore(bsz * d_v * n_freq, 0.0), oim(bsz * d_v * n_freq, 0.0);
    const double* sre = s.re.values().data();
    const double* sim = s.im.values().data();
    const double* wre = weight_re.values().data();
    const double* wim = weight_im.values().data();
    std::vector<double> col_re(d_v), col_im(d_v);
    for (std::size_t b = 0; b < bsz; ++b) {
        const std::size_t sb = b * d_v * n_freq;
        for (std::size_t k = 0; k < k_max; ++k) {
            for (std::size_t j = 0; j < d_v; ++j) {
                col_re[j] = sre[sb + j * n_freq + k];
                col_im[j] = sim[sb + j * n_freq + k];
            }
            for (std::size_t i = 0; i < d_v; ++i) {
                const double* rre = wre + (k * d_v + i) * d_v;
                const double* rim = wim + (k * d_v + i) * d_v;
                double acc_re = 0.0, acc_im = 0.0;
                for (std::size_t j = 0; j < d_v; ++j) {
                    acc_re += rre[j] * col_re[j] - rim[j] * col_im[j];
                    acc_im += rre[j] * col_im[j] + rim[j] * col_re[j];
                }
                ore[sb + i * n_freq + k] = acc_re;
                oim[sb + i * n_freq + k] = acc_im;
            }
        }
    }
    const bool ng = s.re.needs_grad() || s.im.needs_grad() ||
                    weight_re.needs_grad() || weight_im.needs_grad();
    Shape out_shape = s.re.shape();
    Tensor tre(out_shape, std::move(ore));
    Tensor tim(std::move(out_shape), std::move(oim));
    tre.node()->needs_grad = ng;
    tim.node()->needs_grad = ng;
    check_finite(*tre.node(), "spectral_multiply");
    check_finite(*tim.node(), "spectral_multiply");
    if (ng) {
        auto sren = s.re.node(), simn = s.im.node();
        auto wren = weight_re.node(), wimn = weight_im.node();
        auto oren = tre.node(), oimn = tim.node();
        active_tape().record(
            {oren, oimn}, [sren, simn, wren, wimn, oren, oimn, bsz, d_v, n_freq, k_max] {
                const bool need_s = sren->needs_grad || simn->needs_grad;
                const bool need_w = wren->needs_grad || wimn->needs_grad;
                if (need_s) {
                    sren->ensure_grad();
                    simn->ensure_grad();
                }
                if (need_w) {
                    wren->ensure_grad();
                    wimn->ensure_grad();
                }
                std::vector<double> gre(d_v), gim(d_v), cre(d_v), cim(d_v),
                    acc_re(d_v), acc_im(d_v);
                for (std::size_t b = 0; b < bsz; ++b) {
                    const std::size_t sb = b * d_v * n_freq;
                    for (std::size_t k = 0; k < k_max; ++k) {
                        for (std::size_t i = 0; i < d_v; ++i) {
                            gre[i] = oren->grad[sb + i * n_freq + k];
                            gim[i] = oimn->grad[sb + i * n_freq + k];
                        }
                        for (std::size_t j = 0; j < d_v; ++j) {
                            cre[j] = sren->values[sb + j * n_freq + k];
                            cim[j] = simn->values[sb + j * n_freq + k];
                            acc_re[j] = 0.0;
                            acc_im[j] = 0.0;
                        }
                        for (std::size_t i = 0; i < d_v; ++i) {
                            const std::size_t woff = (k * d_v + i) * d_v;
                            const double gr = gre[i], gi = gim[i];
                            if (need_w) {
                                double* wgr = wren->grad.data() + woff;
                                double* wgi = wimn->grad.data() + woff;
                                for (std::size_t j = 0; j < d_v; ++j) {
                                    wgr[j] += gr * cre[j] + gi * cim[j];
                                    wgi[j] += -gr * cim[j] + gi * cre[j];
                                }
                            }
                            if (need_s) {
                                const double* rre = wren->values.data() + woff;
                                const double* rim = wimn->values.data() + woff;
                                for (std::size_t j = 0; j < d_v; ++j) {
                                    acc_re[j] += gr * rre[j] + gi * rim[j];
                                    acc_im[j] += -gr * rim[j] + gi * rre[j];
                                }
                            }
                        }
                        if (need_s) {
                            for (std::size_t j = 0; j < d_v; ++j) {
                                sren->grad[sb + j * n_freq + k] += acc_re[j];
                                simn->grad[sb + j * n_freq + k] += acc_im[j];
                            }
                        }
                    }
                }
            });
    }
    return ComplexSpectrum{std::move(tre), std::move(tim), s.n_t};
}

} // namespace hazardops::ad
