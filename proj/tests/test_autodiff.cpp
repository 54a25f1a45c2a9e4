#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hazardops/adam.hpp"
#include "hazardops/errors.hpp"
#include "hazardops/fft.hpp"
#include "hazardops/rng.hpp"
#include "hazardops/tensor.hpp"
#include "hazardops/tensor_ops.hpp"
#include "support/gradcheck.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace hazardops;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, rng::Sequence& seq, bool requires_grad = true,
                     double amplitude = 1.0) {
    std::vector<double> v(ad::shape_numel(shape));
    for (auto& x : v) x = amplitude * seq.normal();
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

} // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(t.value(), DimensionError);
    CHECK(Tensor::scalar(4.5).value() == 4.5);
}

TEST_CASE("matmul identity and hand arithmetic") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor c = ad::matmul(eye, a);
    CHECK(c.values()[0] == 1.0);
    CHECK(c.values()[1] == 2.0);
    CHECK(c.values()[2] == 3.0);
    CHECK(c.values()[3] == 4.0);

    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    CHECK(ad::matmul(row, col).value() == 11.0);

    Tensor bad({3, 2}, std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(ad::matmul(row, bad), DimensionError);
    ad::clear_tape();
}

TEST_CASE("gradient of sum(A*B) wrt A") {
    Tensor a({2, 2}, {1, 1, 1, 1}, true);
    Tensor b({2, 2}, {2, 0, 0, 2});
    ad::clear_tape();
    Tensor loss = ad::sum(ad::matmul(a, b));
    ad::backward(loss);
    for (double g : a.grad()) CHECK(g == doctest::Approx(2.0).epsilon(1e-12));
    ad::clear_tape();

    // Same value from the finite-difference oracle.
    auto result = testing::gradcheck([&] { return ad::sum(ad::matmul(a, b)); }, {a});
    CHECK(result.max_rel_error < 1e-6);
}

TEST_CASE("activation values and derivative oracle") {
    Tensor zero = Tensor::scalar(0.0);
    CHECK(ad::activation(zero, ad::Activation::Tanh).value() == 0.0);
    CHECK(ad::activation(Tensor::scalar(-3.5), ad::Activation::Relu).value() == 0.0);
    CHECK_THROWS_AS(ad::activation_from_string("swish"), ConfigError);
    ad::clear_tape();

    // d/dx gelu at 0.7 against central differences.
    Tensor x = Tensor::scalar(0.7, true);
    ad::clear_tape();
    Tensor y = ad::activation(x, ad::Activation::Gelu);
    ad::backward(y);
    const double analytic = x.grad()[0];
    const double h = 1e-6;
    auto gelu = [](double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); };
    const double fd = (gelu(0.7 + h) - gelu(0.7 - h)) / (2.0 * h);
    CHECK(std::abs(analytic - fd) / std::abs(fd) < 1e-6);
    ad::clear_tape();
}

TEST_CASE("rfft DC and on-grid cosine") {
    const std::size_t n = 16;
    const double c = 0.73;
    Tensor constant({n}, std::vector<double>(n, c));
    auto spec = ad::rfft(constant);
    CHECK(spec.re.values()[0] == doctest::Approx(n * c).epsilon(1e-12));
    for (std::size_t k = 1; k < spec.n_freq(); ++k) {
        CHECK(std::abs(spec.re.values()[k]) < 1e-10);
        CHECK(std::abs(spec.im.values()[k]) < 1e-10);
    }

    const std::size_t kbin = 3;
    std::vector<double> cosv(n);
    for (std::size_t t = 0; t < n; ++t)
        cosv[t] = std::cos(2.0 * M_PI * kbin * t / static_cast<double>(n));
    auto spec2 = ad::rfft(Tensor({n}, std::move(cosv)));
    for (std::size_t k = 0; k < spec2.n_freq(); ++k) {
        const double mag = std::hypot(spec2.re.values()[k], spec2.im.values()[k]);
        if (k == kbin) {
            CHECK(mag == doctest::Approx(n / 2.0).epsilon(1e-10));
        } else {
            CHECK(mag < 1e-9);
        }
    }
    CHECK_THROWS_AS(ad::rfft(Tensor({1}, {1.0})), DimensionError);
    ad::clear_tape();
}

TEST_CASE("fft roundtrip over awkward lengths") {
    rng::Sequence seq(11, 0);
    for (std::size_t n : {std::size_t(8), std::size_t(64), std::size_t(1000),
                          std::size_t(5980), std::size_t(97)}) {
        std::vector<double> v(n);
        for (auto& x : v) x = seq.normal();
        Tensor x({n}, v);
        Tensor back = ad::irfft(ad::rfft(x));
        CHECK(rel_l2(back.values(), x.values()) < 1e-10);
    }
    ad::clear_tape();
}

TEST_CASE("rfft power gradient vs finite differences") {
    rng::Sequence seq(5, 3);
    Tensor x = random_tensor({16}, seq);
    auto forward = [&] {
        auto spec = ad::rfft(x);
        return ad::add(ad::sum(ad::mul(spec.re, spec.re)),
                       ad::sum(ad::mul(spec.im, spec.im)));
    };
    auto result = testing::gradcheck(forward, {x});
    CHECK(result.max_rel_error < 1e-5);
}

TEST_CASE("spectral multiply identity, annihilator, truncation") {
    const std::size_t n = 16, n_freq = n / 2 + 1, d_v = 3;
    rng::Sequence seq(7, 1);
    Tensor x = random_tensor({1, d_v, n}, seq, false);
    auto spec = ad::rfft(x);

    // Identity weights over every mode reproduce the spectrum.
    std::vector<double> eye(n_freq * d_v * d_v, 0.0);
    for (std::size_t k = 0; k < n_freq; ++k)
        for (std::size_t i = 0; i < d_v; ++i) eye[(k * d_v + i) * d_v + i] = 1.0;
    Tensor r_re({n_freq, d_v, d_v}, eye);
    Tensor r_im = Tensor::zeros({n_freq, d_v, d_v});
    auto out = ad::spectral_multiply(spec, r_re, r_im);
    CHECK(rel_l2(out.re.values(), spec.re.values()) < 1e-12);
    CHECK(rel_l2(out.im.values(), spec.im.values()) < 1e-12);

    // Zero weights annihilate.
    auto zero = ad::spectral_multiply(spec, Tensor::zeros({n_freq, d_v, d_v}),
                                      Tensor::zeros({n_freq, d_v, d_v}));
    for (double v : zero.re.values()) CHECK(v == 0.0);

    // k_max = 2 on a bin-5 sinusoid leaves nothing.
    std::vector<double> sin5(d_v * n);
    for (std::size_t ch = 0; ch < d_v; ++ch)
        for (std::size_t t = 0; t < n; ++t)
            sin5[ch * n + t] = std::sin(2.0 * M_PI * 5.0 * t / n);
    auto spec5 = ad::rfft(Tensor({1, d_v, n}, std::move(sin5)));
    std::vector<double> ones_k2(2 * d_v * d_v, 0.5);
    auto trunc = ad::spectral_multiply(spec5, Tensor({2, d_v, d_v}, ones_k2),
                                       Tensor({2, d_v, d_v}, ones_k2));
    Tensor y = ad::irfft(trunc);
    for (double v : y.values()) CHECK(std::abs(v) < 1e-10);

    // k_max beyond n_freq is a configuration error.
    CHECK_THROWS_AS(ad::spectral_multiply(spec, Tensor::zeros({n_freq + 1, d_v, d_v}),
                                          Tensor::zeros({n_freq + 1, d_v, d_v})),
                    ConfigError);
    ad::clear_tape();
}

TEST_CASE("backward basics") {
    Tensor x({3}, {1.0, -2.0, 3.0}, true);
    ad::clear_tape();
    Tensor loss = ad::sum(ad::mul(x, x));
    ad::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(-4.0));
    CHECK(x.grad()[2] == doctest::Approx(6.0));

    // Repeated backward without reset accumulates.
    ad::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    ad::clear_tape();

    // Constant leaf: no gradients anywhere.
    Tensor c = Tensor::scalar(2.5);
    Tensor w({2}, {1.0, 2.0}, true);
    ad::clear_tape();
    ad::backward(c);
    CHECK(w.grad().empty());
    ad::clear_tape();

    CHECK_THROWS_AS(ad::backward(Tensor({2}, {1.0, 2.0})), DimensionError);
}

TEST_CASE("composite chain gradient matches finite differences") {
    // matmul -> tanh -> rfft -> spectral_multiply -> sum on 8-point signals.
    const std::size_t n = 8, d_v = 2, k_max = 3;
    rng::Sequence seq(21, 4);
    Tensor w = random_tensor({d_v, d_v}, seq, true, 0.7);
    Tensor x = random_tensor({d_v, n}, seq, true, 0.9);
    Tensor r_re = random_tensor({k_max, d_v, d_v}, seq, true, 0.5);
    Tensor r_im = random_tensor({k_max, d_v, d_v}, seq, true, 0.5);

    auto forward = [&] {
        Tensor h = ad::activation(ad::matmul(w, x), ad::Activation::Tanh);
        auto spec = ad::rfft(ad::reshape(h, {1, d_v, n}));
        auto mixed = ad::spectral_multiply(spec, r_re, r_im);
        Tensor y = ad::irfft(mixed);
        return ad::sum(ad::mul(y, y));
    };
    auto result = testing::gradcheck(forward, {w, x, r_re, r_im});
    INFO(result.worst_detail);
    CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("gradient checks across the op set") {
    rng::Sequence seq(33, 9);
    Tensor a = random_tensor({2, 3, 2}, seq);
    Tensor b = random_tensor({2, 3, 2}, seq);
    Tensor w = random_tensor({2, 4}, seq);
    Tensor bias = random_tensor({4}, seq);
    Tensor tw = random_tensor({3}, seq);

    auto check = [&](const char* what, std::function<Tensor()> fwd,
                     std::vector<Tensor> leaves) {
        auto result = testing::gradcheck(fwd, std::move(leaves));
        INFO(what, ": ", result.worst_detail);
        CHECK(result.max_rel_error < 1e-4);
    };

    check("add+scale", [&] { return ad::sum(ad::scale(ad::add(a, b), 1.7)); }, {a, b});
    check("sub/mul", [&] { return ad::sum(ad::mul(ad::sub(a, b), a)); }, {a, b});
    check("linear+bias+gelu",
          [&] {
              return ad::sum(ad::activation(ad::add_bias(ad::linear(a, w), bias),
                                            ad::Activation::Gelu));
          },
          {a, w, bias});
    check("transpose+scale_axis1",
          [&] {
              Tensor t = ad::transpose_12(a); // (2,2,3) -> weight over axis1 needs (B,n,c)
              Tensor back = ad::transpose_12(t);
              return ad::sum(ad::scale_axis1(back, tw));
          },
          {a, tw});
    check("concat", [&] { return ad::sum(ad::mul(ad::concat_lastdim(a, b),
                                                 ad::concat_lastdim(b, a))); },
          {a, b});

    Tensor branch = random_tensor({2, 6}, seq); // n_ch=2, p=3
    Tensor trunk = random_tensor({4, 3}, seq);
    Tensor cbias = random_tensor({2}, seq);
    check("dot_combine",
          [&] {
              Tensor pred = ad::dot_combine(branch, trunk, cbias, 2);
              return ad::sum(ad::mul(pred, pred));
          },
          {branch, trunk, cbias});

    // relu path (inputs away from the kink)
    Tensor rx({4}, {0.5, -1.5, 2.0, -0.25}, true);
    check("relu", [&] { return ad::sum(ad::activation(rx, ad::Activation::Relu)); }, {rx});
}

TEST_CASE("backward linearity") {
    rng::Sequence seq(2, 8);
    Tensor x = random_tensor({5}, seq);
    const double alpha = 1.7, beta = -0.35;
    ad::clear_tape();
    Tensor f = ad::sum(ad::mul(x, x));
    Tensor g = ad::sum(ad::activation(x, ad::Activation::Tanh));
    Tensor combo = ad::add(ad::scale(f, alpha), ad::scale(g, beta));
    ad::backward(combo);
    std::vector<double> combined(x.grad().begin(), x.grad().end());

    x.zero_grad();
    ad::clear_tape();
    f = ad::sum(ad::mul(x, x));
    ad::backward(f);
    std::vector<double> gf(x.grad().begin(), x.grad().end());
    x.zero_grad();
    ad::clear_tape();
    g = ad::sum(ad::activation(x, ad::Activation::Tanh));
    ad::backward(g);
    std::vector<double> gg(x.grad().begin(), x.grad().end());
    ad::clear_tape();

    for (std::size_t i = 0; i < combined.size(); ++i) {
        CHECK(std::abs(combined[i] - (alpha * gf[i] + beta * gg[i])) < 1e-10);
    }
}

TEST_CASE("non-finite forward raises") {
    Tensor big = Tensor::scalar(1e308);
    CHECK_THROWS_AS(ad::mul(big, big), NumericalError);
    ad::clear_tape();
}

TEST_CASE("adam fixed point and first-step magnitude") {
    Tensor p = Tensor::scalar(1.25, true);
    ad::Adam opt({p}, {});
    p.zero_grad();
    opt.step(); // zero gradient: no movement
    CHECK(p.value() == 1.25);

    Tensor q = Tensor::scalar(0.0, true);
    ad::AdamConfig cfg;
    cfg.lr = 0.1;
    ad::Adam opt2({q}, cfg);
    q.node()->ensure_grad();
    q.node()->grad[0] = 1.0;
    opt2.step();
    // Bias correction makes the first step ~ lr * g/|g|.
    CHECK(q.value() == doctest::Approx(-0.1).epsilon(1e-6));

    Tensor r = Tensor::scalar(1.0, true);
    ad::Adam opt3({r}, {});
    CHECK_THROWS_AS(opt3.step(), StateError);
}

TEST_CASE("adam converges on the quadratic bowl") {
    Tensor x = Tensor::scalar(5.0, true);
    ad::AdamConfig cfg;
    cfg.lr = 0.05;
    ad::Adam opt({x}, cfg);
    for (int it = 0; it < 500; ++it) {
        opt.zero_grad();
        ad::clear_tape();
        Tensor loss = ad::mul(x, x);
        ad::backward(loss);
        opt.step();
    }
    ad::clear_tape();
    CHECK(std::abs(x.value()) < 0.01);
}

TEST_CASE("deterministic training trajectory") {
    auto run = [] {
        rng::Sequence seq(99, 0);
        Tensor w = random_tensor({3, 3}, seq);
        Tensor x = random_tensor({3, 3}, seq, false);
        ad::AdamConfig cfg;
        cfg.lr = 1e-2;
        ad::Adam opt({w}, cfg);
        for (int it = 0; it < 25; ++it) {
            opt.zero_grad();
            ad::clear_tape();
            Tensor y = ad::activation(ad::matmul(w, x), ad::Activation::Tanh);
            ad::backward(ad::sum(ad::mul(y, y)));
            opt.step();
        }
        ad::clear_tape();
        return std::vector<double>(w.values().begin(), w.values().end());
    };
    auto first = run();
    auto second = run();
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
}

TEST_CASE("counter rng reproducibility and normal quality") {
    CHECK(rng::mix(1, 2, 3) == rng::mix(1, 2, 3));
    CHECK(rng::mix(1, 2, 3) != rng::mix(1, 2, 4));
    CHECK(rng::normal(7, 0, 42) == rng::normal(7, 0, 42));

    // Inverse CDF sanity at known quantiles.
    CHECK(rng::inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rng::inverse_normal_cdf(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(rng::inverse_normal_cdf(0.0013498980316300946) ==
          doctest::Approx(-3.0).epsilon(1e-9));

    // Portable log agrees with libm to near machine precision.
    for (double v : {1e-12, 0.037, 0.5, 1.0, 2.0, 123.456, 1e10}) {
        CHECK(std::abs(rng::portable_log(v) - std::log(v)) <=
              1e-15 * std::max(1.0, std::abs(std::log(v))));
    }

    // Moments over a modest ensemble.
    double mean = 0.0, var = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) mean += rng::normal(123, 5, i);
    mean /= n;
    for (int i = 0; i < n; ++i) {
        const double d = rng::normal(123, 5, i) - mean;
        var += d * d;
    }
    var /= n - 1;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}
