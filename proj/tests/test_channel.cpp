#include <doctest.h>

#include <cmath>

#include "dmt/channel.hpp"
#include "dmt/error.hpp"
#include "oracles.hpp"

using namespace dmt;

namespace {

// Random complex field band-limited to |f| < band_hz.
FieldBlock random_field(std::size_t n, double fs, double band_hz, Rng& rng) {
    FieldBlock f;
    f.sample_rate = fs;
    f.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(bin_frequency(k, n, fs)) < band_hz) f.samples[k] = {rng.gaussian(), rng.gaussian()};
    }
    ifft_inplace(f.samples);
    return f;
}

double rms_diff(const FieldBlock& a, const FieldBlock& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.samples[i] - b.samples[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

double field_rms(const FieldBlock& a) { return std::sqrt(mean_power(a.samples)); }

// Complex amplitude of the detected tone at bin k.
cplx tone_at(const RealBlock& x, std::size_t k) {
    std::vector<cplx> c(x.samples.begin(), x.samples.end());
    fft_inplace(c);
    return c[k];
}

}  // namespace

TEST_CASE("mzm bias points") {
    RealBlock zero;
    zero.sample_rate = 1.0;
    zero.samples.assign(16, 0.0);
    for (cplx e : mzm_modulate(zero, 1.0, 0.3).samples) CHECK(e.real() == doctest::Approx(std::cos(kPi / 4)));
    for (cplx e : mzm_modulate(zero, 1.0, 0.3, kPi / 2).samples) CHECK(std::abs(e) < 1e-15);
}

TEST_CASE("mzm is linear for a small modulation index") {
    RealBlock d;
    d.sample_rate = 1.0;
    Rng rng(3);
    for (int i = 0; i < 4096; ++i) d.samples.push_back(rng.gaussian());
    double peak = 0;
    for (double v : d.samples) peak = std::max(peak, std::abs(v));
    const double m = 0.05, vpi = 2.0;
    const auto e = mzm_modulate(d, vpi, m);
    // first-order Taylor term of cos(pi/2 v/vpi + pi/4) around the bias
    const double slope = -std::sin(kPi / 4) * 0.5 * kPi * m / peak;
    double sxy = 0, sxx = 0, resid = 0, lin = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double dev = e.samples[i].real() - std::cos(kPi / 4);
        sxy += dev * d.samples[i];
        sxx += d.samples[i] * d.samples[i];
        resid += std::pow(dev - slope * d.samples[i], 2);
        lin += std::pow(slope * d.samples[i], 2);
    }
    CHECK(sxy / sxx == doctest::Approx(slope).epsilon(0.01));
    // the quadratic Taylor term bounds the residual
    CHECK(std::sqrt(resid / lin) < 0.5 * 0.5 * kPi * m);
    // intensity at quadrature has no second-order term
    double ires = 0, ilin = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = 0.5 * kPi * m * d.samples[i] / peak;
        const double dev = std::norm(e.samples[i]) - 0.5;
        ires += std::pow(dev + x, 2);
        ilin += x * x;
    }
    CHECK(std::sqrt(ires / ilin) < 0.01);
}

TEST_CASE("super-Gaussian filter edges") {
    FilterParams f;
    const double edge = 0.5 * f.bw_3db_ghz * 1e9;
    CHECK(std::pow(supergauss_amplitude(edge, f), 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::pow(supergauss_amplitude(-edge, f), 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(supergauss_amplitude(0, f) == doctest::Approx(1.0));

    // a tone exactly at the edge loses 3 dB through optical_bandpass
    const std::size_t n = 1024;
    const double fs = edge * static_cast<double>(n) / 64.0;
    FieldBlock tone;
    tone.sample_rate = fs;
    for (std::size_t i = 0; i < n; ++i) tone.samples.push_back(std::polar(1.0, 2 * kPi * 64.0 * i / n));
    CHECK(mean_power(optical_bandpass(tone, f).samples) == doctest::Approx(0.5).epsilon(1e-9));

    FilterParams shifted = f;
    shifted.center_offset_ghz = -20.0;
    CHECK(supergauss_amplitude(0, shifted) < 0.9);
    CHECK(supergauss_amplitude(-20e9, shifted) == doctest::Approx(1.0));
    CHECK(supergauss_amplitude(15e9, shifted) < supergauss_amplitude(-15e9, shifted));

    FilterParams sharp = f;
    sharp.order = 60;
    CHECK(supergauss_amplitude(0.9 * edge, sharp) > 0.999);
    CHECK(supergauss_amplitude(1.1 * edge, sharp) < 1e-3);
}

TEST_CASE("dispersion is an all-pass") {
    Rng rng(5);
    const auto x = random_field(4096, 168e9, 40e9, rng);
    FiberParams none;
    none.L = 0;
    CHECK(apply_dispersion(x, none).samples == x.samples);
    for (double l : {10.0, 80.0, 300.0}) {
        FiberParams fib;
        fib.L = l;
        CHECK(mean_power(apply_dispersion(x, fib).samples) == doctest::Approx(mean_power(x.samples)).epsilon(1e-12));
    }
}

TEST_CASE("fading nulls") {
    FiberParams fib;
    for (int n = 1; n <= 3; ++n) {
        CHECK(fading_null_hz(fib, n) == doctest::Approx(oracle::fading_null_hz(17, 80, 194.25e12, n)).epsilon(1e-9));
    }
    CHECK(fading_null_hz(fib, 1) == doctest::Approx(6.8e9).epsilon(0.02));
    CHECK(fading_null_hz(fib, 2) == doctest::Approx(11.8e9).epsilon(0.02));
    CHECK(fading_null_hz(fib, 3) == doctest::Approx(15.2e9).epsilon(0.02));
}

TEST_CASE("detected tone fades as cos(pi D L lambda^2 f^2 / c)") {
    const std::size_t n = 4096;
    const double fs = 168e9;
    const double c = 299792458.0;
    const double lambda = c / 194.25e12;
    FiberParams fib;
    FiberParams b2b;
    b2b.L = 0;
    PinParams pin;
    for (std::size_t k : {60u, 120u, 166u, 200u}) {
        const double f = fs * static_cast<double>(k) / n;
        RealBlock d;
        d.sample_rate = fs;
        for (std::size_t i = 0; i < n; ++i) d.samples.push_back(std::cos(2 * kPi * k * i / n));
        const auto e = mzm_modulate(d, 1.0, 0.02);
        const double ref = std::abs(tone_at(pin_detect(e, pin), k));
        const double got = std::abs(tone_at(pin_detect(apply_dispersion(e, fib), pin), k));
        const double want = std::abs(std::cos(kPi * 17e-6 * 80e3 * lambda * lambda * f * f / c));
        CHECK(got / ref == doctest::Approx(want).epsilon(0.01).scale(1.0));
    }
}

TEST_CASE("mux, fiber and demux form a linear time-invariant cascade") {
    Rng rng(9);
    const auto a = random_field(2048, 168e9, 60e9, rng);
    const auto b = random_field(2048, 168e9, 60e9, rng);
    FiberParams fib;
    FilterParams filt;
    auto chain = [&](const FieldBlock& x) { return optical_bandpass(apply_dispersion(optical_bandpass(x, filt), fib), filt); };
    FieldBlock sum = a;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] = 2.0 * a.samples[i] - 0.5 * b.samples[i];
    const auto ya = chain(a), yb = chain(b), ys = chain(sum);
    FieldBlock lin = ya;
    for (std::size_t i = 0; i < lin.size(); ++i) lin.samples[i] = 2.0 * ya.samples[i] - 0.5 * yb.samples[i];
    CHECK(rms_diff(ys, lin) < 1e-9 * field_rms(ys));

    // shifting the input shifts the output
    FieldBlock shifted = a;
    std::rotate(shifted.samples.begin(), shifted.samples.begin() + 17, shifted.samples.end());
    auto ysh = chain(shifted);
    std::rotate(ysh.samples.rbegin(), ysh.samples.rbegin() + 17, ysh.samples.rend());
    CHECK(rms_diff(ysh, ya) < 1e-9 * field_rms(ya));
}

TEST_CASE("split-step without nonlinearity equals the linear operator") {
    Rng rng(1);
    const auto x = random_field(4096, 168e9, 40e9, rng);
    FiberParams fib;
    fib.gamma = 0;
    const auto ref = propagate_linear(x, fib, 3.0);
    for (double step : {0.5, 2.0, 7.0, 80.0}) {
        const auto y = ssfm_propagate(x, fib, 3.0, step);
        CHECK(rms_diff(y, ref) < 1e-9 * field_rms(ref));
    }
    const double loss = std::pow(10.0, -0.2 * 80 / 10);
    CHECK(mean_power(ref.samples) == doctest::Approx(1e-3 * std::pow(10.0, 0.3) * loss).epsilon(1e-9));
}

TEST_CASE("split-step converges with the step size") {
    Rng rng(2);
    const auto x = random_field(4096, 168e9, 40e9, rng);
    FiberParams fib;
    const auto coarse = ssfm_propagate(x, fib, 0.0, 0.5);
    const auto fine = ssfm_propagate(x, fib, 0.0, 0.25);
    CHECK(rms_diff(coarse, fine) < 1e-6);
    CHECK(rms_diff(coarse, fine) < 1e-3 * field_rms(fine));
}

TEST_CASE("continuous wave picks up the analytic nonlinear phase") {
    FieldBlock cw;
    cw.sample_rate = 84e9;
    cw.samples.assign(256, cplx{1.0, 0.0});
    FiberParams fib;
    const double p0 = 1e-3 * std::pow(10.0, 0.8);
    const auto y = ssfm_propagate(cw, fib, 8.0, 0.5);
    const double alpha = 0.2 * std::log(10.0) / 10.0;
    const double l_eff = (1 - std::exp(-alpha * 80)) / alpha;
    const double want_phase = fib.gamma * p0 * l_eff;
    const double want_amp = std::sqrt(p0 * std::exp(-alpha * 80));
    for (cplx v : y.samples) {
        CHECK(std::abs(v) == doctest::Approx(want_amp).epsilon(1e-9));
        CHECK(std::arg(v) == doctest::Approx(want_phase).epsilon(1e-9));
    }
}

TEST_CASE("noise loading reaches its target OSNR") {
    Rng rng(12);
    const double fs = 168e9;
    const auto x = random_field(1 << 16, fs, 40e9, rng);
    const double p = mean_power(x.samples);
    for (double target = 15; target <= 40; target += 5) {
        NoiseParams noise;
        noise.target_osnr_db = target;
        const auto y = load_ase(x, noise, rng);
        double np = 0;
        for (std::size_t i = 0; i < y.size(); ++i) np += std::norm(y.samples[i] - x.samples[i]);
        np /= static_cast<double>(y.size());
        const double density = np / fs;
        const double osnr = 10 * std::log10(p / (density * 12.5e9));
        CHECK(osnr == doctest::Approx(target).epsilon(0.1 / target));
        CHECK(measure_osnr_db(y, 45e9) == doctest::Approx(target).epsilon(0.1 / target));
    }
    NoiseParams off;
    CHECK(load_ase(x, off, rng).samples == x.samples);

    NoiseParams n35;
    n35.target_osnr_db = 35;
    const auto twice = load_ase(load_ase(x, n35, rng), n35, rng);
    CHECK(measure_osnr_db(twice, 45e9) == doctest::Approx(32.0).epsilon(0.1 / 32));
}

TEST_CASE("photodiode") {
    FieldBlock cw;
    cw.sample_rate = 84e9;
    cw.samples.assign(512, cplx{0.7, 0.2});
    PinParams pin;
    for (double v : pin_detect(cw, pin).samples) CHECK(std::abs(v) < 1e-12);

    // slow intensity tone passes unchanged (AC coupled)
    const std::size_t n = 4096;
    FieldBlock e;
    e.sample_rate = 84e9;
    for (std::size_t i = 0; i < n; ++i) e.samples.push_back(std::sqrt(1.0 + 0.5 * std::cos(2 * kPi * 2 * i / n)));
    const auto y = pin_detect(e, pin);
    for (std::size_t i = 0; i < n; i += 97) CHECK(y.samples[i] == doctest::Approx(0.5 * std::cos(2 * kPi * 2 * i / n)).epsilon(1e-6).scale(1.0));

    CHECK(std::norm(bessel_response(30e9, 30e9, 5)) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(std::abs(bessel_response(0, 30e9, 5)) == doctest::Approx(1.0));

    Rng rng(1);
    FieldBlock big;
    big.sample_rate = 84e9;
    big.samples.assign(200000, cplx{1.0, 0.0});
    const auto noisy = pin_detect(big, pin, 0.01, &rng);
    double var = 0;
    for (double v : noisy.samples) var += v * v;
    CHECK(var / static_cast<double>(noisy.size()) == doctest::Approx(0.01).epsilon(0.05));
    CHECK_THROWS_AS(pin_detect(big, pin, 0.01, nullptr), InvalidArgument);
}
