#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dmt/error.hpp"
#include "dmt/loading.hpp"
#include "oracles.hpp"

using namespace dmt;

namespace {

SnrProfile profile(std::vector<double> snr, std::size_t fft_len = 128) {
    SnrProfile p;
    p.n_data = snr.size();
    p.snr = std::move(snr);
    p.fft_len = fft_len;
    return p;
}

double db(double x) { return std::pow(10.0, x / 10.0); }

int total(const std::vector<int>& b) { return std::accumulate(b.begin(), b.end(), 0); }

}  // namespace

TEST_CASE("usable subcarriers") {
    CHECK(usable_subcarriers(1024, 1.0) == 511);
    CHECK(usable_subcarriers(1024, 1.05) == 486);
    CHECK(usable_subcarriers(128, 1.05) == 60);
    CHECK_THROWS_AS(usable_subcarriers(1000, 1.05), InvalidArgument);
    CHECK_THROWS_AS(usable_subcarriers(128, 0.9), InvalidArgument);
}

TEST_CASE("minimum cyclic prefix") {
    const std::size_t cp80 = cp_min_samples(17, 80, 194.25e12, 40e9, 84e9);
    CHECK((cp80 == 36 || cp80 == 37));
    CHECK(cp_min_samples(17, 0, 194.25e12, 40e9, 84e9) == 0);
    CHECK(cp_min_samples(3, 0, 194.25e12, 40e9, 84e9) == 0);
    const std::size_t cp160 = cp_min_samples(17, 160, 194.25e12, 40e9, 84e9);
    CHECK(std::abs(static_cast<long>(cp160) - 2 * static_cast<long>(cp80)) <= 1);
}

TEST_CASE("cyclic prefix matches a brute-force group delay spread") {
    // Group delay from the numerically differentiated phase of the all-pass
    // fiber response, scanned across the signal band.
    const double f0 = 194.25e12, band = 40e9, fs = 84e9;
    for (double length : {0.0, 40.0, 80.0, 160.0}) {
        const double c = 299792458.0;
        const double beta2 = -17e-6 * std::pow(c / f0, 2) / (2 * kPi * c);  // s^2/m
        const double l = length * 1e3;
        auto phase = [&](double f) { const double w = 2 * kPi * f; return 0.5 * beta2 * l * w * w; };
        double tmin = 1e300, tmax = -1e300;
        const double df = 1e6;
        for (double f = -band / 2; f <= band / 2 + 1; f += band / 400) {
            const double tau = (phase(f + df) - phase(f - df)) / (2 * kPi * 2 * df);
            tmin = std::min(tmin, tau);
            tmax = std::max(tmax, tau);
        }
        const double brute = (tmax - tmin) * fs;
        const auto cp = static_cast<double>(cp_min_samples(17, length, f0, band, fs));
        CHECK(std::abs(cp - brute) <= 1.0);
    }
}

TEST_CASE("rate budget") {
    CHECK(rate_budget(56e9, 1024, 32, 5, 128, 84e9) == 733);
    CHECK(rate_budget(0, 1024, 32, 5, 128, 84e9) == 0);
    CHECK(rate_budget(56e9, 1024, 0, 0, 128, 84e9) == 683);
    // direct frame-time arithmetic: bits per frame / frame duration >= net rate
    for (std::size_t n : {128u, 256u, 512u, 1024u}) {
        for (std::size_t cp : {0u, 16u, 32u, 64u}) {
            for (std::size_t ts : {1u, 5u, 10u}) {
                const std::size_t b = rate_budget(56e9, n, cp, ts, 128, 84e9);
                const double duration = 128.0 * static_cast<double>(n + cp) / 84e9;
                CHECK(static_cast<double>(b * (128 - ts)) / duration >= 56e9 * (1 - 1e-12));
                CHECK(static_cast<double>((b - 1) * (128 - ts)) / duration < 56e9);
            }
        }
    }
}

TEST_CASE("gap follows the inverse Q-function") {
    CHECK(gap_db_for_symbol_error(1e-3) == doctest::Approx(oracle::gap_db(1e-3)).epsilon(1e-9));
    CHECK(gap_db_for_symbol_error(1e-6) == doctest::Approx(oracle::gap_db(1e-6)).epsilon(1e-9));
    CHECK(default_loading_config().gap_db == doctest::Approx(oracle::gap_db(1e-3)).epsilon(1e-9));
    CHECK(default_loading_config().gap_db > 0);
}

TEST_CASE("snr estimation") {
    const std::size_t m = 100, k = 20;
    SymbolMatrix tx(m, k), rx(m, k), zero(m, k);
    Rng rng(4);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) tx(r, c) = qam_map(rng.bits(2), 2);

    auto exact = estimate_snr(tx, tx, 128);
    for (double s : exact.snr) CHECK(s == doctest::Approx(1e6));
    for (double s : estimate_snr(zero, tx, 128).snr) CHECK(s == 0.0);

    const double sigma = std::sqrt(0.1 / 2);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) rx(r, c) = tx(r, c) + cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    const auto est = estimate_snr(rx, tx, 128).snr;
    CHECK(est[0] == doctest::Approx(10.0).epsilon(0.15));
    CHECK(std::accumulate(est.begin(), est.end(), 0.0) / k == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("chow loading examples") {
    const auto cfg = default_loading_config();
    const auto flat = chow_bitload(profile(std::vector<double>(60, db(30))), 240, cfg);
    for (int b : flat.bits) CHECK(b == 4);

    std::vector<double> s(60, db(25));
    s[7] = 0.0;
    const auto r = chow_bitload(profile(s), 200, cfg);
    CHECK(r.bits[7] == 0);
    CHECK(total(r.bits) == 200);

    CHECK_THROWS_AS(chow_bitload(profile(std::vector<double>(10, db(20))), 81, cfg), InfeasibleLoading);
}

TEST_CASE("chow loading matches the greedy oracle on a two-level profile") {
    const auto cfg = default_loading_config();
    std::vector<double> s(60);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i < 30 ? db(25) : db(10);
    const auto snr = profile(s);
    const int target = 180;
    const auto chow = chow_bitload(snr, target, cfg);
    const auto power = cioffi_powerload(snr, chow.bits, cfg);
    const auto margins = subcarrier_margins(snr, chow.bits, power, cfg);
    double margin = 0;
    for (double m : margins) margin = std::max(margin, m);
    const double energy = std::accumulate(power.begin(), power.end(), 0.0);
    const auto greedy = oracle::greedy_loading(s, db(cfg.gap_db) * margin, energy, cfg.b_max);
    CHECK(total(chow.bits) == target);
    CHECK(std::abs(total(greedy) - target) <= 2);
}

TEST_CASE("cioffi power loading") {
    const auto cfg = default_loading_config();
    const auto snr = profile(std::vector<double>(8, db(20)));
    for (double p : cioffi_powerload(snr, std::vector<int>(8, 3), cfg)) CHECK(p == doctest::Approx(1.0));

    std::vector<double> ramp(40);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = db(10.0 + 0.5 * static_cast<double>(i));
    const auto rp = profile(ramp);
    const auto load = chow_bitload(rp, 150, cfg);
    const auto p = cioffi_powerload(rp, load.bits, cfg);
    const double gap = db(cfg.gap_db);
    double ref = -1, sum = 0;
    std::size_t active = 0;
    for (std::size_t k = 0; k < ramp.size(); ++k) {
        if (load.bits[k] == 0) {
            CHECK(p[k] == 0.0);
            continue;
        }
        ++active;
        sum += p[k];
        const double m = p[k] * ramp[k] / ((std::exp2(load.bits[k]) - 1) * gap);
        if (ref < 0) ref = m;
        CHECK(m == doctest::Approx(ref).epsilon(1e-9));
    }
    CHECK(sum / static_cast<double>(active) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("loading invariants on random profiles") {
    const auto cfg = default_loading_config();
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(60);
        for (auto& v : s) v = rng.uniform() < 0.05 ? 0.0 : db(5 + 30 * rng.uniform());
        const auto snr = profile(s);
        double cap = 0;
        for (double v : s) cap += std::min(8.0, std::floor(std::log2(1 + v / db(cfg.gap_db))));
        const auto target = static_cast<std::size_t>(0.7 * cap);
        const auto load = chow_bitload(snr, target, cfg);
        CHECK(static_cast<std::size_t>(total(load.bits)) == target);
        const auto p = cioffi_powerload(snr, load.bits, cfg);
        double sum = 0;
        std::size_t active = 0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            CHECK(load.bits[k] >= 0);
            CHECK(load.bits[k] <= cfg.b_max);
            if (s[k] == 0.0) CHECK(load.bits[k] == 0);
            if (load.bits[k] == 0) {
                CHECK(p[k] == 0.0);
            } else {
                sum += p[k];
                ++active;
            }
        }
        CHECK(sum / static_cast<double>(active) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("raising one subcarrier's SNR never lowers its bits") {
    const auto cfg = default_loading_config();
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> s(60);
        for (auto& v : s) v = db(8 + 25 * rng.uniform());
        const std::size_t target = 200;
        const std::size_t k = rng.below(s.size());
        const auto base = chow_bitload(profile(s), target, cfg, false);
        auto raised = s;
        raised[k] *= db(1 + 9 * rng.uniform());
        const auto up = chow_bitload(profile(raised), target, cfg, false);
        CHECK(up.bits[k] >= base.bits[k]);
        CHECK(total(chow_bitload(profile(raised), target, cfg, true).bits) == static_cast<int>(target));
    }
}
