#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dmt/error.hpp"
#include "dmt/harness.hpp"
#include "oracles.hpp"

using namespace dmt;

namespace {

LinkConfig small_b2b() {
    LinkConfig cfg;
    cfg.fft_len = 128;
    cfg.fiber.L = 0;
    cfg.frames_per_point = 3;
    return cfg;
}

}  // namespace

TEST_CASE("config json round trip and strictness") {
    LinkConfig cfg;
    cfg.fft_len = 256;
    cfg.sideband = Sideband::VSB;
    cfg.noise.target_osnr_db = 31.5;
    cfg.tx.dac_bits = 6;
    const std::string text = config_to_json_text(cfg);
    const LinkConfig back = config_from_json_text(text);
    CHECK(config_to_json_text(back) == text);
    CHECK(config_fingerprint(back) == config_fingerprint(cfg));
    CHECK(back.effective_detune_ghz() == 20.0);
    CHECK(LinkConfig{}.effective_detune_ghz() == 0.0);

    LinkConfig other = cfg;
    other.cp_samples = 16;
    CHECK(config_fingerprint(other) != config_fingerprint(cfg));

    CHECK_THROWS_AS(config_from_json_text(R"({"fft_size": 128})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"fiber": {"length": 3}})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"fft_len": "big"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text(R"({"sideband": "SSB"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json_text("{"), ConfigError);

    const auto over = config_from_json_text(apply_overrides(text, {"fiber.L=40", "sideband=DSB", "noise.target_osnr_db=null"}));
    CHECK(over.fiber.L == 40.0);
    CHECK(over.sideband == Sideband::DSB);
    CHECK_FALSE(over.noise.target_osnr_db.has_value());
    CHECK_THROWS_AS(config_from_json_text(apply_overrides(text, {"fiber.length=4"})), ConfigError);
    CHECK_THROWS_AS(apply_overrides(text, {"no_equals_sign"}), ConfigError);
}

TEST_CASE("config validation") {
    LinkConfig cfg;
    cfg.validate();
    cfg.fft_len = 100;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LinkConfig{};
    cfg.n_ts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LinkConfig{};
    cfg.fiber.L = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = LinkConfig{};
    cfg.calibration_passes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("required OSNR interpolation") {
    const std::vector<double> osnr{20, 30};
    const std::vector<std::size_t> bits{1'000'000, 1'000'000};
    const auto r = required_osnr_from_curve(osnr, std::vector<double>{1e-2, 1e-3}, bits, 3.8e-3);
    const double want = 20 + 10 * (std::log10(1e-2) - std::log10(3.8e-3));
    CHECK(want == doctest::Approx(24.2).epsilon(0.002));
    CHECK(r.osnr_db == doctest::Approx(want).epsilon(1e-12));
    CHECK_FALSE(r.saturated);
    CHECK(r.monotone);

    const auto low = required_osnr_from_curve(osnr, std::vector<double>{1e-3, 1e-4}, bits, 3.8e-3);
    CHECK(low.saturated);
    CHECK(low.osnr_db == 20.0);

    try {
        required_osnr_from_curve(osnr, std::vector<double>{0.1, 0.05}, bits, 3.8e-3);
        FAIL("expected UnreachableTarget");
    } catch (const UnreachableTarget& e) {
        CHECK(e.best_ber() == 0.05);
    }

    const std::vector<double> grid{20, 22, 24, 26};
    const std::vector<std::size_t> b4(4, 1'000'000);
    const auto bumpy = required_osnr_from_curve(grid, std::vector<double>{1e-2, 5e-3, 2e-2, 1e-3}, b4, 3.8e-3);
    CHECK_FALSE(bumpy.monotone);
    CHECK_FALSE(bumpy.diagnostics.empty());
    // a rise within Monte Carlo noise is tolerated
    const std::vector<std::size_t> few(4, 20'000);
    const auto noisy = required_osnr_from_curve(grid, std::vector<double>{1e-2, 5e-3, 5.5e-3, 1e-3}, few, 3.8e-3);
    CHECK(noisy.monotone);
}

TEST_CASE("noiseless back-to-back link is error free and deterministic") {
    const LinkConfig cfg = small_b2b();
    const auto cal = calibrate_full(cfg);
    CHECK(cal.plan.bits_per_symbol() == loading_target(cfg));
    CHECK(loading_target(cfg) == rate_budget(cfg.net_rate, cfg.fft_len, cfg.cp_samples, cfg.n_ts, cfg.frame_symbols, cfg.fs));
    const auto m = run_link(cfg, cal.plan, 3);
    CHECK(m.bit_errors == 0);
    CHECK(m.ber == 0.0);
    CHECK(m.frames == 3);
    CHECK(m.bits_counted == 3 * cal.plan.payload_bits());

    const auto again = run_link(cfg, calibrate(cfg), 3);
    CHECK(again.bits_counted == m.bits_counted);
    CHECK(again.snr_profile.snr == m.snr_profile.snr);
}

TEST_CASE("calibration passes only lower the SNR estimate") {
    LinkConfig cfg = small_b2b();
    cfg.noise.target_osnr_db = 34;
    cfg.calibration_passes = 1;
    const auto one = calibrate_full(cfg);
    CHECK(one.snr.snr == probe_snr(cfg).snr);
    cfg.calibration_passes = 2;
    const auto two = calibrate_full(cfg);
    REQUIRE(two.snr.snr.size() == one.snr.snr.size());
    for (std::size_t k = 0; k < one.snr.snr.size(); ++k) {
        CHECK(two.snr.snr[k] <= one.snr.snr[k]);
        if (one.plan.power[k] == 0.0) CHECK(two.snr.snr[k] == one.snr.snr[k]);
    }
    CHECK(two.plan.bits_per_symbol() == one.plan.bits_per_symbol());
}

TEST_CASE("calibration on an ideal channel loads nearly uniformly") {
    LinkConfig cfg = small_b2b();
    cfg.noise.target_osnr_db = 40;
    cfg.mux.bw_3db_ghz = cfg.demux.bw_3db_ghz = 300;
    const auto plan = calibrate(cfg);
    const auto [lo, hi] = std::minmax_element(plan.bits.begin(), plan.bits.end());
    CHECK(*lo >= 1);
    CHECK(*hi - *lo <= 1);
}

TEST_CASE("the 39 GHz filters cut the upper subcarriers of a centered DSB signal") {
    LinkConfig cfg = small_b2b();
    cfg.noise.target_osnr_db = 40;
    const auto rows = snr_spectrum(cfg);
    CHECK(rows.front().snr_db > 10);
    CHECK(rows.back().snr_db < rows.front().snr_db - 20);
}

TEST_CASE("calibration avoids the fading notches") {
    LinkConfig cfg;
    cfg.fft_len = 256;
    cfg.noise.target_osnr_db = 35;
    const auto cal = calibrate_full(cfg);
    const double spacing = cfg.fs / static_cast<double>(cfg.fft_len);
    for (int n = 1; n <= 3; ++n) {
        const double f = oracle::fading_null_hz(17, 80, 194.25e12, n);
        const auto k = static_cast<std::size_t>(std::lround(f / spacing)) - 1;
        int around = 0;
        for (std::size_t j = k - 4; j <= k + 4; ++j) around = std::max(around, cal.plan.bits[j]);
        CHECK(cal.plan.bits[k] <= 2);
        CHECK(cal.plan.bits[k] < around);
    }
}

TEST_CASE("sweeps") {
    LinkConfig cfg = small_b2b();
    cfg.noise.target_osnr_db = 30;
    cfg.frames_per_point = 2;
    const std::vector<double> cps{8, 16};
    const auto a = sweep(cfg, "cp_samples", cps);
    REQUIRE(a.rows.size() == 2);
    CHECK(a.rows[0].value == 8);
    CHECK(a.rows[1].value == 16);
    CHECK(a.rows[0].seed != a.rows[1].seed);
    CHECK(a.fingerprint == config_fingerprint(cfg));
    const auto b = sweep(cfg, "cp_samples", cps);
    std::ostringstream sa, sb;
    write_sweep_csv(sa, a);
    write_sweep_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("cp_samples,ber,bit_errors,bits_counted,seed\n", 0) == 0);

    CHECK_THROWS_AS(sweep(cfg, "voltage", cps), ConfigError);
    CHECK_THROWS_AS(sweep(cfg, "cp_samples", std::vector<double>{-1}), ConfigError);
    CHECK_THROWS_AS(sweep(cfg, "fft_len", std::vector<double>{100}), ConfigError);
}

TEST_CASE("reseeding keeps the calibrated rate") {
    LinkConfig cfg;
    cfg.fft_len = 128;
    cfg.sideband = Sideband::VSB;
    cfg.noise.target_osnr_db = 32;
    const auto p1 = calibrate(cfg);
    cfg.seed = 99;
    const auto p2 = calibrate(cfg);
    CHECK(p1.bits_per_symbol() == p2.bits_per_symbol());
}

TEST_CASE("infeasible calibration is reported") {
    LinkConfig cfg = small_b2b();
    cfg.net_rate = 300e9;
    CHECK_THROWS_AS(calibrate(cfg), InfeasibleLoading);
    const auto r = sweep(cfg, "cp_samples", std::vector<double>{16});
    CHECK(r.rows[0].infeasible);
    CHECK(std::isnan(r.rows[0].metrics.ber));
}

TEST_CASE("csv formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.333333333");
    CHECK(format_number(std::nan("")) == "nan");

    LinkConfig cfg = small_b2b();
    cfg.noise.target_osnr_db = 35;
    const auto rows = snr_spectrum(cfg);
    REQUIRE(rows.size() == cfg.n_data());
    CHECK(rows[0].subcarrier == 1);
    CHECK(rows[1].freq_ghz == doctest::Approx(2 * 84.0 / 128));
    std::ostringstream os;
    write_snr_spectrum_csv(os, rows);
    CHECK(os.str().rfind("subcarrier,freq_ghz,snr_db\n", 0) == 0);

    SweepResult curve;
    curve.parameter = "target_osnr_db";
    curve.rows.push_back({});
    curve.rows[0].value = 30;
    curve.rows[0].metrics.ber = 1e-3;
    std::ostringstream oc;
    write_osnr_curve_csv(oc, cfg, curve);
    CHECK(oc.str() == "osnr_db,ber,bit_errors,bits_counted,fft_len,cp_samples,n_ts,sideband,distance_km,seed\n"
                      "30,0.001,0,0,128,32,5,DSB,0,0\n");
}
