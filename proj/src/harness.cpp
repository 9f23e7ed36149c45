#include "dmt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dmt/error.hpp"

namespace dmt {

namespace {

constexpr std::uint64_t kCalibrationStream = 1;
constexpr std::uint64_t kTrainingStream = 2;
constexpr std::uint64_t kFrameStream = 3;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const InfeasibleLoading&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

SyncOptions sync_options(const LinkConfig& cfg) {
    SyncOptions o;
    o.detection_threshold = cfg.rx.sync_threshold;
    return o;
}

DemodOptions demod_options(const LinkConfig& cfg, EqualizerMode mode) {
    DemodOptions o;
    o.mode = mode;
    o.update_gain = cfg.rx.dd_gain;
    o.timing_backoff = static_cast<std::size_t>(std::floor(cfg.rx.timing_backoff_fraction *
                                                           static_cast<double>(cfg.cp_samples)));
    return o;
}

SubcarrierPlan empty_plan(const LinkConfig& cfg) {
    SubcarrierPlan p;
    p.fft_len = cfg.fft_len;
    p.cp_samples = cfg.cp_samples;
    p.n_ts = cfg.n_ts;
    p.frame_symbols = cfg.frame_symbols;
    p.oversampling = cfg.oversampling;
    return p;
}

// Sends one frame and returns the frame-aligned samples plus the measured OSNR.
struct Received {
    std::vector<double> aligned;
    double measured_osnr_db = kNaN;
};

Received send_frame(const LinkSimulator& sim, const DmtFrame& frame, const TrainingSymbols& ts, Rng& rng) {
    const LinkConfig& cfg = sim.config();
    const Capture cap = sim.transmit(frame.time_samples, rng);
    const std::size_t start = stage("sync", [&] {
        return acquire_timing(cap.samples.samples, ts, cfg.fft_len, cfg.cp_samples, sync_options(cfg));
    });
    Received r;
    r.aligned = LinkSimulator::align(cap, start, frame.time_samples.size());
    r.measured_osnr_db = cap.measured_osnr_db;
    return r;
}

double snr_floor(double v) { return v > 0 ? v : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------

LinkSimulator::LinkSimulator(LinkConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

FilterParams LinkSimulator::mux_filter() const {
    FilterParams f = cfg_.mux;
    f.center_offset_ghz -= cfg_.effective_detune_ghz();
    return f;
}

FilterParams LinkSimulator::demux_filter() const {
    FilterParams f = cfg_.demux;
    f.center_offset_ghz -= cfg_.effective_detune_ghz();
    return f;
}

Capture LinkSimulator::transmit(const RealBlock& frame, Rng& rng) const {
    const std::size_t frame_len = frame.size();
    const auto os = static_cast<std::size_t>(cfg_.optical_oversample);

    const RealBlock drive = stage("dac", [&] { return condition_drive(frame, cfg_.tx); });
    const RealBlock up = stage("dac", [&] { return resample_periodic(drive, frame_len * os); });
    double dac_peak = 0.0;
    for (double v : drive.samples) dac_peak = std::max(dac_peak, std::abs(v));
    FieldBlock e = stage("mzm", [&] {
        return mzm_modulate(up, cfg_.mzm.vpi, cfg_.mzm.mod_index, cfg_.mzm.bias_phase, dac_peak);
    });
    e = stage("mux", [&] { return optical_bandpass(e, mux_filter()); });
    e = stage("fiber", [&] {
        if (cfg_.nonlinear) return ssfm_propagate(e, cfg_.fiber, cfg_.launch_power_dbm, cfg_.step_km);
        return propagate_linear(e, cfg_.fiber, cfg_.launch_power_dbm);
    });

    Capture cap;
    cap.measured_osnr_db = kNaN;
    if (cfg_.noise.target_osnr_db) {
        e = stage("ase", [&] {
            if (!cfg_.noise.ase_reference_dbm) return load_ase(e, cfg_.noise, rng);
            const double span_loss = std::pow(10.0, -cfg_.fiber.alpha_db_per_km * cfg_.fiber.L / 10.0);
            const double p_ref = 1e-3 * std::pow(10.0, *cfg_.noise.ase_reference_dbm / 10.0) * span_loss;
            return add_white_noise(e, ase_density_for_osnr(p_ref, *cfg_.noise.target_osnr_db), rng);
        });
        // Out-of-band noise floor is only visible with optical oversampling.
        if (os >= 2) {
            const double guard = 0.65 * 0.5 * e.sample_rate;
            cap.measured_osnr_db = measure_osnr_db(e, guard) + cfg_.noise.osnr_report_offset_db;
        }
    }
    e = stage("demux", [&] { return optical_bandpass(e, demux_filter()); });

    RealBlock det = stage("pin", [&] {
        const double p = mean_power(e.samples);
        if (!(p > 0)) throw InvalidArgument("no received optical power");
        const double g = 1.0 / std::sqrt(p);
        for (auto& v : e.samples) v *= g;
        return pin_detect(e, cfg_.rx.pin);
    });
    RealBlock adc = stage("adc", [&] { return resample_periodic(det, frame_len); });
    if (cfg_.noise.rx_electrical_noise > 0) {
        const double sigma = std::sqrt(cfg_.noise.rx_electrical_noise);
        for (auto& v : adc.samples) v += sigma * rng.gaussian();
    }

    // The frame repeats (DAC playback); the capture starts at a random point
    // and runs one symbol past a full frame.
    const std::size_t sym = cfg_.fft_len + cfg_.cp_samples;
    const std::size_t lo = sym;
    const std::size_t hi = frame_len > 2 * sym ? frame_len - sym : lo + 1;
    cap.true_frame_start = lo + static_cast<std::size_t>(rng.below(hi - lo));
    const std::size_t offset = (frame_len - cap.true_frame_start) % frame_len;
    cap.samples.sample_rate = adc.sample_rate;
    cap.samples.samples.resize(frame_len + sym);
    for (std::size_t j = 0; j < cap.samples.size(); ++j) cap.samples.samples[j] = adc.samples[(j + offset) % frame_len];
    return cap;
}

std::vector<double> LinkSimulator::align(const Capture& cap, std::size_t frame_start, std::size_t frame_len) {
    std::vector<double> out(frame_len);
    for (std::size_t i = 0; i < frame_len; ++i) out[i] = cap.samples.samples[(frame_start + i) % frame_len];
    return out;
}

// ---------------------------------------------------------------------------

SubcarrierPlan probe_plan(const LinkConfig& cfg) {
    SubcarrierPlan p = empty_plan(cfg);
    p.bits.assign(cfg.n_data(), 4);
    p.power.assign(cfg.n_data(), 1.0);
    return p;
}

std::size_t loading_target(const LinkConfig& cfg) {
    return rate_budget(cfg.net_rate * cfg.rate_multiplier, cfg.fft_len, cfg.cp_samples, cfg.n_ts, cfg.frame_symbols,
                       cfg.fs);
}

namespace {

// SNR per subcarrier with known payload, relative to each subcarrier's own power.
SnrProfile measure_snr(const LinkConfig& cfg, const SubcarrierPlan& plan, const Rng& root) {
    const LinkSimulator sim(cfg);
    const TrainingSymbols ts = make_training_symbols(plan, root.fork(0));
    const std::size_t n_payload = plan.payload_symbols();
    const std::size_t frames = std::max<std::size_t>(cfg.probe_frames, 1);

    SymbolMatrix rx_all(frames * n_payload, plan.n_data());
    SymbolMatrix tx_all(frames * n_payload, plan.n_data());
    for (std::size_t f = 0; f < frames; ++f) {
        Rng rng = root.fork(1 + f);
        const DmtFrame frame = assemble_frame(rng.bits(plan.payload_bits()), plan, ts, cfg.fs);
        SymbolMatrix known(n_payload, plan.n_data());
        for (std::size_t s = 0; s < n_payload; ++s) {
            const auto src = frame.symbols.row(plan.n_ts + s);
            std::copy(src.begin(), src.end(), known.row(s).begin());
            std::copy(src.begin(), src.end(), tx_all.row(f * n_payload + s).begin());
        }
        const Received r = send_frame(sim, frame, ts, rng);
        const DemodResult d = stage("demod", [&] {
            return demodulate_frame(r.aligned, plan, ts, demod_options(cfg, EqualizerMode::KnownPayload), &known);
        });
        for (std::size_t s = 0; s < n_payload; ++s) {
            const auto src = d.equalized.row(s);
            std::copy(src.begin(), src.end(), rx_all.row(f * n_payload + s).begin());
        }
    }
    return estimate_snr(rx_all, tx_all, cfg.fft_len, cfg.loading.snr_ceiling_db);
}

void load(Calibration& c, const LinkConfig& cfg) {
    const BitLoadResult bl = chow_bitload(c.snr, c.target_bits, cfg.loading);
    c.margin_db = bl.margin_db;
    c.plan = empty_plan(cfg);
    c.plan.bits = bl.bits;
    c.plan.power = cioffi_powerload(c.snr, bl.bits, cfg.loading);
}

}  // namespace

SnrProfile probe_snr(const LinkConfig& cfg) {
    cfg.validate();
    return measure_snr(cfg, probe_plan(cfg), Rng(cfg.seed).fork(kCalibrationStream));
}

Calibration calibrate_full(const LinkConfig& cfg) {
    Calibration c;
    c.snr = probe_snr(cfg);
    c.target_bits = loading_target(cfg);
    load(c, cfg);
    // Later passes measure with the loaded spectrum itself, which sees the
    // distortion the equal-power probe underestimates; estimates only go down.
    for (std::size_t pass = 1; pass < cfg.calibration_passes; ++pass) {
        const SnrProfile seen = measure_snr(cfg, c.plan, Rng(cfg.seed).fork(kCalibrationStream).fork(100 + pass));
        for (std::size_t k = 0; k < c.snr.snr.size(); ++k) {
            if (c.plan.power[k] > 0) c.snr.snr[k] = std::min(c.snr.snr[k], seen.snr[k] / c.plan.power[k]);
        }
        load(c, cfg);
    }
    return c;
}

SubcarrierPlan calibrate(const LinkConfig& cfg) { return calibrate_full(cfg).plan; }

Metrics run_link(const LinkConfig& cfg, const SubcarrierPlan& plan, std::size_t n_frames) {
    cfg.validate();
    plan.validate();
    if (plan.fft_len != cfg.fft_len || plan.cp_samples != cfg.cp_samples || plan.n_ts != cfg.n_ts ||
        plan.frame_symbols != cfg.frame_symbols || plan.n_data() != cfg.n_data()) {
        throw InvalidArgument("run_link: plan does not match the configuration");
    }
    if (n_frames == 0) throw InvalidArgument("run_link: n_frames must be positive");

    const LinkSimulator sim(cfg);
    const Rng root(cfg.seed);
    const TrainingSymbols ts = make_training_symbols(plan, root.fork(kTrainingStream));
    const Rng frames_root = root.fork(kFrameStream);
    const std::size_t n_payload = plan.payload_symbols();
    const std::size_t n_data = plan.n_data();
    const auto min_bits = static_cast<std::size_t>(std::ceil(100.0 / cfg.fec_threshold));

    Metrics m;
    m.frame_cap = n_frames;
    std::vector<double> sig(n_data, 0.0), err(n_data, 0.0);
    double osnr_sum = 0.0;
    std::size_t osnr_count = 0;

    for (std::size_t f = 0; f < n_frames; ++f) {
        Rng rng = frames_root.fork(f);
        const DmtFrame frame = stage("assemble", [&] {
            return assemble_frame(rng.bits(plan.payload_bits()), plan, ts, cfg.fs);
        });
        const Received r = send_frame(sim, frame, ts, rng);
        const DemodResult d = stage("demod", [&] {
            return demodulate_frame(r.aligned, plan, ts, demod_options(cfg, EqualizerMode::DecisionDirected));
        });
        const BerCount c = count_ber(frame.payload_bits, d.bits, cfg.fec_threshold);
        m.bit_errors += c.bit_errors;
        m.bits_counted += c.bits_counted;
        ++m.frames;
        if (std::isfinite(r.measured_osnr_db)) {
            osnr_sum += r.measured_osnr_db;
            ++osnr_count;
        }
        for (std::size_t s = 0; s < n_payload; ++s) {
            for (std::size_t k = 0; k < n_data; ++k) {
                const cplx x = frame.symbols(plan.n_ts + s, k);
                sig[k] += std::norm(x);
                err[k] += std::norm(d.equalized(s, k) - x);
            }
        }
        if (m.bit_errors >= 100 && m.bits_counted >= min_bits) break;
    }

    m.ber = m.bits_counted > 0 ? static_cast<double>(m.bit_errors) / static_cast<double>(m.bits_counted) : 0.0;
    m.measured_osnr_db = osnr_count > 0 ? osnr_sum / static_cast<double>(osnr_count) : kNaN;
    m.snr_profile.fft_len = cfg.fft_len;
    m.snr_profile.n_data = n_data;
    m.snr_profile.snr.assign(n_data, 0.0);
    const double ceiling = std::pow(10.0, cfg.loading.snr_ceiling_db / 10.0);
    for (std::size_t k = 0; k < n_data; ++k) {
        if (sig[k] == 0.0) continue;
        m.snr_profile.snr[k] = err[k] > 0 ? std::min(sig[k] / err[k], ceiling) : ceiling;
    }
    return m;
}

// ---------------------------------------------------------------------------

void set_parameter(LinkConfig& cfg, const std::string& name, double value) {
    auto as_count = [&](const char* what) {
        if (!(value >= 0) || value != std::floor(value)) {
            throw ConfigError(std::string(what) + " must be a non-negative integer");
        }
        return static_cast<std::size_t>(value);
    };
    if (name == "cp_samples") {
        cfg.cp_samples = as_count("cp_samples");
    } else if (name == "n_ts") {
        cfg.n_ts = as_count("n_ts");
    } else if (name == "fft_len") {
        cfg.fft_len = as_count("fft_len");
    } else if (name == "detune_ghz") {
        cfg.detune_ghz = value;
    } else if (name == "launch_power_dbm") {
        cfg.launch_power_dbm = value;
        if (cfg.noise.target_osnr_db && !cfg.noise.ase_reference_dbm) cfg.noise.ase_reference_dbm = 0.0;
    } else if (name == "target_osnr_db") {
        cfg.noise.target_osnr_db = value;
    } else {
        throw ConfigError("unknown sweep parameter '" + name + "'");
    }
    cfg.validate();
}

SweepResult sweep(const LinkConfig& cfg, const std::string& parameter, std::span<const double> values) {
    if (std::find(sweep_parameters().begin(), sweep_parameters().end(), parameter) == sweep_parameters().end()) {
        throw ConfigError("unknown sweep parameter '" + parameter + "'");
    }
    cfg.validate();
    SweepResult res;
    res.parameter = parameter;
    res.seed = cfg.seed;
    res.fingerprint = config_fingerprint(cfg);

    // Validate every point before spending time on any of them.
    std::vector<LinkConfig> points;
    for (std::size_t i = 0; i < values.size(); ++i) {
        LinkConfig c = cfg;
        set_parameter(c, parameter, values[i]);
        c.seed = mix_seed(cfg.seed, i);
        points.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        SweepRow row;
        row.value = values[i];
        row.seed = points[i].seed;
        try {
            const SubcarrierPlan plan = calibrate(points[i]);
            row.metrics = run_link(points[i], plan, points[i].frames_per_point);
        } catch (const InfeasibleLoading&) {
            row.infeasible = true;
            row.metrics.ber = kNaN;
            row.metrics.measured_osnr_db = kNaN;
        } catch (const StageError& e) {
            if (e.stage() != "sync") throw;
            row.sync_lost = true;
            row.metrics.ber = kNaN;
            row.metrics.measured_osnr_db = kNaN;
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

RequiredOsnr required_osnr_from_curve(std::span<const double> osnr_db, std::span<const double> ber,
                                      std::span<const std::size_t> bits_counted, double ber_target) {
    if (osnr_db.size() != ber.size() || ber.size() != bits_counted.size()) {
        throw InvalidArgument("required_osnr: curve arrays differ in length");
    }
    if (osnr_db.size() < 2) throw InvalidArgument("required_osnr: need at least two points");
    if (!(ber_target > 0 && ber_target < 0.5)) throw InvalidArgument("required_osnr: target must be in (0, 0.5)");
    for (std::size_t i = 1; i < osnr_db.size(); ++i) {
        if (!(osnr_db[i] > osnr_db[i - 1])) throw InvalidArgument("required_osnr: OSNR grid must increase");
    }

    const std::size_t n = ber.size();
    // Infeasible points count as failing; zero error counts sit at half a bit error.
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ber[i])) {
            b[i] = 0.5;
        } else if (ber[i] <= 0.0) {
            b[i] = bits_counted[i] > 0 ? 0.5 / static_cast<double>(bits_counted[i]) : 0.5;
        } else {
            b[i] = ber[i];
        }
    }

    RequiredOsnr r;
    std::string diag;
    // A rise counts only beyond three standard deviations of the two estimates.
    auto variance = [&](std::size_t i) {
        const double bits = bits_counted[i] > 0 ? static_cast<double>(bits_counted[i]) : 1.0;
        return b[i] * (1.0 - b[i]) / bits;
    };
    for (std::size_t i = 1; i < n; ++i) {
        if (b[i] - b[i - 1] > 3.0 * std::sqrt(variance(i) + variance(i - 1))) {
            r.monotone = false;
            char buf[160];
            std::snprintf(buf, sizeof buf, "BER rises from %.3g to %.3g between %.9g and %.9g dB; ", b[i - 1], b[i],
                          osnr_db[i - 1], osnr_db[i]);
            diag += buf;
        }
    }

    std::size_t hit = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (b[i] <= ber_target) {
            hit = i;
            break;
        }
    }
    if (hit == n) {
        const double best = *std::min_element(b.begin(), b.end());
        char buf[160];
        std::snprintf(buf, sizeof buf, "BER target %.3g not reached; best BER %.3g", ber_target, best);
        throw UnreachableTarget(buf, best);
    }
    if (hit == 0) {
        r.saturated = true;
        r.osnr_db = osnr_db[0];
        diag += "curve is below the target at the lowest grid point; ";
    } else {
        const double x0 = osnr_db[hit - 1], x1 = osnr_db[hit];
        const double y0 = std::log10(b[hit - 1]), y1 = std::log10(b[hit]);
        const double yt = std::log10(ber_target);
        r.osnr_db = y1 == y0 ? x1 : x0 + (yt - y0) * (x1 - x0) / (y1 - y0);
    }
    if (!diag.empty()) diag.resize(diag.size() - 2);
    r.diagnostics = diag;
    return r;
}

RequiredOsnr required_osnr(const LinkConfig& cfg, double ber_target, std::span<const double> osnr_grid) {
    if (osnr_grid.size() < 2) throw InvalidArgument("required_osnr: need at least two grid points");
    for (std::size_t i = 1; i < osnr_grid.size(); ++i) {
        if (!(osnr_grid[i] > osnr_grid[i - 1])) throw InvalidArgument("required_osnr: OSNR grid must increase");
    }
    SweepResult curve = sweep(cfg, "target_osnr_db", osnr_grid);
    std::vector<double> ber;
    std::vector<std::size_t> bits;
    for (const auto& row : curve.rows) {
        ber.push_back(row.metrics.ber);
        bits.push_back(row.metrics.bits_counted);
    }
    RequiredOsnr r = required_osnr_from_curve(osnr_grid, ber, bits, ber_target);
    r.osnr_db += cfg.noise.osnr_report_offset_db;
    r.curve = std::move(curve);
    return r;
}

std::vector<SnrSpectrumRow> snr_spectrum(const LinkConfig& cfg) {
    const SnrProfile p = probe_snr(cfg);
    std::vector<SnrSpectrumRow> rows;
    rows.reserve(p.snr.size());
    for (std::size_t i = 0; i < p.snr.size(); ++i) {
        SnrSpectrumRow r;
        r.subcarrier = i + 1;
        r.freq_ghz = static_cast<double>(i + 1) * cfg.fs / static_cast<double>(cfg.fft_len) / 1e9;
        r.snr_db = 10.0 * std::log10(std::max(snr_floor(p.snr[i]), 1e-10));
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
    os << result.parameter << ",ber,bit_errors,bits_counted,seed\n";
    for (const auto& row : result.rows) {
        os << format_number(row.value) << ',' << format_number(row.metrics.ber) << ',' << row.metrics.bit_errors
           << ',' << row.metrics.bits_counted << ',' << row.seed << '\n';
    }
}

void write_osnr_curve_csv(std::ostream& os, const LinkConfig& cfg, const SweepResult& result) {
    os << "osnr_db,ber,bit_errors,bits_counted,fft_len,cp_samples,n_ts,sideband,distance_km,seed\n";
    for (const auto& row : result.rows) {
        os << format_number(row.value + cfg.noise.osnr_report_offset_db) << ',' << format_number(row.metrics.ber)
           << ',' << row.metrics.bit_errors << ',' << row.metrics.bits_counted << ',' << cfg.fft_len << ','
           << cfg.cp_samples << ',' << cfg.n_ts << ',' << to_string(cfg.sideband) << ','
           << format_number(cfg.fiber.L) << ',' << row.seed << '\n';
    }
}

void write_snr_spectrum_csv(std::ostream& os, std::span<const SnrSpectrumRow> rows) {
    os << "subcarrier,freq_ghz,snr_db\n";
    for (const auto& r : rows) {
        os << r.subcarrier << ',' << format_number(r.freq_ghz) << ',' << format_number(r.snr_db) << '\n';
    }
}

}  // namespace dmt
