#pragma once

// Experiment orchestration: the end-to-end link, two-pass calibration (equal
// power 16-QAM probe, then bit and power loading), Monte Carlo BER points,
// parameter sweeps and their CSV output.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dmt/config.hpp"
#include "dmt/rxchain.hpp"

namespace dmt {

// One pass of a frame through the optical link up to the ADC capture.
struct Capture {
    RealBlock samples;              // frame_len + fft_len + cp samples, periodic with frame_len
    std::size_t true_frame_start = 0;
    double measured_osnr_db = 0.0;  // NaN when no noise was loaded or it cannot be measured
};

class LinkSimulator {
public:
    explicit LinkSimulator(LinkConfig cfg);

    const LinkConfig& config() const noexcept { return cfg_; }

    // DAC conditioning, MZM, mux, fiber, ASE, demux, PIN/TIA, ADC and a random
    // capture offset. `frame` is the unclipped frame waveform at fs.
    Capture transmit(const RealBlock& frame, Rng& rng) const;

    // Frame-aligned samples from a capture given the detected frame start.
    static std::vector<double> align(const Capture& cap, std::size_t frame_start, std::size_t frame_len);

    FilterParams mux_filter() const;
    FilterParams demux_filter() const;

private:
    LinkConfig cfg_;
};

// Plan with 16-QAM at unit power on every usable subcarrier.
SubcarrierPlan probe_plan(const LinkConfig& cfg);

// Bits per payload symbol the loading has to reach for the configured rate.
std::size_t loading_target(const LinkConfig& cfg);

SnrProfile probe_snr(const LinkConfig& cfg);

struct Calibration {
    SubcarrierPlan plan;
    SnrProfile snr;
    double margin_db = 0.0;
    std::size_t target_bits = 0;
};

Calibration calibrate_full(const LinkConfig& cfg);
SubcarrierPlan calibrate(const LinkConfig& cfg);

// Runs frames until 100 bit errors (with at least 100 / fec_threshold bits) or
// n_frames, whichever comes first.
Metrics run_link(const LinkConfig& cfg, const SubcarrierPlan& plan, std::size_t n_frames);

inline const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names = {"cp_samples",       "n_ts",           "detune_ghz",
                                                   "launch_power_dbm", "target_osnr_db", "fft_len"};
    return names;
}

void set_parameter(LinkConfig& cfg, const std::string& name, double value);

struct SweepRow {
    double value = 0.0;
    Metrics metrics;
    std::uint64_t seed = 0;
    bool infeasible = false;        // calibration could not reach the rate; metrics.ber is NaN
    bool sync_lost = false;         // no preamble found in some frame; metrics.ber is NaN
};

struct SweepResult {
    std::string parameter;
    std::vector<SweepRow> rows;
    std::string fingerprint;
    std::uint64_t seed = 0;
};

// Recalibrates and runs every point with a seed derived from (cfg.seed, index).
SweepResult sweep(const LinkConfig& cfg, const std::string& parameter, std::span<const double> values);

struct RequiredOsnr {
    double osnr_db = 0.0;
    bool saturated = false;         // curve already below target at the lowest grid point
    bool monotone = true;
    std::string diagnostics;
    SweepResult curve;
};

// Log-linear interpolation of the first crossing of `ber_target`.
RequiredOsnr required_osnr_from_curve(std::span<const double> osnr_db, std::span<const double> ber,
                                      std::span<const std::size_t> bits_counted, double ber_target);

RequiredOsnr required_osnr(const LinkConfig& cfg, double ber_target, std::span<const double> osnr_grid);

struct SnrSpectrumRow {
    std::size_t subcarrier = 0;
    double freq_ghz = 0.0;
    double snr_db = 0.0;
};

std::vector<SnrSpectrumRow> snr_spectrum(const LinkConfig& cfg);

// "%.9g" formatting used by every CSV writer.
std::string format_number(double v);

void write_sweep_csv(std::ostream& os, const SweepResult& result);
void write_osnr_curve_csv(std::ostream& os, const LinkConfig& cfg, const SweepResult& result);
void write_snr_spectrum_csv(std::ostream& os, std::span<const SnrSpectrumRow> rows);

}  // namespace dmt
