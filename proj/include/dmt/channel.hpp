#pragma once

// Optical field channel: MZM electro-optic conversion, super-Gaussian mux/demux
// filtering, fiber propagation (linear all-pass dispersion or split-step with
// Kerr nonlinearity), ASE noise loading and square-law detection.
//
// Fields are complex baseband envelopes relative to the optical carrier f0;
// |E|^2 is optical power in arbitrary units unless a launch power is imposed.

#include <optional>

#include "dmt/signalcore.hpp"

namespace dmt {

inline constexpr double kOsnrReferenceBandwidth = 12.5e9;

struct FiberParams {
    double D = 17.0;                // ps/(nm km)
    double L = 80.0;                // km
    double alpha_db_per_km = 0.2;
    double gamma = 1.3;             // 1/(W km)
    double f0 = 194.25e12;          // carrier, Hz

    void validate() const;
};

struct FilterParams {
    double bw_3db_ghz = 39.0;
    int order = 3;                  // super-Gaussian order
    double center_offset_ghz = 0.0; // filter center minus carrier

    void validate() const;
};

struct NoiseParams {
    std::optional<double> target_osnr_db;     // disabled when empty
    double rx_electrical_noise = 0.0;         // variance at unit received optical power
    // When set, the ASE density is fixed to the value that gives target_osnr_db
    // for a launch at this power; the OSNR then tracks the actual launch power.
    std::optional<double> ase_reference_dbm;
    double osnr_report_offset_db = 0.0;       // added to reported OSNR values
};

struct PinParams {
    double elec_bw_ghz = 30.0;
    int bessel_order = 5;
};

// ---------------------------------------------------------------------------
// Transfer functions (f relative to the carrier, Hz)

double supergauss_amplitude(double f_hz, const FilterParams& filt);
cplx dispersion_response(double f_hz, const FiberParams& fiber);
// Bessel low-pass normalized to `bw_hz` at -3 dB with its DC group delay removed.
cplx bessel_response(double f_hz, double bw_hz, int order);

// Accumulated dispersion phase coefficient pi D L lambda^2 / c (rad/Hz^2).
double dispersion_phase_coefficient(const FiberParams& fiber);

// First few frequencies where DSB intensity modulation fades completely:
// f_n = sqrt((2n - 1) c / (2 D lambda^2 L)).
double fading_null_hz(const FiberParams& fiber, int n);

// ---------------------------------------------------------------------------
// Operations

// E(t) = cos(pi/2 * v(t)/vpi + bias_phase), with the drive rescaled so its peak
// is mod_index * vpi. `reference_peak` replaces the measured peak, e.g. the DAC
// sample peak when the drive has been interpolated.
FieldBlock mzm_modulate(const RealBlock& drive, double vpi, double mod_index, double bias_phase = kPi / 4.0,
                        std::optional<double> reference_peak = std::nullopt);

FieldBlock optical_bandpass(const FieldBlock& field, const FilterParams& filt);

FieldBlock apply_dispersion(const FieldBlock& field, const FiberParams& fiber);

// Symmetric split-step propagation. The input is rescaled to the launch power
// (W) before the first step; the output carries absolute power.
FieldBlock ssfm_propagate(const FieldBlock& field, const FiberParams& fiber, double launch_power_dbm,
                          double step_km);

// Closed-form linear counterpart of ssfm_propagate (dispersion plus loss).
FieldBlock propagate_linear(const FieldBlock& field, const FiberParams& fiber, double launch_power_dbm);

// Adds complex white Gaussian noise so that P_signal / (N0 * 12.5 GHz) = target.
FieldBlock load_ase(const FieldBlock& field, const NoiseParams& noise, Rng& rng);

// Adds complex white Gaussian noise of the given one-sided density (power per Hz).
FieldBlock add_white_noise(const FieldBlock& field, double density_per_hz, Rng& rng);

// Noise density a target OSNR implies for a signal of the given mean power.
double ase_density_for_osnr(double signal_power, double osnr_db);

// OSNR from the periodogram: noise density from bins with |f| > signal_bw_hz,
// signal power as total minus noise.
double measure_osnr_db(const FieldBlock& field, double signal_bw_hz);

// |E|^2 -> Bessel low-pass -> AC coupling -> optional electrical noise.
RealBlock pin_detect(const FieldBlock& field, const PinParams& pin, double electrical_noise_var = 0.0,
                     Rng* rng = nullptr);

// Multiplies the spectrum of a field by `response(f)`.
template <typename Response>
FieldBlock apply_spectral(const FieldBlock& field, Response&& response) {
    FieldBlock out = field;
    fft_inplace(out.samples);
    const std::size_t n = out.size();
    for (std::size_t k = 0; k < n; ++k) out.samples[k] *= response(bin_frequency(k, n, field.sample_rate));
    ifft_inplace(out.samples);
    return out;
}

}  // namespace dmt
