#pragma once

// SNR estimation, margin-adaptive bit loading (Chow), margin-equalizing power
// loading (Cioffi) and the framing arithmetic that sets the loading target.

#include <cstddef>
#include <vector>

#include "dmt/signalcore.hpp"

namespace dmt {

// Per-subcarrier linear SNR, entry i belongs to subcarrier i + 1.
struct SnrProfile {
    std::vector<double> snr;
    std::size_t fft_len = 0;
    std::size_t n_data = 0;
};

struct SubcarrierPlan {
    std::vector<int> bits;       // entry i belongs to subcarrier i + 1, size n_data
    std::vector<double> power;   // linear scale on |X|^2, 0 where bits == 0
    std::size_t fft_len = 0;
    std::size_t cp_samples = 0;
    std::size_t n_ts = 5;
    std::size_t frame_symbols = 128;
    double oversampling = 1.05;

    std::size_t n_data() const noexcept { return bits.size(); }
    std::size_t payload_symbols() const noexcept { return frame_symbols - n_ts; }
    std::size_t bits_per_symbol() const noexcept;
    std::size_t payload_bits() const noexcept { return payload_symbols() * bits_per_symbol(); }
    std::size_t symbol_len() const noexcept { return fft_len + cp_samples; }
    std::size_t frame_len() const noexcept { return frame_symbols * symbol_len(); }

    // Throws InvalidArgument when the framing fields are inconsistent.
    void validate() const;
};

struct LoadingConfig {
    double gap_db = 0.0;         // SNR gap; see gap_db_for_symbol_error()
    int b_max = 8;
    int margin_tol_bits = 0;
    int max_iters = 100;
    double snr_ceiling_db = 60.0;
};

// Gap for uncoded QAM at a target symbol-decision error rate p:
// Gamma = (Phi^-1(1 - p/2))^2 / 3.
double gap_db_for_symbol_error(double p);

// Defaults with the gap taken at a decision error rate of 1e-3.
LoadingConfig default_loading_config();

std::size_t usable_subcarriers(std::size_t fft_len, double oversampling);

// Minimum cyclic prefix in samples for a dispersion spread over `bandwidth_hz`.
// D in ps/(nm km), length in km.
std::size_t cp_min_samples(double dispersion_ps_nm_km, double length_km, double carrier_hz,
                           double bandwidth_hz, double sample_rate);

// Bits that every payload symbol must carry so that the frame delivers `net_rate`.
std::size_t rate_budget(double net_rate, std::size_t fft_len, std::size_t cp_samples, std::size_t n_ts,
                        std::size_t frame_symbols, double sample_rate);

// snr_k = |g|^2 E|X|^2 / E|Y - g X|^2 over the probe symbols (rows), with g the
// least-squares gain of Y on X. Columns with zero error energy get the ceiling,
// columns with no signal component get 0.
SnrProfile estimate_snr(const SymbolMatrix& rx, const SymbolMatrix& tx, std::size_t fft_len,
                        double snr_ceiling_db = 60.0);

struct BitLoadResult {
    std::vector<int> bits;
    double margin_db = 0.0;
    int iterations = 0;
};

// Chow's margin-adaptive loading: b_k = round(log2(1 + snr_k / (Gamma * margin))),
// with the margin iterated until the total matches, then +/-1 bit corrections on
// the largest/smallest rounding residues. Subcarriers with zero SNR never load.
BitLoadResult chow_bitload(const SnrProfile& snr, std::size_t target_bits, const LoadingConfig& cfg,
                           bool final_adjust = true);

// P_k proportional to (2^b_k - 1) Gamma / snr_k, unit mean over loaded subcarriers.
std::vector<double> cioffi_powerload(const SnrProfile& snr, std::span<const int> bits, const LoadingConfig& cfg);

// P_k snr_k / ((2^b_k - 1) Gamma) for each loaded subcarrier (0 elsewhere).
std::vector<double> subcarrier_margins(const SnrProfile& snr, std::span<const int> bits,
                                       std::span<const double> power, const LoadingConfig& cfg);

}  // namespace dmt
