#pragma once

// Receiver DSP: Schmidl-Cox timing acquisition, per-symbol FFT, one-tap
// equalization with decision-directed tracking, demapping and BER counting.

#include <optional>

#include "dmt/loading.hpp"
#include "dmt/signalcore.hpp"
#include "dmt/txchain.hpp"

namespace dmt {

inline constexpr double kFecThreshold = 3.8e-3;

struct SyncOptions {
    double detection_threshold = 0.1;   // minimum mean metric over the detected plateau
    double region_fraction = 0.9;       // reported region: M >= fraction * plateau peak
    std::size_t candidates = 8;         // plateaus checked against the training symbols
    double min_coherence = 0.25;        // training-symbol score that also counts as detection
};

struct SyncResult {
    std::size_t frame_start = 0;        // first sample of the preamble's cyclic prefix
    std::size_t plateau_first = 0;      // coarse region where M >= fraction * max
    std::size_t plateau_last = 0;
    double peak_metric = 0.0;
    double plateau_metric = 0.0;        // mean M over the chosen cp + 1 window
};

// M(d) = |P(d)|^2 / R(d)^2 with P(d) = sum r(d+m) r(d+m+N/2) and R(d) the mean
// energy of the two halves, sum (r(d+m)^2 + r(d+m+N/2)^2) / 2.
std::vector<double> timing_metric(std::span<const double> samples, std::size_t fft_len);

// Locates the preamble as the (cp + 1)-wide window of M with the largest sum;
// its start is the prefix start.
SyncResult schmidl_cox_sync(std::span<const double> samples, std::size_t fft_len, std::size_t cp_samples,
                            const SyncOptions& opts = {});

// Up to `count` non-overlapping plateaus, strongest first. Throws SyncError
// when even the strongest stays below the detection threshold.
std::vector<SyncResult> schmidl_cox_candidates(std::span<const double> samples, std::size_t fft_len,
                                               std::size_t cp_samples, std::size_t count,
                                               const SyncOptions& opts = {});

struct TimingFit {
    std::size_t start = 0;
    double score = 0.0;   // coherence of the per-row channel estimates: 0 unrelated, 1 noiseless
};

// Refines a coarse frame start with the channel impulse response averaged over
// the training symbols after the preamble (the preamble itself when n_ts == 1):
// the start moves to the energy centroid of the taps within +/- N/4.
TimingFit fit_timing(std::span<const double> samples, std::size_t coarse, const TrainingSymbols& ts,
                     std::size_t fft_len, std::size_t cp_samples);
std::size_t fine_timing(std::span<const double> samples, std::size_t coarse, const TrainingSymbols& ts,
                        std::size_t fft_len, std::size_t cp_samples);

// Full acquisition: Schmidl-Cox candidates, each refined and scored against
// the known training symbols; the most coherent fit wins. With a single
// training symbol the strongest plateau is used.
std::size_t acquire_timing(std::span<const double> samples, const TrainingSymbols& ts, std::size_t fft_len,
                           std::size_t cp_samples, const SyncOptions& opts = {});

// Refines a coarse frame start with the channel impulse response measured on
// the first full training symbol (the preamble when n_ts == 1): the start moves
// to the energy centroid of the taps within +/- N/4.
std::size_t fine_timing(std::span<const double> samples, std::size_t coarse, const TrainingSymbols& ts,
                        std::size_t fft_len, std::size_t cp_samples);

// Complex-baseband helpers for preambles with two identical halves:
// offset (Hz) from the phase of P at `start`, and its removal.
double estimate_frequency_offset(std::span<const cplx> samples, std::size_t start, std::size_t fft_len,
                                 double sample_rate);
std::vector<cplx> correct_frequency_offset(std::span<const cplx> samples, double offset_hz, double sample_rate);

struct ChannelEstimate {
    std::vector<cplx> h;
    double update_gain = 0.1;
};

enum class EqualizerMode {
    DecisionDirected,   // TS initialization, then updates from decided symbols
    Static,             // TS initialization only
    KnownPayload,       // least squares over TS and the known payload (probe frames)
};

struct DemodOptions {
    EqualizerMode mode = EqualizerMode::DecisionDirected;
    double update_gain = 0.1;
    std::size_t timing_backoff = 0;     // FFT window starts this many samples into the prefix from its end
};

struct DemodResult {
    Bits bits;
    SymbolMatrix equalized;             // payload symbols x n_data, after one-tap equalization
    ChannelEstimate estimate;
};

// `samples` starts at the first prefix sample of the frame and holds at least
// one frame. `known_payload` is required for KnownPayload mode.
DemodResult demodulate_frame(std::span<const double> samples, const SubcarrierPlan& plan, const TrainingSymbols& ts,
                             const DemodOptions& opts, const SymbolMatrix* known_payload = nullptr);

struct BerCount {
    std::size_t bit_errors = 0;
    std::size_t bits_counted = 0;
    double ber = 0.0;
    bool below_fec = true;
};

BerCount count_ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx,
                   double fec_threshold = kFecThreshold);

struct Metrics {
    double ber = 0.0;
    std::size_t bit_errors = 0;
    std::size_t bits_counted = 0;
    std::size_t frames = 0;
    std::size_t frame_cap = 0;
    double measured_osnr_db = 0.0;
    SnrProfile snr_profile;
};

}  // namespace dmt
