#pragma once

// DMT frame assembly and the transmit-side signal conditioning (clipping, DAC
// quantization). A frame is n_ts training symbols followed by payload symbols,
// each prefixed with its cyclic prefix.

#include <filesystem>
#include <limits>
#include <optional>

#include "dmt/loading.hpp"
#include "dmt/signalcore.hpp"

namespace dmt {

struct TxConfig {
    double clip_ratio_db = 9.0;       // infinity disables clipping
    std::optional<int> dac_bits;      // disabled when empty
};

// Known training symbols in the frequency domain (rows = symbols, cols = n_data).
// Row 0 is the synchronization preamble: QPSK on even subcarriers only, so its
// time-domain body consists of two identical halves.
using TrainingSymbols = SymbolMatrix;

TrainingSymbols make_training_symbols(const SubcarrierPlan& plan, Rng rng);

struct DmtFrame {
    Bits payload_bits;
    SymbolMatrix symbols;       // frame_symbols x n_data, training rows first
    RealBlock time_samples;     // frame_symbols * (N + cp)
};

DmtFrame assemble_frame(const Bits& payload_bits, const SubcarrierPlan& plan, const TrainingSymbols& ts,
                        double sample_rate);

// Maps one payload symbol's worth of bits onto the subcarriers (power-scaled).
void map_payload_symbol(std::span<const std::uint8_t> bits, const SubcarrierPlan& plan, std::span<cplx> out);

double clip_level(std::span<const double> block, double clip_ratio_db);
RealBlock clip(const RealBlock& block, double clip_ratio_db);

// Uniform mid-rise quantizer with 2^dac_bits levels spanning [-full_scale, +full_scale].
RealBlock quantize(const RealBlock& block, int dac_bits, double full_scale);

// Clip then (optionally) quantize, as the DAC would play the frame.
RealBlock condition_drive(const RealBlock& frame, const TxConfig& cfg);

struct WaveformLayout {
    std::size_t fft_len = 0;
    std::size_t cp_samples = 0;
    std::size_t n_ts = 0;
    std::size_t frame_symbols = 0;
};

// Writes `<stem>.f64` (little-endian float64 samples) and `<stem>.json`.
void write_waveform(const std::filesystem::path& stem, const RealBlock& block, const WaveformLayout& layout);

}  // namespace dmt
