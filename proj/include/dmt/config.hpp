#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmt/channel.hpp"
#include "dmt/loading.hpp"
#include "dmt/txchain.hpp"

namespace dmt {

enum class Sideband { DSB, VSB };

std::string_view to_string(Sideband s) noexcept;

struct MzmParams {
    double vpi = 1.0;
    double mod_index = 0.3;
    double bias_phase = kPi / 4.0;
};

struct ReceiverParams {
    PinParams pin;
    double dd_gain = 0.1;
    // FFT window placement inside the prefix, as a fraction of cp before the symbol body.
    double timing_backoff_fraction = 0.5;
    double sync_threshold = 0.1;
};

// Every physical and DSP parameter of one experiment point.
struct LinkConfig {
    double net_rate = 56e9;
    double rate_multiplier = 1.0;       // e.g. 1.07 to carry FEC overhead on top of net_rate
    double fs = 84e9;
    std::size_t fft_len = 512;
    std::size_t cp_samples = 32;
    std::size_t n_ts = 5;
    std::size_t frame_symbols = 128;
    double oversampling = 1.05;
    Sideband sideband = Sideband::DSB;
    std::optional<double> detune_ghz;   // defaults to 20 for VSB, 0 for DSB
    FiberParams fiber;
    FilterParams mux;
    FilterParams demux;
    NoiseParams noise;
    TxConfig tx;
    MzmParams mzm;
    ReceiverParams rx;
    LoadingConfig loading = default_loading_config();
    double launch_power_dbm = 5.0;
    bool nonlinear = false;
    double step_km = 0.5;
    std::uint64_t seed = 1;
    std::size_t frames_per_point = 20;
    std::size_t probe_frames = 2;
    std::size_t calibration_passes = 2;   // 1: equal-power probe only; more: re-measure with the loaded plan
    double fec_threshold = 3.8e-3;
    int optical_oversample = 2;         // optical simulation rate = fs * this

    double effective_detune_ghz() const;
    std::size_t n_data() const { return usable_subcarriers(fft_len, oversampling); }

    // Throws ConfigError describing the first violated invariant.
    void validate() const;
};

// Strict parsing: unknown keys and wrong types are ConfigErrors. Missing keys keep defaults.
LinkConfig config_from_json_text(std::string_view text);
std::string config_to_json_text(const LinkConfig& cfg);

// Applies "a.b.c=value" overrides; the value is parsed as JSON when possible,
// otherwise taken as a string.
std::string apply_overrides(std::string_view json_text, const std::vector<std::string>& overrides);

// Stable short hash of the canonical JSON, for result provenance.
std::string config_fingerprint(const LinkConfig& cfg);

}  // namespace dmt
