#include "dmt/txchain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "dmt/error.hpp"

namespace dmt {

namespace {

cplx random_qpsk(Rng& rng) {
    constexpr double a = 0.70710678118654752440;
    const double re = rng.bit() ? -a : a;
    const double im = rng.bit() ? -a : a;
    return {re, im};
}

}  // namespace

TrainingSymbols make_training_symbols(const SubcarrierPlan& plan, Rng rng) {
    if (plan.n_ts == 0) throw InvalidArgument("make_training_symbols: at least one training symbol is required");
    const std::size_t n_data = plan.n_data();
    std::size_t active = 0;
    for (int b : plan.bits) active += b > 0 ? 1 : 0;
    // Unit-power constellations scaled so that the mean payload symbol power is
    // met: payload power sums to `active` (unit mean over loaded carriers).
    const double payload_power = active > 0 ? static_cast<double>(active) : static_cast<double>(n_data);

    std::size_t even = 0;
    for (std::size_t k = 1; k <= n_data; ++k) even += (k % 2 == 0) ? 1 : 0;

    TrainingSymbols ts(plan.n_ts, n_data);
    const double a_sync = even > 0 ? std::sqrt(payload_power / static_cast<double>(even)) : 0.0;
    for (std::size_t k = 1; k <= n_data; ++k) {
        const cplx s = random_qpsk(rng);
        ts(0, k - 1) = (k % 2 == 0) ? a_sync * s : cplx{};
    }
    const double a_est = n_data > 0 ? std::sqrt(payload_power / static_cast<double>(n_data)) : 0.0;
    for (std::size_t r = 1; r < plan.n_ts; ++r) {
        for (std::size_t k = 0; k < n_data; ++k) ts(r, k) = a_est * random_qpsk(rng);
    }
    return ts;
}

void map_payload_symbol(std::span<const std::uint8_t> bits, const SubcarrierPlan& plan, std::span<cplx> out) {
    std::size_t pos = 0;
    for (std::size_t k = 0; k < plan.n_data(); ++k) {
        const int b = plan.bits[k];
        if (b == 0) {
            out[k] = cplx{};
            continue;
        }
        const auto& c = Constellation::get(b);
        out[k] = std::sqrt(plan.power[k]) * c.map(bits_to_label(bits.subspan(pos, static_cast<std::size_t>(b))));
        pos += static_cast<std::size_t>(b);
    }
}

DmtFrame assemble_frame(const Bits& payload_bits, const SubcarrierPlan& plan, const TrainingSymbols& ts,
                        double sample_rate) {
    plan.validate();
    const std::size_t n = plan.fft_len;
    const std::size_t cp = plan.cp_samples;
    const std::size_t n_data = plan.n_data();
    if (ts.rows() != plan.n_ts || ts.cols() != n_data) throw InvalidArgument("assemble_frame: training shape mismatch");
    if (payload_bits.size() != plan.payload_bits()) {
        throw InvalidArgument("assemble_frame: expected " + std::to_string(plan.payload_bits()) +
                              " payload bits, got " + std::to_string(payload_bits.size()));
    }

    DmtFrame frame;
    frame.payload_bits = payload_bits;
    frame.symbols = SymbolMatrix(plan.frame_symbols, n_data);
    for (std::size_t r = 0; r < plan.n_ts; ++r) {
        std::copy(ts.row(r).begin(), ts.row(r).end(), frame.symbols.row(r).begin());
    }
    const std::size_t bps = plan.bits_per_symbol();
    const std::span<const std::uint8_t> all(payload_bits);
    for (std::size_t s = 0; s < plan.payload_symbols(); ++s) {
        map_payload_symbol(all.subspan(s * bps, bps), plan, frame.symbols.row(plan.n_ts + s));
    }

    frame.time_samples.sample_rate = sample_rate;
    frame.time_samples.samples.assign(plan.frame_len(), 0.0);
    std::vector<cplx> bins(n / 2 - 1, cplx{});
    std::vector<double> body(n);
    for (std::size_t s = 0; s < plan.frame_symbols; ++s) {
        std::fill(bins.begin(), bins.end(), cplx{});
        std::copy(frame.symbols.row(s).begin(), frame.symbols.row(s).end(), bins.begin());
        hermitian_ifft_into(bins, body);
        double* dst = frame.time_samples.samples.data() + s * (n + cp);
        // The prefix may be longer than the body; it is the periodic extension.
        for (std::size_t i = 0; i < cp; ++i) dst[i] = body[(n - (cp % n) + i) % n];
        std::copy(body.begin(), body.end(), dst + cp);
    }
    return frame;
}

double clip_level(std::span<const double> block, double clip_ratio_db) {
    return rms(block) * std::pow(10.0, clip_ratio_db / 20.0);
}

RealBlock clip(const RealBlock& block, double clip_ratio_db) {
    if (!std::isfinite(clip_ratio_db)) return block;
    const double a = clip_level(block.samples, clip_ratio_db);
    RealBlock out = block;
    for (auto& v : out.samples) v = std::clamp(v, -a, a);
    return out;
}

RealBlock quantize(const RealBlock& block, int dac_bits, double full_scale) {
    if (dac_bits < 1 || dac_bits > 16) throw InvalidArgument("quantize: dac_bits must be in 1..16");
    if (!(full_scale > 0)) return block;
    const double levels = std::exp2(dac_bits);
    const double step = 2.0 * full_scale / levels;
    RealBlock out = block;
    for (auto& v : out.samples) {
        double idx = std::floor(v / step);
        idx = std::clamp(idx, -levels / 2.0, levels / 2.0 - 1.0);
        v = (idx + 0.5) * step;
    }
    return out;
}

RealBlock condition_drive(const RealBlock& frame, const TxConfig& cfg) {
    RealBlock out = clip(frame, cfg.clip_ratio_db);
    if (cfg.dac_bits) {
        double fs = std::isfinite(cfg.clip_ratio_db) ? clip_level(frame.samples, cfg.clip_ratio_db) : 0.0;
        if (fs == 0.0) {
            for (double v : out.samples) fs = std::max(fs, std::abs(v));
        }
        out = quantize(out, *cfg.dac_bits, fs);
    }
    return out;
}

void write_waveform(const std::filesystem::path& stem, const RealBlock& block, const WaveformLayout& layout) {
    auto bin_path = stem;
    bin_path += ".f64";
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error("cannot open " + bin_path.string());
    for (double v : block.samples) {
        auto raw = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
        bin.write(reinterpret_cast<const char*>(&raw), sizeof raw);
    }

    nlohmann::json meta = {
        {"sample_rate", block.sample_rate},
        {"samples", block.size()},
        {"dtype", "float64-le"},
        {"fft_len", layout.fft_len},
        {"cp_samples", layout.cp_samples},
        {"n_ts", layout.n_ts},
        {"frame_symbols", layout.frame_symbols},
    };
    auto json_path = stem;
    json_path += ".json";
    std::ofstream js(json_path);
    if (!js) throw Error("cannot open " + json_path.string());
    js << meta.dump(2) << '\n';
}

}  // namespace dmt
