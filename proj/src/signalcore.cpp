#include "dmt/signalcore.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "dmt/error.hpp"

namespace dmt {

double rms(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double mean_power(std::span<const cplx> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const cplx& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// Constellation

namespace {

std::uint32_t gray_encode(std::uint32_t v) noexcept { return v ^ (v >> 1); }

}  // namespace

Constellation::Constellation(int order_bits) : order_bits_(order_bits) {
    i_axis_.bits = (order_bits + 1) / 2;
    q_axis_.bits = order_bits / 2;

    auto fill = [](Axis& axis) {
        const std::uint32_t m = 1u << axis.bits;
        axis.levels.assign(m, 0.0);
        // Position p = 0 is the most positive level.
        for (std::uint32_t p = 0; p < m; ++p) {
            axis.levels[gray_encode(p)] = static_cast<double>(m) - 1.0 - 2.0 * p;
        }
    };
    fill(i_axis_);
    fill(q_axis_);

    const std::uint32_t n = 1u << order_bits;
    points_.resize(n);
    double power = 0.0;
    for (std::uint32_t label = 0; label < n; ++label) {
        const std::uint32_t il = label >> q_axis_.bits;
        const std::uint32_t ql = label & ((1u << q_axis_.bits) - 1u);
        points_[label] = cplx(i_axis_.levels[il], q_axis_.levels[ql]);
        power += std::norm(points_[label]);
    }
    const double scale = 1.0 / std::sqrt(power / n);
    for (auto& p : points_) p *= scale;
    for (auto& l : i_axis_.levels) l *= scale;
    for (auto& l : q_axis_.levels) l *= scale;
}

const Constellation& Constellation::get(int order_bits) {
    if (order_bits < 1 || order_bits > kMaxOrderBits) {
        throw InvalidArgument("constellation order must be in 1..8, got " + std::to_string(order_bits));
    }
    static const std::vector<Constellation> table = [] {
        std::vector<Constellation> t;
        for (int b = 1; b <= kMaxOrderBits; ++b) t.push_back(Constellation(b));
        return t;
    }();
    return table[static_cast<std::size_t>(order_bits - 1)];
}

std::uint32_t Constellation::decide_axis(const Axis& axis, double value) noexcept {
    std::uint32_t best = 0;
    double best_d = std::abs(value - axis.levels[0]);
    for (std::uint32_t l = 1; l < axis.levels.size(); ++l) {
        const double d = std::abs(value - axis.levels[l]);
        if (d < best_d) {
            best_d = d;
            best = l;
        }
    }
    return best;
}

std::uint32_t Constellation::decide(cplx symbol) const noexcept {
    // Squared distance separates over the axes, so per-axis slicing is exact.
    // Ties pick the lowest axis label; the I label is the high part, which
    // makes the combined label minimal among equidistant points.
    const std::uint32_t il = decide_axis(i_axis_, symbol.real());
    const std::uint32_t ql = q_axis_.bits > 0 ? decide_axis(q_axis_, symbol.imag()) : 0u;
    return (il << q_axis_.bits) | ql;
}

std::uint32_t bits_to_label(std::span<const std::uint8_t> bits) {
    std::uint32_t label = 0;
    for (std::uint8_t b : bits) label = (label << 1) | (b & 1u);
    return label;
}

void label_to_bits(std::uint32_t label, int order_bits, std::span<std::uint8_t> out) {
    for (int i = 0; i < order_bits; ++i) {
        out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((label >> (order_bits - 1 - i)) & 1u);
    }
}

cplx qam_map(std::span<const std::uint8_t> bits, int order_bits) {
    const auto& c = Constellation::get(order_bits);
    if (bits.size() != static_cast<std::size_t>(order_bits)) {
        throw InvalidArgument("qam_map: expected " + std::to_string(order_bits) + " bits, got " +
                              std::to_string(bits.size()));
    }
    return c.map(bits_to_label(bits));
}

Bits qam_demap(cplx symbol, int order_bits) {
    const auto& c = Constellation::get(order_bits);
    Bits out(static_cast<std::size_t>(order_bits));
    label_to_bits(c.decide(symbol), order_bits, out);
    return out;
}

// ---------------------------------------------------------------------------
// FFT backend (FFTW). Plans are created once per size under a lock and then
// executed with the new-array interface, which is safe from any thread.

namespace {

class PlanCache {
public:
    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        auto* buf = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        plans_.emplace(key, p);
        return p;
    }

    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
    static PlanCache cache;
    return cache;
}

void run_fft(std::span<cplx> data, int sign) {
    if (data.empty()) return;
    fftw_plan p = plan_cache().get(data.size(), sign);
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, ptr, ptr);
}

}  // namespace

void fft_inplace(std::span<cplx> data) { run_fft(data, FFTW_FORWARD); }

void ifft_inplace(std::span<cplx> data) {
    run_fft(data, FFTW_BACKWARD);
    const double s = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= s;
}

void hermitian_ifft_into(std::span<const cplx> bins, std::span<double> out) {
    const std::size_t n = out.size();
    if (!is_power_of_two(n) || n < 4) {
        throw InvalidArgument("hermitian_ifft: fft_len must be a power of two >= 4");
    }
    if (bins.size() != n / 2 - 1) {
        throw InvalidArgument("hermitian_ifft: expected " + std::to_string(n / 2 - 1) + " bins, got " +
                              std::to_string(bins.size()));
    }
    std::vector<cplx> spec(n, cplx{});
    for (std::size_t k = 1; k < n / 2; ++k) {
        spec[k] = bins[k - 1];
        spec[n - k] = std::conj(bins[k - 1]);
    }
    ifft_inplace(spec);
    for (std::size_t i = 0; i < n; ++i) out[i] = spec[i].real();
}

RealBlock hermitian_ifft(std::span<const cplx> bins, std::size_t fft_len, double sample_rate) {
    RealBlock block{std::vector<double>(fft_len), sample_rate};
    hermitian_ifft_into(bins, block.samples);
    return block;
}

void forward_fft_real_into(std::span<const double> block, std::span<cplx> bins) {
    const std::size_t n = block.size();
    if (!is_power_of_two(n) || n < 4) {
        throw InvalidArgument("forward_fft_real: length must be a power of two >= 4");
    }
    std::vector<cplx> spec(block.begin(), block.end());
    fft_inplace(spec);
    for (std::size_t k = 1; k < n / 2; ++k) bins[k - 1] = spec[k];
}

std::vector<cplx> forward_fft_real(std::span<const double> block) {
    std::vector<cplx> bins(block.size() >= 2 ? block.size() / 2 - 1 : 0);
    forward_fft_real_into(block, bins);
    return bins;
}

double bin_frequency(std::size_t k, std::size_t n, double sample_rate) noexcept {
    const auto ki = static_cast<double>(k);
    const auto ni = static_cast<double>(n);
    const double f = ki < ni / 2.0 ? ki : ki - ni;
    return f * sample_rate / ni;
}

RealBlock resample_periodic(const RealBlock& in, std::size_t out_len) {
    const std::size_t n = in.size();
    if (n == 0 || out_len == 0) throw InvalidArgument("resample_periodic: empty block");
    if (out_len == n) return in;
    std::vector<cplx> spec(in.samples.begin(), in.samples.end());
    fft_inplace(spec);

    std::vector<cplx> out(out_len, cplx{});
    const std::size_t keep = std::min(n, out_len);
    // Bins strictly below half the shorter length on each side; the shared
    // Nyquist bin (if any) is split to keep the result real.
    const std::size_t half = (keep - 1) / 2;
    out[0] = spec[0];
    for (std::size_t k = 1; k <= half; ++k) {
        out[k] = spec[k];
        out[out_len - k] = spec[n - k];
    }
    if (keep % 2 == 0) {
        const std::size_t k = keep / 2;
        if (out_len > n) {
            out[k] = 0.5 * spec[k];
            out[out_len - k] = 0.5 * spec[k];
        } else {
            out[k] = spec[k] + spec[n - k];
        }
    }
    ifft_inplace(out);
    RealBlock res;
    res.sample_rate = in.sample_rate * static_cast<double>(out_len) / static_cast<double>(n);
    res.samples.resize(out_len);
    const double gain = static_cast<double>(out_len) / static_cast<double>(n);
    for (std::size_t i = 0; i < out_len; ++i) res.samples[i] = out[i].real() * gain;
    return res;
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed, 0)) {}

Rng Rng::fork(std::uint64_t index) const { return Rng(mix_seed(seed_ ^ 0xD1B54A32D192ED03ull, index)); }

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::gaussian() { return normal_(engine_); }

std::uint8_t Rng::bit() { return static_cast<std::uint8_t>(engine_() >> 63); }

std::uint64_t Rng::below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
}

Bits Rng::bits(std::size_t n) {
    Bits out(n);
    std::size_t i = 0;
    while (i < n) {
        std::uint64_t word = engine_();
        for (int b = 0; b < 64 && i < n; ++b, ++i) out[i] = static_cast<std::uint8_t>((word >> b) & 1u);
    }
    return out;
}

}  // namespace dmt
