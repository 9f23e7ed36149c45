#pragma once

// Numeric building blocks shared by the whole link: sampled waveforms,
// Gray-labeled QAM constellations, real-valued multicarrier transforms and a
// seeded random source with forkable sub-streams.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dmt {

using cplx = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

// Uniformly sampled waveform. Electrical signals are real, optical fields complex.
template <typename T>
struct SignalBlock {
    std::vector<T> samples;
    double sample_rate = 0.0;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

using RealBlock = SignalBlock<double>;
using FieldBlock = SignalBlock<cplx>;

double rms(std::span<const double> x);
double mean_power(std::span<const cplx> x);

bool is_power_of_two(std::size_t n) noexcept;

// Row-major symbols x subcarriers matrix of frequency-domain values.
class SymbolMatrix {
public:
    SymbolMatrix() = default;
    SymbolMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// ---------------------------------------------------------------------------
// Constellations
//
// Rectangular QAM with 2^ceil(b/2) levels on I and 2^floor(b/2) levels on Q.
// The label's high ceil(b/2) bits select the I level, the low floor(b/2) bits
// the Q level. On each axis the bit pattern is a reflected Gray code counted
// from the most positive level downward, so for 16-QAM the I (or Q) bit pairs
// 00, 01, 11, 10 map to +3, +1, -1, -3 before normalization. b = 1 is BPSK on
// the real axis (0 -> +1, 1 -> -1). Every table is scaled to unit mean power.
// ---------------------------------------------------------------------------

inline constexpr int kMaxOrderBits = 8;

class Constellation {
public:
    static const Constellation& get(int order_bits);

    int order_bits() const noexcept { return order_bits_; }
    std::size_t size() const noexcept { return points_.size(); }
    std::span<const cplx> points() const noexcept { return points_; }

    cplx map(std::uint32_t label) const { return points_.at(label); }

    // Minimum-distance decision; equidistant candidates resolve to the lowest label.
    std::uint32_t decide(cplx symbol) const noexcept;

private:
    explicit Constellation(int order_bits);

    struct Axis {
        int bits = 0;
        std::vector<double> levels;       // indexed by Gray label
    };
    static std::uint32_t decide_axis(const Axis& axis, double value) noexcept;

    int order_bits_;
    Axis i_axis_;
    Axis q_axis_;
    std::vector<cplx> points_;
};

// Packs the first `order_bits` entries of `bits` (MSB first) into a label.
std::uint32_t bits_to_label(std::span<const std::uint8_t> bits);
void label_to_bits(std::uint32_t label, int order_bits, std::span<std::uint8_t> out);

cplx qam_map(std::span<const std::uint8_t> bits, int order_bits);
Bits qam_demap(cplx symbol, int order_bits);

// ---------------------------------------------------------------------------
// Transforms. Inverse transforms carry the 1/N factor, forward ones are unscaled.
// ---------------------------------------------------------------------------

// In-place complex DFT of any length.
void fft_inplace(std::span<cplx> data);
void ifft_inplace(std::span<cplx> data);

// Subcarriers 1..N/2-1 -> N real samples. DC and Nyquist are zero.
RealBlock hermitian_ifft(std::span<const cplx> bins, std::size_t fft_len, double sample_rate = 1.0);
void hermitian_ifft_into(std::span<const cplx> bins, std::span<double> out);

// N real samples -> subcarriers 1..N/2-1.
std::vector<cplx> forward_fft_real(std::span<const double> block);
void forward_fft_real_into(std::span<const double> block, std::span<cplx> bins);

// Frequency of DFT bin k for an n-point transform at `sample_rate`, mapped to [-fs/2, fs/2).
double bin_frequency(std::size_t k, std::size_t n, double sample_rate) noexcept;

// Band-limited interpolation/decimation of a periodic real block by spectral
// zero-padding or truncation. The output length must keep the same period.
RealBlock resample_periodic(const RealBlock& in, std::size_t out_len);

// ---------------------------------------------------------------------------
// Random source
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    // Independent stream keyed by an index; the parent stream is not advanced.
    Rng fork(std::uint64_t index) const;

    double uniform();
    double gaussian();
    std::uint8_t bit();
    std::uint64_t below(std::uint64_t bound);
    Bits bits(std::size_t n);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace dmt
