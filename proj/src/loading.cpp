#include "dmt/loading.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numeric>

#include "dmt/error.hpp"

namespace dmt {

std::size_t SubcarrierPlan::bits_per_symbol() const noexcept {
    std::size_t s = 0;
    for (int b : bits) s += static_cast<std::size_t>(b);
    return s;
}

void SubcarrierPlan::validate() const {
    if (!is_power_of_two(fft_len) || fft_len < 8) throw InvalidArgument("plan: fft_len must be a power of two >= 8");
    if (power.size() != bits.size()) throw InvalidArgument("plan: bits/power size mismatch");
    if (bits.size() > fft_len / 2 - 1) throw InvalidArgument("plan: more data subcarriers than fft_len allows");
    if (n_ts >= frame_symbols) throw InvalidArgument("plan: n_ts must be smaller than frame_symbols");
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] < 0 || bits[k] > kMaxOrderBits) throw InvalidArgument("plan: bits out of range");
        if (!(power[k] >= 0.0) || !std::isfinite(power[k])) throw InvalidArgument("plan: invalid power");
    }
}

double gap_db_for_symbol_error(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("gap: error rate must be in (0, 1)");
    const double x = std::sqrt(2.0) * boost::math::erfc_inv(p);
    return 10.0 * std::log10(x * x / 3.0);
}

LoadingConfig default_loading_config() {
    LoadingConfig cfg;
    cfg.gap_db = gap_db_for_symbol_error(1e-3);
    return cfg;
}

std::size_t usable_subcarriers(std::size_t fft_len, double oversampling) {
    if (!(oversampling >= 1.0)) throw InvalidArgument("usable_subcarriers: oversampling must be >= 1");
    if (!is_power_of_two(fft_len) || fft_len < 4) {
        throw InvalidArgument("usable_subcarriers: fft_len must be a power of two >= 4");
    }
    const double raw = static_cast<double>(fft_len / 2 - 1) / oversampling;
    return static_cast<std::size_t>(std::floor(raw + 1e-9));
}

std::size_t cp_min_samples(double dispersion_ps_nm_km, double length_km, double carrier_hz, double bandwidth_hz,
                           double sample_rate) {
    if (dispersion_ps_nm_km < 0 || length_km < 0 || bandwidth_hz < 0 || sample_rate < 0 || !(carrier_hz > 0)) {
        throw InvalidArgument("cp_min_samples: inputs must be nonnegative with a positive carrier");
    }
    const double d_si = dispersion_ps_nm_km * 1e-6;  // s/m^2
    const double l_si = length_km * 1e3;
    const double spread_s = d_si * l_si * (kSpeedOfLight / (carrier_hz * carrier_hz)) * bandwidth_hz;
    return static_cast<std::size_t>(std::ceil(spread_s * sample_rate - 1e-9));
}

std::size_t rate_budget(double net_rate, std::size_t fft_len, std::size_t cp_samples, std::size_t n_ts,
                        std::size_t frame_symbols, double sample_rate) {
    if (n_ts >= frame_symbols) throw InvalidArgument("rate_budget: n_ts must be smaller than frame_symbols");
    if (!(sample_rate > 0) || net_rate < 0) throw InvalidArgument("rate_budget: invalid rate");
    const double bits = net_rate * static_cast<double>(frame_symbols) * static_cast<double>(fft_len + cp_samples) /
                        (sample_rate * static_cast<double>(frame_symbols - n_ts));
    return static_cast<std::size_t>(std::ceil(bits - 1e-9));
}

SnrProfile estimate_snr(const SymbolMatrix& rx, const SymbolMatrix& tx, std::size_t fft_len, double snr_ceiling_db) {
    if (rx.rows() != tx.rows() || rx.cols() != tx.cols()) throw InvalidArgument("estimate_snr: shape mismatch");
    if (rx.rows() == 0) throw InvalidArgument("estimate_snr: no probe symbols");
    const double ceiling = std::pow(10.0, snr_ceiling_db / 10.0);
    SnrProfile out;
    out.fft_len = fft_len;
    out.n_data = rx.cols();
    out.snr.resize(rx.cols());
    for (std::size_t k = 0; k < rx.cols(); ++k) {
        // Residual gain g = <Y, X> / <X, X> is taken out before measuring the error.
        double sig = 0.0;
        cplx cross{};
        for (std::size_t m = 0; m < rx.rows(); ++m) {
            sig += std::norm(tx(m, k));
            cross += rx(m, k) * std::conj(tx(m, k));
        }
        const cplx g = sig > 0.0 ? cross / sig : cplx{};
        double err = 0.0;
        for (std::size_t m = 0; m < rx.rows(); ++m) err += std::norm(rx(m, k) - g * tx(m, k));
        const double useful = std::norm(g) * sig;
        if (useful == 0.0) {
            out.snr[k] = 0.0;
        } else {
            out.snr[k] = err > 0.0 ? std::min(useful / err, ceiling) : ceiling;
        }
    }
    return out;
}

namespace {

double gap_linear(const LoadingConfig& cfg) {
    if (cfg.gap_db < 0) throw InvalidArgument("loading: gap_db must be >= 0");
    return std::pow(10.0, cfg.gap_db / 10.0);
}

}  // namespace

BitLoadResult chow_bitload(const SnrProfile& snr, std::size_t target_bits, const LoadingConfig& cfg,
                           bool final_adjust) {
    if (cfg.b_max < 1 || cfg.b_max > kMaxOrderBits) throw InvalidArgument("chow_bitload: b_max must be in 1..8");
    const double gap = gap_linear(cfg);
    const std::size_t n = snr.snr.size();

    std::size_t loadable = 0;
    for (double s : snr.snr) {
        if (s < 0 || !std::isfinite(s)) throw InvalidArgument("chow_bitload: SNR must be finite and >= 0");
        if (s > 0) ++loadable;
    }
    if (target_bits > loadable * static_cast<std::size_t>(cfg.b_max)) {
        throw InfeasibleLoading("target of " + std::to_string(target_bits) + " bits exceeds " +
                                std::to_string(loadable) + " loadable subcarriers x " + std::to_string(cfg.b_max) +
                                " bits");
    }

    BitLoadResult res;
    res.bits.assign(n, 0);
    if (target_bits == 0) return res;

    std::vector<double> residue(n, 0.0);
    double margin = 1.0;
    const auto target = static_cast<long>(target_bits);
    long total = 0;
    long used = 0;

    auto allocate = [&] {
        total = 0;
        used = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (snr.snr[k] <= 0) {
                res.bits[k] = 0;
                residue[k] = 0;
                continue;
            }
            const double exact = std::log2(1.0 + snr.snr[k] / (gap * margin));
            const int b = std::clamp(static_cast<int>(std::lround(exact)), 0, cfg.b_max);
            res.bits[k] = b;
            residue[k] = exact - b;
            total += b;
            if (b > 0) ++used;
        }
    };

    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        allocate();
        if (std::labs(total - target) <= cfg.margin_tol_bits) break;
        const double denom = used > 0 ? static_cast<double>(used) : static_cast<double>(loadable);
        margin *= std::exp2(static_cast<double>(total - target) / denom);
    }
    if (it == cfg.max_iters) allocate();
    res.iterations = it;
    res.margin_db = 10.0 * std::log10(margin);

    if (!std::isfinite(margin) || (it == cfg.max_iters && std::labs(total - target) > std::max<long>(used, 1))) {
        throw ConvergenceError("chow_bitload: margin iteration did not converge (" + std::to_string(total) + " vs " +
                               std::to_string(target) + " bits)");
    }
    if (!final_adjust) return res;

    while (total > target) {
        std::size_t pick = n;
        for (std::size_t k = 0; k < n; ++k) {
            if (res.bits[k] == 0) continue;
            if (pick == n || residue[k] < residue[pick]) pick = k;
        }
        if (pick == n) break;
        --res.bits[pick];
        residue[pick] += 1.0;
        --total;
    }
    while (total < target) {
        std::size_t pick = n;
        for (std::size_t k = 0; k < n; ++k) {
            if (res.bits[k] >= cfg.b_max || snr.snr[k] <= 0) continue;
            if (pick == n || residue[k] > residue[pick]) pick = k;
        }
        if (pick == n) throw InfeasibleLoading("chow_bitload: no subcarrier can take another bit");
        ++res.bits[pick];
        residue[pick] -= 1.0;
        ++total;
    }
    return res;
}

std::vector<double> cioffi_powerload(const SnrProfile& snr, std::span<const int> bits, const LoadingConfig& cfg) {
    if (bits.size() != snr.snr.size()) throw InvalidArgument("cioffi_powerload: size mismatch");
    const double gap = gap_linear(cfg);
    std::vector<double> power(bits.size(), 0.0);
    double sum = 0.0;
    std::size_t active = 0;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] <= 0) continue;
        if (!(snr.snr[k] > 0)) {
            throw InvalidArgument("cioffi_powerload: subcarrier " + std::to_string(k + 1) +
                                  " carries bits with zero SNR");
        }
        power[k] = (std::exp2(bits[k]) - 1.0) * gap / snr.snr[k];
        sum += power[k];
        ++active;
    }
    if (active == 0) return power;
    const double scale = static_cast<double>(active) / sum;
    for (auto& p : power) p *= scale;
    return power;
}

std::vector<double> subcarrier_margins(const SnrProfile& snr, std::span<const int> bits,
                                       std::span<const double> power, const LoadingConfig& cfg) {
    const double gap = gap_linear(cfg);
    std::vector<double> m(bits.size(), 0.0);
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] > 0) m[k] = power[k] * snr.snr[k] / ((std::exp2(bits[k]) - 1.0) * gap);
    }
    return m;
}

}  // namespace dmt
