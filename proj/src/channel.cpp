#include "dmt/channel.hpp"

#include <array>
#include <cmath>

#include "dmt/error.hpp"

namespace dmt {

void FiberParams::validate() const {
    if (L < 0 || alpha_db_per_km < 0 || gamma < 0) throw InvalidArgument("fiber: L, alpha and gamma must be >= 0");
    if (!(f0 > 0)) throw InvalidArgument("fiber: carrier frequency must be positive");
}

void FilterParams::validate() const {
    if (!(bw_3db_ghz > 0)) throw InvalidArgument("filter: bandwidth must be positive");
    if (order < 1) throw InvalidArgument("filter: order must be >= 1");
}

double supergauss_amplitude(double f_hz, const FilterParams& filt) {
    const double x = (f_hz - filt.center_offset_ghz * 1e9) / (filt.bw_3db_ghz * 0.5e9);
    return std::exp(-0.5 * std::log(2.0) * std::pow(x * x, filt.order));
}

double dispersion_phase_coefficient(const FiberParams& fiber) {
    const double lambda = kSpeedOfLight / fiber.f0;
    const double d_si = fiber.D * 1e-6;  // ps/(nm km) -> s/m^2
    return kPi * d_si * fiber.L * 1e3 * lambda * lambda / kSpeedOfLight;
}

cplx dispersion_response(double f_hz, const FiberParams& fiber) {
    return std::polar(1.0, dispersion_phase_coefficient(fiber) * f_hz * f_hz);
}

double fading_null_hz(const FiberParams& fiber, int n) {
    const double lambda = kSpeedOfLight / fiber.f0;
    const double dl = fiber.D * 1e-6 * fiber.L * 1e3;
    return std::sqrt((2.0 * n - 1.0) * kSpeedOfLight / (2.0 * dl * lambda * lambda));
}

namespace {

constexpr int kMaxBesselOrder = 10;

// Reverse Bessel polynomial coefficients, a_k for s^k.
std::array<double, kMaxBesselOrder + 1> bessel_coefficients(int order) {
    std::array<double, kMaxBesselOrder + 1> a{};
    for (int k = 0; k <= order; ++k) {
        double v = 1.0;
        // (2n-k)! / (2^(n-k) k! (n-k)!)
        for (int i = order - k + 1; i <= 2 * order - k; ++i) v *= i;
        for (int i = 1; i <= k; ++i) v /= i;
        v /= std::exp2(order - k);
        a[static_cast<std::size_t>(k)] = v;
    }
    return a;
}

cplx bessel_normalized(double w, int order, const std::array<double, kMaxBesselOrder + 1>& a) {
    const cplx s(0.0, w);
    cplx p = a[static_cast<std::size_t>(order)];
    for (int k = order - 1; k >= 0; --k) p = p * s + a[static_cast<std::size_t>(k)];
    return a[0] / p;
}

struct BesselTables {
    std::array<std::array<double, kMaxBesselOrder + 1>, kMaxBesselOrder + 1> coeffs{};
    std::array<double, kMaxBesselOrder + 1> w3db{};

    BesselTables() {
        for (int n = 1; n <= kMaxBesselOrder; ++n) {
            coeffs[static_cast<std::size_t>(n)] = bessel_coefficients(n);
            double lo = 0.0, hi = 10.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (std::norm(bessel_normalized(mid, n, coeffs[static_cast<std::size_t>(n)])) > 0.5) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            w3db[static_cast<std::size_t>(n)] = 0.5 * (lo + hi);
        }
    }
};

const BesselTables& bessel_tables() {
    static const BesselTables t;
    return t;
}

}  // namespace

cplx bessel_response(double f_hz, double bw_hz, int order) {
    if (order < 1 || order > kMaxBesselOrder) throw InvalidArgument("bessel: order must be in 1..10");
    const auto& t = bessel_tables();
    const double w = t.w3db[static_cast<std::size_t>(order)] * f_hz / bw_hz;
    // Normalized group delay at DC is 1, so exp(j w) removes it.
    return bessel_normalized(w, order, t.coeffs[static_cast<std::size_t>(order)]) * std::polar(1.0, w);
}

FieldBlock mzm_modulate(const RealBlock& drive, double vpi, double mod_index, double bias_phase,
                        std::optional<double> reference_peak) {
    if (!(vpi > 0)) throw InvalidArgument("mzm_modulate: vpi must be positive");
    if (drive.empty()) throw InvalidArgument("mzm_modulate: empty drive");
    if (reference_peak && !(*reference_peak >= 0)) throw InvalidArgument("mzm_modulate: reference peak must be >= 0");
    double peak = 0.0;
    if (reference_peak) {
        peak = *reference_peak;
    } else {
        for (double v : drive.samples) peak = std::max(peak, std::abs(v));
    }
    const double volts_per_unit = peak > 0 ? mod_index * vpi / peak : 0.0;

    FieldBlock out;
    out.sample_rate = drive.sample_rate;
    out.samples.resize(drive.size());
    for (std::size_t i = 0; i < drive.size(); ++i) {
        const double v = drive.samples[i] * volts_per_unit;
        out.samples[i] = std::cos(0.5 * kPi * v / vpi + bias_phase);
    }
    return out;
}

FieldBlock optical_bandpass(const FieldBlock& field, const FilterParams& filt) {
    filt.validate();
    return apply_spectral(field, [&](double f) { return cplx(supergauss_amplitude(f, filt), 0.0); });
}

FieldBlock apply_dispersion(const FieldBlock& field, const FiberParams& fiber) {
    fiber.validate();
    if (fiber.L == 0.0 || fiber.D == 0.0) return field;
    return apply_spectral(field, [&](double f) { return dispersion_response(f, fiber); });
}

namespace {

void scale_to_power(FieldBlock& field, double watts) {
    const double p = mean_power(field.samples);
    if (!(p > 0)) throw InvalidArgument("field has no power to scale");
    const double s = std::sqrt(watts / p);
    for (auto& v : field.samples) v *= s;
}

double alpha_per_km(const FiberParams& fiber) { return fiber.alpha_db_per_km * std::log(10.0) / 10.0; }

}  // namespace

FieldBlock propagate_linear(const FieldBlock& field, const FiberParams& fiber, double launch_power_dbm) {
    fiber.validate();
    FieldBlock out = field;
    scale_to_power(out, 1e-3 * std::pow(10.0, launch_power_dbm / 10.0));
    out = apply_dispersion(out, fiber);
    const double amp = std::exp(-0.5 * alpha_per_km(fiber) * fiber.L);
    for (auto& v : out.samples) v *= amp;
    return out;
}

FieldBlock ssfm_propagate(const FieldBlock& field, const FiberParams& fiber, double launch_power_dbm, double step_km) {
    fiber.validate();
    if (!(step_km > 0)) throw InvalidArgument("ssfm_propagate: step must be positive");
    if (fiber.L > 0 && step_km > fiber.L) throw InvalidArgument("ssfm_propagate: step larger than the fiber");

    FieldBlock e = field;
    scale_to_power(e, 1e-3 * std::pow(10.0, launch_power_dbm / 10.0));
    if (fiber.L == 0) return e;

    const auto steps = static_cast<std::size_t>(std::ceil(fiber.L / step_km - 1e-9));
    const double h = fiber.L / static_cast<double>(steps);
    const double alpha = alpha_per_km(fiber);
    const double l_eff = alpha > 0 ? (1.0 - std::exp(-alpha * h)) / alpha : h;
    const double step_amp = std::exp(-0.5 * alpha * h);

    FiberParams half = fiber;
    half.L = 0.5 * h;
    const double beta = dispersion_phase_coefficient(half);
    const std::size_t n = e.size();
    std::vector<cplx> half_step(n), full_step(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = bin_frequency(k, n, e.sample_rate);
        half_step[k] = std::polar(1.0, beta * f * f);
        full_step[k] = half_step[k] * half_step[k];
    }

    // Adjacent half steps of dispersion merge into full steps, so the field
    // stays in the frequency domain between nonlinear steps.
    auto& x = e.samples;
    fft_inplace(x);
    for (std::size_t k = 0; k < n; ++k) x[k] *= half_step[k];
    for (std::size_t s = 0; s < steps; ++s) {
        ifft_inplace(x);
        if (fiber.gamma > 0) {
            const double g = fiber.gamma * l_eff;
            for (auto& v : x) v *= step_amp * std::polar(1.0, g * std::norm(v));
        } else {
            for (auto& v : x) v *= step_amp;
        }
        fft_inplace(x);
        const auto& op = s + 1 == steps ? half_step : full_step;
        for (std::size_t k = 0; k < n; ++k) x[k] *= op[k];
    }
    ifft_inplace(x);
    return e;
}

double ase_density_for_osnr(double signal_power, double osnr_db) {
    return signal_power / (kOsnrReferenceBandwidth * std::pow(10.0, osnr_db / 10.0));
}

FieldBlock add_white_noise(const FieldBlock& field, double density_per_hz, Rng& rng) {
    FieldBlock out = field;
    const double sigma = std::sqrt(0.5 * density_per_hz * field.sample_rate);
    for (auto& v : out.samples) v += cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    return out;
}

FieldBlock load_ase(const FieldBlock& field, const NoiseParams& noise, Rng& rng) {
    if (!noise.target_osnr_db) return field;
    if (!std::isfinite(*noise.target_osnr_db)) throw InvalidArgument("load_ase: target OSNR must be finite");
    const double p = mean_power(field.samples);
    if (!(p > 0)) throw InvalidArgument("load_ase: signal power must be positive");
    return add_white_noise(field, ase_density_for_osnr(p, *noise.target_osnr_db), rng);
}

double measure_osnr_db(const FieldBlock& field, double signal_bw_hz) {
    FieldBlock spec = field;
    fft_inplace(spec.samples);
    const std::size_t n = spec.size();
    const double nn = static_cast<double>(n);
    double total = 0.0, noise = 0.0;
    std::size_t noise_bins = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = std::norm(spec.samples[k]) / (nn * nn);
        total += p;
        if (std::abs(bin_frequency(k, n, field.sample_rate)) > signal_bw_hz) {
            noise += p;
            ++noise_bins;
        }
    }
    if (noise_bins == 0) throw InvalidArgument("measure_osnr: no out-of-band bins above the signal bandwidth");
    const double density = noise / static_cast<double>(noise_bins) / (field.sample_rate / nn);
    const double signal = total - density * field.sample_rate;
    return 10.0 * std::log10(signal / (density * kOsnrReferenceBandwidth));
}

RealBlock pin_detect(const FieldBlock& field, const PinParams& pin, double electrical_noise_var, Rng* rng) {
    if (field.empty()) throw InvalidArgument("pin_detect: empty field");
    const std::size_t n = field.size();
    std::vector<cplx> i(n);
    for (std::size_t k = 0; k < n; ++k) i[k] = std::norm(field.samples[k]);
    fft_inplace(i);
    i[0] = 0.0;  // AC coupling
    for (std::size_t k = 1; k < n; ++k) {
        i[k] *= bessel_response(bin_frequency(k, n, field.sample_rate), pin.elec_bw_ghz * 1e9, pin.bessel_order);
    }
    ifft_inplace(i);
    RealBlock out;
    out.sample_rate = field.sample_rate;
    out.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.samples[k] = i[k].real();
    if (electrical_noise_var > 0) {
        if (rng == nullptr) throw InvalidArgument("pin_detect: electrical noise requires an Rng");
        const double sigma = std::sqrt(electrical_noise_var);
        for (auto& v : out.samples) v += sigma * rng->gaussian();
    }
    return out;
}

}  // namespace dmt
