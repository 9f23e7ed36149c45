#include "dmt/rxchain.hpp"

#include <algorithm>
#include <cmath>

#include "dmt/error.hpp"

namespace dmt {

std::vector<double> timing_metric(std::span<const double> samples, std::size_t fft_len) {
    const std::size_t half = fft_len / 2;
    if (samples.size() < fft_len) return {};
    const std::size_t count = samples.size() - fft_len + 1;

    double energy = 0.0;
    for (double v : samples) energy += v * v;
    const double r_floor = 1e-9 * energy / static_cast<double>(samples.size()) * static_cast<double>(half);

    // R averages the energy of both halves, which bounds M by 1.
    std::vector<double> m(count, 0.0);
    double p = 0.0, r = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        p += samples[i] * samples[i + half];
        r += 0.5 * (samples[i] * samples[i] + samples[i + half] * samples[i + half]);
    }
    for (std::size_t d = 0;; ++d) {
        m[d] = r > r_floor ? (p * p) / (r * r) : 0.0;
        if (d + 1 == count) break;
        // Slide by one; refresh exactly now and then to bound drift.
        if ((d + 1) % 4096 == 0) {
            p = r = 0.0;
            for (std::size_t i = 0; i < half; ++i) {
                const double a = samples[d + 1 + i], b = samples[d + 1 + i + half];
                p += a * b;
                r += 0.5 * (a * a + b * b);
            }
        } else {
            p += samples[d + half] * samples[d + fft_len] - samples[d] * samples[d + half];
            r += 0.5 * (samples[d + fft_len] * samples[d + fft_len] - samples[d] * samples[d]);
        }
    }
    return m;
}

namespace {

SyncResult describe_plateau(const std::vector<double>& m, std::size_t d, std::size_t width, double sum,
                            const SyncOptions& opts) {
    double peak = 0.0;
    for (std::size_t j = d; j < d + width; ++j) peak = std::max(peak, m[j]);
    const double level = opts.region_fraction * peak;
    std::size_t first = d;
    while (first > 0 && m[first - 1] >= level) --first;
    std::size_t last = d + width - 1;
    while (last + 1 < m.size() && m[last + 1] >= level) ++last;

    SyncResult res;
    res.frame_start = d;
    res.plateau_first = first;
    res.plateau_last = last;
    res.peak_metric = peak;
    res.plateau_metric = sum / static_cast<double>(width);
    return res;
}

}  // namespace

std::vector<SyncResult> schmidl_cox_candidates(std::span<const double> samples, std::size_t fft_len,
                                               std::size_t cp_samples, std::size_t count,
                                               const SyncOptions& opts) {
    if (!is_power_of_two(fft_len)) throw InvalidArgument("schmidl_cox_sync: fft_len must be a power of two");
    if (count == 0) throw InvalidArgument("schmidl_cox_sync: need at least one candidate");
    const auto m = timing_metric(samples, fft_len);
    if (m.empty()) throw SyncError("schmidl_cox_sync: block shorter than one symbol");

    // The prefix makes M flat over cp + 1 offsets starting at the prefix start,
    // so candidates are (cp+1)-wide windows ranked by their sum.
    const std::size_t width = std::min(cp_samples + 1, m.size());
    std::vector<double> sums(m.size() - width + 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) acc += m[j];
    sums[0] = acc;
    for (std::size_t d = 1; d < sums.size(); ++d) {
        acc += m[d + width - 1] - m[d - 1];
        sums[d] = acc;
    }

    std::vector<SyncResult> out;
    std::vector<std::pair<std::size_t, std::size_t>> taken;   // suppressed spans
    const std::size_t guard = fft_len;
    while (out.size() < count) {
        double best = -1.0;
        std::size_t best_d = sums.size();
        for (std::size_t d = 0; d < sums.size(); ++d) {
            if (sums[d] <= best + 1e-12) continue;
            bool free = true;
            for (auto [lo, hi] : taken) free = free && (d < lo || d >= hi);
            if (!free) continue;
            best = sums[d];
            best_d = d;
        }
        if (best_d == sums.size()) break;
        if (out.empty() && !(best / static_cast<double>(width) >= opts.detection_threshold)) {
            throw SyncError("schmidl_cox_sync: no preamble found (plateau metric " +
                            std::to_string(best / static_cast<double>(width)) + ")");
        }
        out.push_back(describe_plateau(m, best_d, width, best, opts));
        taken.emplace_back(best_d > guard ? best_d - guard : 0, best_d + guard);
    }
    return out;
}

SyncResult schmidl_cox_sync(std::span<const double> samples, std::size_t fft_len, std::size_t cp_samples,
                            const SyncOptions& opts) {
    return schmidl_cox_candidates(samples, fft_len, cp_samples, 1, opts).front();
}

TimingFit fit_timing(std::span<const double> samples, std::size_t coarse, const TrainingSymbols& ts,
                     std::size_t fft_len, std::size_t cp_samples) {
    if (ts.rows() == 0) throw InvalidArgument("fine_timing: no training symbols");
    const std::size_t sym = fft_len + cp_samples;
    const std::size_t first_row = ts.rows() >= 2 ? 1 : 0;
    const std::size_t nb = fft_len / 2 - 1;

    // Per-row channel estimates Y/X over the training symbols that fit.
    std::vector<cplx> bins(nb);
    std::vector<cplx> h_bins(nb, cplx{}), sum_all(nb, cplx{});
    std::vector<double> energy(nb, 0.0);
    std::vector<int> rows_at(nb, 0);
    std::size_t used = 0;
    for (std::size_t row = 0; row < ts.rows(); ++row) {
        const std::size_t start = coarse + row * sym + cp_samples;
        if (start + fft_len > samples.size()) break;
        forward_fft_real_into(samples.subspan(start, fft_len), bins);
        for (std::size_t k = 0; k < ts.cols() && k < nb; ++k) {
            if (ts(row, k) == cplx{}) continue;
            const cplx z = bins[k] / ts(row, k);
            sum_all[k] += z;
            energy[k] += std::norm(z);
            ++rows_at[k];
            if (row >= first_row) h_bins[k] += z;
        }
        used += row >= first_row;
    }
    if (used == 0) return {coarse, 0.0};

    // Score: share of the estimate energy that repeats across rows, rescaled so
    // unrelated samples give 0 and a noiseless channel gives 1.
    double coherent = 0.0, spread = 0.0, chance = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        if (rows_at[k] < 2) continue;
        coherent += std::norm(sum_all[k]);
        spread += rows_at[k] * energy[k];
        chance += energy[k];
    }
    const double score = spread > chance ? (coherent - chance) / (spread - chance) : 0.0;

    const auto h = hermitian_ifft(h_bins, fft_len);
    const auto n = static_cast<std::ptrdiff_t>(fft_len);
    const std::ptrdiff_t reach = n / 4;
    auto tap = [&](std::ptrdiff_t d) {
        const double v = h.samples[static_cast<std::size_t>(((d % n) + n) % n)];
        return v * v;
    };
    double peak = 0.0;
    for (std::ptrdiff_t d = -reach; d < reach; ++d) peak = std::max(peak, tap(d));
    if (!(peak > 0)) return {coarse, score};

    // Energy centroid of the taps above 10 % of the strongest.
    double w = 0.0, wd = 0.0;
    for (std::ptrdiff_t d = -reach; d < reach; ++d) {
        const double e = tap(d);
        if (e < 0.1 * peak) continue;
        w += e;
        wd += e * static_cast<double>(d);
    }
    const auto refined = static_cast<std::ptrdiff_t>(coarse) + static_cast<std::ptrdiff_t>(std::lround(wd / w));
    return {refined < 0 ? 0 : static_cast<std::size_t>(refined), score};
}

std::size_t fine_timing(std::span<const double> samples, std::size_t coarse, const TrainingSymbols& ts,
                        std::size_t fft_len, std::size_t cp_samples) {
    TimingFit fit = fit_timing(samples, coarse, ts, fft_len, cp_samples);
    // A large first correction leaves the windows straddling symbols; redo once.
    if (fit.start != coarse) fit = fit_timing(samples, fit.start, ts, fft_len, cp_samples);
    return fit.start;
}

std::size_t acquire_timing(std::span<const double> samples, const TrainingSymbols& ts, std::size_t fft_len,
                           std::size_t cp_samples, const SyncOptions& opts) {
    if (ts.rows() < 2) {
        return fine_timing(samples, schmidl_cox_sync(samples, fft_len, cp_samples, opts).frame_start, ts, fft_len,
                           cp_samples);
    }
    SyncOptions rank = opts;
    rank.detection_threshold = 0.0;
    const auto cands = schmidl_cox_candidates(samples, fft_len, cp_samples, opts.candidates, rank);
    TimingFit best{cands.front().frame_start, -1.0};
    for (const auto& c : cands) {
        TimingFit fit = fit_timing(samples, c.frame_start, ts, fft_len, cp_samples);
        if (fit.start != c.frame_start) fit = fit_timing(samples, fit.start, ts, fft_len, cp_samples);
        if (fit.score > best.score) best = fit;
    }
    // Detected when either the metric or the training symbols vouch for it.
    if (!(cands.front().plateau_metric >= opts.detection_threshold) && !(best.score >= opts.min_coherence)) {
        throw SyncError("acquire_timing: no preamble found (plateau metric " +
                        std::to_string(cands.front().plateau_metric) + ", coherence " + std::to_string(best.score) +
                        ")");
    }
    return best.start;
}

double estimate_frequency_offset(std::span<const cplx> samples, std::size_t start, std::size_t fft_len,
                                 double sample_rate) {
    const std::size_t half = fft_len / 2;
    if (start + fft_len > samples.size()) throw InvalidArgument("estimate_frequency_offset: window out of range");
    cplx p{};
    for (std::size_t i = 0; i < half; ++i) p += std::conj(samples[start + i]) * samples[start + i + half];
    // Halves are N/2 samples apart: phase = 2 pi f (N/2) / fs.
    return std::arg(p) * sample_rate / (kPi * static_cast<double>(fft_len));
}

std::vector<cplx> correct_frequency_offset(std::span<const cplx> samples, double offset_hz, double sample_rate) {
    std::vector<cplx> out(samples.begin(), samples.end());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] *= std::polar(1.0, -2.0 * kPi * offset_hz * static_cast<double>(n) / sample_rate);
    }
    return out;
}

namespace {

// Initial one-tap estimate from the training symbols.
std::vector<cplx> training_estimate(const SymbolMatrix& rx_ts, const TrainingSymbols& ts) {
    const std::size_t n_data = ts.cols();
    std::vector<cplx> h(n_data, cplx{});
    if (ts.rows() >= 2) {
        for (std::size_t k = 0; k < n_data; ++k) {
            cplx acc{};
            std::size_t cnt = 0;
            for (std::size_t r = 1; r < ts.rows(); ++r) {
                if (ts(r, k) == cplx{}) continue;
                acc += rx_ts(r, k) / ts(r, k);
                ++cnt;
            }
            h[k] = cnt > 0 ? acc / static_cast<double>(cnt) : cplx{};
        }
        return h;
    }
    // Only the preamble: even subcarriers are known, odd ones are interpolated.
    std::vector<std::size_t> known;
    for (std::size_t k = 0; k < n_data; ++k) {
        if (ts(0, k) != cplx{}) {
            h[k] = rx_ts(0, k) / ts(0, k);
            known.push_back(k);
        }
    }
    if (known.empty()) return h;
    std::size_t j = 0;
    for (std::size_t k = 0; k < n_data; ++k) {
        if (ts(0, k) != cplx{}) continue;
        while (j + 1 < known.size() && known[j + 1] < k) ++j;
        if (k < known.front()) {
            h[k] = h[known.front()];
        } else if (j + 1 >= known.size()) {
            h[k] = h[known.back()];
        } else {
            const double t = static_cast<double>(k - known[j]) / static_cast<double>(known[j + 1] - known[j]);
            h[k] = (1.0 - t) * h[known[j]] + t * h[known[j + 1]];
        }
    }
    return h;
}

}  // namespace

DemodResult demodulate_frame(std::span<const double> samples, const SubcarrierPlan& plan, const TrainingSymbols& ts,
                             const DemodOptions& opts, const SymbolMatrix* known_payload) {
    plan.validate();
    const std::size_t n = plan.fft_len;
    const std::size_t cp = plan.cp_samples;
    const std::size_t n_data = plan.n_data();
    if (samples.size() < plan.frame_len()) {
        throw InvalidArgument("demodulate_frame: expected " + std::to_string(plan.frame_len()) + " samples, got " +
                              std::to_string(samples.size()));
    }
    if (opts.timing_backoff > cp) throw InvalidArgument("demodulate_frame: timing backoff exceeds the prefix");
    if (ts.rows() != plan.n_ts || ts.cols() != n_data) throw InvalidArgument("demodulate_frame: training mismatch");
    const std::size_t n_payload = plan.payload_symbols();
    if (opts.mode == EqualizerMode::KnownPayload &&
        (known_payload == nullptr || known_payload->rows() != n_payload || known_payload->cols() != n_data)) {
        throw InvalidArgument("demodulate_frame: known payload required for this mode");
    }

    // FFT of every symbol.
    SymbolMatrix y(plan.frame_symbols, n_data);
    std::vector<cplx> bins(n / 2 - 1);
    for (std::size_t s = 0; s < plan.frame_symbols; ++s) {
        const std::size_t start = s * (n + cp) + cp - opts.timing_backoff;
        forward_fft_real_into(samples.subspan(start, n), bins);
        std::copy(bins.begin(), bins.begin() + static_cast<std::ptrdiff_t>(n_data), y.row(s).begin());
    }

    SymbolMatrix rx_ts(plan.n_ts, n_data);
    for (std::size_t r = 0; r < plan.n_ts; ++r) std::copy(y.row(r).begin(), y.row(r).end(), rx_ts.row(r).begin());

    DemodResult res;
    res.estimate.update_gain = opts.update_gain;
    if (opts.mode == EqualizerMode::KnownPayload) {
        res.estimate.h.assign(n_data, cplx{});
        for (std::size_t k = 0; k < n_data; ++k) {
            cplx num{};
            double den = 0.0;
            for (std::size_t r = 1; r < plan.n_ts; ++r) {
                num += y(r, k) * std::conj(ts(r, k));
                den += std::norm(ts(r, k));
            }
            for (std::size_t s = 0; s < n_payload; ++s) {
                num += y(plan.n_ts + s, k) * std::conj((*known_payload)(s, k));
                den += std::norm((*known_payload)(s, k));
            }
            res.estimate.h[k] = den > 0 ? num / den : cplx{};
        }
    } else {
        res.estimate.h = training_estimate(rx_ts, ts);
    }

    auto& h = res.estimate.h;
    const double mu = opts.update_gain;
    res.equalized = SymbolMatrix(n_payload, n_data);
    res.bits.reserve(plan.payload_bits());
    std::vector<double> amp(n_data);
    for (std::size_t k = 0; k < n_data; ++k) amp[k] = std::sqrt(plan.power[k]);

    std::vector<std::uint8_t> label_bits(kMaxOrderBits);
    for (std::size_t s = 0; s < n_payload; ++s) {
        const auto row = y.row(plan.n_ts + s);
        for (std::size_t k = 0; k < n_data; ++k) {
            const cplx z = h[k] != cplx{} ? row[k] / h[k] : cplx{};
            res.equalized(s, k) = z;
            const int b = plan.bits[k];
            if (b == 0) continue;
            const auto& c = Constellation::get(b);
            const std::uint32_t label = c.decide(amp[k] > 0 ? z / amp[k] : cplx{});
            label_to_bits(label, b, label_bits);
            res.bits.insert(res.bits.end(), label_bits.begin(), label_bits.begin() + b);
            if (opts.mode == EqualizerMode::DecisionDirected) {
                const cplx decided = amp[k] * c.map(label);
                if (decided != cplx{}) h[k] = (1.0 - mu) * h[k] + mu * row[k] / decided;
            }
        }
    }
    return res;
}

BerCount count_ber(std::span<const std::uint8_t> tx, std::span<const std::uint8_t> rx, double fec_threshold) {
    if (tx.size() != rx.size()) {
        throw InvalidArgument("count_ber: length mismatch (" + std::to_string(tx.size()) + " vs " +
                              std::to_string(rx.size()) + ")");
    }
    BerCount c;
    c.bits_counted = tx.size();
    for (std::size_t i = 0; i < tx.size(); ++i) c.bit_errors += (tx[i] ^ rx[i]) & 1u;
    c.ber = c.bits_counted > 0 ? static_cast<double>(c.bit_errors) / static_cast<double>(c.bits_counted) : 0.0;
    c.below_fec = c.ber <= fec_threshold;
    return c;
}

}  // namespace dmt
