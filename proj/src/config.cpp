#include "dmt/config.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <set>

#include "dmt/error.hpp"

namespace dmt {

using nlohmann::json;

std::string_view to_string(Sideband s) noexcept { return s == Sideband::VSB ? "VSB" : "DSB"; }

double LinkConfig::effective_detune_ghz() const {
    if (detune_ghz) return *detune_ghz;
    return sideband == Sideband::VSB ? 20.0 : 0.0;
}

void LinkConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (!(fs > 0)) fail("fs must be positive");
    if (!(net_rate >= 0)) fail("net_rate must be >= 0");
    if (!(rate_multiplier > 0)) fail("rate_multiplier must be positive");
    if (!is_power_of_two(fft_len) || fft_len < 16) fail("fft_len must be a power of two >= 16");
    if (frame_symbols < 2) fail("frame_symbols must be >= 2");
    if (n_ts < 1 || n_ts >= frame_symbols) fail("n_ts must be in 1..frame_symbols-1");
    if (!(oversampling >= 1.0)) fail("oversampling must be >= 1");
    if (loading.b_max < 1 || loading.b_max > kMaxOrderBits) fail("loading.b_max must be in 1..8");
    if (loading.gap_db < 0) fail("loading.gap_db must be >= 0");
    if (loading.max_iters < 1) fail("loading.max_iters must be >= 1");
    if (fiber.L < 0 || fiber.alpha_db_per_km < 0 || fiber.gamma < 0 || !(fiber.f0 > 0)) fail("invalid fiber parameters");
    if (!(mux.bw_3db_ghz > 0) || mux.order < 1) fail("invalid mux filter");
    if (!(demux.bw_3db_ghz > 0) || demux.order < 1) fail("invalid demux filter");
    if (noise.target_osnr_db && !std::isfinite(*noise.target_osnr_db)) fail("noise.target_osnr_db must be finite");
    if (noise.rx_electrical_noise < 0) fail("noise.rx_electrical_noise must be >= 0");
    if (!(tx.clip_ratio_db > 0)) fail("tx.clip_ratio_db must be positive (null disables clipping)");
    if (tx.dac_bits && (*tx.dac_bits < 4 || *tx.dac_bits > 12)) fail("tx.dac_bits must be in 4..12");
    if (!(mzm.vpi > 0)) fail("mzm.vpi must be positive");
    if (!(rx.pin.elec_bw_ghz > 0) || rx.pin.bessel_order < 1 || rx.pin.bessel_order > 10) fail("invalid pin filter");
    if (!(rx.dd_gain > 0 && rx.dd_gain <= 1)) fail("rx.dd_gain must be in (0, 1]");
    if (rx.timing_backoff_fraction < 0 || rx.timing_backoff_fraction > 1) fail("rx.timing_backoff_fraction in [0, 1]");
    if (nonlinear && !(step_km > 0)) fail("step_km must be positive");
    if (nonlinear && fiber.L > 0 && step_km > fiber.L) fail("step_km larger than fiber length");
    if (frames_per_point < 1) fail("frames_per_point must be >= 1");
    if (probe_frames < 1) fail("probe_frames must be >= 1");
    if (calibration_passes < 1 || calibration_passes > 5) fail("calibration_passes must be in 1..5");
    if (!(fec_threshold > 0 && fec_threshold < 0.5)) fail("fec_threshold must be in (0, 0.5)");
    if (optical_oversample < 1 || optical_oversample > 8) fail("optical_oversample must be in 1..8");
}

namespace {

// Reads fields out of a JSON object and rejects anything left over.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(where() + " must be an object");
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + qualified(it.key()) + "'");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + qualified(key) + "': " + e.what());
        }
    }

    template <typename T>
    void get_optional(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (it->is_null()) {
            out.reset();
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + qualified(key) + "': " + e.what());
        }
    }

    void get_size(const char* key, std::size_t& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_number_integer() || it->get<long long>() < 0) {
            throw ConfigError("'" + qualified(key) + "' must be a nonnegative integer");
        }
        out = it->get<std::size_t>();
    }

    template <typename F>
    void object(const char* key, F&& f) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        ObjectReader sub(*it, qualified(key));
        f(sub);
        sub.finish();
    }

    bool has(const char* key) const { return j_.contains(key); }
    void mark(const char* key) { seen_.insert(key); }
    const json& raw(const char* key) const { return j_.at(key); }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_filter(ObjectReader& r, FilterParams& f) {
    r.get("bw_3db_ghz", f.bw_3db_ghz);
    r.get("order", f.order);
    r.get("center_offset_ghz", f.center_offset_ghz);
}

json filter_json(const FilterParams& f) {
    return {{"bw_3db_ghz", f.bw_3db_ghz}, {"order", f.order}, {"center_offset_ghz", f.center_offset_ghz}};
}

template <typename T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

LinkConfig config_from_json_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    LinkConfig cfg;
    {
        ObjectReader r(j, "");
        r.get("net_rate", cfg.net_rate);
        r.get("rate_multiplier", cfg.rate_multiplier);
        r.get("fs", cfg.fs);
        r.get_size("fft_len", cfg.fft_len);
        r.get_size("cp_samples", cfg.cp_samples);
        r.get_size("n_ts", cfg.n_ts);
        r.get_size("frame_symbols", cfg.frame_symbols);
        r.get("oversampling", cfg.oversampling);
        if (r.has("sideband")) {
            r.mark("sideband");
            const auto& v = r.raw("sideband");
            if (v == "DSB") {
                cfg.sideband = Sideband::DSB;
            } else if (v == "VSB") {
                cfg.sideband = Sideband::VSB;
            } else {
                throw ConfigError("sideband must be \"DSB\" or \"VSB\"");
            }
        }
        r.get_optional("detune_ghz", cfg.detune_ghz);
        r.object("fiber", [&](ObjectReader& f) {
            f.get("D", cfg.fiber.D);
            f.get("L", cfg.fiber.L);
            f.get("alpha_db_per_km", cfg.fiber.alpha_db_per_km);
            f.get("gamma", cfg.fiber.gamma);
            f.get("f0", cfg.fiber.f0);
        });
        r.object("mux", [&](ObjectReader& f) { read_filter(f, cfg.mux); });
        r.object("demux", [&](ObjectReader& f) { read_filter(f, cfg.demux); });
        r.object("noise", [&](ObjectReader& n) {
            n.get_optional("target_osnr_db", cfg.noise.target_osnr_db);
            n.get("rx_electrical_noise", cfg.noise.rx_electrical_noise);
            n.get_optional("ase_reference_dbm", cfg.noise.ase_reference_dbm);
            n.get("osnr_report_offset_db", cfg.noise.osnr_report_offset_db);
        });
        r.object("tx", [&](ObjectReader& t) {
            std::optional<double> cr = cfg.tx.clip_ratio_db;
            t.get_optional("clip_ratio_db", cr);
            cfg.tx.clip_ratio_db = cr ? *cr : std::numeric_limits<double>::infinity();
            t.get_optional("dac_bits", cfg.tx.dac_bits);
        });
        r.object("mzm", [&](ObjectReader& m) {
            m.get("vpi", cfg.mzm.vpi);
            m.get("mod_index", cfg.mzm.mod_index);
            m.get("bias_phase", cfg.mzm.bias_phase);
        });
        r.object("rx", [&](ObjectReader& x) {
            x.get("elec_bw_ghz", cfg.rx.pin.elec_bw_ghz);
            x.get("bessel_order", cfg.rx.pin.bessel_order);
            x.get("dd_gain", cfg.rx.dd_gain);
            x.get("timing_backoff_fraction", cfg.rx.timing_backoff_fraction);
            x.get("sync_threshold", cfg.rx.sync_threshold);
        });
        r.object("loading", [&](ObjectReader& l) {
            l.get("gap_db", cfg.loading.gap_db);
            l.get("b_max", cfg.loading.b_max);
            l.get("margin_tol_bits", cfg.loading.margin_tol_bits);
            l.get("max_iters", cfg.loading.max_iters);
            l.get("snr_ceiling_db", cfg.loading.snr_ceiling_db);
        });
        r.get("launch_power_dbm", cfg.launch_power_dbm);
        r.get("nonlinear", cfg.nonlinear);
        r.get("step_km", cfg.step_km);
        r.get("seed", cfg.seed);
        r.get_size("frames_per_point", cfg.frames_per_point);
        r.get_size("probe_frames", cfg.probe_frames);
        r.get_size("calibration_passes", cfg.calibration_passes);
        r.get("fec_threshold", cfg.fec_threshold);
        r.get("optical_oversample", cfg.optical_oversample);
        r.finish();
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json_text(const LinkConfig& cfg) {
    json j = {
        {"net_rate", cfg.net_rate},
        {"rate_multiplier", cfg.rate_multiplier},
        {"fs", cfg.fs},
        {"fft_len", cfg.fft_len},
        {"cp_samples", cfg.cp_samples},
        {"n_ts", cfg.n_ts},
        {"frame_symbols", cfg.frame_symbols},
        {"oversampling", cfg.oversampling},
        {"sideband", std::string(to_string(cfg.sideband))},
        {"detune_ghz", opt(cfg.detune_ghz)},
        {"fiber",
         {{"D", cfg.fiber.D},
          {"L", cfg.fiber.L},
          {"alpha_db_per_km", cfg.fiber.alpha_db_per_km},
          {"gamma", cfg.fiber.gamma},
          {"f0", cfg.fiber.f0}}},
        {"mux", filter_json(cfg.mux)},
        {"demux", filter_json(cfg.demux)},
        {"noise",
         {{"target_osnr_db", opt(cfg.noise.target_osnr_db)},
          {"rx_electrical_noise", cfg.noise.rx_electrical_noise},
          {"ase_reference_dbm", opt(cfg.noise.ase_reference_dbm)},
          {"osnr_report_offset_db", cfg.noise.osnr_report_offset_db}}},
        {"tx",
         {{"clip_ratio_db", std::isfinite(cfg.tx.clip_ratio_db) ? json(cfg.tx.clip_ratio_db) : json(nullptr)},
          {"dac_bits", opt(cfg.tx.dac_bits)}}},
        {"mzm", {{"vpi", cfg.mzm.vpi}, {"mod_index", cfg.mzm.mod_index}, {"bias_phase", cfg.mzm.bias_phase}}},
        {"rx",
         {{"elec_bw_ghz", cfg.rx.pin.elec_bw_ghz},
          {"bessel_order", cfg.rx.pin.bessel_order},
          {"dd_gain", cfg.rx.dd_gain},
          {"timing_backoff_fraction", cfg.rx.timing_backoff_fraction},
          {"sync_threshold", cfg.rx.sync_threshold}}},
        {"loading",
         {{"gap_db", cfg.loading.gap_db},
          {"b_max", cfg.loading.b_max},
          {"margin_tol_bits", cfg.loading.margin_tol_bits},
          {"max_iters", cfg.loading.max_iters},
          {"snr_ceiling_db", cfg.loading.snr_ceiling_db}}},
        {"launch_power_dbm", cfg.launch_power_dbm},
        {"nonlinear", cfg.nonlinear},
        {"step_km", cfg.step_km},
        {"seed", cfg.seed},
        {"frames_per_point", cfg.frames_per_point},
        {"probe_frames", cfg.probe_frames},
        {"calibration_passes", cfg.calibration_passes},
        {"fec_threshold", cfg.fec_threshold},
        {"optical_oversample", cfg.optical_oversample},
    };
    return j.dump(2);
}

std::string apply_overrides(std::string_view json_text, const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json_text.empty() ? json::object() : json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: '" + ov + "'");
        const std::string key = ov.substr(0, eq);
        const std::string text = ov.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::exception&) {
            value = text;
        }
        json* node = &j;
        std::size_t pos = 0;
        while (true) {
            const auto dot = key.find('.', pos);
            const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
            if (part.empty()) throw ConfigError("bad override key '" + key + "'");
            if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            if (node->is_null()) *node = json::object();
            pos = dot + 1;
        }
    }
    return j.dump();
}

std::string config_fingerprint(const LinkConfig& cfg) {
    // FNV-1a over the canonical dump
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : config_to_json_text(cfg)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace dmt
