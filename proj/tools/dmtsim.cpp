// dmtsim: command line front end for the DMT link simulator.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "dmt/error.hpp"
#include "dmt/harness.hpp"

namespace {

using dmt::LinkConfig;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kInfeasible = 3, kUnreachable = 4 };

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

LinkConfig load_config(const Common& c) {
    std::string text;
    if (c.config_path.empty()) {
        text = dmt::config_to_json_text(LinkConfig{});
    } else {
        std::ifstream in(c.config_path);
        if (!in) throw dmt::ConfigError("cannot read config file '" + c.config_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    if (!c.overrides.empty()) text = dmt::apply_overrides(text, c.overrides);
    LinkConfig cfg = dmt::config_from_json_text(text);
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

// "a,b,c" or "start:stop:step" (inclusive).
std::vector<double> parse_values(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double a = 0, b = 0, step = 0;
        char tail = 0;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &a, &b, &step, &tail) != 3 || !(step > 0) || b < a) {
            throw dmt::ConfigError("bad range '" + spec + "', expected start:stop:step");
        }
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
        return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw dmt::ConfigError("bad value '" + item + "' in list '" + spec + "'");
        }
    }
    if (out.empty()) throw dmt::ConfigError("empty value list");
    return out;
}

// Writes to --out or stdout.
template <typename F>
void emit(const Common& c, F&& writer) {
    if (c.out.empty() || c.out == "-") {
        writer(std::cout);
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw dmt::Error("cannot open output '" + c.out + "'");
    writer(f);
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "JSON configuration file");
    app->add_option("--seed", c.seed, "Master seed (overrides the config)");
    app->add_option("--out", c.out, "Output file (default stdout)");
    app->add_option("--set", c.overrides, "Override a config key, e.g. --set fiber.L=40")->take_all();
}

nlohmann::json plan_json(const dmt::Calibration& cal) {
    return {{"bits", cal.plan.bits},
            {"power", cal.plan.power},
            {"fft_len", cal.plan.fft_len},
            {"cp_samples", cal.plan.cp_samples},
            {"n_ts", cal.plan.n_ts},
            {"frame_symbols", cal.plan.frame_symbols},
            {"bits_per_symbol", cal.plan.bits_per_symbol()},
            {"target_bits", cal.target_bits},
            {"margin_db", cal.margin_db}};
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

int run_sweep(const Common& c, const std::string& param, const std::string& values) {
    const LinkConfig cfg = load_config(c);
    const auto v = parse_values(values);
    const auto res = dmt::sweep(cfg, param, v);
    emit(c, [&](std::ostream& os) { dmt::write_sweep_csv(os, res); });
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DMT IM/DD optical link simulator"};
    app.require_subcommand(1);

    Common common;
    std::string values, grid = "20:36:2", dump;
    double ber_target = dmt::kFecThreshold;

    auto* cal = app.add_subcommand("calibrate", "Probe the channel and print the loading plan as JSON");
    add_common(cal, common);

    auto* run = app.add_subcommand("run", "Calibrate and measure BER at one operating point");
    add_common(run, common);
    run->add_option("--dump-waveform", dump, "Write the first frame's drive waveform to STEM.f64/.json");

    struct SweepCmd {
        const char* name;
        const char* param;
        const char* defaults;
        const char* help;
    };
    const SweepCmd sweeps[] = {
        {"sweep-cp", "cp_samples", "0,4,8,16,24,32,40,48,64", "BER versus cyclic prefix length"},
        {"sweep-ts", "n_ts", "1,2,3,5,8,10", "BER versus number of training symbols"},
        {"sweep-detune", "detune_ghz", "0:30:5", "BER versus filter detuning (GHz)"},
        {"sweep-power", "launch_power_dbm", "-4:14:2", "BER versus launch power (dBm)"},
    };
    std::vector<std::pair<CLI::App*, const SweepCmd*>> sweep_apps;
    for (const auto& s : sweeps) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, common);
        sub->add_option("--values", values, std::string("Comma list or start:stop:step (default ") + s.defaults + ")");
        sweep_apps.emplace_back(sub, &s);
    }

    auto* curve = app.add_subcommand("osnr-curve", "BER versus OSNR");
    add_common(curve, common);
    curve->add_option("--osnr-grid", grid, "OSNR grid in dB, list or start:stop:step")->capture_default_str();

    auto* req = app.add_subcommand("required-osnr", "OSNR needed to reach a BER target");
    add_common(req, common);
    req->add_option("--osnr-grid", grid, "OSNR grid in dB, list or start:stop:step")->capture_default_str();
    req->add_option("--target", ber_target, "BER target")->capture_default_str();

    auto* spec = app.add_subcommand("snr-spectrum", "Per-subcarrier SNR from the calibration probe");
    add_common(spec, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (cal->parsed()) {
            const auto cfg = load_config(common);
            const auto c = dmt::calibrate_full(cfg);
            emit(common, [&](std::ostream& os) { os << plan_json(c).dump(2) << '\n'; });
            return kOk;
        }
        if (run->parsed()) {
            const auto cfg = load_config(common);
            const auto c = dmt::calibrate_full(cfg);
            if (!dump.empty()) {
                const dmt::TrainingSymbols ts = dmt::make_training_symbols(c.plan, dmt::Rng(cfg.seed).fork(2));
                dmt::Rng rng = dmt::Rng(cfg.seed).fork(3).fork(0);
                const auto frame = dmt::assemble_frame(rng.bits(c.plan.payload_bits()), c.plan, ts, cfg.fs);
                dmt::WaveformLayout layout{cfg.fft_len, cfg.cp_samples, cfg.n_ts, cfg.frame_symbols};
                dmt::write_waveform(dump, dmt::condition_drive(frame.time_samples, cfg.tx), layout);
            }
            const auto m = dmt::run_link(cfg, c.plan, cfg.frames_per_point);
            nlohmann::json j = {{"ber", num(m.ber)},
                                {"bit_errors", m.bit_errors},
                                {"bits_counted", m.bits_counted},
                                {"frames", m.frames},
                                {"frame_cap", m.frame_cap},
                                {"below_fec", m.ber <= cfg.fec_threshold},
                                {"measured_osnr_db", num(m.measured_osnr_db)},
                                {"margin_db", c.margin_db},
                                {"bits_per_symbol", c.plan.bits_per_symbol()},
                                {"seed", cfg.seed},
                                {"config_fingerprint", dmt::config_fingerprint(cfg)}};
            emit(common, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
            return kOk;
        }
        for (const auto& [sub, s] : sweep_apps) {
            if (sub->parsed()) return run_sweep(common, s->param, values.empty() ? s->defaults : values);
        }
        if (curve->parsed()) {
            const auto cfg = load_config(common);
            const auto res = dmt::sweep(cfg, "target_osnr_db", parse_values(grid));
            emit(common, [&](std::ostream& os) { dmt::write_osnr_curve_csv(os, cfg, res); });
            return kOk;
        }
        if (req->parsed()) {
            const auto cfg = load_config(common);
            const auto r = dmt::required_osnr(cfg, ber_target, parse_values(grid));
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& row : r.curve.rows) {
                pts.push_back({{"osnr_db", row.value}, {"ber", num(row.metrics.ber)},
                               {"bits_counted", row.metrics.bits_counted}});
            }
            nlohmann::json j = {{"required_osnr_db", r.osnr_db}, {"ber_target", ber_target},
                                {"saturated", r.saturated},      {"monotone", r.monotone},
                                {"diagnostics", r.diagnostics},  {"seed", cfg.seed},
                                {"curve", pts}};
            emit(common, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
            return kOk;
        }
        if (spec->parsed()) {
            const auto cfg = load_config(common);
            const auto rows = dmt::snr_spectrum(cfg);
            emit(common, [&](std::ostream& os) { dmt::write_snr_spectrum_csv(os, rows); });
            return kOk;
        }
    } catch (const dmt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const dmt::InfeasibleLoading& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const dmt::UnreachableTarget& e) {
        std::cerr << "unreachable: " << e.what() << '\n';
        return kUnreachable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
