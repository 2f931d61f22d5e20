#include "mqcsim/cli.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mqcsim/error.hpp"
#include "mqcsim/io.hpp"

namespace mqcsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
};

struct InvertFlags {
    std::vector<std::string> inputs;
    std::optional<double> noise;
    std::optional<std::string> rule;
    bool continue_on_error = false;
};

// Accepts a plain config document or a manifest written by an earlier run.
RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) {
        const json doc = parse_json_file(flags.config_path);
        try {
            config = doc.is_object() && doc.contains("tool") && doc.contains("config") ? config_from_manifest(doc)
                                                                                     : config_from_json(doc);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", flags.config_path, e.what()));
        }
    }
    if (flags.seed) config.rng_seed = *flags.seed;
    if (flags.out_dir) config.output_dir = *flags.out_dir;
    if (flags.format) config.format = format_from_string(*flags.format);
    config.dd.config.rng_seed = config.rng_seed;
    return config;
}

const SpinSystem& require_system(const RunConfig& config, const std::string& command) {
    if (!config.system) throw ConfigError(fmt::format("system: required by {}", command));
    return *config.system;
}

// Holds the directory lock for the duration of a command; the manifest is
// written last so that its presence marks a complete run.
class Output {
public:
    Output(const RunConfig& config, std::string command)
        : dir_(config.output_dir), lock_(dir_), config_(config), command_(std::move(command)) {}

    void text(const std::string& name, const std::string& body) { write_text(dir_ / name, body); }
    void json_file(const std::string& name, const json& doc) { write_text(dir_ / name, doc.dump(2) + "\n"); }
    void finish() { json_file("manifest.json", make_manifest(command_, config_)); }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    OutputLock lock_;
    const RunConfig& config_;
    std::string command_;
};

json nseries_json(const NSeries& s) { return {{"n", s.n}, {"value", s.value}}; }

int simulate_mqc(const RunConfig& config, std::ostream& out, std::ostream& err) {
    const auto& system = require_system(config, "simulate-mqc");
    const auto& m = config.mqc;
    if (m.mode == MqcMode::PulseLevel && 16LL * m.n_max > m.max_pulses)
        throw CapExceeded(fmt::format("{} blocks need {} pulses, above mqc.max_pulses = {}", m.n_max, 16LL * m.n_max,
                                      m.max_pulses));
    if (m.n_phases < 2 * system.n_spins() + 2)
        err << fmt::format("warning: n_phases = {} resolves |k| <= {} only; orders up to {} may alias\n", m.n_phases,
                           m.n_phases / 2 - 1, system.n_spins());

    Output files(config, "simulate-mqc");
    const MqcEngine engine(system, m.tau_dq, m.mode, m.mismatch, m.block);
    const auto phases = uniform_phases(m.n_phases);
    const bool direct = m.mode == MqcMode::IdealHamiltonian && system.n_spins() <= m.otoc_direct_max_spins;

    std::vector<PhaseSignal> signals;
    std::vector<CoherenceSpectrum> density, phase;
    NSeries echo, otoc, otoc_dir;
    for (int n = 0; n <= m.n_max; ++n) {
        auto snap = engine.snapshot(n, phases, m.filter_delay);
        signals.push_back(std::move(snap.signal));
        phase.push_back(spectrum_from_phases(signals.back()));
        density.push_back(std::move(snap.spectrum));
        // phases[0] is 0, and the Hzz filter commutes with the Iz readout.
        echo.n.push_back(n);
        echo.value.push_back(signals.back().values.front().real());
        otoc.n.push_back(n);
        otoc.value.push_back(otoc_second_moment(density.back()));
        if (direct) {
            otoc_dir.n.push_back(n);
            otoc_dir.value.push_back(otoc_direct(system, n * m.tau_dq));
        }
    }

    if (config.format == Format::Csv) {
        files.text("phase_signal.csv", phase_signals_to_csv(signals));
        files.text("spectrum.csv", spectra_to_csv(density, true));
        files.text("spectrum_phase.csv", spectra_to_csv(phase));
        files.text("loschmidt.csv", nseries_to_csv(echo));
        files.text("otoc.csv", nseries_to_csv(otoc));
        if (direct) files.text("otoc_direct.csv", nseries_to_csv(otoc_dir));
    } else {
        json sig = json::array();
        for (const auto& s : signals) {
            std::vector<double> re;
            for (const auto& v : s.values) re.push_back(v.real());
            sig.push_back({{"n", s.n_blocks}, {"phi", s.phi}, {"value", re}});
        }
        json doc = {{"schema_version", kSchemaVersion},
                    {"kind", "mqc"},
                    {"phase_signals", sig},
                    {"spectrum", spectra_to_json(density, true)},
                    {"spectrum_phase", spectra_to_json(phase)},
                    {"loschmidt", nseries_json(echo)},
                    {"otoc", nseries_json(otoc)}};
        if (direct) doc["otoc_direct"] = nseries_json(otoc_dir);
        files.json_file("mqc.json", doc);
    }
    files.finish();
    out << fmt::format("simulate-mqc: n = 0..{} written to {}\n", m.n_max, files.dir().string());
    return 0;
}

json cell_json(const SweepCell& cell, double sigma_eff) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "dd_fit"},
            {"tau", cell.tau},
            {"theta", cell.theta},
            {"status", cell.status},
            {"message", cell.message},
            {"fit", cell.fit ? to_json(*cell.fit) : json(nullptr)},
            {"total_amplitude", cell.total_amplitude},
            {"n_star", cell.n_star},
            {"snr", cell.snr},
            {"seed", cell.seed},
            {"sigma_eff", sigma_eff}};
}

int simulate_dd(const RunConfig& config, std::ostream& out, std::ostream& err) {
    const auto& system = require_system(config, "simulate-dd");
    Output files(config, "simulate-dd");
    // Seeded exactly like cell 0 of a sweep, so a 1 x 1 sweep reproduces it.
    DdConfig dd = config.dd.config;
    dd.rng_seed = cell_seed(config.rng_seed, 0);
    const DdSeries series = run_dd(system, dd);
    const SweepCell cell = summarize_cell(series, dd, config.dd.fit);

    if (config.format == Format::Csv) {
        files.text("dd_series.csv", dd_series_to_csv(series));
    } else {
        files.json_file("dd_series.json", to_json(series));
    }
    files.json_file("dd_fit.json", cell_json(cell, series.sigma_eff));
    files.finish();
    if (cell.status != "ok") {
        err << fmt::format("simulate-dd: fit failed: {}\n", cell.message);
        return 1;
    }
    out << fmt::format("simulate-dd: A = {:.6g}, T_fast = {:.6g} s, T_slow = {:.6g} s, N* = {}\n",
                       cell.total_amplitude, cell.fit->t_fast, cell.fit->t_slow, cell.n_star);
    return 0;
}

int run_sweep(const RunConfig& config, std::ostream& out, std::ostream&) {
    const auto& system = require_system(config, "sweep");
    Output files(config, "sweep");
    const SweepResult result =
        sweep(system, config.sweep.tau_grid, config.sweep.theta_grid, config.dd.config, config.dd.fit,
              config.sweep.threads);
    if (config.format == Format::Csv) files.text("sweep.csv", sweep_to_csv(result));
    files.json_file("sweep.json", sweep_to_json(result));
    files.finish();
    std::size_t failed = 0;
    for (const auto& c : result.cells) failed += c.status != "ok";
    out << fmt::format("sweep: {} cells, {} failed, written to {}\n", result.cells.size(), failed,
                       files.dir().string());
    return 0;
}

int run_invert(const RunConfig& config, std::ostream& out, std::ostream& err) {
    const auto& v = config.inversion;
    if (v.inputs.empty()) throw ConfigError("invert: no input spectrum files given");
    Output files(config, "invert");
    InversionOptions options;
    options.rule = v.rule;
    options.alpha = v.alpha;
    AnalyzeOptions analyze_options{v.prominence, v.front_fraction};
    const auto grid = log_size_grid(v.s_min, v.s_max, v.n_grid);

    std::vector<ClusterDistribution> dists;
    std::vector<AnalyticsRecord> records;
    std::map<int, std::string> seen;
    std::size_t failed = 0;
    for (const auto& input : v.inputs) {
        for (const auto& spectrum : read_spectra(input)) {
            const int n = spectrum.n_blocks;
            if (auto [it, fresh] = seen.emplace(n, input); !fresh)
                throw ConfigError(fmt::format("{}: n = {} already read from {}", input, n, it->second));
            AnalyticsRecord rec;
            rec.source = input;
            rec.n = n;
            rec.t = n * v.tau_dq;
            try {
                const auto problem = problem_from_spectrum(spectrum, v.noise_estimate, grid);
                auto dist = invert(problem, options);
                dist.n_blocks = n;
                rec.alpha = dist.alpha;
                rec.residual_norm = dist.residual_norm;
                rec.warnings = dist.warnings;
                rec.spectrum_second_moment = spectrum_second_moment(problem);
                rec.mixture_second_moment = mixture_second_moment(dist);
                rec.gaussian = gaussian_fit_baseline(problem);
                try {
                    rec.analytics = analyze(dist, analyze_options);
                } catch (const NoPeaks& e) {
                    // The cumulative front is defined without peaks.
                    rec.status = "no_peaks";
                    rec.message = e.what();
                    rec.analytics.total_mass = dist.total();
                    if (rec.analytics.total_mass > 0.0)
                        rec.analytics.front_97 = cumulative_front(dist.size_grid, dist.f, v.front_fraction);
                }
                dists.push_back(std::move(dist));
            } catch (const Error& e) {
                if (!v.continue_on_error) throw Error(fmt::format("{} (n = {}): {}", input, n, e.what()));
                ++failed;
                rec.status = "error";
                rec.message = e.what();
                err << fmt::format("invert: {} (n = {}): {}\n", input, n, e.what());
            }
            records.push_back(std::move(rec));
        }
    }

    if (config.format == Format::Csv) {
        files.text("distribution.csv", distributions_to_csv(dists));
    } else {
        files.json_file("distribution.json", distributions_to_json(dists));
    }
    files.json_file("analytics.json", analytics_to_json(records));
    files.finish();
    out << fmt::format("invert: {} spectra, {} failed, written to {}\n", records.size(), failed,
                       files.dir().string());
    return 0;
}

json growth_fit(const std::vector<double>& t, const std::vector<double>& y, double forced) {
    if (t.size() < 4) return nullptr;
    json doc = to_json(fit_power_law(t, y, forced));
    doc["points"] = t.size();
    return doc;
}

int run_fit_growth(const RunConfig& config, std::ostream& out, std::ostream&) {
    const auto& g = config.growth;
    if (g.inputs.empty()) throw ConfigError("fit-growth: no analytics files given");
    Output files(config, "fit-growth");
    std::vector<AnalyticsRecord> records;
    for (const auto& input : g.inputs) {
        try {
            for (auto& r : analytics_from_json(parse_json_file(input))) records.push_back(std::move(r));
        } catch (const SchemaError& e) {
            throw SchemaError(fmt::format("{}: {}", input, e.what()));
        }
    }
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.t < b.t; });

    // Only records with positive time and value enter the log-log fits.
    std::vector<double> tf, front, tw, width;
    std::string csv = "n,t,front_97,dispersion\n";
    for (const auto& r : records) {
        if (r.status == "error") continue;
        csv += fmt::format("{},{},{},{}\n", r.n, format_double(r.t), format_double(r.analytics.front_97),
                           format_double(r.analytics.dispersion));
        if (!(r.t > 0.0)) continue;
        if (r.analytics.front_97 > 0.0) {
            tf.push_back(r.t);
            front.push_back(r.analytics.front_97);
        }
        if (r.analytics.dispersion > 0.0) {
            tw.push_back(r.t);
            width.push_back(r.analytics.dispersion);
        }
    }
    if (tf.size() < 4)
        throw InvalidArgument(fmt::format("fit-growth: {} usable front points, need at least 4", tf.size()));
    const json front_fit = growth_fit(tf, front, g.front_exponent);
    const json width_fit = growth_fit(tw, width, g.width_exponent);

    files.json_file("growth.json", {{"schema_version", kSchemaVersion},
                                    {"kind", "growth"},
                                    {"front", front_fit},
                                    {"width", width_fit}});
    if (config.format == Format::Csv) files.text("growth.csv", csv);
    files.finish();
    out << fmt::format("fit-growth: front exponent {:.3f}", front_fit.at("exponent").get<double>());
    if (!width_fit.is_null()) out << fmt::format(", width exponent {:.3f}", width_fit.at("exponent").get<double>());
    out << "\n";
    return 0;
}

void add_common(CLI::App& cmd, CommonFlags& flags) {
    cmd.add_option("--config", flags.config_path, "JSON config or manifest file");
    cmd.add_option("--seed", flags.seed, "RNG seed (overrides rng_seed)");
    cmd.add_option("--out", flags.out_dir, "Output directory (overrides output_dir)");
    cmd.add_option("--format", flags.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiple-quantum coherence, DD probe and cluster-size inversion toolkit", "mqcsim"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1, 1);

    CommonFlags flags;
    InvertFlags inv;
    std::vector<std::string> growth_inputs;

    auto* mqc = app.add_subcommand("simulate-mqc", "Phase-cycled MQC signals, spectra, echo and OTOC");
    auto* dd = app.add_subcommand("simulate-dd", "DD probe decay curve and bi-exponential fit");
    auto* sw = app.add_subcommand("sweep", "DD probe over a (tau, theta) grid");
    auto* invert_cmd = app.add_subcommand("invert", "Cluster-size distributions from coherence spectra");
    auto* growth = app.add_subcommand("fit-growth", "Power-law growth of front and width");
    for (auto* cmd : {mqc, dd, sw, invert_cmd, growth}) add_common(*cmd, flags);
    invert_cmd->add_option("inputs", inv.inputs, "Spectrum files (.csv or .json)");
    invert_cmd->add_option("--noise", inv.noise, "Noise standard deviation per spectrum point");
    invert_cmd->add_option("--alpha-rule", inv.rule, "Regularization rule")
        ->check(CLI::IsMember({"fixed", "discrepancy", "lcurve", "risk"}));
    invert_cmd->add_flag("--continue-on-error", inv.continue_on_error, "Record failures and keep going");
    growth->add_option("inputs", growth_inputs, "Analytics JSON files from invert");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return 2;
    }

    try {
        RunConfig config = resolve_config(flags);
        if (mqc->parsed()) return simulate_mqc(config, out, err);
        if (dd->parsed()) return simulate_dd(config, out, err);
        if (sw->parsed()) return run_sweep(config, out, err);
        if (invert_cmd->parsed()) {
            auto& v = config.inversion;
            if (!inv.inputs.empty()) v.inputs = inv.inputs;
            if (inv.noise) v.noise_estimate = *inv.noise;
            if (inv.rule) v.rule = alpha_rule_from_string(*inv.rule);
            if (inv.continue_on_error) v.continue_on_error = true;
            return run_invert(config, out, err);
        }
        if (!growth_inputs.empty()) config.growth.inputs = growth_inputs;
        return run_fit_growth(config, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mqcsim
