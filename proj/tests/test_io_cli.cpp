#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>

#include "mqcsim/cli.hpp"
#include "mqcsim/error.hpp"
#include "mqcsim/io.hpp"

using namespace mqcsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mqcsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Fresh scratch directory, removed at scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / fmt::format("mqcsim_test_{}_{}", ::getpid(), counter++);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump()); }

json two_spin_config(int n_max, double tau) {
    return {{"system", {{"n_spins", 2}, {"geometry", {{"type", "all_to_all"}, {"d0", 1.0}}}}},
            {"mqc", {{"n_max", n_max}, {"tau_dq", tau}, {"n_phases", 8}}}};
}

json dd_config(std::uint64_t seed) {
    return {{"system", {{"n_spins", 6}, {"geometry", {{"type", "chain"}, {"d0", 3e4}}}}},
            {"dd", {{"n_cycles", 256}, {"noise_sigma", 0.02}, {"n_scans", 2}}},
            {"sweep", {{"tau_grid", {1e-5}}, {"theta_grid", {0.7853981633974483}}, {"threads", 1}}},
            {"rng_seed", seed}};
}

RunConfig busy_config() {
    RunConfig c;
    c.system = build_system(Geometry::chain(2.5e3, 3.0), 5);
    c.mqc.n_max = 7;
    c.mqc.tau_dq = 3e-5;
    c.mqc.n_phases = 24;
    c.mqc.mode = MqcMode::PulseLevel;
    c.mqc.mismatch = 0.05;
    c.mqc.filter_delay = 1e-6;
    c.mqc.block.delta1 = 2e-6;
    c.mqc.block.delta2 = 5e-6;
    c.mqc.block.layout = DqBlockLayout::Symmetric;
    c.mqc.max_pulses = 999;
    c.mqc.otoc_direct_max_spins = 6;
    c.dd.config.tau = 7e-6;
    c.dd.config.theta = 1.1;
    c.dd.config.n_cycles = 300;
    c.dd.config.transient_skip = 3;
    c.dd.config.noise_sigma = 0.125;
    c.dd.config.n_scans = 9;
    c.dd.config.detection = DdDetection::Magnitude;
    c.dd.fit.max_relative_residual = 0.4;
    c.dd.fit.collapse_tolerance = 0.1;
    c.sweep.tau_grid = {1e-6, 2e-6};
    c.sweep.theta_grid = {0.3};
    c.sweep.threads = 3;
    c.inversion.inputs = {"a.csv", "b.json"};
    c.inversion.noise_estimate = 1e-3;
    c.inversion.rule = AlphaRule::RiskEstimate;
    c.inversion.alpha = 0.5;
    c.inversion.s_min = 2.0;
    c.inversion.s_max = 5e3;
    c.inversion.n_grid = 40;
    c.inversion.prominence = 0.05;
    c.inversion.front_fraction = 0.9;
    c.inversion.tau_dq = 1e-4;
    c.inversion.continue_on_error = true;
    c.growth.inputs = {"x.json"};
    c.growth.front_exponent = 2.5;
    c.growth.width_exponent = 1.5;
    c.rng_seed = 0xdeadbeefcafef00dULL;
    c.output_dir = "results/run1";
    c.format = Format::Json;
    c.dd.config.rng_seed = c.rng_seed;
    return c;
}

std::vector<std::string> files_in(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace

TEST_CASE("manifest round trip is the identity") {
    const RunConfig c = busy_config();
    const json manifest = make_manifest("sweep", c);
    CHECK(manifest.at("version") == kToolVersion);
    CHECK(manifest.at("schema_version") == kSchemaVersion);
    const RunConfig back = config_from_manifest(json::parse(manifest.dump()));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.system->couplings() == c.system->couplings());

    const RunConfig defaults = config_from_json(json::object());
    CHECK(to_json(config_from_json(to_json(defaults))) == to_json(defaults));
    CHECK_FALSE(defaults.system.has_value());
}

TEST_CASE("config errors name the offending field") {
    auto message = [](const json& doc) {
        try {
            config_from_json(doc);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message({{"mqc", {{"n_max", "four"}}}}).find("mqc.n_max") != std::string::npos);
    CHECK(message({{"mqc", {{"block", {{"delta3", 1.0}}}}}}).find("mqc.block.delta3: unknown key") !=
          std::string::npos);
    CHECK(message({{"dd", {{"detection", "phase"}}}}).find("dd.detection") != std::string::npos);
    CHECK(message({{"dd", {{"n_cycles", 0}}}}).find("dd") != std::string::npos);
    CHECK(message({{"inversion", {{"alpha_rule", "gcv"}}}}).find("inversion.alpha_rule") != std::string::npos);
    CHECK(message({{"format", "xml"}}).find("format") != std::string::npos);
    CHECK(message({{"sytem", {}}}).find("sytem: unknown key") != std::string::npos);
    CHECK(message({{"system", {{"n_spins", 3}}}}).find("system") != std::string::npos);
    CHECK(message({{"sweep", {{"tau_grid", json::array()}}}}).find("sweep.tau_grid") != std::string::npos);

    TempDir dir;
    write_text(dir / "bad.json", "{\n  \"mqc\": {\n    \"n_max\": 2,\n  }\n}\n");
    const auto r = cli({"simulate-mqc", "--config", dir / "bad.json", "--out", dir / "o"});
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.json:4:") != std::string::npos);

    write_json(dir / "typo.json", {{"mqc", {{"nmax", 2}}}});
    const auto t = cli({"simulate-mqc", "--config", dir / "typo.json", "--out", dir / "o"});
    CHECK(t.code == 2);
    CHECK(t.err.find("mqc.nmax: unknown key") != std::string::npos);
}

TEST_CASE("readers invert the writers") {
    SUBCASE("spectra") {
        CoherenceSpectrum a;
        a.n_blocks = 3;
        a.orders = {-2, 0, 2};
        a.weights = {0.125, 0.75, 0.125};
        a.normalization = 1.0;
        CoherenceSpectrum b = a;
        b.n_blocks = 5;
        b.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0 + 1e-17};
        b.normalization = std::accumulate(b.weights.begin(), b.weights.end(), 0.0);
        b.imag_residue = 2e-16;
        const auto csv = spectra_from_csv(spectra_to_csv({a, b}));
        REQUIRE(csv.size() == 2);
        CHECK(csv[1].orders == b.orders);
        CHECK(csv[1].weights == b.weights);
        CHECK(csv[0].n_blocks == 3);
        CHECK(spectra_to_csv(csv) == spectra_to_csv({a, b}));
        const auto js = spectra_from_json(json::parse(spectra_to_json({a, b}).dump()));
        CHECK(js[1].weights == b.weights);
        CHECK(js[1].imag_residue == b.imag_residue);
        CHECK(js[1].normalization == b.normalization);
    }
    SUBCASE("zero rows can be dropped") {
        CoherenceSpectrum a;
        a.orders = {-2, 0, 2};
        a.weights = {0.0, 1.0, 0.0};
        CHECK(spectra_to_csv({a}, true) == "n,k,value\n0,0,1\n");
    }
    SUBCASE("phase signals and n series") {
        PhaseSignal s;
        s.n_blocks = 2;
        s.phi = uniform_phases(4);
        s.values = {1.0, 0.1, -0.3, 1.0 / 7.0};
        const auto back = phase_signals_from_csv(phase_signals_to_csv({s}));
        REQUIRE(back.size() == 1);
        CHECK(back[0].phi == s.phi);
        CHECK(back[0].values == s.values);
        NSeries n{{0, 1, 2}, {1.0, 0.5, std::exp(-1.0)}};
        const auto nb = nseries_from_csv(nseries_to_csv(n));
        CHECK(nb.n == n.n);
        CHECK(nb.value == n.value);
    }
    SUBCASE("dd series and fit") {
        DdSeries s;
        s.t = {1e-5, 2e-5, 3e-5};
        s.signal = {0.9, 0.81, 0.7290000000000001};
        s.clean = {0.9, 0.8, 0.7};
        const auto back = dd_series_from_csv(dd_series_to_csv(s));
        CHECK(back.t == s.t);
        CHECK(back.signal == s.signal);
        CHECK(back.clean == s.clean);
        DecayFit f{0.3, 1e-4, 0.6, 2e-2, 1e-3, 4, 99, false};
        const auto fb = decay_fit_from_json(json::parse(to_json(f).dump()));
        CHECK(fb.a_fast == f.a_fast);
        CHECK(fb.t_slow == f.t_slow);
        CHECK(fb.first_index == 4);
        CHECK(fb.last_index == 99);
    }
    SUBCASE("sweep cells") {
        SweepResult r;
        r.tau_grid = {1e-5};
        r.theta_grid = {0.5, 1.0};
        SweepCell ok;
        ok.tau = 1e-5;
        ok.theta = 0.5;
        ok.fit = DecayFit{0.25, 1e-4, 0.5, 1e-2, 0.0, 0, 0, false};
        ok.total_amplitude = 0.75;
        ok.n_star = 100;
        ok.snr = 12.5;
        SweepCell bad;
        bad.tau = 1e-5;
        bad.theta = 1.0;
        bad.status = "fit_failure";
        bad.n_star = 3;
        bad.snr = 0.1;
        r.cells = {ok, bad};
        const std::string csv = sweep_to_csv(r);
        CHECK(csv.find("1.0000000000000001e-05,1,,,,,3,0.10000000000000001,fit_failure") != std::string::npos);
        const auto back = sweep_cells_from_csv(csv);
        REQUIRE(back.size() == 2);
        CHECK(back[0].fit->a_slow == 0.5);
        CHECK(back[0].total_amplitude == 0.75);
        CHECK(back[0].n_star == 100);
        CHECK_FALSE(back[1].fit.has_value());
        CHECK(back[1].status == "fit_failure");
        const json heat = sweep_to_json(r);
        CHECK(heat.at("t_fast")[0][1].is_null());
        CHECK(heat.at("total_amplitude")[0][0] == 0.75);
    }
    SUBCASE("distributions and analytics") {
        ClusterDistribution d;
        d.n_blocks = 4;
        d.size_grid = log_size_grid(1.0, 100.0, 8);
        d.f = {0, 0.1, 0.5, 1.0 / 3.0, 0.2, 0, 0, 1e-300};
        d.alpha = 0.01;
        d.warnings = {"w"};
        const auto back = distributions_from_csv(distributions_to_csv({d}));
        CHECK(back[0].size_grid == d.size_grid);
        CHECK(back[0].f == d.f);
        const auto jb = distributions_from_json(json::parse(distributions_to_json({d}).dump()));
        CHECK(jb[0].f == d.f);
        CHECK(jb[0].alpha == d.alpha);
        CHECK(jb[0].warnings == d.warnings);

        AnalyticsRecord r;
        r.source = "s.csv";
        r.n = 4;
        r.t = 2.4e-4;
        r.alpha = 0.02;
        r.residual_norm = 1e-3;
        r.analytics = analyze(d);
        r.gaussian = GaussianBaseline{30.0, 0.9, 0.01, false};
        r.spectrum_second_moment = 12.0;
        r.mixture_second_moment = 11.5;
        r.warnings = {"IllConditioned: x"};
        AnalyticsRecord e;
        e.n = 5;
        e.status = "error";
        e.message = "NoFeasibleSolution";
        const json doc = analytics_to_json({r, e});
        const auto rb = analytics_from_json(json::parse(doc.dump()));
        REQUIRE(rb.size() == 2);
        CHECK(analytics_to_json(rb) == doc);
        CHECK(rb[0].analytics.peaks.size() == r.analytics.peaks.size());
        CHECK(rb[0].gaussian->s_single == 30.0);
        CHECK_FALSE(rb[1].gaussian.has_value());
    }
}

TEST_CASE("malformed files raise SchemaError") {
    CHECK_THROWS_AS(spectra_from_csv("n,k,weight\n0,0,1\n"), SchemaError);
    CHECK_THROWS_AS(spectra_from_csv("n,k,value\n0,0,one\n"), SchemaError);
    CHECK_THROWS_AS(spectra_from_csv("n,k,value\n0,0\n"), SchemaError);
    CHECK_THROWS_AS(spectra_from_csv("n,k,value\n0,0,1\n0,0,2\n"), SchemaError);
    CHECK_THROWS_AS(spectra_from_csv(""), SchemaError);
    CHECK_THROWS_AS(distributions_from_csv("n,s,f\n0,2,1\n0,1,1\n"), SchemaError);
    CHECK_THROWS_AS(distributions_from_csv("n,s,f\n0,1,-1\n"), SchemaError);
    CHECK_THROWS_AS(dd_series_from_csv("cycle,t,signal,clean\n1,0,0,0\n"), SchemaError);
    CHECK_THROWS_AS(sweep_cells_from_csv("tau,theta,a_fast,t_fast,a_slow,t_slow,n_star,snr,status\n"
                                         "1,1,,,,,0,0,maybe\n"),
                    SchemaError);
    CHECK_THROWS_AS(spectra_from_json(json{{"schema_version", 99}, {"kind", "spectra"}, {"spectra", json::array()}}),
                    SchemaError);
    CHECK_THROWS_AS(spectra_from_json(json{{"schema_version", 1}, {"kind", "sweep"}}), SchemaError);
    CHECK_THROWS_AS(analytics_from_json(json{{"schema_version", 1}, {"kind", "analytics"}, {"records", {{{"n", 1}}}}}),
                    SchemaError);
    CHECK_THROWS_AS(config_from_manifest(json{{"schema_version", 2}, {"config", json::object()}}), SchemaError);
    // Windows line endings and blank lines are tolerated.
    CHECK(spectra_from_csv("n,k,value\r\n\r\n3,0,0.5\r\n3,2,0.25\r\n")[0].weights.size() == 2);
}

TEST_CASE("simulate-mqc with n_max = 0 writes a single spectrum row") {
    TempDir dir;
    write_json(dir / "c.json", two_spin_config(0, 1.0));
    const auto r = cli({"simulate-mqc", "--config", dir / "c.json", "--out", dir / "o"});
    REQUIRE(r.code == 0);
    CHECK(read_text(dir.path / "o" / "spectrum.csv") == "n,k,value\n0,0,1\n");
    CHECK(files_in(dir.path / "o") == std::vector<std::string>{"loschmidt.csv", "manifest.json", "otoc.csv",
                                                                  "otoc_direct.csv", "phase_signal.csv",
                                                                  "spectrum.csv", "spectrum_phase.csv"});
}

TEST_CASE("simulate-mqc on two spins matches the closed forms") {
    TempDir dir;
    const double tau = 0.35;
    write_json(dir / "c.json", two_spin_config(4, tau));
    REQUIRE(cli({"simulate-mqc", "--config", dir / "c.json", "--out", dir / "o"}).code == 0);
    const fs::path o = dir.path / "o";

    double worst = 0.0;
    for (const auto& s : phase_signals_from_csv(read_text(o / "phase_signal.csv"))) {
        const double dt = s.n_blocks * tau;
        for (std::size_t j = 0; j < s.phi.size(); ++j) {
            const double expect = std::pow(std::cos(dt), 2) + std::pow(std::sin(dt), 2) * std::cos(2 * s.phi[j]);
            worst = std::max(worst, std::abs(s.values[j].real() - expect));
        }
    }
    for (const char* name : {"spectrum.csv", "spectrum_phase.csv"}) {
        const auto spectra = spectra_from_csv(read_text(o / name));
        REQUIRE(spectra.size() == 5);
        for (const auto& s : spectra) {
            const double dt = s.n_blocks * tau;
            worst = std::max(worst, std::abs(s.weight(0) - std::pow(std::cos(dt), 2)));
            worst = std::max(worst, std::abs(s.weight(2) - 0.5 * std::pow(std::sin(dt), 2)));
            worst = std::max(worst, std::abs(s.weight(-2) - 0.5 * std::pow(std::sin(dt), 2)));
        }
    }
    const auto echo = nseries_from_csv(read_text(o / "loschmidt.csv"));
    for (double v : echo.value) worst = std::max(worst, std::abs(v - 1.0));
    for (const char* name : {"otoc.csv", "otoc_direct.csv"}) {
        const auto otoc = nseries_from_csv(read_text(o / name));
        for (std::size_t i = 0; i < otoc.n.size(); ++i)
            worst = std::max(worst, std::abs(otoc.value[i] - 4.0 * std::pow(std::sin(otoc.n[i] * tau), 2)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("reruns are byte-identical and replay from the manifest") {
    TempDir dir;
    json cfg = two_spin_config(3, 0.2);
    cfg["system"]["n_spins"] = 4;
    write_json(dir / "c.json", cfg);
    const auto out = dir / "o";
    REQUIRE(cli({"simulate-mqc", "--config", dir / "c.json", "--out", out}).code == 0);
    std::map<std::string, std::string> first;
    for (const auto& name : files_in(out)) first[name] = read_text(fs::path(out) / name);
    CHECK_FALSE(fs::exists(fs::path(out) / OutputLock::kName));

    REQUIRE(cli({"simulate-mqc", "--config", dir / "c.json", "--out", out}).code == 0);
    for (const auto& [name, text] : first) CHECK(read_text(fs::path(out) / name) == text);

    fs::copy_file(fs::path(out) / "manifest.json", dir.path / "m.json");
    REQUIRE(cli({"simulate-mqc", "--config", dir / "m.json"}).code == 0);
    for (const auto& [name, text] : first) CHECK(read_text(fs::path(out) / name) == text);

    REQUIRE(cli({"simulate-mqc", "--config", dir / "c.json", "--out", dir / "j", "--format", "json"}).code == 0);
    const json doc = parse_json_file(dir.path / "j" / "mqc.json");
    CHECK(spectra_to_csv(spectra_from_json(doc.at("spectrum")), true) == first["spectrum.csv"]);
}

TEST_CASE("simulate-dd: seeded noise is reproducible and a 1x1 sweep matches") {
    TempDir dir;
    write_json(dir / "c.json", dd_config(11));
    REQUIRE(cli({"simulate-dd", "--config", dir / "c.json", "--out", dir / "a"}).code == 0);
    REQUIRE(cli({"simulate-dd", "--config", dir / "c.json", "--out", dir / "b"}).code == 0);
    REQUIRE(cli({"simulate-dd", "--config", dir / "c.json", "--out", dir / "c", "--seed", "12"}).code == 0);
    const auto a = read_text(dir.path / "a" / "dd_series.csv");
    CHECK(a == read_text(dir.path / "b" / "dd_series.csv"));
    CHECK(a != read_text(dir.path / "c" / "dd_series.csv"));
    CHECK(config_from_manifest(parse_json_file(dir.path / "c" / "manifest.json")).rng_seed == 12);

    REQUIRE(cli({"sweep", "--config", dir / "c.json", "--out", dir / "s"}).code == 0);
    const json fit = parse_json_file(dir.path / "a" / "dd_fit.json");
    const json sw = parse_json_file(dir.path / "s" / "sweep.json");
    REQUIRE(sw.at("cells").size() == 1);
    const json cell = sw.at("cells")[0];
    CHECK(fit.at("status") == "ok");
    CHECK(cell.at("fit") == fit.at("fit"));
    CHECK(cell.at("seed") == fit.at("seed"));
    CHECK(cell.at("n_star") == fit.at("n_star"));
    CHECK(cell.at("snr") == fit.at("snr"));
    const auto rows = sweep_cells_from_csv(read_text(dir.path / "s" / "sweep.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].fit->t_slow == fit.at("fit").at("t_slow").get<double>());
}

TEST_CASE("default sweep grid contains the 45 degree cell") {
    const RunConfig c = config_from_json(json::object());
    const auto& g = c.sweep.theta_grid;
    CHECK(std::any_of(g.begin(), g.end(), [](double t) { return std::abs(t - M_PI / 4) < 1e-12; }));
    CHECK(to_json(c).at("sweep").at("theta_grid").size() == g.size());
}

TEST_CASE("sweep marks failed cells and keeps going") {
    TempDir dir;
    json cfg = dd_config(3);
    cfg["dd"]["noise_sigma"] = 50.0;
    cfg["sweep"]["theta_grid"] = {0.7853981633974483, 1.5707963267948966};
    write_json(dir / "c.json", cfg);
    const auto r = cli({"sweep", "--config", dir / "c.json", "--out", dir / "s"});
    CHECK(r.code == 0);
    const auto rows = sweep_cells_from_csv(read_text(dir.path / "s" / "sweep.csv"));
    REQUIRE(rows.size() == 2);
    for (const auto& c : rows) {
        CHECK(c.status == "fit_failure");
        CHECK_FALSE(c.fit.has_value());
    }
    const auto dd = cli({"simulate-dd", "--config", dir / "c.json", "--out", dir / "d"});
    CHECK(dd.code == 1);
    CHECK(parse_json_file(dir.path / "d" / "dd_fit.json").at("status") == "fit_failure");
}

TEST_CASE("invert recovers the bimodal fixture from a spectrum file") {
    TempDir dir;
    const double sigma = 0.01;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, sigma);
    std::string csv = "n,k,value\n";
    for (int k = -80; k <= 80; k += 2) {
        const double v = 0.3 * std::exp(-k * k / 20.0) + 0.7 * std::exp(-k * k / 400.0) + g(rng);
        csv += fmt::format("6,{},{}\n", k, format_double(v));
    }
    write_text(dir / "bimodal.csv", csv);
    const auto r = cli({"invert", dir / "bimodal.csv", "--noise", fmt::format("{}", sigma / std::sqrt(2.0)),
                        "--alpha-rule", "risk", "--out", dir / "o"});
    REQUIRE(r.code == 0);
    const auto records = analytics_from_json(parse_json_file(dir.path / "o" / "analytics.json"));
    REQUIRE(records.size() == 1);
    CHECK(records[0].status == "ok");
    CHECK(records[0].t == doctest::Approx(6 * 60e-6));
    const auto& peaks = records[0].analytics.peaks;
    REQUIRE(peaks.size() >= 2);
    auto near = [&](double s) {
        return std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) { return std::abs(p.s / s - 1) < 0.15; });
    };
    CHECK(near(20.0));
    CHECK(near(400.0));
    const auto dists = distributions_from_csv(read_text(dir.path / "o" / "distribution.csv"));
    REQUIRE(dists.size() == 1);
    CHECK(std::all_of(dists[0].f.begin(), dists[0].f.end(), [](double f) { return f >= 0.0; }));
}

TEST_CASE("invert: usage errors and continue-on-error") {
    TempDir dir;
    CHECK(cli({"invert", "--out", dir / "o"}).code == 2);
    CHECK(cli({"invert", dir / "missing.csv", "--out", dir / "o"}).code == 2);
    write_text(dir / "bad.csv", "n,order,value\n0,0,1\n");
    const auto bad = cli({"invert", dir / "bad.csv", "--out", dir / "o"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("expected header") != std::string::npos);
    CHECK(cli({"invert", dir / "bad.csv", "--alpha-rule", "gcv"}).code == 2);

    write_text(dir / "mixed.csv", "n,k,value\n1,0,0.9\n1,2,0.05\n1,4,0.001\n2,0,-0.1\n2,2,-0.2\n");
    const auto strict = cli({"invert", dir / "mixed.csv", "--out", dir / "s"});
    CHECK(strict.code == 1);
    CHECK(strict.err.find("n = 2") != std::string::npos);
    const auto lenient = cli({"invert", dir / "mixed.csv", "--out", dir / "l", "--continue-on-error"});
    CHECK(lenient.code == 0);
    const auto records = analytics_from_json(parse_json_file(dir.path / "l" / "analytics.json"));
    REQUIRE(records.size() == 2);
    CHECK(records[0].status != "error");
    CHECK(records[1].status == "error");
    CHECK_FALSE(records[1].message.empty());
}

TEST_CASE("fit-growth recovers a cubic front") {
    TempDir dir;
    std::vector<AnalyticsRecord> records;
    for (int n = 0; n <= 8; ++n) {
        AnalyticsRecord r;
        r.n = n;
        r.t = n * 60e-6;
        r.analytics.front_97 = 5e12 * std::pow(r.t, 3);
        r.analytics.dispersion = 1e8 * std::pow(r.t, 2);
        records.push_back(r);
    }
    write_json(dir / "a.json", analytics_to_json(records));
    const auto r = cli({"fit-growth", dir / "a.json", "--out", dir / "g"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("front exponent 3.000") != std::string::npos);
    const json g = parse_json_file(dir.path / "g" / "growth.json");
    CHECK(g.at("front").at("exponent").get<double>() == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(g.at("front").at("forced_exponent") == 3.0);
    CHECK(g.at("front").at("forced_rms_log_residual").get<double>() < 1e-9);
    CHECK(g.at("width").at("exponent").get<double>() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(g.at("front").at("points") == 8);
    CHECK(cli({"fit-growth", "--out", dir / "h"}).code == 2);
}

TEST_CASE("a locked output directory is refused") {
    TempDir dir;
    write_json(dir / "c.json", two_spin_config(1, 0.1));
    fs::create_directories(dir.path / "o");
    write_text(dir.path / "o" / OutputLock::kName, "");
    const auto r = cli({"simulate-mqc", "--config", dir / "c.json", "--out", dir / "o"});
    CHECK(r.code == 1);
    CHECK(r.err.find("locked") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path / "o" / "spectrum.csv"));
    {
        OutputLock held(dir.path / "p");
        CHECK_THROWS_AS(OutputLock(dir.path / "p"), Error);
    }
    CHECK_NOTHROW(OutputLock(dir.path / "p"));
}

TEST_CASE("command line usage errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"simulate-mqc", "--format", "xml"}).code == 2);
    CHECK(cli({"simulate-mqc", "--seed", "abc"}).code == 2);
    CHECK(cli({"simulate-dd"}).code == 2);
    const auto help = cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("simulate-mqc") != std::string::npos);
    CHECK(cli({"simulate-mqc", "--config", "/nonexistent/c.json"}).code == 2);
}

TEST_CASE("pulse-level simulate-mqc respects the pulse cap") {
    TempDir dir;
    json cfg = two_spin_config(4, 60e-6);
    cfg["system"]["geometry"]["d0"] = 1e3;
    cfg["mqc"]["mode"] = "pulse";
    cfg["mqc"]["max_pulses"] = 32;
    write_json(dir / "c.json", cfg);
    const auto r = cli({"simulate-mqc", "--config", dir / "c.json", "--out", dir / "o"});
    CHECK(r.code == 1);
    CHECK(r.err.find("max_pulses") != std::string::npos);
}
