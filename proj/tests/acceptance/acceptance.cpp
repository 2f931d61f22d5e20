// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <fmt/format.h>

#include "mqcsim/cli.hpp"
#include "mqcsim/ddprobe.hpp"
#include "mqcsim/error.hpp"
#include "mqcsim/inversion.hpp"
#include "mqcsim/io.hpp"
#include "mqcsim/mqc.hpp"
#include "oracle.hpp"

using namespace mqcsim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kTau = 60e-6;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

SpinSystem random_system(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return build_system(Geometry::explicit_couplings(oracle::random_couplings(n, 1.0, rng)), n);
}

// Echo signal from dense matrices: forward exp(-i H t), phase shift, backward exp(+i H t).
double dense_signal(const Eigen::MatrixXd& d, double t, double phi) {
    const int n = static_cast<int>(d.rows());
    const oracle::Mat h = oracle::hdq(d);
    const oracle::Mat iz = oracle::total(n, 'z');
    const oracle::Mat rz = oracle::expm(iz, phi);
    const oracle::Mat u = rz * oracle::expm(h, -t) * rz.adjoint() * oracle::expm(h, t);
    return (iz * u * iz * u.adjoint()).trace().real() / (iz * iz).trace().real();
}

Outcome two_spin_analytic() {
    const auto start = Clock::now();
    const auto sys = build_system(Geometry::all_to_all(1.0), 2);
    const double tau = 0.23;
    const MqcEngine engine(sys, tau, MqcMode::IdealHamiltonian);
    const auto phases = uniform_phases(16);
    double formula = 0.0, dense = 0.0;
    for (int n = 0; n <= 12; ++n) {
        const double t = n * tau;
        const double c2 = std::pow(std::cos(t), 2), s2 = std::pow(std::sin(t), 2);
        const auto signal = engine.signal(n, phases);
        for (std::size_t j = 0; j < phases.size(); ++j) {
            const double v = signal.values[j].real();
            formula = std::max(formula, std::abs(v - (c2 + s2 * std::cos(2 * phases[j]))));
            dense = std::max(dense, std::abs(v - dense_signal(sys.couplings(), t, phases[j])));
        }
        for (const auto& spec : {spectrum_from_phases(signal), engine.spectrum(n)}) {
            formula = std::max({formula, std::abs(spec.weight(0) - c2), std::abs(spec.weight(2) - s2 / 2),
                                std::abs(spec.weight(-2) - s2 / 2)});
        }
    }
    const double elapsed = seconds_since(start);
    return {formula < 1e-8 && dense < 1e-8 && elapsed < 1.0,
            fmt::format("max |err| vs formula {:.1e}, vs dense oracle {:.1e}, {:.2f} s", formula, dense, elapsed)};
}

struct FourierStats {
    double elementwise = 0.0;
    double sum_rule = 0.0;
    double odd_mass = 0.0;
    double seconds = 0.0;
};

const FourierStats& fourier_fixtures() {
    static const FourierStats stats = [] {
        FourierStats s;
        const auto start = Clock::now();
        const auto phases = uniform_phases(32);
        for (int n_spins : {6, 8}) {
            const auto sys = build_system(Geometry::all_to_all(0.2 / kTau), n_spins);
            const MqcEngine engine(sys, kTau, MqcMode::IdealHamiltonian);
            for (int n = 1; n <= 4; ++n) {
                const auto signal = engine.signal(n, phases);
                const auto cycled = spectrum_from_phases(signal);
                const auto exact = engine.spectrum(n);
                double total = 0.0;
                for (int k = -n_spins; k <= n_spins; ++k) {
                    const double a = cycled.weight(k) * cycled.normalization;
                    const double b = exact.weight(k) * exact.normalization;
                    s.elementwise = std::max(s.elementwise, std::abs(a - b));
                    total += a;
                }
                s.sum_rule = std::max(s.sum_rule, std::abs(total - signal.values.front().real()));
                s.odd_mass = std::max({s.odd_mass, std::abs(odd_order_mass(cycled)), std::abs(odd_order_mass(exact))});
            }
        }
        s.seconds = seconds_since(start);
        return s;
    }();
    return stats;
}

Outcome fourier_equivalence() {
    const auto& s = fourier_fixtures();
    return {s.elementwise < 1e-8 && s.sum_rule < 1e-9 && s.seconds < 30.0,
            fmt::format("N = 6, 8, n = 1..4, M = 32: max |dS_k| {:.1e}, |sum_k S_k - S_n,0| {:.1e}, {:.2f} s",
                        s.elementwise, s.sum_rule, s.seconds)};
}

Outcome even_orders() {
    const auto& s = fourier_fixtures();
    return {s.odd_mass < 1e-10, fmt::format("max odd-order mass {:.1e}", s.odd_mass)};
}

Outcome otoc_identity() {
    double worst = 0.0;
    // Two spins: 4 sin^2(d t).
    const auto pair = build_system(Geometry::all_to_all(1.0), 2);
    for (double t : {0.1, 0.7, 1.3, 2.9}) worst = std::max(worst, std::abs(otoc_direct(pair, t) - 4 * std::pow(std::sin(t), 2)));
    for (int n_spins : {2, 4, 6, 8}) {
        const auto sys = random_system(n_spins, 40 + n_spins).scaled(1.0 / kTau * 0.3);
        for (int n : {1, 3, 5}) {
            const auto spec = spectrum_from_density(sys, n, kTau, MqcMode::IdealHamiltonian);
            worst = std::max(worst, std::abs(otoc_direct(sys, n * kTau) - otoc_second_moment(spec)));
        }
    }
    return {worst < 1e-8, fmt::format("N = 2 analytic and random N = 2..8: max |diff| {:.1e}", worst)};
}

Outcome aht_zeroth_order() {
    // Couplings rescaled so that max |d| tau_dq = 1 at scale 1.
    std::string detail;
    bool pass = true;
    for (int n_spins : {4, 6}) {
        auto sys = random_system(n_spins, 7 * n_spins);
        sys = sys.scaled(1.0 / (sys.max_coupling() * kTau));
        for (double x : {0.05, 0.02}) {
            const double ratio = aht_error(dq_block(), OperatorKind::hdq(), sys, x / 2) /
                                 aht_error(dq_block(), OperatorKind::hdq(), sys, x);
            pass = pass && std::abs(ratio / 0.25 - 1.0) <= 0.25;
            detail += fmt::format("{}N={} d0*tau={}: {:.4f}", detail.empty() ? "" : ", ", n_spins, x, ratio);
        }
    }
    return {pass, "error ratio on halving: " + detail};
}

Outcome perfect_echo() {
    const auto sys = build_system(Geometry::all_to_all(0.2 / kTau), 8);
    MqcRun run{sys};
    run.tau_dq = kTau;
    run.phases = {0.0};
    double worst = 0.0;
    for (double v : loschmidt_series(run, 12)) worst = std::max(worst, std::abs(v - 1.0));
    run.mismatch = 0.05;
    const auto le = loschmidt_series(run, 6);
    bool decreasing = true;
    for (int n = 2; n <= 6; ++n) decreasing = decreasing && le[n] < le[n - 1];
    decreasing = decreasing && le[1] < 1.0;
    return {worst < 1e-9 && decreasing,
            fmt::format("ideal |LE - 1| max {:.1e} (n = 0..12); eps = 0.05, N = 8: LE(1..6) = {:.4f} {:.4f} {:.4f} "
                        "{:.4f} {:.4f} {:.4f}",
                        worst, le[1], le[2], le[3], le[4], le[5], le[6])};
}

double bimodal(int k) { return 0.3 * std::exp(-k * k / 20.0) + 0.7 * std::exp(-k * k / 400.0); }

struct Trial {
    bool found = false;
    bool nonnegative = false;
    bool residual_ok = false;
    std::size_t n_peaks = 0;
};

Trial bimodal_trial(std::uint64_t seed, AlphaRule rule) {
    const double sigma = 0.01;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    CoherenceSpectrum spec;
    for (int k = -80; k <= 80; ++k) {
        spec.orders.push_back(k);
        spec.weights.push_back(k % 2 != 0 ? 0.0 : bimodal(k) + g(rng));
    }
    const auto problem = problem_from_spectrum(spec, sigma / std::sqrt(2.0));
    InversionOptions options;
    options.rule = rule;
    const auto dist = invert(problem, options);
    Eigen::VectorXd clean(static_cast<Eigen::Index>(problem.orders.size()));
    for (std::size_t i = 0; i < problem.orders.size(); ++i) clean(static_cast<Eigen::Index>(i)) = bimodal(problem.orders[i]);
    Trial t;
    t.nonnegative = std::all_of(dist.f.begin(), dist.f.end(), [](double f) { return f >= 0.0; });
    t.residual_ok = dist.residual_norm <= 1.5 * (problem.data - clean).norm();
    try {
        const auto a = analyze(dist);
        t.n_peaks = a.peaks.size();
        auto near = [&](double s) {
            return std::any_of(a.peaks.begin(), a.peaks.end(), [&](const Peak& p) { return std::abs(p.s / s - 1.0) <= 0.15; });
        };
        t.found = near(20.0) && near(400.0);
    } catch (const NoPeaks&) {
    }
    return t;
}

Outcome inversion_round_trip() {
    const auto start = Clock::now();
    int found = 0, exact_two = 0, nonneg = 0, residual = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = bimodal_trial(seed, AlphaRule::RiskEstimate);
        found += t.found;
        exact_two += t.found && t.n_peaks == 2;
        nonneg += t.nonnegative;
        residual += t.residual_ok;
    }
    const double elapsed = seconds_since(start);
    int disc = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) disc += bimodal_trial(seed, AlphaRule::Discrepancy).found;
    return {found >= 18 && nonneg == 20 && residual == 20 && elapsed < 10.0,
            fmt::format("risk-estimate alpha: both peaks {}/20 ({} with no extra peak), f >= 0 {}/20, residual <= "
                        "1.5x noise {}/20, {:.2f} s; discrepancy alpha for comparison: {}/20",
                        found, exact_two, nonneg, residual, elapsed, disc)};
}

Outcome growth_fitter() {
    double worst_front = 0.0, worst_width = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 0.05);
        std::vector<double> t, front, width;
        for (int n = 1; n <= 12; ++n) {
            t.push_back(n * kTau);
            front.push_back(4e13 * std::pow(n * kTau, 3) * (1.0 + g(rng)));
            width.push_back(2e9 * std::pow(n * kTau, 2) * (1.0 + g(rng)));
        }
        worst_front = std::max(worst_front, std::abs(fit_power_law(t, front, 3.0).exponent - 3.0));
        worst_width = std::max(worst_width, std::abs(fit_power_law(t, width, 2.0).exponent - 2.0));
    }
    return {worst_front <= 0.2 && worst_width <= 0.2,
            fmt::format("20 seeds, 5% noise, n = 1..12: max |dexp| front {:.3f}, width {:.3f}", worst_front,
                        worst_width)};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / fmt::format("mqcsim_acceptance_{}", ::getpid());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int cli(std::vector<std::string> args, std::string& err) {
    args.insert(args.begin(), "mqcsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, e;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, e);
    err = e.str();
    return code;
}

// simulate-mqc -> spectrum.csv -> invert -> analytics.json, through the command line.
Outcome pipeline_for(int n_spins, const TempDir& dir) {
    const int n_max = 14;
    const fs::path base = dir.path / fmt::format("n{}", n_spins);
    fs::create_directories(base);
    const json config = {
        {"system", {{"n_spins", n_spins}, {"geometry", {{"type", "all_to_all"}, {"d0", 0.05 / kTau}}}}},
        {"mqc", {{"n_max", n_max}, {"tau_dq", kTau}, {"n_phases", 32}}},
        {"inversion", {{"alpha_rule", "fixed"}, {"alpha", 1e-3}, {"tau_dq", kTau}}},
    };
    write_text(base / "config.json", config.dump(2));
    std::string err;
    if (cli({"simulate-mqc", "--config", (base / "config.json").string(), "--out", (base / "mqc").string()}, err) != 0)
        return {false, "simulate-mqc failed: " + err};
    if (cli({"invert", (base / "mqc" / "spectrum_phase.csv").string(), "--config", (base / "config.json").string(),
             "--out", (base / "inv").string()},
            err) != 0)
        return {false, "invert failed: " + err};

    const auto spectra = spectra_from_csv(read_text(base / "mqc" / "spectrum_phase.csv"));
    const auto records = analytics_from_json(parse_json_file(base / "inv" / "analytics.json"));
    // Window: up to the first minimum of the zero-quantum intensity; past it
    // the finite system refocuses.
    int window = n_max;
    for (int n = 1; n <= n_max; ++n) {
        if (spectra[n].weight(0) > spectra[n - 1].weight(0)) {
            window = n - 1;
            break;
        }
    }
    bool moment_ok = true, front_ok = true;
    std::string fronts;
    for (int n = 1; n <= window; ++n) {
        moment_ok = moment_ok && otoc_second_moment(spectra[n]) >= otoc_second_moment(spectra[n - 1]);
        front_ok = front_ok && records[n].analytics.front_97 >= records[n - 1].analytics.front_97;
    }
    for (int n = 0; n <= window; ++n) fronts += fmt::format(" {:.2f}", records[n].analytics.front_97);

    // Exponents are reported, not gated.
    std::vector<double> t, m2, f97;
    for (int n = 1; n <= window; ++n) {
        t.push_back(n * kTau);
        m2.push_back(otoc_second_moment(spectra[n]));
        f97.push_back(records[n].analytics.front_97);
    }
    const auto m2_fit = fit_power_law(t, m2);
    const auto front_fit = fit_power_law(t, f97);
    return {moment_ok && front_ok,
            fmt::format("N={}: window n = 0..{}, sum k^2 S_k {}, front_97 {} [{} ]; exponents m2 {:.2f}, front {:.2f}",
                        n_spins, window, moment_ok ? "non-decreasing" : "DECREASES",
                        front_ok ? "non-decreasing" : "DECREASES", fronts, m2_fit.exponent, front_fit.exponent)};
}

Outcome scrambling_pipeline() {
    const auto start = Clock::now();
    TempDir dir;
    Outcome out{true, ""};
    for (int n_spins : {10, 12}) {
        const auto o = pipeline_for(n_spins, dir);
        out.pass = out.pass && o.pass;
        out.detail += (out.detail.empty() ? "" : "; ") + o.detail;
    }
    out.detail += fmt::format("; {:.1f} s", seconds_since(start));
    return out;
}

Outcome dd_fit_and_snr() {
    std::vector<std::string> notes;
    bool pass = true;

    // Noiseless bi-exponential recovery.
    double worst = 0.0;
    for (const auto& [af, tf, as, ts] : std::vector<std::array<double, 4>>{
             {0.7, 1.0, 0.3, 10.0}, {0.4, 2e-4, 0.5, 5e-3}, {0.2, 0.5, 0.75, 40.0}}) {
        std::vector<double> t, y;
        for (int j = 1; j <= 600; ++j) {
            t.push_back(j * ts / 100.0);
            y.push_back(af * std::exp(-t.back() / tf) + as * std::exp(-t.back() / ts));
        }
        const auto fit = fit_biexponential(t, y, 0);
        for (const auto& [got, want] : {std::pair{fit.a_fast, af}, {fit.t_fast, tf}, {fit.a_slow, as}, {fit.t_slow, ts}})
            worst = std::max(worst, std::abs(got / want - 1.0));
    }
    pass = pass && worst < 0.01;
    notes.push_back(fmt::format("noiseless fit max rel err {:.1e}", worst));

    // Measured SNR against N_S on a decaying chain fixture.
    const auto chain = build_system(Geometry::chain(0.3 / 10e-6), 6);
    DdConfig c;
    c.n_cycles = 512;
    c.noise_sigma = 0.2;
    std::vector<double> lx, ly;
    for (int ns : {1, 2, 4, 8, 16, 32, 64}) {
        double mean = 0.0;
        for (int trial = 0; trial < 8; ++trial) {
            c.n_scans = ns;
            c.rng_seed = cell_seed(1000 + ns, static_cast<std::size_t>(trial));
            const auto s = run_dd(chain, c);
            mean += measured_snr(s, fit_biexponential(s, 8)) / 8;
        }
        lx.push_back(std::log(ns));
        ly.push_back(std::log(mean));
    }
    const Eigen::Map<Eigen::VectorXd> x(lx.data(), static_cast<Eigen::Index>(lx.size()));
    const Eigen::Map<Eigen::VectorXd> y(ly.data(), static_cast<Eigen::Index>(ly.size()));
    const double slope =
        ((x.array() - x.mean()) * (y.array() - y.mean())).sum() / (x.array() - x.mean()).square().sum();
    pass = pass && std::abs(slope - 0.5) <= 0.05;
    notes.push_back(fmt::format("SNR slope vs log N_S {:.3f}", slope));

    // 4 x 4 sweep at N = 8, twice with different thread counts.
    const auto sys = build_system(Geometry::all_to_all(0.1 / 10e-6), 8);
    DdConfig base;
    base.noise_sigma = 0.01;
    base.rng_seed = 2024;
    const std::vector<double> taus = {2.5e-6, 5e-6, 10e-6, 20e-6};
    const auto thetas = default_theta_grid();
    const auto start = Clock::now();
    const auto first = sweep(sys, taus, thetas, base, {}, 1);
    const double elapsed = seconds_since(start);
    const auto second = sweep(sys, taus, thetas, base, {}, 4);
    const bool same = sweep_to_json(first) == sweep_to_json(second);
    std::size_t ok = 0;
    for (const auto& cell : first.cells) ok += cell.status == "ok";
    pass = pass && elapsed < 120.0 && same;
    notes.push_back(fmt::format("4x4 sweep at N=8 in {:.1f} s, {}/16 cells fitted, rerun {}", elapsed, ok,
                                same ? "identical" : "DIFFERS"));
    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    return {pass, detail};
}

Outcome scan_equivalence() {
    // Synthetic retention factors on a common decay shape.
    const double sigma = 0.05;
    const int n_cycles = 256;
    std::vector<double> t, shape;
    for (int j = 0; j < n_cycles; ++j) {
        t.push_back((j + 1) * 1e-5);
        shape.push_back(0.6 * std::exp(-t.back() / 2e-4) + 0.4 * std::exp(-t.back() / 2e-3));
    }
    auto mean_snr = [&](double retention, int n_scans, std::uint64_t seed) {
        double sum = 0.0;
        const int trials = 40;
        for (int trial = 0; trial < trials; ++trial) {
            std::mt19937_64 rng(cell_seed(seed, static_cast<std::size_t>(trial)));
            std::normal_distribution<double> g(0.0, sigma / std::sqrt(static_cast<double>(n_scans)));
            DdSeries s;
            s.t = t;
            s.sigma_eff = sigma / std::sqrt(static_cast<double>(n_scans));
            for (double v : shape) {
                s.clean.push_back(retention * v);
                s.signal.push_back(retention * v + g(rng));
            }
            sum += measured_snr(s, fit_biexponential(s, 0));
        }
        return sum / trials;
    };
    bool pass = true;
    std::string detail;
    std::uint64_t seed = 77;
    for (const auto& [high, low] : std::vector<std::pair<double, double>>{{0.9, 0.2}, {0.8, 0.4}, {0.7, 0.35}}) {
        std::vector<double> h, l;
        for (double v : shape) {
            h.push_back(high * v);
            l.push_back(low * v);
        }
        const double predicted = scan_ratio_for_equal_snr(h, l, shape.size());
        const double target = mean_snr(high, 8, seed++);
        const int low_scans = static_cast<int>(std::lround(8 * predicted));
        const double matched = mean_snr(low, low_scans, seed++);
        const double empirical = std::pow(target / mean_snr(low, 8, seed++), 2);
        const bool ok = std::abs(predicted / std::pow(high / low, 2) - 1.0) < 1e-12 &&
                        std::abs(matched / target - 1.0) <= 0.10 && std::abs(empirical / predicted - 1.0) <= 0.10;
        pass = pass && ok;
        detail += fmt::format("{}{}/{}: ratio {:.2f} (MC {:.2f}), SNR at 8 vs {} scans {:.1f} vs {:.1f}",
                              detail.empty() ? "" : "; ", high, low, predicted, empirical, low_scans, target, matched);
    }
    return {pass, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Two-spin analytic MQC", two_spin_analytic},
        {"Fourier/oracle equivalence", fourier_equivalence},
        {"Even-order selection rule", even_orders},
        {"OTOC identity", otoc_identity},
        {"AHT zeroth order", aht_zeroth_order},
        {"Perfect echo / reversal", perfect_echo},
        {"Inversion round trip", inversion_round_trip},
        {"Growth-law fitter", growth_fitter},
        {"Scrambling trend pipeline", scrambling_pipeline},
        {"DD fitting and SNR scaling", dd_fit_and_snr},
        {"Scan-equivalence arithmetic", scan_equivalence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << fmt::format("[{}] {:>2}. {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
    return failed == 0 ? 0 : 1;
}
