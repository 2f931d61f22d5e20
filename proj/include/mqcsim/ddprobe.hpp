#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mqcsim/spin_system.hpp"

namespace mqcsim {

// Which transverse component the acquisition windows record.
enum class DdDetection { Ix, Magnitude };

std::string to_string(DdDetection detection);
DdDetection dd_detection_from_string(const std::string& name);

struct DdConfig {
    double tau = 10e-6;           // pulse spacing (s)
    double theta = 0.7853981633974483;  // pulse angle (rad)
    int n_cycles = 2048;
    int transient_skip = 8;       // cycles dropped before fitting
    double noise_sigma = 0.0;     // per-scan noise per sample
    int n_scans = 1;
    std::uint64_t rng_seed = 0;
    DdDetection detection = DdDetection::Ix;

    // Throws InvalidArgument.
    void validate() const;
    // sigma / sqrt(N_S), or 1 / sqrt(N_S) for a noiseless run so that SNR
    // comparisons stay defined.
    double effective_sigma() const;
};

// One sample per Floquet cycle at the window centers t_j = (j + 1/2) tau.
struct DdSeries {
    std::vector<double> t;
    std::vector<double> signal;  // with noise
    std::vector<double> clean;   // noiseless
    double sigma_eff = 1.0;
};

DdSeries run_dd(const SpinSystem& system, const DdConfig& config, const Limits& limits = {});

// A_f exp(-t/T_f) + A_s exp(-t/T_s).
struct DecayFit {
    double a_fast = 0.0;
    double t_fast = 0.0;
    double a_slow = 0.0;
    double t_slow = 0.0;
    double residual_rms = 0.0;
    std::size_t first_index = 0;
    std::size_t last_index = 0;
    bool single_exponential = false;

    double total_amplitude() const { return a_fast + a_slow; }
    double operator()(double t) const;
};

struct FitOptions {
    // Relative rms residual (to the rms of the data) above which the fit fails.
    double max_relative_residual = 0.5;
    // Decay times closer than this fraction collapse to one exponential.
    double collapse_tolerance = 0.05;
};

DecayFit fit_biexponential(const std::vector<double>& t, const std::vector<double>& y, std::size_t skip,
                           const FitOptions& options = {});
DecayFit fit_biexponential(const DdSeries& series, std::size_t transient_skip, const FitOptions& options = {});

// SNR(N) = sum_{j<N} |s_j| / (sigma_eff sqrt(N)) for N = 1..size, using the
// noiseless signal.
std::vector<double> cumulative_snr(const std::vector<double>& signal, double sigma_eff);

struct SnrOptimum {
    int n_star = 0;   // number of cycles
    double snr = 0.0;
};
SnrOptimum optimal_cycles(const DdSeries& series);

// SNR measured from a noisy series alone: signal from the fitted decay, noise
// from the fit residual, both over the first n samples (all if n = 0).
double measured_snr(const DdSeries& series, const DecayFit& fit, std::size_t n = 0);

// Scan count ratio N_low / N_high at which the low-retention series reaches
// the cumulative SNR of the high-retention one over the same window.
double scan_ratio_for_equal_snr(const std::vector<double>& high, const std::vector<double>& low, std::size_t n);

struct SweepCell {
    double tau = 0.0;
    double theta = 0.0;
    std::optional<DecayFit> fit;
    double total_amplitude = 0.0;
    int n_star = 0;
    double snr = 0.0;
    std::string status = "ok";  // ok, fit_failure or error
    std::string message;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::vector<double> tau_grid;
    std::vector<double> theta_grid;
    std::vector<SweepCell> cells;  // theta fastest

    const SweepCell& at(std::size_t i_tau, std::size_t i_theta) const;
};

// Seed of cell `index` derived from the base seed.
std::uint64_t cell_seed(std::uint64_t base, std::size_t index);

std::vector<double> default_theta_grid();
std::vector<double> default_tau_grid();

// Runs and fits every (tau, theta) cell of `base`. Failing cells keep their
// error message in `status`; the sweep continues. `threads` = 0 uses the
// hardware concurrency.
SweepResult sweep(const SpinSystem& system, const std::vector<double>& tau_grid,
                  const std::vector<double>& theta_grid, const DdConfig& base, const FitOptions& fit = {},
                  unsigned threads = 0, const Limits& limits = {});

// One cell exactly as the sweep computes it.
SweepCell evaluate_cell(const SpinSystem& system, const DdConfig& config, const FitOptions& fit = {},
                        const Limits& limits = {});

// Fit and SNR optimum of an already simulated series.
SweepCell summarize_cell(const DdSeries& series, const DdConfig& config, const FitOptions& fit = {});

}  // namespace mqcsim
