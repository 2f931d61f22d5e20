#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mqcsim/mqc.hpp"

namespace mqcsim {

// n points log-spaced on [s_min, s_max].
std::vector<double> log_size_grid(double s_min = 1.0, double s_max = 1e4, int n = 64);

// Half-spectrum kernel problem S_k = sum_j exp(-k^2 / s_j) f_j + eps_k.
struct KernelProblem {
    std::vector<int> orders;        // even, k >= 0
    std::vector<double> size_grid;  // strictly increasing
    Eigen::MatrixXd kernel;
    Eigen::VectorXd data;
    double noise_estimate = 0.0;    // per-point noise standard deviation; <= 0 if unknown

    // Builds the kernel and validates the invariants (throws InvalidArgument).
    static KernelProblem make(std::vector<int> orders, std::vector<double> data, double noise_estimate,
                              std::vector<double> size_grid = log_size_grid());
};

// Folds a coherence spectrum onto even k >= 0, averaging S_k and S_{-k}
// when both are present; a one-sided spectrum is used as it is.
KernelProblem problem_from_spectrum(const CoherenceSpectrum& spectrum, double noise_estimate,
                                    std::vector<double> size_grid = log_size_grid());

struct ClusterDistribution {
    std::vector<double> size_grid;
    std::vector<double> f;
    double alpha = 0.0;
    double residual_norm = 0.0;     // ||K f - S||
    double roughness = 0.0;         // ||L f||
    int n_blocks = 0;
    std::vector<std::string> warnings;

    double total() const;
};

// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 0);

// (n-2) x n second-difference matrix.
Eigen::MatrixXd second_difference(int n);

// Discrepancy: largest alpha with ||K f - S|| <= eps sqrt(m).
// LCurve: corner of maximum curvature of (log ||K f - S||, log ||L f||).
// RiskEstimate: minimizes ||K f - S||^2 + 2 eps^2 df(alpha) - m eps^2, with
// df the trace of the unconstrained influence matrix.
enum class AlphaRule { Fixed, Discrepancy, LCurve, RiskEstimate };

std::string to_string(AlphaRule rule);
AlphaRule alpha_rule_from_string(const std::string& name);

struct InversionOptions {
    // Rules that need eps fall back to LCurve without a noise estimate.
    AlphaRule rule = AlphaRule::Discrepancy;
    double alpha = 1e-2;                      // used by Fixed
    double alpha_min = 1e-8;
    double alpha_max = 1e3;
    // Condition number of K above which a warning is recorded.
    double condition_warning = 1e12;
};

// Tikhonov-regularized non-negative inversion with curvature penalty.
// Negative data points are fitted as given; data without a positive value
// throws NoFeasibleSolution.
ClusterDistribution invert(const KernelProblem& problem, const InversionOptions& options = {});
ClusterDistribution invert_fixed(const KernelProblem& problem, double alpha);

struct Peak {
    double s = 0.0;       // interpolated location
    double height = 0.0;
    double fwhm = 0.0;    // in s
    double s_left = 0.0;  // half-height crossings
    double s_right = 0.0;
    double population = 0.0;  // mass between the surrounding valleys
    std::size_t index = 0;    // grid index of the maximum
};

struct DistributionAnalytics {
    std::vector<Peak> peaks;  // ascending in s
    double front_97 = 0.0;
    double dispersion = 0.0;  // FWHM of the largest-s peak
    double total_mass = 0.0;
};

struct AnalyzeOptions {
    double prominence = 0.02;  // fraction of the maximum
    double front_fraction = 0.97;
};

// Throws NoPeaks if f is zero or no maximum passes the prominence threshold.
DistributionAnalytics analyze(const ClusterDistribution& distribution, const AnalyzeOptions& options = {});

// s at which the cumulative mass reaches `fraction` of the total, linearly
// interpolated between grid points.
double cumulative_front(const std::vector<double>& size_grid, const std::vector<double>& f, double fraction);

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r2 = 0.0;
    double rms_log_residual = 0.0;
    // Prefactor-only fit at the forced exponent, when requested.
    std::optional<double> forced_exponent;
    double forced_prefactor = 0.0;
    double forced_rms_log_residual = 0.0;
};

// y = c t^p by least squares in log-log. Throws NonPositiveData and
// InvalidArgument (fewer than 4 points).
PowerLawFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y,
                          std::optional<double> forced_exponent = std::nullopt);

struct GaussianBaseline {
    double s_single = 0.0;
    double amplitude = 0.0;
    double residual = 0.0;  // ||A exp(-k^2/s) - S||
    bool degenerate = false;
};

// Single Gaussian S_k = A exp(-k^2/s) on the half spectrum. Data with no
// weight beyond k = 0 has no width and is flagged degenerate.
GaussianBaseline gaussian_fit_baseline(const KernelProblem& problem);
GaussianBaseline gaussian_fit_baseline(const CoherenceSpectrum& spectrum);

// sum_j m_j s_j / 2 with m_j = f_j sum_{k even} exp(-k^2/s_j) the spectral
// mass of component j over all even orders.
double mixture_second_moment(const ClusterDistribution& distribution);
// sum_k k^2 S_k over the folded half spectrum (both signs counted).
double spectrum_second_moment(const KernelProblem& problem);

}  // namespace mqcsim
