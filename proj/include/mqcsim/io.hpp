#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqcsim/ddprobe.hpp"
#include "mqcsim/error.hpp"
#include "mqcsim/inversion.hpp"
#include "mqcsim/mqc.hpp"

namespace mqcsim {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// Malformed data files: wrong header, bad numbers, wrong schema_version.
class SchemaError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class Format { Csv, Json };
std::string to_string(Format format);
Format format_from_string(const std::string& name);

std::string to_string(DqBlockLayout layout);
DqBlockLayout layout_from_string(const std::string& name);

struct MqcSection {
    int n_max = 4;
    double tau_dq = 60e-6;
    int n_phases = 16;
    MqcMode mode = MqcMode::IdealHamiltonian;
    double mismatch = 0.0;
    double filter_delay = 0.0;
    DqBlockOptions block;
    int max_pulses = 1 << 20;
    // -Tr{[Iz, Iz(t)]^2} by dense commutators alongside the spectral moment;
    // only for n_spins <= this.
    int otoc_direct_max_spins = 8;
};

struct DdSection {
    DdConfig config;  // rng_seed is taken from RunConfig
    FitOptions fit;
};

struct SweepSection {
    std::vector<double> tau_grid = default_tau_grid();
    std::vector<double> theta_grid = default_theta_grid();
    unsigned threads = 0;
};

struct InversionSection {
    std::vector<std::string> inputs;
    double noise_estimate = 0.0;
    AlphaRule rule = AlphaRule::Discrepancy;
    double alpha = 1e-2;
    double s_min = 1.0;
    double s_max = 1e4;
    int n_grid = 64;
    double prominence = 0.02;
    double front_fraction = 0.97;
    double tau_dq = 60e-6;  // t_n = n tau_dq in the analytics
    bool continue_on_error = false;
};

struct GrowthSection {
    std::vector<std::string> inputs;
    double front_exponent = 3.0;
    double width_exponent = 2.0;
};

struct RunConfig {
    std::optional<SpinSystem> system;
    MqcSection mqc;
    DdSection dd;
    SweepSection sweep;
    InversionSection inversion;
    GrowthSection growth;
    std::uint64_t rng_seed = 0;
    std::string output_dir = "out";
    Format format = Format::Csv;
};

// Fully resolved document (every default written out).
nlohmann::json to_json(const RunConfig& config);
// Unknown keys and wrong types throw ConfigError naming the field path.
RunConfig config_from_json(const nlohmann::json& doc);
// Parse errors report line and column.
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json parse_json_file(const std::filesystem::path& path);

nlohmann::json make_manifest(const std::string& command, const RunConfig& config);
RunConfig config_from_manifest(const nlohmann::json& manifest);

// Exclusive lock file inside an output directory, removed on destruction.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

    static constexpr const char* kName = ".mqcsim.lock";

private:
    std::filesystem::path path_;
};

// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double x);

// Writes atomically enough for our purposes: the whole text in one go.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// CSV `n,k,value`. With nonzero_only, rows whose value is exactly zero are skipped.
std::string spectra_to_csv(const std::vector<CoherenceSpectrum>& spectra, bool nonzero_only = false);
std::vector<CoherenceSpectrum> spectra_from_csv(const std::string& text);
nlohmann::json spectra_to_json(const std::vector<CoherenceSpectrum>& spectra, bool nonzero_only = false);
std::vector<CoherenceSpectrum> spectra_from_json(const nlohmann::json& doc);
// Dispatches on extension (.csv / .json).
std::vector<CoherenceSpectrum> read_spectra(const std::filesystem::path& path);

// CSV `n,phi,value` (real part).
std::string phase_signals_to_csv(const std::vector<PhaseSignal>& signals);
std::vector<PhaseSignal> phase_signals_from_csv(const std::string& text);

// CSV `n,value`.
struct NSeries {
    std::vector<int> n;
    std::vector<double> value;
};
std::string nseries_to_csv(const NSeries& series);
NSeries nseries_from_csv(const std::string& text);

// CSV `cycle,t,signal,clean`.
std::string dd_series_to_csv(const DdSeries& series);
DdSeries dd_series_from_csv(const std::string& text);
nlohmann::json to_json(const DdSeries& series);

nlohmann::json to_json(const DecayFit& fit);
DecayFit decay_fit_from_json(const nlohmann::json& doc);

// CSV `tau,theta,a_fast,t_fast,a_slow,t_slow,n_star,snr,status`. Failed
// fits leave the fit columns empty.
std::string sweep_to_csv(const SweepResult& result);
std::vector<SweepCell> sweep_cells_from_csv(const std::string& text);
// Heatmap matrices (rows tau, columns theta) plus per-cell records.
nlohmann::json sweep_to_json(const SweepResult& result);

// CSV `n,s,f`.
std::string distributions_to_csv(const std::vector<ClusterDistribution>& dists);
std::vector<ClusterDistribution> distributions_from_csv(const std::string& text);
nlohmann::json distributions_to_json(const std::vector<ClusterDistribution>& dists);
std::vector<ClusterDistribution> distributions_from_json(const nlohmann::json& doc);

// Per-n record of the inversion analytics.
struct AnalyticsRecord {
    std::string source;  // input file
    int n = 0;
    double t = 0.0;
    std::string status = "ok";
    std::string message;
    double alpha = 0.0;
    double residual_norm = 0.0;
    DistributionAnalytics analytics;
    std::optional<GaussianBaseline> gaussian;
    double spectrum_second_moment = 0.0;
    double mixture_second_moment = 0.0;
    std::vector<std::string> warnings;
};
nlohmann::json analytics_to_json(const std::vector<AnalyticsRecord>& records);
std::vector<AnalyticsRecord> analytics_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const PowerLawFit& fit);

}  // namespace mqcsim
