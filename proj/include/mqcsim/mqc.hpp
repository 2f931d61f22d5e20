#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mqcsim/evolution.hpp"
#include "mqcsim/pulse_program.hpp"

namespace mqcsim {

enum class MqcMode { IdealHamiltonian, PulseLevel };

std::string to_string(MqcMode mode);
MqcMode mqc_mode_from_string(const std::string& name);

// Forward n DQ blocks, phase shift phi, backward n blocks, read out Iz.
struct MqcRun {
    SpinSystem system;
    int n_blocks = 0;
    double tau_dq = 60e-6;
    std::vector<double> phases;
    MqcMode mode = MqcMode::IdealHamiltonian;
    // Backward couplings are scaled by (1 + mismatch); 0 is a perfect reversal
    // in ideal mode.
    double mismatch = 0.0;
    // Free Hzz evolution before readout (pulse-level only). Hzz commutes with
    // Iz, so it never changes the signal.
    double filter_delay = 0.0;
    // Delays and layout of the pulse-level block; base_axis is ignored.
    DqBlockOptions block;
    // Upper bound on 16 * n_blocks pulses in pulse-level mode.
    int max_pulses = 1 << 20;
    Limits limits;

    double evolution_time() const { return n_blocks * tau_dq; }
};

// S_{n,phi} = Tr{Iz rho_phi(2 t_n)} / Tr{Iz^2}.
struct PhaseSignal {
    std::vector<double> phi;
    std::vector<cplx> values;
    int n_blocks = 0;
};

// Coherence-order distribution. `weights` sum to 1; `normalization` keeps
// the raw sum relative to Tr{Iz^2}.
struct CoherenceSpectrum {
    std::vector<int> orders;
    std::vector<double> weights;
    int n_blocks = 0;
    double normalization = 1.0;
    // Largest |imaginary part| discarded by the phase transform.
    double imag_residue = 0.0;

    // Weight at order k, zero if k is outside the stored range.
    double weight(int k) const;
    int max_order() const;
};

// M phases 2 pi j / M, j = 0..M-1.
std::vector<double> uniform_phases(int m);

// Block of a block-diagonal density matrix.
struct DensityBlock {
    std::vector<BasisIndex> indices;
    Eigen::MatrixXcd rho;
};

// Shares the forward/backward propagators across many n and phi.
class MqcEngine {
public:
    MqcEngine(const SpinSystem& system, double tau_dq, MqcMode mode, double mismatch = 0.0,
              const DqBlockOptions& block = {}, const Limits& limits = {});

    // rho(t_n) = U_F^n Iz U_F^n^dagger in the engine's block structure.
    std::vector<DensityBlock> forward_density(int n_blocks) const;

    PhaseSignal signal(int n_blocks, const std::vector<double>& phases, double filter_delay = 0.0) const;
    CoherenceSpectrum spectrum(int n_blocks) const;
    double loschmidt_echo(int n_blocks) const;

    // Signal and density spectrum from one forward evolution.
    struct Snapshot {
        PhaseSignal signal;
        CoherenceSpectrum spectrum;
    };
    Snapshot snapshot(int n_blocks, const std::vector<double>& phases, double filter_delay = 0.0) const;

    const SpinSystem& system() const noexcept { return system_; }

private:
    PhaseSignal signal_from(const std::vector<DensityBlock>& forward, int n_blocks, const std::vector<double>& phases,
                            double filter_delay) const;
    CoherenceSpectrum spectrum_from(const std::vector<DensityBlock>& forward, int n_blocks) const;

    SpinSystem system_;
    double tau_dq_;
    MqcMode mode_;
    double mismatch_;
    Limits limits_;
    // Ideal mode.
    std::shared_ptr<const SpectralDecomposition> dq_;
    std::vector<Eigen::MatrixXcd> iz_in_eigenbasis_;
    // Pulse-level mode.
    Density forward_block_;
    Density backward_block_;
    std::shared_ptr<const SpectralDecomposition> zz_;
};

PhaseSignal run_protocol(const MqcRun& run);

// Inverse of S_phi = sum_k exp(-i phi k) S_k on a uniform grid of M phases;
// orders |k| <= M/2 - 1 are returned.
CoherenceSpectrum spectrum_from_phases(const PhaseSignal& signal);

// sum_r |rho_{r,r+k}(t_n)|^2 / Tr{Iz^2} from the forward density alone.
CoherenceSpectrum spectrum_from_density(const SpinSystem& system, int n_blocks, double tau_dq, MqcMode mode,
                                        const DqBlockOptions& block = {}, const Limits& limits = {});

// S_{n,0} for run.n_blocks.
double loschmidt_echo(const MqcRun& run);
// S_{n,0} for n = 0..n_max with the settings of `run`.
std::vector<double> loschmidt_series(const MqcRun& run, int n_max);

// sum_k k^2 S_k of a normalized spectrum.
double otoc_second_moment(const CoherenceSpectrum& spectrum);
// Baum-Pines Gaussian cluster size, 2 * sum_k k^2 S_k.
double gaussian_cluster_size(const CoherenceSpectrum& spectrum);

// -Tr{[Iz, Iz(t)]^2} / Tr{Iz^2} with Iz(t) = exp(iHt) Iz exp(-iHt), H = H_DQ.
double otoc_direct(const SpinSystem& system, double t);
// Same commutator with Iz(t) = U^dagger Iz U for an arbitrary forward propagator.
double otoc_direct(const Density& forward);

// Odd-order mass sum_{k odd} S_k.
double odd_order_mass(const CoherenceSpectrum& spectrum);

}  // namespace mqcsim
