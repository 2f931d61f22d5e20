#include "mqcsim/mqc.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

std::string to_string(MqcMode mode) {
    return mode == MqcMode::IdealHamiltonian ? "ideal" : "pulse";
}

MqcMode mqc_mode_from_string(const std::string& name) {
    if (name == "ideal") return MqcMode::IdealHamiltonian;
    if (name == "pulse") return MqcMode::PulseLevel;
    throw InvalidArgument(fmt::format("unknown MQC mode '{}' (expected 'ideal' or 'pulse')", name));
}

double CoherenceSpectrum::weight(int k) const {
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (orders[i] == k) return weights[i];
    }
    return 0.0;
}

int CoherenceSpectrum::max_order() const {
    int m = 0;
    for (int k : orders) m = std::max(m, std::abs(k));
    return m;
}

std::vector<double> uniform_phases(int m) {
    if (m < 1) throw InvalidArgument("need at least one phase");
    std::vector<double> phi(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) phi[static_cast<std::size_t>(j)] = 2.0 * std::numbers::pi * j / m;
    return phi;
}

namespace {

// Q X Q^dagger and Q^dagger X Q for one spectral block.
Eigen::MatrixXcd to_basis(const SpectralBlock& b, const Eigen::MatrixXcd& x) {
    if (b.is_real()) return b.real_vectors * (x * b.real_vectors.transpose());
    return b.complex_vectors * (x * b.complex_vectors.adjoint());
}

Eigen::MatrixXcd to_eigenbasis(const SpectralBlock& b, const Eigen::MatrixXcd& x) {
    if (b.is_real()) return b.real_vectors.transpose() * (x * b.real_vectors);
    return b.complex_vectors.adjoint() * (x * b.complex_vectors);
}

// exp(-i (l_a - l_b) t) applied elementwise.
void apply_evolution_phases(Eigen::MatrixXcd& x, const Eigen::VectorXd& eigenvalues, double t) {
    Eigen::VectorXcd w(eigenvalues.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::polar(1.0, -eigenvalues(i) * t);
    x = w.asDiagonal() * x * w.conjugate().asDiagonal();
}

Density matrix_power(const Density& m, int n) {
    Density result = Density::Identity(m.rows(), m.cols());
    Density base = m;
    while (n > 0) {
        if (n & 1) result = result * base;
        n >>= 1;
        if (n > 0) base = base * base;
    }
    return result;
}

Eigen::VectorXd magnetizations(const std::vector<BasisIndex>& indices, int n_spins) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) m(static_cast<Eigen::Index>(i)) = magnetization(indices[i], n_spins);
    return m;
}

// rho_rc -> exp(i phi k_rc) rho_rc, i.e. exp(i phi Iz) rho exp(-i phi Iz).
void apply_phase_shift(Eigen::MatrixXcd& rho, const std::vector<BasisIndex>& indices, double phi) {
    const auto n = static_cast<Eigen::Index>(indices.size());
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const int k = coherence_order(indices[r], indices[c]);
            if (k != 0) rho(r, c) *= std::polar(1.0, phi * k);
        }
    }
}

void validate_phases(const std::vector<double>& phases) {
    if (phases.empty()) throw InvalidArgument("phase list is empty");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (!(phases[i] >= 0.0 && phases[i] < 2.0 * std::numbers::pi)) {
            throw InvalidArgument(fmt::format("phase {} = {} outside [0, 2 pi)", i, phases[i]));
        }
        if (i > 0 && !(phases[i] > phases[i - 1])) throw InvalidArgument("phases must be strictly increasing");
    }
}

}  // namespace

MqcEngine::MqcEngine(const SpinSystem& system, double tau_dq, MqcMode mode, double mismatch,
                     const DqBlockOptions& block, const Limits& limits)
    : system_(system), tau_dq_(tau_dq), mode_(mode), mismatch_(mismatch), limits_(limits) {
    if (!(tau_dq > 0.0)) throw InvalidArgument("tau_dq must be positive");
    if (!(1.0 + mismatch > 0.0)) throw InvalidArgument("mismatch must exceed -1");
    if (mode == MqcMode::IdealHamiltonian) {
        dq_ = std::make_shared<const SpectralDecomposition>(OperatorKind::hdq(), system);
        for (const auto& b : dq_->blocks()) {
            const Eigen::VectorXd m = magnetizations(b.indices, system.n_spins());
            iz_in_eigenbasis_.push_back(to_eigenbasis(b, m.cast<cplx>().asDiagonal().toDenseMatrix()));
        }
        return;
    }
    require_dense_budget(system.n_spins(), limits);
    DqBlockOptions fwd = block;
    fwd.base_axis = Axis::X;
    DqBlockOptions bwd = block;
    bwd.base_axis = Axis::Y;
    const auto fwd_program = dq_block(fwd);
    if (std::abs(fwd_program.total_duration() - tau_dq) > 1e-12 * tau_dq) {
        throw InvalidArgument(fmt::format("DQ block lasts {} s but tau_dq is {} s", fwd_program.total_duration(), tau_dq));
    }
    forward_block_ = compile_program(fwd_program, system, limits).matrix();
    backward_block_ = compile_program(dq_block(bwd), system.scaled(1.0 + mismatch), limits).matrix();
    zz_ = std::make_shared<const SpectralDecomposition>(OperatorKind::hzz(), system);
}

std::vector<DensityBlock> MqcEngine::forward_density(int n_blocks) const {
    if (n_blocks < 0) throw InvalidArgument("n_blocks must be non-negative");
    const int n = system_.n_spins();
    std::vector<DensityBlock> out;
    if (mode_ == MqcMode::IdealHamiltonian) {
        const double t = n_blocks * tau_dq_;
        const auto& blocks = dq_->blocks();
        if (n_blocks == 0) {
            // Exactly Iz, without the round trip through the eigenbasis.
            for (const auto& block : blocks) {
                const Eigen::VectorXd m = magnetizations(block.indices, n);
                out.push_back({block.indices, m.asDiagonal().toDenseMatrix().cast<cplx>()});
            }
            return out;
        }
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            Eigen::MatrixXcd x = iz_in_eigenbasis_[i];
            apply_evolution_phases(x, blocks[i].eigenvalues, t);
            out.push_back({blocks[i].indices, to_basis(blocks[i], x)});
        }
        return out;
    }
    std::vector<BasisIndex> all(system_.dim());
    for (BasisIndex b = 0; b < system_.dim(); ++b) all[b] = b;
    const Density f = matrix_power(forward_block_, n_blocks);
    const Eigen::VectorXd m = magnetizations(all, n);
    out.push_back({std::move(all), f * m.asDiagonal() * f.adjoint()});
    return out;
}

PhaseSignal MqcEngine::signal(int n_blocks, const std::vector<double>& phases, double filter_delay) const {
    validate_phases(phases);
    return signal_from(forward_density(n_blocks), n_blocks, phases, filter_delay);
}

CoherenceSpectrum MqcEngine::spectrum(int n_blocks) const {
    return spectrum_from(forward_density(n_blocks), n_blocks);
}

MqcEngine::Snapshot MqcEngine::snapshot(int n_blocks, const std::vector<double>& phases, double filter_delay) const {
    validate_phases(phases);
    const auto forward = forward_density(n_blocks);
    return {signal_from(forward, n_blocks, phases, filter_delay), spectrum_from(forward, n_blocks)};
}

PhaseSignal MqcEngine::signal_from(const std::vector<DensityBlock>& forward, int n_blocks,
                                   const std::vector<double>& phases, double filter_delay) const {
    const int n = system_.n_spins();
    const double norm = collective_norm(n);

    PhaseSignal out;
    out.n_blocks = n_blocks;
    out.phi = phases;
    out.values.assign(phases.size(), cplx{});

    if (mode_ == MqcMode::IdealHamiltonian) {
        // S_phi = sum_k exp(i phi k) Tr{B rho^(k)} with B = V^dagger Iz V the
        // back-evolved readout; V is exp(-i H t) for t = -(1 + mismatch) t_n.
        // With no mismatch B is the forward density itself.
        const double t_back = -(1.0 + mismatch_) * n_blocks * tau_dq_;
        const auto& blocks = dq_->blocks();
        std::vector<cplx> by_order(static_cast<std::size_t>(2 * n + 1), cplx{});
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& rho = forward[i].rho;
            Eigen::MatrixXcd readout;
            if (mismatch_ != 0.0) {
                Eigen::MatrixXcd x = iz_in_eigenbasis_[i];
                apply_evolution_phases(x, blocks[i].eigenvalues, -t_back);
                readout = to_basis(blocks[i], x);
            }
            const Eigen::MatrixXcd& b = mismatch_ != 0.0 ? readout : rho;
            const auto& idx = forward[i].indices;
            const auto size = static_cast<Eigen::Index>(idx.size());
            for (Eigen::Index c = 0; c < size; ++c) {
                for (Eigen::Index r = 0; r < size; ++r) {
                    by_order[static_cast<std::size_t>(coherence_order(idx[r], idx[c]) + n)] += b(c, r) * rho(r, c);
                }
            }
        }
        for (std::size_t p = 0; p < phases.size(); ++p) {
            cplx total{};
            for (int k = -n; k <= n; ++k) total += std::polar(1.0, phases[p] * k) * by_order[static_cast<std::size_t>(k + n)];
            out.values[p] = total / norm;
        }
        return out;
    }

    const Density back = matrix_power(backward_block_, n_blocks);
    const Eigen::VectorXd m = magnetizations(forward[0].indices, n);
    std::optional<Propagator> filter;
    if (filter_delay > 0.0) filter = Propagator::eigen_form(zz_, filter_delay);
    for (std::size_t p = 0; p < phases.size(); ++p) {
        Eigen::MatrixXcd sigma = forward[0].rho;
        apply_phase_shift(sigma, forward[0].indices, phases[p]);
        Density final_rho = back * sigma * back.adjoint();
        if (filter) final_rho = filter->conjugate(final_rho);
        out.values[p] = (m.cast<cplx>().asDiagonal() * final_rho).trace() / norm;
    }
    return out;
}

CoherenceSpectrum MqcEngine::spectrum_from(const std::vector<DensityBlock>& forward, int n_blocks) const {
    const int n = system_.n_spins();
    std::vector<double> raw(static_cast<std::size_t>(2 * n + 1), 0.0);
    for (const auto& block : forward) {
        const auto size = static_cast<Eigen::Index>(block.indices.size());
        for (Eigen::Index c = 0; c < size; ++c) {
            for (Eigen::Index r = 0; r < size; ++r) {
                raw[static_cast<std::size_t>(coherence_order(block.indices[r], block.indices[c]) + n)] +=
                    std::norm(block.rho(r, c));
            }
        }
    }
    CoherenceSpectrum out;
    out.n_blocks = n_blocks;
    const double norm = collective_norm(n);
    double sum = 0.0;
    for (double& v : raw) {
        v /= norm;
        sum += v;
    }
    out.normalization = sum;
    for (int k = -n; k <= n; ++k) {
        out.orders.push_back(k);
        out.weights.push_back(raw[static_cast<std::size_t>(k + n)] / sum);
    }
    return out;
}

double MqcEngine::loschmidt_echo(int n_blocks) const {
    return signal(n_blocks, {0.0}).values.front().real();
}

namespace {

void check_step_budget(const MqcRun& run) {
    if (run.n_blocks < 0) throw InvalidArgument("n_blocks must be non-negative");
    if (run.mode == MqcMode::PulseLevel && 16LL * run.n_blocks > run.max_pulses) {
        throw CapExceeded(fmt::format("{} DQ blocks need {} pulses, budget is {}", run.n_blocks, 16LL * run.n_blocks,
                                      run.max_pulses));
    }
}

MqcEngine engine_for(const MqcRun& run) {
    return MqcEngine(run.system, run.tau_dq, run.mode, run.mismatch, run.block, run.limits);
}

}  // namespace

PhaseSignal run_protocol(const MqcRun& run) {
    check_step_budget(run);
    return engine_for(run).signal(run.n_blocks, run.phases, run.filter_delay);
}

CoherenceSpectrum spectrum_from_phases(const PhaseSignal& signal) {
    const auto m = static_cast<int>(signal.phi.size());
    if (m < 2 || signal.values.size() != signal.phi.size()) {
        throw NonUniformPhaseGrid("phase transform needs at least two phases with matching values");
    }
    const auto grid = uniform_phases(m);
    for (int j = 0; j < m; ++j) {
        if (std::abs(signal.phi[static_cast<std::size_t>(j)] - grid[static_cast<std::size_t>(j)]) > 1e-9) {
            throw NonUniformPhaseGrid(fmt::format("phase {} is {} but a uniform grid of {} points needs {}", j,
                                                  signal.phi[static_cast<std::size_t>(j)], m, grid[static_cast<std::size_t>(j)]));
        }
    }
    const int k_max = m / 2 - 1;
    CoherenceSpectrum out;
    out.n_blocks = signal.n_blocks;
    std::vector<double> raw;
    double sum = 0.0;
    for (int k = -k_max; k <= k_max; ++k) {
        cplx acc{};
        for (int j = 0; j < m; ++j) {
            acc += signal.values[static_cast<std::size_t>(j)] * std::polar(1.0, grid[static_cast<std::size_t>(j)] * k);
        }
        acc /= static_cast<double>(m);
        out.imag_residue = std::max(out.imag_residue, std::abs(acc.imag()));
        double v = acc.real();
        if (v < 0.0 && v > -1e-12) v = 0.0;
        out.orders.push_back(k);
        raw.push_back(v);
        sum += v;
    }
    if (out.imag_residue > 1e-8) {
        std::cerr << fmt::format("warning: phase transform for n={} left an imaginary residue of {:.3e}\n",
                                 signal.n_blocks, out.imag_residue);
    }
    out.normalization = sum;
    for (double v : raw) out.weights.push_back(sum != 0.0 ? v / sum : v);
    return out;
}

CoherenceSpectrum spectrum_from_density(const SpinSystem& system, int n_blocks, double tau_dq, MqcMode mode,
                                        const DqBlockOptions& block, const Limits& limits) {
    return MqcEngine(system, tau_dq, mode, 0.0, block, limits).spectrum(n_blocks);
}

double loschmidt_echo(const MqcRun& run) {
    check_step_budget(run);
    return engine_for(run).loschmidt_echo(run.n_blocks);
}

std::vector<double> loschmidt_series(const MqcRun& run, int n_max) {
    MqcRun probe = run;
    probe.n_blocks = n_max;
    check_step_budget(probe);
    const auto engine = engine_for(run);
    std::vector<double> out;
    for (int n = 0; n <= n_max; ++n) out.push_back(engine.loschmidt_echo(n));
    return out;
}

double otoc_second_moment(const CoherenceSpectrum& spectrum) {
    double m2 = 0.0;
    for (std::size_t i = 0; i < spectrum.orders.size(); ++i) {
        m2 += double(spectrum.orders[i]) * spectrum.orders[i] * spectrum.weights[i];
    }
    return m2;
}

double gaussian_cluster_size(const CoherenceSpectrum& spectrum) {
    return 2.0 * otoc_second_moment(spectrum);
}

double otoc_direct(const Density& forward) {
    const int n = spins_for_dimension(forward.rows());
    Eigen::VectorXd m(forward.rows());
    for (Eigen::Index b = 0; b < m.size(); ++b) m(b) = magnetization(static_cast<BasisIndex>(b), n);
    const Density iz = m.cast<cplx>().asDiagonal();
    const Density iz_t = forward.adjoint() * iz * forward;
    const Density comm = iz * iz_t - iz_t * iz;
    return -(comm * comm).trace().real() / collective_norm(n);
}

double otoc_direct(const SpinSystem& system, double t) {
    return otoc_direct(SpectralDecomposition(OperatorKind::hdq(), system).dense_propagator(t));
}

double odd_order_mass(const CoherenceSpectrum& spectrum) {
    double odd = 0.0;
    for (std::size_t i = 0; i < spectrum.orders.size(); ++i) {
        if (spectrum.orders[i] % 2 != 0) odd += spectrum.weights[i];
    }
    return odd;
}

}  // namespace mqcsim
