#include "mqcsim/evolution.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

namespace {

constexpr cplx kI{0.0, 1.0};

Eigen::VectorXcd phase_factors(const Eigen::VectorXd& eigenvalues, double t) {
    Eigen::VectorXcd w(eigenvalues.size());
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) w(i) = std::polar(1.0, -eigenvalues(i) * t);
    return w;
}

}  // namespace

Eigen::MatrixXcd SpectralBlock::apply_function(const Eigen::VectorXcd& weights, const Eigen::MatrixXcd& x) const {
    if (is_real()) {
        Eigen::MatrixXcd y = real_vectors.transpose() * x;
        y = weights.asDiagonal() * y;
        return real_vectors * y;
    }
    Eigen::MatrixXcd y = complex_vectors.adjoint() * x;
    y = weights.asDiagonal() * y;
    return complex_vectors * y;
}

int spins_for_dimension(Eigen::Index dim) {
    if (dim < 2 || (dim & (dim - 1)) != 0) {
        throw DimensionMismatch(fmt::format("dimension {} is not a power of two", dim));
    }
    return std::countr_zero(static_cast<std::uint64_t>(dim));
}

SpectralDecomposition::SpectralDecomposition(const OperatorKind& kind, const SpinSystem& system)
    : kind_(kind), n_spins_(system.n_spins()), dim_(system.dim()) {
    const bool real = is_real_operator(kind);
    for (auto& sector : invariant_sectors(kind, system)) {
        SpectralBlock block;
        block.indices = std::move(sector);
        const auto n = block.size();
        // Local index of each global basis state in this sector.
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
        std::vector<std::pair<BasisIndex, Eigen::Index>> lookup;
        lookup.reserve(block.indices.size());
        for (Eigen::Index i = 0; i < n; ++i) lookup.emplace_back(block.indices[i], i);
        auto local = [&](BasisIndex b) {
            const auto it = std::lower_bound(lookup.begin(), lookup.end(), std::make_pair(b, Eigen::Index{0}));
            return it->second;
        };
        for (Eigen::Index c = 0; c < n; ++c) {
            visit_column(kind, system, block.indices[c], [&](BasisIndex row, cplx value) { h(local(row), c) += value; });
        }
        if (real) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.real());
            block.eigenvalues = solver.eigenvalues();
            block.real_vectors = solver.eigenvectors();
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
            block.eigenvalues = solver.eigenvalues();
            block.complex_vectors = solver.eigenvectors();
        }
        blocks_.push_back(std::move(block));
    }
}

std::size_t SpectralDecomposition::largest_block() const {
    std::size_t best = 0;
    for (const auto& b : blocks_) best = std::max(best, b.indices.size());
    return best;
}

State SpectralDecomposition::propagate(const State& psi, double t) const {
    if (static_cast<std::size_t>(psi.size()) != dim_) {
        throw DimensionMismatch(fmt::format("state of length {} for a {}-dimensional propagator", psi.size(), dim_));
    }
    State out(psi.size());
    for (const auto& block : blocks_) {
        Eigen::MatrixXcd local(block.size(), 1);
        for (Eigen::Index i = 0; i < block.size(); ++i) local(i, 0) = psi(static_cast<Eigen::Index>(block.indices[i]));
        const Eigen::MatrixXcd result = block.apply_function(phase_factors(block.eigenvalues, t), local);
        for (Eigen::Index i = 0; i < block.size(); ++i) out(static_cast<Eigen::Index>(block.indices[i])) = result(i, 0);
    }
    return out;
}

Density SpectralDecomposition::propagate_columns(const Density& x, double t) const {
    if (static_cast<std::size_t>(x.rows()) != dim_) {
        throw DimensionMismatch(fmt::format("matrix with {} rows for a {}-dimensional propagator", x.rows(), dim_));
    }
    Density out(x.rows(), x.cols());
    for (const auto& block : blocks_) {
        Eigen::MatrixXcd local(block.size(), x.cols());
        for (Eigen::Index i = 0; i < block.size(); ++i) local.row(i) = x.row(static_cast<Eigen::Index>(block.indices[i]));
        const Eigen::MatrixXcd result = block.apply_function(phase_factors(block.eigenvalues, t), local);
        for (Eigen::Index i = 0; i < block.size(); ++i) out.row(static_cast<Eigen::Index>(block.indices[i])) = result.row(i);
    }
    return out;
}

Density SpectralDecomposition::dense_propagator(double t) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Density u = Density::Zero(d, d);
    for (const auto& block : blocks_) {
        const Eigen::MatrixXcd local =
            block.apply_function(phase_factors(block.eigenvalues, t), Eigen::MatrixXcd::Identity(block.size(), block.size()));
        for (Eigen::Index i = 0; i < block.size(); ++i) {
            for (Eigen::Index j = 0; j < block.size(); ++j) {
                u(static_cast<Eigen::Index>(block.indices[i]), static_cast<Eigen::Index>(block.indices[j])) = local(i, j);
            }
        }
    }
    return u;
}

Propagator Propagator::eigen_form(std::shared_ptr<const SpectralDecomposition> spectrum, double t) {
    Propagator p;
    p.form_ = Form::EigenForm;
    p.label_ = to_string(spectrum->kind());
    p.spectrum_ = std::move(spectrum);
    p.time_ = t;
    p.duration_ = t;
    return p;
}

Propagator Propagator::dense(Density matrix, double duration, std::string label) {
    if (matrix.rows() != matrix.cols()) throw DimensionMismatch("propagator matrix must be square");
    spins_for_dimension(matrix.rows());
    Propagator p;
    p.form_ = Form::DenseUnitary;
    p.matrix_ = std::move(matrix);
    p.duration_ = duration;
    p.label_ = std::move(label);
    return p;
}

std::size_t Propagator::dim() const noexcept {
    return form_ == Form::EigenForm ? spectrum_->dim() : static_cast<std::size_t>(matrix_.rows());
}

State Propagator::apply(const State& psi) const {
    if (form_ == Form::EigenForm) return spectrum_->propagate(psi, time_);
    if (psi.size() != matrix_.cols()) throw DimensionMismatch("state length does not match propagator");
    return matrix_ * psi;
}

Density Propagator::apply(const Density& x) const {
    if (form_ == Form::EigenForm) return spectrum_->propagate_columns(x, time_);
    if (x.rows() != matrix_.cols()) throw DimensionMismatch("matrix rows do not match propagator");
    return matrix_ * x;
}

Density Propagator::conjugate(const Density& rho) const {
    const Density a = apply(rho);
    return apply(Density(a.adjoint())).adjoint();
}

Density Propagator::matrix() const {
    return form_ == Form::EigenForm ? spectrum_->dense_propagator(time_) : matrix_;
}

double Propagator::unitarity_error() const {
    const Density u = matrix();
    return (u * u.adjoint() - Density::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

namespace {

struct LanczosStep {
    State result;
    double error;
};

// One Krylov step of length dt from psi (nonzero norm).
LanczosStep lanczos_step(const OperatorKind& kind, const SpinSystem& system, const State& psi, double dt,
                         int max_dim) {
    const double norm = psi.norm();
    const auto dim = psi.size();
    const int m_cap = static_cast<int>(std::min<Eigen::Index>(max_dim, dim));
    std::vector<State> basis;
    basis.reserve(m_cap + 1);
    std::vector<double> alpha;
    std::vector<double> beta;
    basis.push_back(psi / norm);
    State w(dim);
    double beta_last = 0.0;
    bool exact = false;
    for (int j = 0; j < m_cap; ++j) {
        apply_operator(kind, system, std::span<const cplx>(basis[j].data(), dim), std::span<cplx>(w.data(), dim));
        alpha.push_back(basis[j].dot(w).real());
        // Full reorthogonalization; the basis never exceeds max_dim vectors.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& v : basis) w -= v * v.dot(w);
        }
        beta_last = w.norm();
        if (beta_last < 1e-13 * std::max(1.0, std::abs(alpha.back()))) {
            exact = true;
            break;
        }
        if (j + 1 < m_cap) {
            beta.push_back(beta_last);
            basis.push_back(w / beta_last);
        }
    }
    const int m = static_cast<int>(alpha.size());
    if (m == static_cast<int>(dim)) exact = true;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    const Eigen::MatrixXd& q = solver.eigenvectors();
    Eigen::VectorXcd coeff(m);
    for (int i = 0; i < m; ++i) coeff(i) = q(0, i) * std::polar(1.0, -solver.eigenvalues()(i) * dt);
    const Eigen::VectorXcd small = q.cast<cplx>() * coeff;  // exp(-iT dt) e1
    State out = State::Zero(dim);
    for (int i = 0; i < m; ++i) out += small(i) * basis[i];
    out *= norm;
    const double error = exact ? 0.0 : beta_last * std::abs(small(m - 1)) * norm;
    return {std::move(out), error};
}

}  // namespace

State krylov_evolve(const OperatorKind& kind, const SpinSystem& system, const State& psi, double t,
                    const KrylovOptions& options) {
    if (static_cast<std::size_t>(psi.size()) != system.dim()) {
        throw DimensionMismatch(fmt::format("state of length {} for {} spins", psi.size(), system.n_spins()));
    }
    State current = psi;
    const double norm = psi.norm();
    if (norm == 0.0 || t == 0.0) return current;
    const double direction = t > 0.0 ? 1.0 : -1.0;
    double remaining = std::abs(t);
    double step = remaining;
    int substeps = 0;
    double last_error = 0.0;
    while (remaining > 0.0) {
        const double dt = std::min(step, remaining);
        auto attempt = lanczos_step(kind, system, current, direction * dt, options.max_dim);
        last_error = attempt.error;
        if (attempt.error <= options.tolerance * norm) {
            current = std::move(attempt.result);
            remaining -= dt;
            if (remaining < 1e-15 * std::abs(t)) remaining = 0.0;
        } else {
            step = dt * 0.5;
        }
        if (++substeps > options.max_substeps || step < 1e-14 * std::abs(t)) {
            throw NonConvergence(fmt::format("Krylov evolution did not converge after {} substeps; residual {:.3e}",
                                             substeps, last_error),
                                 last_error);
        }
    }
    return current;
}

namespace {

bool use_eigen(const SpinSystem& system, const EvolveOptions& options) {
    switch (options.method) {
        case EvolutionMethod::Eigen: return true;
        case EvolutionMethod::Krylov: return false;
        case EvolutionMethod::Auto: return system.n_spins() <= options.eigen_max_spins;
    }
    return true;
}

}  // namespace

State evolve(const State& psi, const OperatorKind& kind, const SpinSystem& system, double t,
             const EvolveOptions& options) {
    if (static_cast<std::size_t>(psi.size()) != system.dim()) {
        throw DimensionMismatch(fmt::format("state of length {} for {} spins", psi.size(), system.n_spins()));
    }
    if (use_eigen(system, options)) return SpectralDecomposition(kind, system).propagate(psi, t);
    return krylov_evolve(kind, system, psi, t, options.krylov);
}

Density evolve(const Density& rho, const OperatorKind& kind, const SpinSystem& system, double t,
               const EvolveOptions& options) {
    require_dense_budget(system.n_spins(), options.limits);
    if (static_cast<std::size_t>(rho.rows()) != system.dim() || rho.rows() != rho.cols()) {
        throw DimensionMismatch(fmt::format("density of size {}x{} for {} spins", rho.rows(), rho.cols(),
                                            system.n_spins()));
    }
    if (use_eigen(system, options)) {
        auto spectrum = std::make_shared<const SpectralDecomposition>(kind, system);
        return Propagator::eigen_form(spectrum, t).conjugate(rho);
    }
    auto columns = [&](const Density& x) {
        Density out(x.rows(), x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            out.col(c) = krylov_evolve(kind, system, x.col(c), t, options.krylov);
        }
        return out;
    };
    const Density a = columns(rho);
    return columns(a.adjoint()).adjoint();
}

std::string to_string(Axis axis) {
    switch (axis) {
        case Axis::X: return "X";
        case Axis::Y: return "Y";
        case Axis::MinusX: return "-X";
        case Axis::MinusY: return "-Y";
    }
    return "?";
}

Axis axis_from_string(const std::string& name) {
    if (name == "X" || name == "x") return Axis::X;
    if (name == "Y" || name == "y") return Axis::Y;
    if (name == "-X" || name == "-x") return Axis::MinusX;
    if (name == "-Y" || name == "-y") return Axis::MinusY;
    throw InvalidArgument(fmt::format("unknown pulse axis '{}'", name));
}

double axis_azimuth(Axis axis) {
    switch (axis) {
        case Axis::X: return 0.0;
        case Axis::Y: return 0.5 * std::numbers::pi;
        case Axis::MinusX: return std::numbers::pi;
        case Axis::MinusY: return 1.5 * std::numbers::pi;
    }
    return 0.0;
}

void rotate_columns(Eigen::Ref<Eigen::MatrixXcd> x, int n_spins, double azimuth, double angle) {
    if (x.rows() != (Eigen::Index{1} << n_spins)) {
        throw DimensionMismatch(fmt::format("rotation on {} spins needs {} rows, got {}", n_spins,
                                            Eigen::Index{1} << n_spins, x.rows()));
    }
    // Single-spin exp(-i angle/2 (cos a sx + sin a sy)).
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    const cplx up_from_down = -kI * s * std::polar(1.0, -azimuth);
    const cplx down_from_up = -kI * s * std::polar(1.0, azimuth);
    const Eigen::Index dim = x.rows();
    for (Eigen::Index col = 0; col < x.cols(); ++col) {
        cplx* v = x.col(col).data();
        for (int spin = 0; spin < n_spins; ++spin) {
            const Eigen::Index bit = Eigen::Index{1} << spin;
            for (Eigen::Index down = 0; down < dim; ++down) {
                if (down & bit) continue;
                const Eigen::Index up = down | bit;
                const cplx a_up = v[up];
                const cplx a_down = v[down];
                v[up] = c * a_up + up_from_down * a_down;
                v[down] = c * a_down + down_from_up * a_up;
            }
        }
    }
}

State collective_pulse(const State& psi, Axis axis, double angle) {
    State out = psi;
    Eigen::Map<Eigen::MatrixXcd> view(out.data(), out.size(), 1);
    rotate_columns(view, spins_for_dimension(psi.size()), axis_azimuth(axis), angle);
    return out;
}

Density collective_pulse(const Density& rho, Axis axis, double angle) {
    const int n = spins_for_dimension(rho.rows());
    Density a = rho;
    rotate_columns(a, n, axis_azimuth(axis), angle);
    Density b = a.adjoint();
    rotate_columns(b, n, axis_azimuth(axis), angle);
    return b.adjoint();
}

Density rotation_matrix(int n_spins, double azimuth, double angle) {
    const Eigen::Index dim = Eigen::Index{1} << n_spins;
    Density r = Density::Identity(dim, dim);
    rotate_columns(r, n_spins, azimuth, angle);
    return r;
}

}  // namespace mqcsim
