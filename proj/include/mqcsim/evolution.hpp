#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mqcsim/operators.hpp"
#include "mqcsim/spin_system.hpp"

namespace mqcsim {

// Eigendecomposition of one invariant sector of a Hermitian operator.
// Real operators keep real eigenvectors, which halves the work in products.
struct SpectralBlock {
    std::vector<BasisIndex> indices;
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd real_vectors;     // populated when the operator is real
    Eigen::MatrixXcd complex_vectors;  // populated otherwise

    bool is_real() const noexcept { return real_vectors.size() > 0; }
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(indices.size()); }

    // Q diag(w) Q^dagger x for a block-local matrix x.
    Eigen::MatrixXcd apply_function(const Eigen::VectorXcd& weights, const Eigen::MatrixXcd& x) const;
};

class SpectralDecomposition {
public:
    SpectralDecomposition(const OperatorKind& kind, const SpinSystem& system);

    const OperatorKind& kind() const noexcept { return kind_; }
    int n_spins() const noexcept { return n_spins_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<SpectralBlock>& blocks() const noexcept { return blocks_; }
    std::size_t largest_block() const;

    // exp(-i H t) applied to a vector, to every column of x, and the dense matrix.
    State propagate(const State& psi, double t) const;
    Density propagate_columns(const Density& x, double t) const;
    Density dense_propagator(double t) const;

private:
    OperatorKind kind_;
    int n_spins_;
    std::size_t dim_;
    std::vector<SpectralBlock> blocks_;
};

class Propagator {
public:
    enum class Form { EigenForm, DenseUnitary };

    static Propagator eigen_form(std::shared_ptr<const SpectralDecomposition> spectrum, double t);
    static Propagator dense(Density matrix, double duration, std::string label);

    Form form() const noexcept { return form_; }
    double duration() const noexcept { return duration_; }
    const std::string& label() const noexcept { return label_; }
    std::size_t dim() const noexcept;

    State apply(const State& psi) const;
    Density apply(const Density& x) const;   // U x
    Density conjugate(const Density& rho) const;  // U rho U^dagger
    Density matrix() const;

    // max_ij |(U U^dagger - 1)_ij|
    double unitarity_error() const;

private:
    Propagator() = default;

    Form form_ = Form::DenseUnitary;
    std::shared_ptr<const SpectralDecomposition> spectrum_;
    double time_ = 0.0;
    Density matrix_;
    double duration_ = 0.0;
    std::string label_;
};

enum class EvolutionMethod { Auto, Eigen, Krylov };

struct KrylovOptions {
    double tolerance = 1e-10;
    int max_dim = 30;
    int max_substeps = 200000;
};

struct EvolveOptions {
    EvolutionMethod method = EvolutionMethod::Auto;
    int eigen_max_spins = 10;  // Auto picks Krylov above this
    KrylovOptions krylov;
    Limits limits;
};

// exp(-i H t) psi by Lanczos with step splitting. Negative t runs backwards.
State krylov_evolve(const OperatorKind& kind, const SpinSystem& system, const State& psi, double t,
                    const KrylovOptions& options = {});

// exp(-iHt) psi.
State evolve(const State& psi, const OperatorKind& kind, const SpinSystem& system, double t,
             const EvolveOptions& options = {});
// exp(-iHt) rho exp(+iHt); negative t is time reversal.
Density evolve(const Density& rho, const OperatorKind& kind, const SpinSystem& system, double t,
               const EvolveOptions& options = {});

// Collective rotation axes in the rotating frame.
enum class Axis { X, Y, MinusX, MinusY };

std::string to_string(Axis axis);
Axis axis_from_string(const std::string& name);
// Azimuth of the axis in the xy plane: X=0, Y=pi/2, -X=pi, -Y=3pi/2.
double axis_azimuth(Axis axis);

// exp(-i angle (cos(a) Ix + sin(a) Iy)) applied spin by spin to each column of x.
void rotate_columns(Eigen::Ref<Eigen::MatrixXcd> x, int n_spins, double azimuth, double angle);

State collective_pulse(const State& psi, Axis axis, double angle);
// R rho R^dagger.
Density collective_pulse(const Density& rho, Axis axis, double angle);
Density rotation_matrix(int n_spins, double azimuth, double angle);

// Number of spins implied by a vector or matrix dimension; throws DimensionMismatch.
int spins_for_dimension(Eigen::Index dim);

}  // namespace mqcsim
