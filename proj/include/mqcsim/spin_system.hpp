#pragma once

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mqcsim {

using cplx = std::complex<double>;
using State = Eigen::VectorXcd;
using Density = Eigen::MatrixXcd;

// Computational basis label. Bit i set means spin i is up (m_i = +1/2).
using BasisIndex = std::uint64_t;

struct Limits {
    int max_spins = 14;
    // Budget for one dense 2^N x 2^N complex object.
    std::size_t memory_budget_bytes = std::size_t{4} << 30;
};

enum class GeometryKind { AllToAll, Chain, Lattice3D, Explicit };

struct Geometry {
    GeometryKind kind = GeometryKind::AllToAll;
    double d0 = 1.0;
    double exponent = 3.0;             // Chain only
    double cutoff = 1.0;               // Lattice3D only
    std::array<int, 3> extent{0, 0, 0};  // Lattice3D; zeros mean "smallest cube holding N"
    Eigen::MatrixXd matrix;            // Explicit only

    static Geometry all_to_all(double d0);
    static Geometry chain(double d0, double exponent = 3.0);
    static Geometry lattice3d(double d0, double cutoff, std::array<int, 3> extent = {0, 0, 0});
    static Geometry explicit_couplings(Eigen::MatrixXd couplings);
};

std::string to_string(GeometryKind kind);
GeometryKind geometry_kind_from_string(const std::string& name);

// N spin-1/2 with symmetric dipolar couplings d_ij in rad/s. Immutable after
// construction.
class SpinSystem {
public:
    SpinSystem(Geometry geometry, Eigen::MatrixXd couplings);

    int n_spins() const noexcept { return static_cast<int>(couplings_.rows()); }
    std::size_t dim() const noexcept { return std::size_t{1} << n_spins(); }
    double coupling(int i, int j) const { return couplings_(i, j); }
    const Eigen::MatrixXd& couplings() const noexcept { return couplings_; }
    const Geometry& geometry() const noexcept { return geometry_; }

    // Largest |d_ij|.
    double max_coupling() const;

    // Same geometry descriptor, couplings multiplied by `factor`.
    SpinSystem scaled(double factor) const;

private:
    Geometry geometry_;
    Eigen::MatrixXd couplings_;
};

SpinSystem build_system(const Geometry& geometry, int n_spins, const Limits& limits = {});

// Throws CapExceeded when a dense 2^N x 2^N complex matrix breaks the budget.
void require_dense_budget(int n_spins, const Limits& limits = {});

inline int popcount(BasisIndex bits) noexcept { return std::popcount(bits); }

// Twice the magnetization, 2*m = 2*popcount - N, always an integer.
inline int twice_magnetization(BasisIndex bits, int n_spins) noexcept {
    return 2 * popcount(bits) - n_spins;
}

inline double magnetization(BasisIndex bits, int n_spins) noexcept {
    return 0.5 * twice_magnetization(bits, n_spins);
}

// k = m(r) - m(c).
inline int coherence_order(BasisIndex r, BasisIndex c) noexcept {
    return popcount(r) - popcount(c);
}

nlohmann::json to_json(const SpinSystem& system);
SpinSystem system_from_json(const nlohmann::json& doc, const Limits& limits = {});

}  // namespace mqcsim
