#include "mqcsim/spin_system.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

Geometry Geometry::all_to_all(double d0) {
    Geometry g;
    g.kind = GeometryKind::AllToAll;
    g.d0 = d0;
    return g;
}

Geometry Geometry::chain(double d0, double exponent) {
    Geometry g;
    g.kind = GeometryKind::Chain;
    g.d0 = d0;
    g.exponent = exponent;
    return g;
}

Geometry Geometry::lattice3d(double d0, double cutoff, std::array<int, 3> extent) {
    Geometry g;
    g.kind = GeometryKind::Lattice3D;
    g.d0 = d0;
    g.cutoff = cutoff;
    g.extent = extent;
    return g;
}

Geometry Geometry::explicit_couplings(Eigen::MatrixXd couplings) {
    Geometry g;
    g.kind = GeometryKind::Explicit;
    g.matrix = std::move(couplings);
    return g;
}

std::string to_string(GeometryKind kind) {
    switch (kind) {
        case GeometryKind::AllToAll: return "all_to_all";
        case GeometryKind::Chain: return "chain";
        case GeometryKind::Lattice3D: return "lattice3d";
        case GeometryKind::Explicit: return "explicit";
    }
    return "unknown";
}

GeometryKind geometry_kind_from_string(const std::string& name) {
    if (name == "all_to_all") return GeometryKind::AllToAll;
    if (name == "chain") return GeometryKind::Chain;
    if (name == "lattice3d") return GeometryKind::Lattice3D;
    if (name == "explicit") return GeometryKind::Explicit;
    throw InvalidGeometry(fmt::format("unknown geometry type '{}'", name));
}

SpinSystem::SpinSystem(Geometry geometry, Eigen::MatrixXd couplings)
    : geometry_(std::move(geometry)), couplings_(std::move(couplings)) {
    if (couplings_.rows() != couplings_.cols()) {
        throw InvalidGeometry("coupling matrix must be square");
    }
    for (Eigen::Index i = 0; i < couplings_.rows(); ++i) {
        if (couplings_(i, i) != 0.0) {
            throw InvalidGeometry(fmt::format("coupling diagonal ({0},{0}) must be zero", i));
        }
        for (Eigen::Index j = i + 1; j < couplings_.cols(); ++j) {
            if (couplings_(i, j) != couplings_(j, i) || !std::isfinite(couplings_(i, j))) {
                throw InvalidGeometry(fmt::format("coupling ({},{}) not symmetric or not finite", i, j));
            }
        }
    }
}

double SpinSystem::max_coupling() const {
    return couplings_.size() == 0 ? 0.0 : couplings_.cwiseAbs().maxCoeff();
}

SpinSystem SpinSystem::scaled(double factor) const {
    Geometry g = geometry_;
    if (g.kind == GeometryKind::Explicit) {
        g.matrix *= factor;
    } else {
        g.d0 *= factor;
    }
    return SpinSystem(std::move(g), couplings_ * factor);
}

void require_dense_budget(int n_spins, const Limits& limits) {
    if (n_spins > limits.max_spins) {
        throw CapExceeded(fmt::format("{} spins exceeds the configured cap of {}", n_spins, limits.max_spins));
    }
    const long double bytes = 16.0L * std::ldexp(1.0L, 2 * n_spins);
    if (bytes > static_cast<long double>(limits.memory_budget_bytes)) {
        throw CapExceeded(fmt::format("dense 2^{0} x 2^{0} complex matrix needs {1:.3g} GiB, budget is {2:.3g} GiB",
                                      n_spins, static_cast<double>(bytes) / (1 << 30),
                                      static_cast<double>(limits.memory_budget_bytes) / (1 << 30)));
    }
}

namespace {

std::array<int, 3> lattice_extent(const Geometry& g, int n_spins) {
    if (g.extent[0] > 0 && g.extent[1] > 0 && g.extent[2] > 0) {
        if (g.extent[0] * g.extent[1] * g.extent[2] < n_spins) {
            throw InvalidGeometry(fmt::format("lattice extent {}x{}x{} holds fewer than {} sites",
                                              g.extent[0], g.extent[1], g.extent[2], n_spins));
        }
        return g.extent;
    }
    if (g.extent[0] != 0 || g.extent[1] != 0 || g.extent[2] != 0) {
        throw InvalidGeometry("lattice extent must be all positive or all zero");
    }
    int side = 1;
    while (side * side * side < n_spins) ++side;
    return {side, side, side};
}

}  // namespace

SpinSystem build_system(const Geometry& geometry, int n_spins, const Limits& limits) {
    if (n_spins < 2) {
        throw InvalidGeometry(fmt::format("need at least 2 spins, got {}", n_spins));
    }
    if (n_spins > limits.max_spins || n_spins > 62) {
        throw CapExceeded(fmt::format("{} spins exceeds the configured cap of {}", n_spins, limits.max_spins));
    }
    require_dense_budget(n_spins, limits);

    if (geometry.kind != GeometryKind::Explicit && !(geometry.d0 > 0.0)) {
        throw InvalidGeometry(fmt::format("d0 must be positive, got {}", geometry.d0));
    }

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_spins, n_spins);
    switch (geometry.kind) {
        case GeometryKind::AllToAll:
            d.setConstant(geometry.d0);
            d.diagonal().setZero();
            break;
        case GeometryKind::Chain:
            if (!(geometry.exponent > 0.0)) {
                throw InvalidGeometry(fmt::format("chain exponent must be positive, got {}", geometry.exponent));
            }
            for (int i = 0; i < n_spins; ++i) {
                for (int j = i + 1; j < n_spins; ++j) {
                    d(i, j) = d(j, i) = geometry.d0 / std::pow(double(j - i), geometry.exponent);
                }
            }
            break;
        case GeometryKind::Lattice3D: {
            if (!(geometry.cutoff > 0.0)) {
                throw InvalidGeometry(fmt::format("cutoff must be positive, got {}", geometry.cutoff));
            }
            const auto ext = lattice_extent(geometry, n_spins);
            auto site = [&](int idx) {
                return Eigen::Vector3d(idx % ext[0], (idx / ext[0]) % ext[1], idx / (ext[0] * ext[1]));
            };
            for (int i = 0; i < n_spins; ++i) {
                for (int j = i + 1; j < n_spins; ++j) {
                    const double r = (site(i) - site(j)).norm();
                    if (r <= geometry.cutoff * (1.0 + 1e-12)) {
                        d(i, j) = d(j, i) = geometry.d0 / (r * r * r);
                    }
                }
            }
            break;
        }
        case GeometryKind::Explicit:
            if (geometry.matrix.rows() != n_spins || geometry.matrix.cols() != n_spins) {
                throw InvalidGeometry(fmt::format("explicit coupling matrix is {}x{}, expected {}x{}",
                                                  geometry.matrix.rows(), geometry.matrix.cols(), n_spins, n_spins));
            }
            d = geometry.matrix;
            break;
    }
    return SpinSystem(geometry, std::move(d));
}

nlohmann::json to_json(const SpinSystem& system) {
    const Geometry& g = system.geometry();
    nlohmann::json geom{{"type", to_string(g.kind)}};
    switch (g.kind) {
        case GeometryKind::AllToAll: geom["d0"] = g.d0; break;
        case GeometryKind::Chain:
            geom["d0"] = g.d0;
            geom["exponent"] = g.exponent;
            break;
        case GeometryKind::Lattice3D:
            geom["d0"] = g.d0;
            geom["cutoff"] = g.cutoff;
            geom["extent"] = g.extent;
            break;
        case GeometryKind::Explicit: break;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < system.n_spins(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < system.n_spins(); ++j) row.push_back(system.coupling(i, j));
        rows.push_back(std::move(row));
    }
    return {{"n_spins", system.n_spins()}, {"geometry", geom}, {"couplings", rows}};
}

SpinSystem system_from_json(const nlohmann::json& doc, const Limits& limits) {
    try {
        const int n = doc.at("n_spins").get<int>();
        const auto& geom = doc.at("geometry");
        const auto kind = geometry_kind_from_string(geom.at("type").get<std::string>());
        Geometry g;
        g.kind = kind;
        g.d0 = geom.value("d0", 1.0);
        g.exponent = geom.value("exponent", 3.0);
        g.cutoff = geom.value("cutoff", 1.0);
        if (geom.contains("extent")) g.extent = geom.at("extent").get<std::array<int, 3>>();
        if (kind == GeometryKind::Explicit) {
            if (!doc.contains("couplings")) {
                throw InvalidGeometry("explicit geometry requires a 'couplings' matrix");
            }
            const auto& rows = doc.at("couplings");
            g.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                             rows.empty() ? 0 : static_cast<Eigen::Index>(rows.at(0).size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != static_cast<std::size_t>(g.matrix.cols())) {
                    throw InvalidGeometry("ragged 'couplings' matrix");
                }
                for (std::size_t j = 0; j < rows[i].size(); ++j) {
                    g.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
                }
            }
        }
        return build_system(g, n, limits);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidGeometry(fmt::format("malformed spin system document: {}", e.what()));
    }
}

}  // namespace mqcsim
