#include "mqcsim/operators.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

std::string to_string(const OperatorKind& kind) {
    switch (kind.type) {
        case OperatorKind::Type::IzTotal: return "iz";
        case OperatorKind::Type::IxTotal: return "ix";
        case OperatorKind::Type::IyTotal: return "iy";
        case OperatorKind::Type::Hzz: return "zz";
        case OperatorKind::Type::Hdq: return "dq";
        case OperatorKind::Type::HdqPhase: return "dq_phase";
    }
    return "unknown";
}

OperatorKind operator_from_string(const std::string& name, double phase) {
    if (name == "iz") return OperatorKind::iz();
    if (name == "ix") return OperatorKind::ix();
    if (name == "iy") return OperatorKind::iy();
    if (name == "zz") return OperatorKind::hzz();
    if (name == "dq") return OperatorKind::hdq();
    if (name == "dq_phase") return OperatorKind::hdq_phase(phase);
    throw InvalidArgument(fmt::format("unknown operator '{}'", name));
}

void apply_operator(const OperatorKind& kind, const SpinSystem& system, std::span<const cplx> in,
                    std::span<cplx> out) {
    const std::size_t dim = system.dim();
    if (in.size() != dim || out.size() != dim) {
        throw DimensionMismatch(fmt::format("operator on {} spins needs vectors of length {}, got {} and {}",
                                            system.n_spins(), dim, in.size(), out.size()));
    }
    std::fill(out.begin(), out.end(), cplx{});
    for (BasisIndex col = 0; col < dim; ++col) {
        const cplx amp = in[col];
        if (amp == cplx{}) continue;
        visit_column(kind, system, col, [&](BasisIndex row, cplx value) { out[row] += value * amp; });
    }
}

State apply_operator(const OperatorKind& kind, const SpinSystem& system, const State& in) {
    if (static_cast<std::size_t>(in.size()) != system.dim()) {
        throw DimensionMismatch(fmt::format("operator on {} spins needs a vector of length {}, got {}",
                                            system.n_spins(), system.dim(), in.size()));
    }
    State out(in.size());
    apply_operator(kind, system, std::span<const cplx>(in.data(), in.size()), std::span<cplx>(out.data(), out.size()));
    return out;
}

Density dense_operator(const OperatorKind& kind, const SpinSystem& system) {
    const auto dim = static_cast<Eigen::Index>(system.dim());
    Density m = Density::Zero(dim, dim);
    for (BasisIndex col = 0; col < system.dim(); ++col) {
        visit_column(kind, system, col, [&](BasisIndex row, cplx value) {
            m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += value;
        });
    }
    return m;
}

bool is_real_operator(const OperatorKind& kind) {
    switch (kind.type) {
        case OperatorKind::Type::IyTotal: return false;
        case OperatorKind::Type::HdqPhase: {
            const double s = std::sin(2.0 * kind.phase);
            return s == 0.0;
        }
        default: return true;
    }
}

std::vector<std::vector<BasisIndex>> invariant_sectors(const OperatorKind& kind, const SpinSystem& system) {
    const std::size_t dim = system.dim();
    std::vector<BasisIndex> parent(dim);
    std::iota(parent.begin(), parent.end(), BasisIndex{0});
    auto find = [&](BasisIndex x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (BasisIndex col = 0; col < dim; ++col) {
        visit_column(kind, system, col, [&](BasisIndex row, cplx value) {
            if (value == cplx{}) return;
            const BasisIndex a = find(row);
            const BasisIndex b = find(col);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        });
    }
    std::vector<std::vector<BasisIndex>> sectors;
    std::vector<std::size_t> slot(dim, static_cast<std::size_t>(-1));
    for (BasisIndex b = 0; b < dim; ++b) {
        const BasisIndex root = find(b);
        if (slot[root] == static_cast<std::size_t>(-1)) {
            slot[root] = sectors.size();
            sectors.emplace_back();
        }
        sectors[slot[root]].push_back(b);
    }
    return sectors;
}

double collective_norm(int n_spins) {
    return n_spins * std::ldexp(1.0, n_spins - 2);
}

}  // namespace mqcsim
