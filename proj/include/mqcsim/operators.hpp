#pragma once

#include <span>
#include <string>
#include <vector>

#include "mqcsim/spin_system.hpp"

namespace mqcsim {

// Operators the simulator can apply matrix-free.
//   Hzz       = sum_{i<j} d_ij (3 Iz_i Iz_j - I_i . I_j)
//   Hdq       = -1/2 sum_{i<j} d_ij (I+_i I+_j + I-_i I-_j)
//   HdqPhase  = exp(-i phi Iz) Hdq exp(+i phi Iz)
struct OperatorKind {
    enum class Type { IzTotal, IxTotal, IyTotal, Hzz, Hdq, HdqPhase };

    Type type = Type::Hzz;
    double phase = 0.0;  // HdqPhase only

    static OperatorKind iz() { return {Type::IzTotal, 0.0}; }
    static OperatorKind ix() { return {Type::IxTotal, 0.0}; }
    static OperatorKind iy() { return {Type::IyTotal, 0.0}; }
    static OperatorKind hzz() { return {Type::Hzz, 0.0}; }
    static OperatorKind hdq() { return {Type::Hdq, 0.0}; }
    static OperatorKind hdq_phase(double phi) { return {Type::HdqPhase, phi}; }

    bool operator==(const OperatorKind&) const = default;
};

// Short names used in JSON documents: "iz", "ix", "iy", "zz", "dq", "dq_phase".
std::string to_string(const OperatorKind& kind);
OperatorKind operator_from_string(const std::string& name, double phase = 0.0);

// Calls visit(row, amplitude) for every nonzero <row|O|col>.
template <typename Visitor>
void visit_column(const OperatorKind& kind, const SpinSystem& system, BasisIndex col, Visitor&& visit) {
    const int n = system.n_spins();
    switch (kind.type) {
        case OperatorKind::Type::IzTotal:
            visit(col, cplx(magnetization(col, n), 0.0));
            return;
        case OperatorKind::Type::IxTotal:
            for (int i = 0; i < n; ++i) visit(col ^ (BasisIndex{1} << i), cplx(0.5, 0.0));
            return;
        case OperatorKind::Type::IyTotal:
            for (int i = 0; i < n; ++i) {
                const bool up = (col >> i) & 1U;
                // I+ on a down spin gives -i/2, I- on an up spin gives +i/2.
                visit(col ^ (BasisIndex{1} << i), up ? cplx(0.0, 0.5) : cplx(0.0, -0.5));
            }
            return;
        case OperatorKind::Type::Hzz: {
            double diag = 0.0;
            for (int i = 0; i < n; ++i) {
                const bool ui = (col >> i) & 1U;
                for (int j = i + 1; j < n; ++j) {
                    const double d = system.coupling(i, j);
                    if (d == 0.0) continue;
                    const bool uj = (col >> j) & 1U;
                    if (ui == uj) {
                        diag += 0.5 * d;
                    } else {
                        diag -= 0.5 * d;
                        visit(col ^ ((BasisIndex{1} << i) | (BasisIndex{1} << j)), cplx(-0.5 * d, 0.0));
                    }
                }
            }
            if (diag != 0.0) visit(col, cplx(diag, 0.0));
            return;
        }
        case OperatorKind::Type::Hdq:
        case OperatorKind::Type::HdqPhase: {
            const bool phased = kind.type == OperatorKind::Type::HdqPhase;
            const cplx raise = phased ? std::polar(1.0, -2.0 * kind.phase) : cplx(1.0, 0.0);
            const cplx lower = phased ? std::polar(1.0, 2.0 * kind.phase) : cplx(1.0, 0.0);
            for (int i = 0; i < n; ++i) {
                const bool ui = (col >> i) & 1U;
                for (int j = i + 1; j < n; ++j) {
                    const double d = system.coupling(i, j);
                    if (d == 0.0) continue;
                    const bool uj = (col >> j) & 1U;
                    if (ui != uj) continue;
                    const BasisIndex row = col ^ ((BasisIndex{1} << i) | (BasisIndex{1} << j));
                    visit(row, -0.5 * d * (ui ? lower : raise));
                }
            }
            return;
        }
    }
}

// out = O * in, computed without materializing O.
void apply_operator(const OperatorKind& kind, const SpinSystem& system, std::span<const cplx> in,
                    std::span<cplx> out);
State apply_operator(const OperatorKind& kind, const SpinSystem& system, const State& in);

// Dense matrix assembled column by column from visit_column.
Density dense_operator(const OperatorKind& kind, const SpinSystem& system);

// True when every matrix element of the operator is real in the computational basis.
bool is_real_operator(const OperatorKind& kind);

// Partition of the basis into subspaces the operator never connects.
// Each sector is sorted; sectors are ordered by their smallest element.
std::vector<std::vector<BasisIndex>> invariant_sectors(const OperatorKind& kind, const SpinSystem& system);

// Tr{Iz^2} = N 2^(N-2); also Tr{Ix^2} and Tr{Iy^2}.
double collective_norm(int n_spins);

}  // namespace mqcsim
