#pragma once

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mqcsim/evolution.hpp"

namespace mqcsim {

// Instantaneous collective rotation.
struct Pulse {
    Axis axis = Axis::X;
    double angle = 0.0;
};

// Free evolution under `hamiltonian` for `duration` seconds.
struct Delay {
    double duration = 0.0;
    OperatorKind hamiltonian = OperatorKind::hzz();
};

using PulseStep = std::variant<Pulse, Delay>;

struct PulseProgram {
    std::string name;
    std::vector<PulseStep> steps;

    double total_duration() const;
    std::size_t pulse_count() const;
};

// Product of the step propagators in program order (first step acts first).
Propagator compile_program(const PulseProgram& program, const SpinSystem& system, const Limits& limits = {});

enum class DqBlockLayout {
    // Starts with a pulse; the two z-frame half windows of the symmetric form
    // are merged at the end of the cycle.
    PulseFirst,
    // Delay-pulse-...-delay palindrome; odd Magnus orders cancel.
    Symmetric,
};

struct DqBlockOptions {
    double delta1 = 3e-6;
    double delta2 = 8e-6;
    // X gives +H_DQ on average; Y (phase shifted by 90 degrees) gives -H_DQ.
    Axis base_axis = Axis::X;
    DqBlockLayout layout = DqBlockLayout::PulseFirst;
};

// Eight pi/2 pulses with phases (+ + - - - - + +) about the base axis and free
// Hzz evolution in between. The Hzz toggling frame spends 2/3 of the cycle
// along the transverse axis orthogonal to the pulses and 1/3 along z, which
// averages to +-H_DQ. Delays add up to 4*delta1 + 6*delta2.
PulseProgram dq_block(const DqBlockOptions& options = {});

// ||U_program - exp(-i H_target T)||_F / 2^(N/2) with couplings multiplied by `scale`.
double aht_error(const PulseProgram& program, const OperatorKind& target, const SpinSystem& system, double scale);

nlohmann::json to_json(const PulseProgram& program);
PulseProgram program_from_json(const nlohmann::json& doc);

}  // namespace mqcsim
