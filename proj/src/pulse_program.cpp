#include "mqcsim/pulse_program.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "mqcsim/error.hpp"

namespace mqcsim {

double PulseProgram::total_duration() const {
    double total = 0.0;
    for (const auto& step : steps) {
        if (const auto* d = std::get_if<Delay>(&step)) total += d->duration;
    }
    return total;
}

std::size_t PulseProgram::pulse_count() const {
    std::size_t n = 0;
    for (const auto& step : steps) n += std::holds_alternative<Pulse>(step) ? 1 : 0;
    return n;
}

Propagator compile_program(const PulseProgram& program, const SpinSystem& system, const Limits& limits) {
    if (program.steps.empty()) {
        throw InvalidArgument(fmt::format("pulse program '{}' has no steps", program.name));
    }
    require_dense_budget(system.n_spins(), limits);
    const auto dim = static_cast<Eigen::Index>(system.dim());
    Density u = Density::Identity(dim, dim);
    // Decompositions keyed by operator name and phase.
    std::map<std::pair<std::string, double>, std::shared_ptr<const SpectralDecomposition>> cache;
    for (const auto& step : program.steps) {
        if (const auto* pulse = std::get_if<Pulse>(&step)) {
            if (!std::isfinite(pulse->angle)) throw InvalidArgument("pulse angle must be finite");
            rotate_columns(u, system.n_spins(), axis_azimuth(pulse->axis), pulse->angle);
            continue;
        }
        const auto& delay = std::get<Delay>(step);
        if (delay.duration == 0.0) continue;
        auto key = std::make_pair(to_string(delay.hamiltonian), delay.hamiltonian.phase);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, std::make_shared<const SpectralDecomposition>(delay.hamiltonian, system)).first;
        }
        u = it->second->propagate_columns(u, delay.duration);
    }
    return Propagator::dense(std::move(u), program.total_duration(), program.name);
}

PulseProgram dq_block(const DqBlockOptions& options) {
    if (!(options.delta1 > 0.0) || !(options.delta2 > 0.0)) {
        throw InvalidArgument("DQ block delays must be positive");
    }
    const double d1 = options.delta1;
    const double d2 = options.delta2;
    const double base = axis_azimuth(options.base_axis);
    const double half_pi = 0.5 * std::numbers::pi;
    const int signs[8] = {+1, +1, -1, -1, -1, -1, +1, +1};

    auto pulse_axis = [&](int sign) {
        const double phi = base + (sign > 0 ? 0.0 : std::numbers::pi);
        const double turns = std::fmod(phi / half_pi + 4.0, 4.0);
        switch (static_cast<int>(std::lround(turns)) % 4) {
            case 0: return Axis::X;
            case 1: return Axis::Y;
            case 2: return Axis::MinusX;
            default: return Axis::MinusY;
        }
    };

    PulseProgram program;
    program.name = options.base_axis == Axis::X || options.base_axis == Axis::MinusX ? "dq_block_x" : "dq_block_y";
    auto delay = [&](double t) { program.steps.emplace_back(Delay{t, OperatorKind::hzz()}); };
    auto pulse = [&](int i) { program.steps.emplace_back(Pulse{pulse_axis(signs[i]), half_pi}); };

    // Windows between pulses k and k+1 alternate transverse / z toggling frames.
    const double inner[7] = {d2, d1, 1.5 * d2, d2, 1.5 * d2, d1, d2};
    if (options.layout == DqBlockLayout::Symmetric) {
        delay(d1);
        for (int i = 0; i < 8; ++i) {
            pulse(i);
            delay(i < 7 ? inner[i] : d1);
        }
    } else {
        for (int i = 0; i < 8; ++i) {
            pulse(i);
            delay(i < 7 ? inner[i] : 2.0 * d1);
        }
    }
    return program;
}

double aht_error(const PulseProgram& program, const OperatorKind& target, const SpinSystem& system, double scale) {
    if (!(scale > 0.0)) throw InvalidArgument("aht_error scale must be positive");
    const SpinSystem scaled = system.scaled(scale);
    const Density u_program = compile_program(program, scaled).matrix();
    const Density u_target = SpectralDecomposition(target, scaled).dense_propagator(program.total_duration());
    return (u_program - u_target).norm() / std::sqrt(static_cast<double>(system.dim()));
}

nlohmann::json to_json(const PulseProgram& program) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : program.steps) {
        if (const auto* p = std::get_if<Pulse>(&step)) {
            steps.push_back({{"pulse", {{"axis", to_string(p->axis)}, {"angle", p->angle}}}});
        } else {
            const auto& d = std::get<Delay>(step);
            nlohmann::json body{{"t", d.duration}, {"h", to_string(d.hamiltonian)}};
            if (d.hamiltonian.type == OperatorKind::Type::HdqPhase) body["phi"] = d.hamiltonian.phase;
            steps.push_back({{"delay", body}});
        }
    }
    return steps;
}

PulseProgram program_from_json(const nlohmann::json& doc) {
    PulseProgram program;
    try {
        const nlohmann::json* steps = &doc;
        if (doc.is_object()) {
            program.name = doc.value("name", std::string{});
            steps = &doc.at("steps");
        }
        if (!steps->is_array()) throw ConfigError("pulse program must be a JSON array of steps");
        for (std::size_t i = 0; i < steps->size(); ++i) {
            const auto& s = (*steps)[i];
            if (s.contains("pulse")) {
                const auto& p = s.at("pulse");
                program.steps.emplace_back(Pulse{axis_from_string(p.at("axis").get<std::string>()), p.at("angle").get<double>()});
            } else if (s.contains("delay")) {
                const auto& d = s.at("delay");
                const double t = d.at("t").get<double>();
                if (!(t >= 0.0)) throw ConfigError(fmt::format("step {}: delay must be non-negative", i));
                program.steps.emplace_back(
                    Delay{t, operator_from_string(d.value("h", std::string{"zz"}), d.value("phi", 0.0))});
            } else {
                throw ConfigError(fmt::format("step {}: expected 'pulse' or 'delay'", i));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("malformed pulse program: {}", e.what()));
    }
    return program;
}

}  // namespace mqcsim
