#pragma once

// Level structure of the 14.4 keV 57Fe Moessbauer transition: two ground
// sublevels (I=1/2), four excited sublevels (I=3/2) and six M1 lines.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nuqo/errors.hpp"
#include "nuqo/geometry.hpp"

namespace nuqo {

inline constexpr int kGroundLevels = 2;
inline constexpr int kExcitedLevels = 4;

struct HyperfineConfig {
    double delta_g = 0.0;  // adjacent ground sublevel spacing (gamma)
    double delta_e = 0.0;  // adjacent excited sublevel spacing (gamma)
    std::optional<Vec3> axis;

    bool magnetized() const { return axis.has_value(); }
};

/// Splittings of alpha-iron at B ~ 33 T.
inline HyperfineConfig fe57_33_tesla(const Vec3& axis) { return {39.7, 22.4, axis.normalized()}; }

inline void validate(const HyperfineConfig& h) {
    if (!(h.delta_g >= 0.0) || !(h.delta_e >= 0.0))
        throw InvalidParameters("hyperfine: splittings must be non-negative");
    if (!h.axis && (h.delta_g != 0.0 || h.delta_e != 0.0))
        throw InvalidParameters("hyperfine: nonzero splitting requires a magnetization axis");
    if (h.axis && !(h.axis->norm() > 0.0)) throw InvalidParameters("hyperfine: zero magnetization axis");
}

struct TransitionRecord {
    int index = 0;    // mu, 1..6
    int ground = 0;   // 1..2
    int excited = 0;  // 1..4
    double energy = 0.0;  // offset from omega0 (gamma)
    double cg = 0.0;
    Polarization polarization = Polarization::pi;
};

using TransitionTable = std::array<TransitionRecord, kTransitionCount>;

inline TransitionTable transition_table(const HyperfineConfig& h) {
    const double dg = h.delta_g;
    const double de = h.delta_e;
    const double c23 = std::sqrt(2.0 / 3.0);
    const double c13 = std::sqrt(1.0 / 3.0);
    return {{
        {1, 1, 1, -dg / 2 - 1.5 * de, 1.0, Polarization::sigma_minus},
        {2, 1, 2, -dg / 2 - 0.5 * de, c23, Polarization::pi},
        {3, 1, 3, -dg / 2 + 0.5 * de, c13, Polarization::sigma_plus},
        {4, 2, 2, dg / 2 - 0.5 * de, c13, Polarization::sigma_minus},
        {5, 2, 3, dg / 2 + 0.5 * de, c23, Polarization::pi},
        {6, 2, 4, dg / 2 + 1.5 * de, 1.0, Polarization::sigma_plus},
    }};
}

inline std::array<double, kTransitionCount> clebsch_gordan(const TransitionTable& t) {
    std::array<double, kTransitionCount> c{};
    for (int mu = 0; mu < kTransitionCount; ++mu) c[mu] = t[mu].cg;
    return c;
}

inline PolarizationLayout polarization_layout(const TransitionTable& t) {
    PolarizationLayout p{};
    for (int mu = 0; mu < kTransitionCount; ++mu) p[mu] = t[mu].polarization;
    return p;
}

/// Sum of c^2 over the decay channels of every excited level must be one.
inline void branching_check(const TransitionTable& t, double tol = 1e-12) {
    std::array<double, kExcitedLevels> sums{};
    for (const auto& r : t) {
        if (r.excited < 1 || r.excited > kExcitedLevels || r.ground < 1 || r.ground > kGroundLevels)
            throw CorruptedTable("transition " + std::to_string(r.index) + " has invalid level indices");
        sums[r.excited - 1] += r.cg * r.cg;
    }
    for (int e = 0; e < kExcitedLevels; ++e)
        if (std::abs(sums[e] - 1.0) > tol)
            throw CorruptedTable("excited level e" + std::to_string(e + 1) + " branching sum " +
                                 std::to_string(sums[e]) + " != 1");
}

/// Sublevel energies consistent with the transition table: E(e) - E(g) equals
/// the tabulated line offset for every mu.
struct LevelEnergies {
    std::array<double, kGroundLevels> ground;
    std::array<double, kExcitedLevels> excited;
};

inline LevelEnergies level_energies(const HyperfineConfig& h) {
    LevelEnergies e;
    e.ground = {h.delta_g / 2, -h.delta_g / 2};
    for (int j = 0; j < kExcitedLevels; ++j) e.excited[j] = h.delta_e * (j + 1 - 2.5);
    return e;
}

struct ThermalRoom {};
struct ExplicitPopulations {
    double n1;
    double n2;
};
using PopulationMode = std::variant<ThermalRoom, ExplicitPopulations>;

// At room temperature exp(-delta_g/kT) ~ 1, so both sublevels hold N/2.
inline std::array<double, kGroundLevels> ground_populations(double n, const PopulationMode& mode) {
    if (!(n >= 1.0)) throw InvalidEnsemble("ensemble: N must be at least 1");
    if (std::holds_alternative<ThermalRoom>(mode)) return {n / 2, n / 2};
    const auto& e = std::get<ExplicitPopulations>(mode);
    if (e.n1 < 0 || e.n2 < 0) throw InvalidEnsemble("ensemble: negative sublevel population");
    if (std::abs(e.n1 + e.n2 - n) > 1e-9 * n)
        throw InvalidEnsemble("ensemble: N1 + N2 = " + std::to_string(e.n1 + e.n2) + " differs from N = " +
                              std::to_string(n));
    return {e.n1, e.n2};
}

struct EnsembleConfig {
    double n = 1.0;
    double n1 = 0.5;
    double n2 = 0.5;
    std::vector<Vec3> positions;  // optional; only the full quantum model uses them
};

}  // namespace nuqo
