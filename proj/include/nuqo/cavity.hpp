#pragma once

// Single guided mode of the thin-film cavity. All rates and energies are in
// units of the nuclear linewidth gamma; angles are radians.

#include <cmath>
#include <complex>
#include <string>

#include "nuqo/errors.hpp"
#include "nuqo/geometry.hpp"

namespace nuqo {

inline constexpr double kMicroradian = 1e-6;
inline constexpr double kMilliradian = 1e-3;

struct CavityParams {
    double kappa = 1.0;            // total field decay
    double kappa_r = 0.0;          // coupling to the reflected channel
    double kappa_t = 0.0;          // coupling to the transmitted channel
    double detuning_slope = 0.0;   // dDelta_C/dphi, gamma per radian
    double resonance_angle = 0.0;  // phi_0, radians
    double xi = 1.0;               // overall scale factor of the calibrated rates
    double omega0_kev = 14.4;
    double gamma_nev = 4.7;

    // Resonance energy expressed in linewidths.
    double omega0_in_gamma() const { return omega0_kev * 1e12 / gamma_nev; }
};

struct CouplingParams {
    cplx g = 0.0;     // single-nucleus coupling
    double n = 0.0;   // nucleus count
    double n1 = 0.0;  // nuclei in g1
    double n2 = 0.0;  // nuclei in g2

    double collective_strength() const { return n * std::norm(g); }

    // Equal sublevel split with N|g|^2 fixed; only that product is observable.
    static CouplingParams from_collective(double n_g2, double n = 1.0) {
        CouplingParams c;
        c.n = n;
        c.g = n > 0.0 ? std::sqrt(n_g2 / n) : 0.0;
        c.n1 = c.n2 = n / 2.0;
        return c;
    }
};

/// Cavity parameters calibrated for the Pt/C/57Fe/C/Pt waveguide at its
/// first guided mode (rates in units of xi*gamma).
inline CavityParams paper_cavity(double xi = 18000.0) {
    CavityParams p;
    p.kappa = 45.0 * xi;
    p.kappa_r = 25.0 * xi;
    p.kappa_t = 0.0;
    p.detuning_slope = -0.5 * xi / kMicroradian;
    p.resonance_angle = 2.96 * kMilliradian;
    p.xi = xi;
    return p;
}

inline constexpr double kPaperCollectiveStrengthPerXi = 1400.0;  // N|g|^2 / xi

/// Delta_C = sqrt(w^2 cos^2 phi + w0^2 sin^2 phi0) - w, evaluated without
/// cancellation (w and w0 are ~1e12 linewidths).
inline double cavity_detuning_exact(double omega, double phi, double phi0, double omega0) {
    const double s = std::sin(phi);
    const double s0 = std::sin(phi0);
    const double c = std::cos(phi);
    const double root = std::sqrt(omega * omega * c * c + omega0 * omega0 * s0 * s0);
    const double numerator = (omega0 * s0 - omega * s) * (omega0 * s0 + omega * s);
    return numerator / (root + omega);
}

inline double cavity_detuning_linear(double delta_phi, double slope) { return slope * delta_phi; }

/// Slope -omega0*phi0 of the exact dispersion at resonance (gamma per radian).
inline double matched_detuning_slope(double omega0, double phi0) { return -omega0 * phi0; }

inline void validate(const CavityParams& p) {
    if (!(p.kappa > 0.0) || !std::isfinite(p.kappa))
        throw InvalidParameters("cavity: kappa must be positive (got " + std::to_string(p.kappa) + ")");
    if (!(p.kappa_r >= 0.0)) throw InvalidParameters("cavity: kappa_r must be non-negative");
    if (!(p.kappa_t >= 0.0)) throw InvalidParameters("cavity: kappa_t must be non-negative");
    if (p.kappa < p.kappa_r + p.kappa_t)
        throw EnergyConservationViolation("cavity: energy conservation requires kappa >= kappa_r + kappa_t (" +
                                          std::to_string(p.kappa) + " < " +
                                          std::to_string(p.kappa_r + p.kappa_t) + ")");
}

/// Empty-cavity (electronic) reflection amplitude.
inline cplx electronic_reflection(const CavityParams& p, double cavity_detuning, const Vec3C& a_in,
                                  const Vec3C& a_out) {
    if (!(p.kappa > 0.0)) throw InvalidParameters("cavity: kappa must be positive");
    const cplx denom(p.kappa, cavity_detuning);
    return (2.0 * p.kappa_r / denom - 1.0) * hdot(a_out, a_in);
}

struct EffectiveConstants {
    cplx rabi;          // Omega = sqrt(2 kappa_r) a_in / (kappa + i Delta_C)
    double lamb_shift;  // delta_LS = -Delta_C / (kappa^2 + Delta_C^2)
    double decay;       // zeta_S = kappa / (kappa^2 + Delta_C^2)
};

inline EffectiveConstants effective_constants(const CavityParams& p, double cavity_detuning, cplx a_in) {
    if (!(p.kappa > 0.0)) throw InvalidParameters("cavity: kappa must be positive");
    const double d2 = p.kappa * p.kappa + cavity_detuning * cavity_detuning;
    return {std::sqrt(2.0 * p.kappa_r) * a_in / cplx(p.kappa, cavity_detuning), -cavity_detuning / d2,
            p.kappa / d2};
}

}  // namespace nuqo
