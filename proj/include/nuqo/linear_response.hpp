#pragma once

// Weak-probe response of the nuclear ensemble after adiabatic elimination of
// the cavity modes. The N-nucleus problem reduces to one collective ground
// state and (at most) six timed-Dicke excited states, so the reflectance
// follows from a 6x6 complex linear system per probe detuning.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nuqo/cavity.hpp"
#include "nuqo/errors.hpp"
#include "nuqo/geometry.hpp"
#include "nuqo/nuclear_ensemble.hpp"

namespace nuqo {

struct SystemOptions {
    cplx drive = 1.0;         // a_in; cancels from R
    double linewidth = 1.0;   // gamma
    std::optional<Vec3> quantization_axis;  // used only when the layer is unmagnetized
};

/// Effective few-level system seen by the probe.
///   A(D) = diag(D - E_mu + i gamma/2) + (i zeta_S - delta_LS) W
///   A x = b,   R = R_el + output_factor * sum_mu D_mu x_mu
struct EffectiveLevelSystem {
    Vec6 energies = Vec6::Zero();
    Vec6C drive = Vec6C::Zero();
    Mat6C coupling = Mat6C::Zero();
    Vec6C detection = Vec6C::Zero();
    double lamb_shift = 0.0;  // delta_LS
    double decay = 0.0;       // zeta_S
    double linewidth = 1.0;
    cplx electronic = 0.0;
    cplx output_factor = 0.0;  // -i sqrt(2 kappa_r) / ((kappa + i Delta_C) a_in)
};

inline Vec3 default_quantization_axis(const ExperimentGeometry& g) { return g.frame.a1.real(); }

inline void validate(const CouplingParams& c) {
    if (!(c.n >= 0.0) || !(c.n1 >= 0.0) || !(c.n2 >= 0.0))
        throw InvalidEnsemble("coupling: populations must be non-negative");
    if (std::abs(c.n1 + c.n2 - c.n) > 1e-9 * std::max(1.0, c.n))
        throw InvalidEnsemble("coupling: N1 + N2 must equal N");
    if (!std::isfinite(c.collective_strength())) throw InvalidEnsemble("coupling: N|g|^2 is not finite");
}

inline EffectiveLevelSystem build_effective_system(const ExperimentGeometry& geom, const CavityParams& cavity,
                                                   const HyperfineConfig& hyperfine,
                                                   const CouplingParams& coupling, double cavity_detuning,
                                                   const SystemOptions& opts = {}) {
    validate_geometry(geom);
    validate(cavity);
    validate(hyperfine);
    validate(coupling);
    if (opts.drive == 0.0) throw InvalidParameters("linear response: drive amplitude must be nonzero");
    if (!(opts.linewidth > 0.0)) throw InvalidParameters("linear response: linewidth must be positive");

    const Vec3 axis = hyperfine.axis ? *hyperfine.axis
                                     : opts.quantization_axis.value_or(default_quantization_axis(geom));
    const auto table = transition_table(hyperfine);
    const auto cg = clebsch_gordan(table);
    const auto dipoles = dipole_vectors(axis, polarization_layout(table));
    const auto proj = transverse_projector(geom.frame.k);
    const auto ec = effective_constants(cavity, cavity_detuning, opts.drive);

    Vec6 weight;  // c_mu sqrt(N_mu_g)
    for (int mu = 0; mu < kTransitionCount; ++mu)
        weight[mu] = cg[mu] * std::sqrt(table[mu].ground == 1 ? coupling.n1 : coupling.n2);

    EffectiveLevelSystem sys;
    const double g2 = std::norm(coupling.g);
    for (int mu = 0; mu < kTransitionCount; ++mu) {
        sys.energies[mu] = table[mu].energy;
        sys.drive[mu] = ec.rabi * coupling.g * weight[mu] * proj.sandwich(dipoles[mu], geom.a_in);
        sys.detection[mu] = std::conj(coupling.g) * weight[mu] * proj.sandwich(geom.a_out, dipoles[mu]);
        for (int nu = 0; nu < kTransitionCount; ++nu)
            sys.coupling(mu, nu) = g2 * weight[mu] * weight[nu] * proj.sandwich(dipoles[mu], dipoles[nu]);
    }
    sys.lamb_shift = ec.lamb_shift;
    sys.decay = ec.decay;
    sys.linewidth = opts.linewidth;
    sys.electronic = electronic_reflection(cavity, cavity_detuning, geom.a_in, geom.a_out);
    sys.output_factor =
        cplx(0.0, -1.0) * std::sqrt(2.0 * cavity.kappa_r) / (cplx(cavity.kappa, cavity_detuning) * opts.drive);
    return sys;
}

inline Mat6C coherence_matrix(const EffectiveLevelSystem& sys, double detuning) {
    const cplx i(0.0, 1.0);
    Mat6C a = (i * sys.decay - sys.lamb_shift) * sys.coupling;
    for (int mu = 0; mu < kTransitionCount; ++mu)
        a(mu, mu) += detuning - sys.energies[mu] + i * sys.linewidth / 2.0;
    return a;
}

inline constexpr double kMaxConditionNumber = 1e12;

/// Steady coherences <E_mu|rho|G> with <G|rho|G> = 1.
inline Vec6C steady_coherences(const EffectiveLevelSystem& sys, double detuning) {
    const Mat6C a = coherence_matrix(sys, detuning);
    Eigen::PartialPivLU<Mat6C> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond * kMaxConditionNumber >= 1.0))
        throw DegenerateSpectrum(detuning, "coherence system is singular (condition number > 1e12)");
    Vec6C x = lu.solve(sys.drive);
    const double scale = sys.drive.norm();
    if (scale > 0.0 && (a * x - sys.drive).norm() > 1e-10 * scale)
        throw DegenerateSpectrum(detuning, "coherence solve residual exceeds 1e-10");
    return x;
}

inline cplx reflectance(const EffectiveLevelSystem& sys, double detuning) {
    const Vec6C x = steady_coherences(sys, detuning);
    return sys.electronic + sys.output_factor * (sys.detection.transpose() * x)(0);
}

struct TwoLevelInputs {
    double kappa;
    double kappa_r;
    double cavity_detuning;
    double collective_strength;  // N|g|^2
    double linewidth = 1.0;
    cplx polarization_overlap = 1.0;  // a_out* . a_in
};

/// Closed-form reflectance of the unmagnetized layer (effective two-level
/// system |G> <-> |+>), written out term by term with a_in = 1.
inline cplx two_level_reflectance(double detuning, const TwoLevelInputs& in) {
    const cplx i(0.0, 1.0);
    const cplx cav(in.kappa, in.cavity_detuning);
    const double d2 = in.kappa * in.kappa + in.cavity_detuning * in.cavity_detuning;
    const double zeta = in.kappa / d2;
    const double delta_ls = -in.cavity_detuning / d2;
    const cplx omega = std::sqrt(2.0 * in.kappa_r) / cav;
    const double strength = 2.0 / 3.0 * in.collective_strength;
    const cplx electronic = (2.0 * in.kappa_r / cav - 1.0) * in.polarization_overlap;
    const cplx nuclear = -i * std::sqrt(2.0 * in.kappa_r) / cav * in.polarization_overlap * strength * omega /
                         (detuning + i * in.linewidth / 2.0 + strength * (i * zeta - delta_ls));
    return electronic + nuclear;
}

struct CollectiveParams {
    double lamb_shift;     // Delta_LS
    double superradiance;  // gamma_S
};

inline CollectiveParams collective_parameters(const CavityParams& cavity, const CouplingParams& coupling,
                                              double cavity_detuning) {
    const auto ec = effective_constants(cavity, cavity_detuning, 0.0);
    const double s = coupling.collective_strength();
    return {2.0 / 3.0 * ec.lamb_shift * s, 4.0 / 3.0 * ec.decay * s};
}

// ---------------------------------------------------------------------------
// Scans

struct PointFailure {
    std::size_t index;
    double abscissa;
    std::string message;
};

struct Spectrum {
    std::vector<double> abscissa;
    std::vector<cplx> amplitude;
    std::vector<double> intensity;
    std::vector<PointFailure> failures;
    bool cavity_detuning_coupled = false;
};

using SystemBuilder = std::function<EffectiveLevelSystem(double cavity_detuning)>;

/// Delta_C as seen by a detuning scan: either fixed (probe-independent) or
/// recomputed from the exact mode dispersion at omega = omega0 + Delta.
struct CavityDetuningModel {
    double fixed = 0.0;
    bool coupled = false;
    double omega0 = 0.0;  // gamma
    double angle = 0.0;
    double resonance_angle = 0.0;

    double at(double probe_detuning) const {
        if (!coupled) return fixed;
        return cavity_detuning_exact(omega0 + probe_detuning, angle, resonance_angle, omega0);
    }
};

inline void require_monotone(std::span<const double> grid) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw InvalidParameters("scan grid must be strictly increasing (index " + std::to_string(i) + ")");
}

inline std::vector<double> linspace(double from, double to, std::size_t points) {
    std::vector<double> out(points);
    if (points == 1) {
        out[0] = from;
        return out;
    }
    for (std::size_t i = 0; i < points; ++i)
        out[i] = from + (to - from) * static_cast<double>(i) / static_cast<double>(points - 1);
    return out;
}

namespace detail {

inline void record_point(Spectrum& s, std::size_t i, double x, const std::function<cplx()>& eval) {
    s.abscissa[i] = x;
    try {
        const cplx r = eval();
        s.amplitude[i] = r;
        s.intensity[i] = std::norm(r);
    } catch (const DegenerateSpectrum& e) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.amplitude[i] = {nan, nan};
        s.intensity[i] = nan;
        s.failures.push_back({i, x, e.what()});
    }
}

inline Spectrum sized_spectrum(std::size_t n) {
    Spectrum s;
    s.abscissa.resize(n);
    s.amplitude.resize(n);
    s.intensity.resize(n);
    return s;
}

}  // namespace detail

inline Spectrum scan_detuning(const SystemBuilder& build, std::span<const double> grid,
                              const CavityDetuningModel& cavity_detuning) {
    require_monotone(grid);
    Spectrum s = detail::sized_spectrum(grid.size());
    s.cavity_detuning_coupled = cavity_detuning.coupled;
    std::optional<EffectiveLevelSystem> fixed;
    if (!cavity_detuning.coupled) fixed = build(cavity_detuning.fixed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = grid[i];
        detail::record_point(s, i, d, [&] {
            return fixed ? reflectance(*fixed, d) : reflectance(build(cavity_detuning.at(d)), d);
        });
    }
    return s;
}

/// Rocking curve: |R(phi)|^2 at fixed probe detuning, Delta_C = slope (phi - phi0).
/// Angles in radians.
inline Spectrum scan_angle(const SystemBuilder& build, std::span<const double> angles, double probe_detuning,
                           const CavityParams& cavity) {
    require_monotone(angles);
    Spectrum s = detail::sized_spectrum(angles.size());
    for (std::size_t i = 0; i < angles.size(); ++i) {
        const double phi = angles[i];
        detail::record_point(s, i, phi, [&] {
            const double dc = cavity_detuning_linear(phi - cavity.resonance_angle, cavity.detuning_slope);
            return reflectance(build(dc), probe_detuning);
        });
    }
    return s;
}

// ---------------------------------------------------------------------------
// Level-scheme engineering

struct NamedGeometry {
    std::string name;
    ExperimentGeometry geometry;
};

/// The four polarization/magnetization arrangements (a)-(d) in the frame
/// k = x, a1 = z (surface normal), a2 = y.
inline std::array<NamedGeometry, 4> canonical_geometries() {
    const Frame f = build_frame(Vec3::UnitZ(), Vec3::UnitX());
    const Vec3 a1 = f.a1.real();
    const Vec3 a2 = f.a2.real();
    const Vec3 k = f.k.real();
    const double s = 1.0 / std::sqrt(2.0);
    auto geom = [&](const Vec3& in, const Vec3& out, const Vec3& b) {
        return ExperimentGeometry{f, complexify(in.normalized()), complexify(out.normalized()), b.normalized()};
    };
    return {{
        {"a", geom(a1, a1, a1)},
        {"b", geom(a1, a1, a2)},
        {"c", geom(s * (a1 - a2), s * (a1 + a2), a2)},
        {"d", geom(a1, a2, s * (a2 + k))},
    }};
}

struct LevelSchemeSummary {
    std::vector<int> driven;                      // 1-based transition indices with b_mu != 0
    std::vector<int> active;                      // states reachable from driven ones through W
    std::vector<std::pair<int, int>> couplings;   // mu < nu, both active, W_mu_nu != 0
};

inline LevelSchemeSummary summarize_level_scheme(const EffectiveLevelSystem& sys, double rel_tol = 1e-12) {
    LevelSchemeSummary out;
    const double bmax = sys.drive.cwiseAbs().maxCoeff();
    const double wmax = sys.coupling.cwiseAbs().maxCoeff();
    std::array<bool, kTransitionCount> active{};
    for (int mu = 0; mu < kTransitionCount; ++mu) {
        if (bmax > 0.0 && std::abs(sys.drive[mu]) > rel_tol * bmax) {
            out.driven.push_back(mu + 1);
            active[mu] = true;
        }
    }
    auto linked = [&](int mu, int nu) { return wmax > 0.0 && std::abs(sys.coupling(mu, nu)) > rel_tol * wmax; };
    for (bool grew = true; grew;) {
        grew = false;
        for (int mu = 0; mu < kTransitionCount; ++mu)
            for (int nu = 0; nu < kTransitionCount; ++nu)
                if (active[mu] && !active[nu] && linked(mu, nu)) active[nu] = grew = true;
    }
    for (int mu = 0; mu < kTransitionCount; ++mu) {
        if (!active[mu]) continue;
        out.active.push_back(mu + 1);
        for (int nu = mu + 1; nu < kTransitionCount; ++nu)
            if (active[nu] && linked(mu, nu)) out.couplings.emplace_back(mu + 1, nu + 1);
    }
    return out;
}

/// Reduced two-state picture for B || a_in || a_out: only the pi lines (2, 5)
/// are driven, and the bright/dark combinations |+-> = (|E5> +- |E2>)/sqrt(2)
/// decouple in their decay.
struct SymmetricModes {
    double rate_plus;         // Gamma_+ = gamma/2 + zeta_S W_++
    double rate_minus;        // Gamma_- = gamma/2 + zeta_S W_--
    double coherent_coupling; // <+|H|->
    double shift_plus;        // delta_LS W_++
    double dip_detuning;      // |R|^2 minimum between the two pi resonances
    double dip_intensity;
};

inline SymmetricModes symmetric_mode_analysis(const ExperimentGeometry& geom, const CavityParams& cavity,
                                              const HyperfineConfig& hyperfine, const CouplingParams& coupling,
                                              double cavity_detuning, const SystemOptions& opts = {}) {
    if (!hyperfine.axis) throw NotApplicable("symmetric mode analysis needs a magnetized layer");
    const Vec3C b = complexify(hyperfine.axis->normalized());
    constexpr double tol = 1e-9;
    if (std::abs(std::abs(hdot(b, geom.a_in)) - 1.0) > tol || std::abs(std::abs(hdot(b, geom.a_out)) - 1.0) > tol)
        throw NotApplicable("symmetric mode analysis needs B || a_in || a_out");
    if (std::abs(coupling.n1 - coupling.n2) > 1e-12 * std::max(1.0, coupling.n))
        throw NotApplicable("symmetric mode analysis needs N1 = N2");
    if (hyperfine.delta_g + hyperfine.delta_e <= 0.0)
        throw NotApplicable("symmetric mode analysis needs split pi resonances");

    const auto sys = build_effective_system(geom, cavity, hyperfine, coupling, cavity_detuning, opts);
    constexpr int e2 = 1;
    constexpr int e5 = 4;
    const double s = 1.0 / std::sqrt(2.0);
    Vec6C plus = Vec6C::Zero();
    Vec6C minus = Vec6C::Zero();
    plus[e5] = s;
    plus[e2] = s;
    minus[e5] = s;
    minus[e2] = -s;
    const cplx w_pp = plus.dot(sys.coupling * plus);
    const cplx w_mm = minus.dot(sys.coupling * minus);
    const cplx w_pm = plus.dot(sys.coupling * minus);

    SymmetricModes m{};
    m.rate_plus = sys.linewidth / 2.0 + sys.decay * w_pp.real();
    m.rate_minus = sys.linewidth / 2.0 + sys.decay * w_mm.real();
    m.coherent_coupling = (sys.energies[e5] - sys.energies[e2]) / 2.0 + sys.lamb_shift * w_pm.real();
    m.shift_plus = sys.lamb_shift * w_pp.real();

    // Bracket the minimum on a grid, then refine by golden-section search.
    const double lo = sys.energies[e2];
    const double hi = sys.energies[e5];
    auto f = [&](double d) { return std::norm(reflectance(sys, d)); };
    constexpr int n = 2001;
    int best = 1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 1; i < n - 1; ++i) {
        const double v = f(lo + (hi - lo) * i / (n - 1));
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * (best - 1) / (n - 1);
    double c = lo + (hi - lo) * (best + 1) / (n - 1);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200 && c - a > 1e-12; ++it) {
        const double x1 = c - phi * (c - a);
        const double x2 = a + phi * (c - a);
        if (f(x1) < f(x2))
            c = x2;
        else
            a = x1;
    }
    m.dip_detuning = 0.5 * (a + c);
    m.dip_intensity = f(m.dip_detuning);
    return m;
}

}  // namespace nuqo
