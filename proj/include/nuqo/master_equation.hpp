#pragma once

// Full quantum tier: N <= 3 six-level nuclei coupled to the two polarization
// modes of the guided cavity mode, each truncated at n_ph photons. Also the
// nuclear-only generator obtained by eliminating the modes.
//
// Site order in the tensor product: nucleus 1, ..., nucleus N, mode a1, mode a2.
// Local nuclear basis: 0 = g1, 1 = g2, 2..5 = e1..e4.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nuqo/cavity.hpp"
#include "nuqo/errors.hpp"
#include "nuqo/geometry.hpp"
#include "nuqo/linear_response.hpp"
#include "nuqo/nuclear_ensemble.hpp"
#include "nuqo/operators.hpp"

namespace nuqo {

inline constexpr int kNuclearLevels = 6;
inline constexpr int kMaxQuantumNuclei = 3;

inline constexpr int ground_level(int g) { return g - 1; }   // g = 1..2
inline constexpr int excited_level(int e) { return e + 1; }  // e = 1..4

struct QuantumConfig {
    int nuclei = 1;
    int photon_cutoff = 2;  // n_ph, per mode
    CavityParams cavity;
    ExperimentGeometry geometry;
    HyperfineConfig hyperfine;
    cplx coupling = 0.0;  // single-nucleus g
    cplx drive = 0.0;     // a_in
    double probe_detuning = 0.0;
    double cavity_detuning = 0.0;
    double linewidth = 1.0;
    std::vector<Vec3> positions;  // empty: all nuclei at the origin
    Vec3 cavity_wavevector = Vec3::Zero();
    std::optional<Vec3> quantization_axis;  // unmagnetized layers only
    double dimension_cap = 1e4;
};

inline double hilbert_dimension(int nuclei, int photon_cutoff) {
    const double m = photon_cutoff + 1.0;
    return std::pow(static_cast<double>(kNuclearLevels), nuclei) * m * m;
}

inline void validate(const QuantumConfig& cfg) {
    if (cfg.nuclei < 0) throw InvalidParameters("quantum: nucleus count must be non-negative");
    if (cfg.nuclei > kMaxQuantumNuclei)
        throw ResourceCapExceeded("quantum: N = " + std::to_string(cfg.nuclei) + " exceeds the supported maximum of 3");
    if (cfg.photon_cutoff < 1) throw InvalidParameters("quantum: photon cutoff n_ph must be >= 1");
    const double dim = hilbert_dimension(cfg.nuclei, cfg.photon_cutoff);
    if (dim > cfg.dimension_cap)
        throw ResourceCapExceeded("quantum: Hilbert dimension 6^N (n_ph+1)^2 = " + std::to_string(static_cast<long>(dim)) +
                                  " exceeds cap " + std::to_string(static_cast<long>(cfg.dimension_cap)));
    validate(cfg.cavity);
    validate_geometry(cfg.geometry);
    validate(cfg.hyperfine);
    if (!(cfg.linewidth > 0.0)) throw InvalidParameters("quantum: linewidth must be positive");
    if (!std::isfinite(std::abs(cfg.coupling)) || !std::isfinite(std::abs(cfg.drive)))
        throw InvalidParameters("quantum: coupling and drive must be finite");
    if (!cfg.positions.empty() && static_cast<int>(cfg.positions.size()) != cfg.nuclei)
        throw InvalidParameters("quantum: positions must be empty or list one vector per nucleus");
}

/// Operators of the joint space, all embedded in the full tensor product.
struct QuantumModel {
    TensorLayout layout{{}};
    std::array<SpMat, 2> modes;                           // a1, a2
    std::vector<std::array<SpMat, kTransitionCount>> lowering;  // S_mu^- per nucleus
    std::vector<std::array<cplx, kTransitionCount>> couplings;  // g c_mu e^{i phi_n}
    DipoleSet dipoles;
    TransitionTable table;
    SpMat hamiltonian;
    std::vector<SpMat> collapse;
};

namespace detail {

inline Vec3 quantization_axis_for(const QuantumConfig& cfg) {
    if (cfg.hyperfine.axis) return *cfg.hyperfine.axis;
    return cfg.quantization_axis.value_or(default_quantization_axis(cfg.geometry));
}

inline cplx position_phase(const QuantumConfig& cfg, int n) {
    if (cfg.positions.empty()) return 1.0;
    return std::polar(1.0, cfg.cavity_wavevector.dot(cfg.positions[n]));
}

// H0 of one nucleus in the frame rotating at the probe frequency.
inline SpMat nuclear_site_hamiltonian(const QuantumConfig& cfg) {
    const auto e = level_energies(cfg.hyperfine);
    SpMat h(kNuclearLevels, kNuclearLevels);
    for (int g = 1; g <= kGroundLevels; ++g) h.insert(ground_level(g), ground_level(g)) = e.ground[g - 1];
    for (int x = 1; x <= kExcitedLevels; ++x)
        h.insert(excited_level(x), excited_level(x)) = e.excited[x - 1] - cfg.probe_detuning;
    return h;
}

// Nuclear sites (and, unless nuclei_only, the two modes) with the shared
// per-nucleus operators filled in.
inline QuantumModel nuclear_skeleton(const QuantumConfig& cfg, bool nuclei_only) {
    validate(cfg);
    QuantumModel m;
    std::vector<int> dims(cfg.nuclei, kNuclearLevels);
    if (!nuclei_only) {
        dims.push_back(cfg.photon_cutoff + 1);
        dims.push_back(cfg.photon_cutoff + 1);
    }
    m.layout = TensorLayout(dims);
    m.table = transition_table(cfg.hyperfine);
    m.dipoles = dipole_vectors(quantization_axis_for(cfg), polarization_layout(m.table));
    if (!nuclei_only) {
        const SpMat a = annihilation(cfg.photon_cutoff);
        m.modes = {m.layout.embed(a, cfg.nuclei), m.layout.embed(a, cfg.nuclei + 1)};
    }
    const SpMat h0 = nuclear_site_hamiltonian(cfg);
    m.hamiltonian = SpMat(m.layout.dimension(), m.layout.dimension());
    for (int n = 0; n < cfg.nuclei; ++n) {
        std::array<SpMat, kTransitionCount> s;
        std::array<cplx, kTransitionCount> g;
        for (int mu = 0; mu < kTransitionCount; ++mu) {
            const auto& t = m.table[mu];
            s[mu] = m.layout.embed(
                transition_operator(kNuclearLevels, ground_level(t.ground), excited_level(t.excited)), n);
            g[mu] = cfg.coupling * t.cg * position_phase(cfg, n);
        }
        m.lowering.push_back(std::move(s));
        m.couplings.push_back(g);
        m.hamiltonian += m.layout.embed(h0, n);
        const double rate = std::sqrt(cfg.linewidth);
        for (int mu = 0; mu < kTransitionCount; ++mu) m.collapse.push_back(rate * m.table[mu].cg * m.lowering[n][mu]);
    }
    return m;
}

}  // namespace detail

/// Hamiltonian and collapse operators of the full model.
inline QuantumModel build_model(const QuantumConfig& cfg) {
    QuantumModel m = detail::nuclear_skeleton(cfg, false);
    const cplx i(0.0, 1.0);
    const auto& f = cfg.geometry.frame;
    const std::array<Vec3C, 2> pol = {f.a1, f.a2};
    const double sr = std::sqrt(2.0 * cfg.cavity.kappa_r);
    for (int j = 0; j < 2; ++j) {
        const SpMat& a = m.modes[j];
        const SpMat ad = a.adjoint();
        const cplx eps = hdot(pol[j], cfg.geometry.a_in) * cfg.drive;
        m.hamiltonian += cfg.cavity_detuning * SpMat(ad * a);
        m.hamiltonian += i * sr * (eps * ad - std::conj(eps) * a);
        for (int n = 0; n < cfg.nuclei; ++n)
            for (int mu = 0; mu < kTransitionCount; ++mu) {
                const cplx w = hdot(m.dipoles[mu], pol[j]) * m.couplings[n][mu];
                if (w == 0.0) continue;
                const SpMat raise_absorb = SpMat(m.lowering[n][mu].adjoint()) * a;
                m.hamiltonian += w * raise_absorb;
                m.hamiltonian += std::conj(w) * SpMat(raise_absorb.adjoint());
            }
        m.collapse.push_back(std::sqrt(2.0 * cfg.cavity.kappa) * a);
    }
    drop_zeros(m.hamiltonian);
    m.hamiltonian.makeCompressed();
    return m;
}

inline SpMat build_hamiltonian(const QuantumConfig& cfg) { return build_model(cfg).hamiltonian; }

inline Liouvillian build_liouvillian(const QuantumConfig& cfg) {
    const auto m = build_model(cfg);
    return make_liouvillian(m.hamiltonian, m.collapse);
}

enum class OutputChannel { reflection, transmission };

/// a_out (reflection, including the directly reflected c-number part) or
/// b_out (transmission) as an operator on the joint space.
inline SpMat output_operator(const QuantumModel& m, const QuantumConfig& cfg, OutputChannel channel) {
    const auto& f = cfg.geometry.frame;
    const Vec3C& out = cfg.geometry.a_out;
    const bool refl = channel == OutputChannel::reflection;
    const double rate = std::sqrt(2.0 * (refl ? cfg.cavity.kappa_r : cfg.cavity.kappa_t));
    SpMat op = rate * (hdot(out, f.a1) * m.modes[0] + hdot(out, f.a2) * m.modes[1]);
    if (refl) op -= cfg.drive * hdot(out, cfg.geometry.a_in) * sparse_identity(op.rows());
    drop_zeros(op);
    return op;
}

struct Observables {
    cplx reflection;
    cplx transmission;
    double cavity_occupation;  // <a1^+ a1> + <a2^+ a2>
};

inline Observables observables(const DensityMatrix& rho, const QuantumConfig& cfg) {
    if (cfg.drive == 0.0) throw UndefinedObservable("observables: R and T are undefined for a_in = 0");
    const auto m = build_model(cfg);
    if (rho.rows() != m.layout.dimension()) throw InvalidParameters("observables: density matrix dimension mismatch");
    Observables o;
    o.reflection = expectation(output_operator(m, cfg, OutputChannel::reflection), rho) / cfg.drive;
    o.transmission = expectation(output_operator(m, cfg, OutputChannel::transmission), rho) / cfg.drive;
    o.cavity_occupation = 0.0;
    for (const auto& a : m.modes) o.cavity_occupation += expectation(SpMat(SpMat(a.adjoint()) * a), rho).real();
    return o;
}

/// Steady-state reflectance of the full model at the configured detunings.
inline cplx quantum_reflectance(const QuantumConfig& cfg) {
    return observables(steady_state(build_liouvillian(cfg)), cfg).reflection;
}

/// g2(tau) of the reflected field by quantum regression: propagate
/// a_out rho_ss a_out^+ and read off <a_out^+ a_out>.
inline std::vector<double> g2(const Liouvillian& l, const DensityMatrix& rho_ss, std::span<const double> taus,
                              const QuantumConfig& cfg, const EvolutionOptions& opts = {}) {
    const auto m = build_model(cfg);
    if (m.layout.dimension() != l.dimension) throw InvalidParameters("g2: generator does not match the configuration");
    const SpMat a = output_operator(m, cfg, OutputChannel::reflection);
    const SpMat n_out = SpMat(a.adjoint()) * a;
    const double n = expectation(n_out, rho_ss).real();
    // Exact cancellation (critical coupling) leaves roundoff of order 1e-16
    // relative to the fields that cancel.
    double scale = std::norm(cfg.drive);
    for (const auto& mode : m.modes) scale += 2.0 * cfg.cavity.kappa_r * expectation(SpMat(SpMat(mode.adjoint()) * mode), rho_ss).real();
    if (!(n > 1e-14 * scale)) throw UndefinedObservable("g2: <a_out^+ a_out> vanishes; correlation undefined");
    const DenseMat conditioned = a * rho_ss * SpMat(a.adjoint());
    const auto traj = time_evolve(conditioned, taus, l, opts);
    std::vector<double> out;
    out.reserve(traj.size());
    for (const auto& r : traj) out.push_back(expectation(n_out, r).real() / (n * n));
    return out;
}

/// |g2(0; n_ph) - g2(0; n_ph + 1)|: how much the Fock truncation still matters.
inline double g2_truncation_indicator(const QuantumConfig& cfg) {
    auto at = [](QuantumConfig c) {
        const auto l = build_liouvillian(c);
        const auto rho = steady_state(l);
        const double tau0 = 0.0;
        return g2(l, rho, std::span<const double>(&tau0, 1), c).front();
    };
    QuantumConfig next = cfg;
    next.photon_cutoff += 1;
    next.dimension_cap = std::max(cfg.dimension_cap, hilbert_dimension(next.nuclei, next.photon_cutoff));
    return std::abs(at(cfg) - at(next));
}

// ---------------------------------------------------------------------------
// Nuclear-only model with the cavity modes eliminated

struct EliminatedModel {
    Liouvillian liouvillian;
    std::array<SpMat, 2> collective;  // X_1, X_2
    EffectiveConstants constants;
    double cavity_ratio = 0.0;  // kappa / (sqrt(N) |g|)
    bool bad_cavity = true;     // ratio >= 10
};

inline constexpr double kBadCavityRatio = 10.0;

inline EliminatedModel eliminated_dynamics(const QuantumConfig& cfg) {
    QuantumModel m = detail::nuclear_skeleton(cfg, true);
    const auto& f = cfg.geometry.frame;
    const std::array<Vec3C, 2> pol = {f.a1, f.a2};
    const auto ec = effective_constants(cfg.cavity, cfg.cavity_detuning, cfg.drive);
    const Eigen::Index d = m.layout.dimension();

    EliminatedModel em;
    em.constants = ec;
    for (int j = 0; j < 2; ++j) {
        SpMat x(d, d);
        for (int n = 0; n < cfg.nuclei; ++n)
            for (int mu = 0; mu < kTransitionCount; ++mu)
                x += hdot(pol[j], m.dipoles[mu]) * std::conj(m.couplings[n][mu]) * m.lowering[n][mu];
        drop_zeros(x);
        const SpMat xd = x.adjoint();
        const cplx omega = ec.rabi * hdot(pol[j], cfg.geometry.a_in);
        m.hamiltonian += omega * xd + std::conj(omega) * x;
        if (ec.lamb_shift != 0.0) m.hamiltonian += ec.lamb_shift * SpMat(xd * x);
        m.collapse.push_back(std::sqrt(2.0 * ec.decay) * x);
        em.collective[j] = std::move(x);
    }
    drop_zeros(m.hamiltonian);
    em.liouvillian = make_liouvillian(m.hamiltonian, m.collapse);
    const double coupling = std::sqrt(static_cast<double>(cfg.nuclei)) * std::abs(cfg.coupling);
    em.cavity_ratio = coupling > 0.0 ? cfg.cavity.kappa / coupling : std::numeric_limits<double>::infinity();
    em.bad_cavity = em.cavity_ratio >= kBadCavityRatio;
    return em;
}

inline cplx eliminated_reflectance(const EliminatedModel& em, const DensityMatrix& rho, const QuantumConfig& cfg) {
    if (cfg.drive == 0.0) throw UndefinedObservable("eliminated_reflectance: R is undefined for a_in = 0");
    const auto& f = cfg.geometry.frame;
    const cplx sum = hdot(cfg.geometry.a_out, f.a1) * expectation(em.collective[0], rho) +
                     hdot(cfg.geometry.a_out, f.a2) * expectation(em.collective[1], rho);
    const cplx factor = cplx(0.0, -1.0) * std::sqrt(2.0 * cfg.cavity.kappa_r) /
                        (cplx(cfg.cavity.kappa, cfg.cavity_detuning) * cfg.drive);
    return electronic_reflection(cfg.cavity, cfg.cavity_detuning, cfg.geometry.a_in, cfg.geometry.a_out) +
           factor * sum;
}

inline cplx eliminated_model_reflectance(const QuantumConfig& cfg) {
    const auto em = eliminated_dynamics(cfg);
    return eliminated_reflectance(em, steady_state(em.liouvillian), cfg);
}

/// Collective linear response with the same N|g|^2 and an even ground split.
inline cplx matched_linear_reflectance(const QuantumConfig& cfg) {
    CouplingParams c;
    c.g = cfg.coupling;
    c.n = cfg.nuclei;
    c.n1 = c.n2 = cfg.nuclei / 2.0;
    SystemOptions opts;
    opts.drive = cfg.drive;
    opts.linewidth = cfg.linewidth;
    opts.quantization_axis = cfg.quantization_axis;
    return reflectance(build_effective_system(cfg.geometry, cfg.cavity, cfg.hyperfine, c, cfg.cavity_detuning, opts),
                       cfg.probe_detuning);
}

struct CrosscheckReport {
    std::vector<double> detunings;
    std::vector<cplx> full;
    std::vector<cplx> eliminated;
    std::vector<cplx> linear;
    double full_vs_linear = 0.0;        // max |R_a - R_b| / |R_b|
    double eliminated_vs_linear = 0.0;
    double full_vs_eliminated = 0.0;
    double max_cavity_occupation = 0.0;
    double scaling_exponent = 0.0;      // of the nuclear part of <a_out>, vs a_in
    double halving_change = 0.0;        // |R(a_in) - R(a_in/2)|
    bool nonlinear = false;
    bool bad_cavity = true;
};

inline constexpr double kNonlinearExponentTolerance = 1e-2;

inline CrosscheckReport weak_drive_crosscheck(const QuantumConfig& cfg, std::span<const double> detunings) {
    if (cfg.nuclei < 1) throw InvalidParameters("crosscheck: needs at least one nucleus");
    if (cfg.drive == 0.0) throw InvalidParameters("crosscheck: needs a nonzero drive");
    require_monotone(detunings);
    CrosscheckReport rep;
    auto rel = [](cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    for (double d : detunings) {
        QuantumConfig c = cfg;
        c.probe_detuning = d;
        const auto l = build_liouvillian(c);
        const auto o = observables(steady_state(l), c);
        const cplx el = eliminated_model_reflectance(c);
        const cplx lin = matched_linear_reflectance(c);
        rep.detunings.push_back(d);
        rep.full.push_back(o.reflection);
        rep.eliminated.push_back(el);
        rep.linear.push_back(lin);
        rep.full_vs_linear = std::max(rep.full_vs_linear, rel(o.reflection, lin));
        rep.eliminated_vs_linear = std::max(rep.eliminated_vs_linear, rel(el, lin));
        rep.full_vs_eliminated = std::max(rep.full_vs_eliminated, rel(o.reflection, el));
        rep.max_cavity_occupation = std::max(rep.max_cavity_occupation, o.cavity_occupation);
    }
    rep.bad_cavity = eliminated_dynamics(cfg).bad_cavity;

    // Scaling of the nuclear signal at the point where it is largest.
    const cplx r_el = electronic_reflection(cfg.cavity, cfg.cavity_detuning, cfg.geometry.a_in, cfg.geometry.a_out);
    std::size_t k = 0;
    for (std::size_t i = 1; i < rep.full.size(); ++i)
        if (std::abs(rep.full[i] - r_el) > std::abs(rep.full[k] - r_el)) k = i;
    QuantumConfig half = cfg;
    half.probe_detuning = rep.detunings.at(k);
    half.drive = cfg.drive / 2.0;
    const cplx r_half = quantum_reflectance(half);
    const double signal = std::abs(cfg.drive * (rep.full[k] - r_el));
    const double signal_half = std::abs(half.drive * (r_half - r_el));
    rep.scaling_exponent = std::log2(signal / signal_half);
    rep.halving_change = std::abs(rep.full[k] - r_half);
    rep.nonlinear = !(std::abs(rep.scaling_exponent - 1.0) <= kNonlinearExponentTolerance);
    return rep;
}

}  // namespace nuqo
