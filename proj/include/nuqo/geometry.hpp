#pragma once

// Lab-frame geometry: the beam/surface triad, the transverse projector, and
// the transition dipole vectors of the nuclei.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "nuqo/errors.hpp"

namespace nuqo {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Vec3C = Eigen::Vector3cd;
using Mat3C = Eigen::Matrix3cd;

inline constexpr int kTransitionCount = 6;
using Vec6 = Eigen::Matrix<double, kTransitionCount, 1>;
using Vec6C = Eigen::Matrix<cplx, kTransitionCount, 1>;
using Mat6C = Eigen::Matrix<cplx, kTransitionCount, kTransitionCount>;

inline constexpr double kUnitTolerance = 1e-12;

enum class Polarization { sigma_minus, pi, sigma_plus };

inline const char* to_string(Polarization p) {
    switch (p) {
        case Polarization::sigma_minus: return "sigma-";
        case Polarization::pi: return "pi0";
        case Polarization::sigma_plus: return "sigma+";
    }
    return "?";
}

inline Vec3C complexify(const Vec3& v) { return v.cast<cplx>(); }

// Hermitian scalar product a* . b.
inline cplx hdot(const Vec3C& a, const Vec3C& b) { return a.dot(b); }

inline bool is_unit(const Vec3C& v, double tol = kUnitTolerance) {
    return std::abs(v.squaredNorm() - 1.0) <= tol;
}

/// Beam propagation k, surface normal a1 and a2 = a1 x k.
struct Frame {
    Vec3C k;
    Vec3C a1;
    Vec3C a2;
};

/// Hermitian, idempotent rank-2 projector onto the plane transverse to k.
class ProjectionTensor {
public:
    ProjectionTensor() = default;
    explicit ProjectionTensor(const Mat3C& m) : m_(m) {}

    const Mat3C& matrix() const noexcept { return m_; }

    // lhs* . P . rhs
    cplx sandwich(const Vec3C& lhs, const Vec3C& rhs) const { return lhs.dot(m_ * rhs); }

private:
    Mat3C m_ = Mat3C::Identity();
};

struct ExperimentGeometry {
    Frame frame;
    Vec3C a_in;
    Vec3C a_out;
    std::optional<Vec3> magnetization;  // absent for unmagnetized layers
};

/// Orthonormal triad from the surface normal and the propagation direction.
/// A normal that is not exactly perpendicular to the beam is Gram-Schmidt
/// corrected; the grazing angle is ignored for the polarization plane.
inline Frame build_frame(const Vec3& surface_normal, const Vec3& propagation) {
    const double pn = propagation.norm();
    const double nn = surface_normal.norm();
    if (!(pn > 0.0) || !(nn > 0.0) || !std::isfinite(pn) || !std::isfinite(nn))
        throw InvalidGeometry("build_frame: zero or non-finite input vector");
    const Vec3 k = propagation / pn;
    const Vec3 n = surface_normal / nn;
    Vec3 a1 = n - n.dot(k) * k;
    if (a1.norm() < 1e-9) throw InvalidGeometry("build_frame: surface normal parallel to propagation");
    a1.normalize();
    const Vec3 a2 = a1.cross(k);
    return {complexify(k), complexify(a1), complexify(a2)};
}

inline ProjectionTensor transverse_projector(const Vec3C& k) {
    if (!is_unit(k)) throw InvalidGeometry("transverse_projector: propagation vector is not a unit vector");
    return ProjectionTensor(Mat3C::Identity() - k * k.adjoint());
}

/// Right-handed frame (x_B, y_B, B). x_B comes from Gram-Schmidt against the
/// lab x axis, or the lab y axis when B is (nearly) along x.
struct QuantizationFrame {
    Vec3 x;
    Vec3 y;
    Vec3 z;
};

inline QuantizationFrame quantization_frame(const Vec3& axis) {
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidGeometry("quantization axis must be a nonzero vector");
    const Vec3 b = axis / n;
    Vec3 ref = Vec3::UnitX();
    if (std::abs(b.dot(ref)) > 0.9) ref = Vec3::UnitY();
    Vec3 x = ref - ref.dot(b) * b;
    x.normalize();
    return {x, b.cross(x), b};
}

/// Spherical basis vector for a transition class (Condon-Shortley phases).
inline Vec3C spherical_unit_vector(Polarization p, const QuantizationFrame& f) {
    const cplx i(0.0, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    switch (p) {
        case Polarization::pi: return complexify(f.z);
        case Polarization::sigma_plus: return -s * (complexify(f.x) + i * complexify(f.y));
        case Polarization::sigma_minus: return s * (complexify(f.x) - i * complexify(f.y));
    }
    return Vec3C::Zero();
}

using DipoleSet = std::array<Vec3C, kTransitionCount>;
using PolarizationLayout = std::array<Polarization, kTransitionCount>;

// Table ordering of the 57Fe M1 lines.
inline constexpr PolarizationLayout kFe57Polarizations = {
    Polarization::sigma_minus, Polarization::pi, Polarization::sigma_plus,
    Polarization::sigma_minus, Polarization::pi, Polarization::sigma_plus};

inline DipoleSet dipole_vectors(const Vec3& axis, const PolarizationLayout& layout = kFe57Polarizations) {
    const auto f = quantization_frame(axis);
    DipoleSet d;
    for (int mu = 0; mu < kTransitionCount; ++mu) d[mu] = spherical_unit_vector(layout[mu], f);
    return d;
}

inline void check_transition_index(int mu) {
    if (mu < 1 || mu > kTransitionCount)
        throw std::out_of_range("transition index " + std::to_string(mu) + " outside 1..6");
}

/// c_mu c_nu (d_mu* . P . d_nu) for 1-based transition indices.
inline cplx geometry_coupling(int mu, int nu, const ProjectionTensor& p, const DipoleSet& dipoles,
                              std::span<const double, kTransitionCount> cg) {
    check_transition_index(mu);
    check_transition_index(nu);
    return cg[mu - 1] * cg[nu - 1] * p.sandwich(dipoles[mu - 1], dipoles[nu - 1]);
}

/// Full 6x6 Gram matrix G_{mu nu}; Hermitian and positive semidefinite.
inline Mat6C coupling_matrix(const ProjectionTensor& p, const DipoleSet& dipoles,
                             std::span<const double, kTransitionCount> cg) {
    Mat6C g;
    for (int mu = 0; mu < kTransitionCount; ++mu)
        for (int nu = 0; nu < kTransitionCount; ++nu)
            g(mu, nu) = cg[mu] * cg[nu] * p.sandwich(dipoles[mu], dipoles[nu]);
    return g;
}

/// Checks the triad and that both polarizations are transverse unit vectors.
inline void validate_geometry(const ExperimentGeometry& g) {
    const auto& f = g.frame;
    if (!is_unit(f.k) || !is_unit(f.a1) || !is_unit(f.a2))
        throw InvalidGeometry("frame vectors must be unit vectors");
    if (std::abs(hdot(f.k, f.a1)) > kUnitTolerance) throw InvalidGeometry("a1 not orthogonal to k");
    if ((f.a2 - f.a1.cross(f.k)).norm() > kUnitTolerance) throw InvalidGeometry("a2 != a1 x k");
    auto unit = [](const Vec3C& v, const char* name) {
        if (!is_unit(v))
            throw InvalidGeometry(std::string(name) + " is not a unit vector (norm " + std::to_string(v.norm()) +
                                  "); divide it by its norm");
    };
    unit(g.a_in, "a_in");
    unit(g.a_out, "a_out");
    if (std::abs(hdot(f.k, g.a_in)) > kUnitTolerance) throw InvalidGeometry("a_in not transverse to k");
    if (std::abs(hdot(f.k, g.a_out)) > kUnitTolerance) throw InvalidGeometry("a_out not transverse to k");
    if (g.magnetization && std::abs(g.magnetization->norm() - 1.0) > kUnitTolerance)
        throw InvalidGeometry("magnetization axis is not a unit vector");
}

}  // namespace nuqo
