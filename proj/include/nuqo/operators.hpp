#pragma once

// Sparse operator and superoperator plumbing for Lindblad generators.
// Density matrices are vectorized column-major: vec(A rho B) = (B^T (x) A) vec(rho).

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>
#ifdef NUQO_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "nuqo/errors.hpp"

namespace nuqo {

using SpMat = Eigen::SparseMatrix<std::complex<double>>;
using DenseMat = Eigen::MatrixXcd;
using DenseVec = Eigen::VectorXcd;
using DensityMatrix = Eigen::MatrixXcd;

// UMFPACK factors Liouvillian-sized systems several times faster than
// Eigen's supernodal LU; either gives the same results to roundoff.
#ifdef NUQO_HAVE_UMFPACK
using SparseLuSolver = Eigen::UmfPackLU<SpMat>;
#else
using SparseLuSolver = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;
#endif

inline SpMat sparse_identity(Eigen::Index n) {
    SpMat m(n, n);
    m.setIdentity();
    return m;
}

inline SpMat annihilation(int cutoff) {
    SpMat a(cutoff + 1, cutoff + 1);
    std::vector<Eigen::Triplet<std::complex<double>>> t;
    for (int n = 1; n <= cutoff; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

inline void drop_zeros(SpMat& m) {
    m.prune([](Eigen::Index, Eigen::Index, const std::complex<double>& v) { return v != 0.0; });
}

// |row><col| on a d-level site.
inline SpMat transition_operator(int d, int row, int col) {
    SpMat m(d, d);
    m.insert(row, col) = 1.0;
    return m;
}

/// Tensor-product layout: the operator `op` acting on `site`, identity elsewhere.
class TensorLayout {
public:
    explicit TensorLayout(std::vector<int> dims) : dims_(std::move(dims)) {}

    Eigen::Index dimension() const {
        Eigen::Index d = 1;
        for (int x : dims_) d *= x;
        return d;
    }

    SpMat embed(const SpMat& op, std::size_t site) const {
        SpMat out = sparse_identity(1);
        for (std::size_t s = 0; s < dims_.size(); ++s) {
            const SpMat factor = (s == site) ? op : sparse_identity(dims_[s]);
            out = SpMat(Eigen::kroneckerProduct(out, factor));
        }
        return out;
    }

    const std::vector<int>& dims() const noexcept { return dims_; }

private:
    std::vector<int> dims_;
};

struct Liouvillian {
    SpMat generator;          // acts on column-major vec(rho)
    Eigen::Index dimension;   // Hilbert-space dimension
};

/// L rho = -i[H, rho] + sum_k (C rho C^+ - 1/2 {C^+ C, rho}).
inline Liouvillian make_liouvillian(const SpMat& h, std::span<const SpMat> collapse) {
    const Eigen::Index d = h.rows();
    const SpMat id = sparse_identity(d);
    const std::complex<double> i(0.0, 1.0);
    SpMat l = -i * SpMat(Eigen::kroneckerProduct(id, h)) + i * SpMat(Eigen::kroneckerProduct(SpMat(h.transpose()), id));
    for (const auto& c : collapse) {
        const SpMat cdc = SpMat(c.adjoint()) * c;
        l += SpMat(Eigen::kroneckerProduct(SpMat(c.conjugate()), c));
        l -= 0.5 * SpMat(Eigen::kroneckerProduct(id, cdc));
        l -= 0.5 * SpMat(Eigen::kroneckerProduct(SpMat(cdc.transpose()), id));
    }
    l.makeCompressed();
    return {l, d};
}

inline DenseVec vectorize(const DenseMat& rho) { return Eigen::Map<const DenseVec>(rho.data(), rho.size()); }

inline DenseMat unvectorize(const DenseVec& v, Eigen::Index d) { return Eigen::Map<const DenseMat>(v.data(), d, d); }

inline DenseMat apply_liouvillian(const Liouvillian& l, const DenseMat& rho) {
    return unvectorize(l.generator * vectorize(rho), l.dimension);
}

inline std::complex<double> expectation(const SpMat& op, const DenseMat& rho) {
    // tr(op rho)
    std::complex<double> acc = 0.0;
    for (Eigen::Index k = 0; k < op.outerSize(); ++k)
        for (SpMat::InnerIterator it(op, k); it; ++it) acc += it.value() * rho(it.col(), it.row());
    return acc;
}

struct EvolutionOptions {
    double tolerance = 1e-9;   // local error per step, relative to max |rho_ij|
    double min_step = 1e-14;   // relative to the interval being integrated
    std::size_t max_steps = 2'000'000;
};

/// Stiffly accurate, L-stable SDIRK of order 4 (gamma = 1/4, five stages) with
/// an embedded order-3 solution for error control. The generator is constant,
/// so one LU of (1 - h gamma L) serves every stage; steps are powers of two so
/// factorizations get reused.
class SdirkPropagator {
public:
    SdirkPropagator(const SpMat& generator, EvolutionOptions opts) : l_(generator), opts_(opts) {}

    void advance(DenseVec& y, double span) {
        if (span <= 0.0) return;
        double t = 0.0;
        double h = h_ > 0.0 ? h_ : initial_step(span);
        const double h_min = opts_.min_step * span;
        DenseVec next(y.size());
        while (t < span) {
            const double remaining = span - t;
            const bool clipped = h >= remaining;
            const double hs = clipped ? remaining : h;
            const double scale = std::max(y.cwiseAbs().maxCoeff(), 1e-300);
            const double err = step(y, hs, next) / scale;
            if (!std::isfinite(err)) throw IntegratorError("time_evolve: non-finite state at t=" + std::to_string(t));
            if (err <= opts_.tolerance) {
                y.swap(next);
                t = clipped ? span : t + hs;
                if (++steps_ > opts_.max_steps) throw IntegratorError("time_evolve: step budget exhausted");
                if (!clipped && err < opts_.tolerance / 32.0) h = 2.0 * hs;
            } else {
                h = quantize(hs) < hs ? quantize(hs) : hs / 2.0;
                if (h < h_min)
                    throw IntegratorError("time_evolve: step size underflow (h=" + std::to_string(h) +
                                          ", t=" + std::to_string(t) + ", err=" + std::to_string(err) + ")");
            }
        }
        h_ = h;
    }

    std::size_t steps() const noexcept { return steps_; }
    std::size_t factorizations() const noexcept { return factorizations_; }

private:
    using Lu = SparseLuSolver;

    static double quantize(double h) { return std::exp2(std::floor(std::log2(h))); }

    double initial_step(double span) const {
        double rate = 0.0;
        for (Eigen::Index k = 0; k < l_.outerSize(); ++k)
            for (SpMat::InnerIterator it(l_, k); it; ++it) rate = std::max(rate, std::abs(it.value()));
        return rate > 0.0 ? std::min(span, quantize(0.1 / rate)) : span;
    }

    // The solver may keep referring to the matrix it factored, so both live
    // together in the cache.
    struct Factored {
        SpMat matrix;
        Lu lu;
    };

    Lu& factor(double h) {
        auto it = cache_.find(h);
        if (it != cache_.end()) return it->second->lu;
        if (cache_.size() > 48) cache_.clear();
        auto f = std::make_unique<Factored>();
        f->matrix = sparse_identity(l_.rows()) - (h * kGamma) * l_;
        f->matrix.makeCompressed();
        f->lu.compute(f->matrix);
        if (f->lu.info() != Eigen::Success) throw IntegratorError("time_evolve: implicit stage matrix is singular");
        ++factorizations_;
        return cache_.emplace(h, std::move(f)).first->second->lu;
    }

    // One step of size h from y into out; returns the max-norm error estimate.
    double step(const DenseVec& y, double h, DenseVec& out) {
        static constexpr double a[5][4] = {
            {0, 0, 0, 0},
            {1.0 / 2, 0, 0, 0},
            {17.0 / 50, -1.0 / 25, 0, 0},
            {371.0 / 1360, -137.0 / 2720, 15.0 / 544, 0},
            {25.0 / 24, -49.0 / 48, 125.0 / 16, -85.0 / 12},
        };
        static constexpr double b_low[5] = {59.0 / 48, -17.0 / 96, 225.0 / 32, -85.0 / 12, 0.0};
        Lu& lu = factor(h);
        std::array<DenseVec, 5> k;
        DenseVec stage(y.size());
        for (int i = 0; i < 5; ++i) {
            stage = y;
            for (int j = 0; j < i; ++j) stage += (h * a[i][j]) * k[j];
            k[i] = lu.solve(DenseVec(l_ * stage));
        }
        // Stiffly accurate: the last stage value is the order-4 solution.
        out = stage + (h * kGamma) * k[4];
        DenseVec diff = DenseVec::Zero(y.size());
        for (int i = 0; i < 5; ++i) {
            const double bi = (i < 4 ? a[4][i] : kGamma) - b_low[i];
            if (bi != 0.0) diff += (h * bi) * k[i];
        }
        return diff.cwiseAbs().maxCoeff();
    }

    static constexpr double kGamma = 0.25;

    const SpMat& l_;
    EvolutionOptions opts_;
    std::map<double, std::unique_ptr<Factored>> cache_;
    double h_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t factorizations_ = 0;
};

/// rho(t) on a non-decreasing grid of times t >= 0, starting from rho(0) = rho0.
inline std::vector<DenseMat> time_evolve(const DenseMat& rho0, std::span<const double> times, const Liouvillian& l,
                                         const EvolutionOptions& opts = {}) {
    if (rho0.rows() != l.dimension || rho0.cols() != l.dimension)
        throw InvalidParameters("time_evolve: density matrix dimension does not match the generator");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0)) throw InvalidParameters("time_evolve: times must be non-negative");
        if (i > 0 && times[i] < times[i - 1]) throw InvalidParameters("time_evolve: times must be non-decreasing");
    }
    SdirkPropagator prop(l.generator, opts);
    std::vector<DenseMat> out;
    out.reserve(times.size());
    DenseVec y = vectorize(rho0);
    double t = 0.0;
    for (double target : times) {
        prop.advance(y, target - t);
        t = target;
        out.push_back(unvectorize(y, l.dimension));
    }
    return out;
}

struct SteadyStateOptions {
    double residual_tolerance = 1e-10;  // on ||L rho||_inf relative to max|L_ij|
    Eigen::Index iterative_above = 2000;  // Hilbert dimension above which BiCGSTAB is used
};

/// Null vector of L normalized to unit trace: the (0,0) equation is replaced
/// by tr(rho) = 1. A rank-deficient system means more than one stationary state.
inline DensityMatrix steady_state(const Liouvillian& l, const SteadyStateOptions& opts = {}) {
    const Eigen::Index d = l.dimension;
    SpMat m = l.generator;
    m.prune([](Eigen::Index row, Eigen::Index, const std::complex<double>&) { return row != 0; });
    SpMat trace_row(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i) trace_row.insert(0, i + i * d) = 1.0;
    m += trace_row;
    m.makeCompressed();
    DenseVec rhs = DenseVec::Zero(d * d);
    rhs[0] = 1.0;

    DenseVec x;
    if (d > opts.iterative_above) {
        Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<std::complex<double>>> solver;
        solver.setTolerance(1e-14);
        solver.setMaxIterations(20000);
        solver.compute(m);
        if (solver.info() != Eigen::Success) throw AmbiguousSteadyState("steady_state: preconditioner failed");
        x = solver.solve(rhs);
        if (solver.info() != Eigen::Success) throw AmbiguousSteadyState("steady_state: iterative solve did not converge");
    } else {
        SparseLuSolver lu;
        lu.compute(m);
        if (lu.info() != Eigen::Success)
            throw AmbiguousSteadyState("steady_state: generator has a degenerate null space (singular trace-augmented system)");
        x = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw AmbiguousSteadyState("steady_state: solve failed");
    }
    if (!x.allFinite()) throw AmbiguousSteadyState("steady_state: degenerate null space (non-finite solution)");

    DenseMat rho = unvectorize(x, d);
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    double lmax = 0.0;
    for (Eigen::Index k = 0; k < l.generator.outerSize(); ++k)
        for (SpMat::InnerIterator it(l.generator, k); it; ++it) lmax = std::max(lmax, std::abs(it.value()));
    const double residual = (l.generator * x).cwiseAbs().maxCoeff();
    if (rho.cwiseAbs().maxCoeff() > 1.0 + 1e-6 || herm > 1e-6 ||
        residual > opts.residual_tolerance * std::max(1.0, lmax))
        throw AmbiguousSteadyState("steady_state: no unique physical null vector (residual " +
                                   std::to_string(residual) + ", hermiticity " + std::to_string(herm) + ")");
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return rho;
}

}  // namespace nuqo
