#include <catch_amalgamated.hpp>

#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "nuqo/operators.hpp"

using namespace nuqo;
using Catch::Matchers::WithinAbs;

namespace {

using C = std::complex<double>;

DenseMat random_matrix(std::mt19937_64& rng, Eigen::Index d, double scale) {
    std::normal_distribution<double> n;
    DenseMat m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = scale * C(n(rng), n(rng));
    return m;
}

DenseMat random_density(std::mt19937_64& rng, Eigen::Index d) {
    const DenseMat a = random_matrix(rng, d, 1.0);
    DenseMat rho = a * a.adjoint();
    return rho / rho.trace();
}

// Driven, damped two-level atom: H = (w/2) sz + (Omega/2) sx, C = sqrt(g) sigma-.
Liouvillian qubit(double w, double omega, double g) {
    SpMat h(2, 2), c(2, 2);
    h.insert(0, 0) = -w / 2;
    h.insert(1, 1) = w / 2;
    h.insert(0, 1) = omega / 2;
    h.insert(1, 0) = omega / 2;
    c.insert(0, 1) = std::sqrt(g);
    const std::vector<SpMat> cs = {c};
    return make_liouvillian(h, cs);
}

}  // namespace

TEST_CASE("annihilation operator on a truncated Fock space") {
    const SpMat a = annihilation(3);
    CHECK(a.rows() == 4);
    const DenseMat n = DenseMat(SpMat(a.adjoint()) * a);
    for (int k = 0; k < 4; ++k) CHECK_THAT(n(k, k).real(), WithinAbs(k, 1e-15));
    CHECK(n.isDiagonal());
}

TEST_CASE("tensor layout embeds operators site by site") {
    const TensorLayout layout({2, 3});
    CHECK(layout.dimension() == 6);
    const SpMat x = transition_operator(2, 0, 1);
    const DenseMat e = DenseMat(layout.embed(x, 0));
    // |0><1| on the first factor, identity on the second
    for (int k = 0; k < 3; ++k) CHECK(e(k, 3 + k) == C(1.0));
    CHECK(e.cwiseAbs().sum() == 3.0);
}

TEST_CASE("Liouvillian matches the Lindblad formula") {
    std::mt19937_64 rng(1);
    const Eigen::Index d = 5;
    const DenseMat hr = random_matrix(rng, d, 1.0);
    const DenseMat h = hr + hr.adjoint();
    const DenseMat c1 = random_matrix(rng, d, 0.7), c2 = random_matrix(rng, d, 0.3);
    const std::vector<SpMat> cs = {c1.sparseView(), c2.sparseView()};
    const auto l = make_liouvillian(h.sparseView(), cs);
    const DenseMat rho = random_density(rng, d);
    const C i(0.0, 1.0);
    DenseMat want = -i * (h * rho - rho * h);
    for (const DenseMat& c : {c1, c2})
        want += c * rho * c.adjoint() - 0.5 * (c.adjoint() * c * rho + rho * c.adjoint() * c);
    CHECK((apply_liouvillian(l, rho) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Lindblad generator is trace preserving") {
    std::mt19937_64 rng(2);
    const Eigen::Index d = 6;
    const DenseMat hr = random_matrix(rng, d, 100.0);
    const DenseMat c = random_matrix(rng, d, 10.0);
    const std::vector<SpMat> cs = {c.sparseView()};
    const auto l = make_liouvillian(DenseMat(hr + hr.adjoint()).sparseView(), cs);
    for (int t = 0; t < 100; ++t) CHECK(std::abs(apply_liouvillian(l, random_density(rng, d)).trace()) < 1e-12);
}

TEST_CASE("vectorization is column major") {
    DenseMat m(2, 2);
    m << 1, 2, 3, 4;
    const DenseVec v = vectorize(m);
    CHECK(v[1] == C(3.0));
    CHECK(v[2] == C(2.0));
    CHECK(unvectorize(v, 2) == m);
}

TEST_CASE("steady state of a driven two-level atom") {
    const double w = 0.3, omega = 0.8, g = 1.0;
    const auto l = qubit(w, omega, g);
    const DenseMat rho = steady_state(l);
    // optical Bloch steady-state excited population
    const double pe = (omega * omega / 4) / (w * w + g * g / 4 + omega * omega / 2);
    CHECK_THAT(rho(1, 1).real(), WithinAbs(pe, 1e-12));
    CHECK_THAT(rho.trace().real(), WithinAbs(1.0, 1e-14));
    CHECK(apply_liouvillian(l, rho).cwiseAbs().maxCoeff() < 1e-12);

    SteadyStateOptions it;
    it.iterative_above = 0;
    CHECK((steady_state(l, it) - rho).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("undamped generator has no unique steady state") {
    SpMat h(2, 2);
    h.insert(0, 0) = 1.0;
    const auto l = make_liouvillian(h, {});
    CHECK_THROWS_AS(steady_state(l), AmbiguousSteadyState);
}

TEST_CASE("zero generator leaves rho unchanged") {
    std::mt19937_64 rng(4);
    const Liouvillian l{SpMat(9, 9), 3};
    const DenseMat rho = random_density(rng, 3);
    const std::vector<double> t = {0.0, 1.0, 100.0};
    for (const auto& r : time_evolve(rho, t, l)) CHECK(r == rho);
}

TEST_CASE("time evolution against the exact propagator") {
    const auto l = qubit(0.5, 2.0, 1.0);
    DenseMat rho0 = DenseMat::Zero(2, 2);
    rho0(0, 0) = 1.0;
    const std::vector<double> t = {0.0, 0.1, 0.7, 2.0, 5.0};
    const auto traj = time_evolve(rho0, t, l);
    const DenseMat lg = DenseMat(l.generator);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const DenseVec exact = (lg * t[k]).exp() * vectorize(rho0);
        CHECK((vectorize(traj[k]) - exact).cwiseAbs().maxCoeff() < 1e-7);
        CHECK(std::abs(traj[k].trace() - 1.0) < 1e-8);
        CHECK((traj[k] - traj[k].adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("tolerance controls the global error") {
    const auto l = qubit(0.5, 2.0, 1.0);
    DenseMat rho0 = DenseMat::Zero(2, 2);
    rho0(0, 0) = 1.0;
    const DenseVec exact = (DenseMat(l.generator) * 1.0).exp() * vectorize(rho0);
    auto err = [&](double tol) {
        EvolutionOptions o;
        o.tolerance = tol;
        const std::vector<double> t = {1.0};
        return (vectorize(time_evolve(rho0, t, l, o)[0]) - exact).cwiseAbs().maxCoeff();
    };
    CHECK(err(1e-10) < err(1e-6));
    CHECK(err(1e-10) < 1e-8);
}

TEST_CASE("time grid checks") {
    const auto l = qubit(0.0, 1.0, 1.0);
    DenseMat rho0 = DenseMat::Identity(2, 2) / 2.0;
    const std::vector<double> back = {1.0, 0.5};
    const std::vector<double> neg = {-1.0};
    CHECK_THROWS_AS(time_evolve(rho0, back, l), InvalidParameters);
    CHECK_THROWS_AS(time_evolve(rho0, neg, l), InvalidParameters);
    CHECK_THROWS_AS(time_evolve(DenseMat::Identity(3, 3), back, l), InvalidParameters);
}

TEST_CASE("step budget surfaces as integrator error") {
    const auto l = qubit(0.0, 50.0, 1.0);
    EvolutionOptions o;
    o.max_steps = 3;
    DenseMat rho0 = DenseMat::Zero(2, 2);
    rho0(0, 0) = 1.0;
    const std::vector<double> t = {100.0};
    CHECK_THROWS_AS(time_evolve(rho0, t, l, o), IntegratorError);
}
