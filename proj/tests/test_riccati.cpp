#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsre/errors.hpp"
#include "bsre/lyapunov.hpp"
#include "bsre/riccati.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

using namespace bsre;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

double max_off_diagonal(const Eigen::MatrixXd& a) {
    Eigen::MatrixXd off = a;
    off.diagonal().setZero();
    return max_abs(off);
}

CoefficientModel constant_model(std::size_t n, std::size_t steps, double c, double b, double s, double m,
                                double horizon = 1.0) {
    return CoefficientModel::constant_diagonal(laplacian_basis(n, 0.4), TimeGrid(horizon, steps), v1(c), v1(b),
                                               v1(s), v1(m));
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("mode oracle on closed-form cases") {
    const std::vector<double> t{0.0, 0.5, 1.0};
    SUBCASE("pure decay") {
        const auto p = riccati_mode_oracle(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, t);
        CHECK(p[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
        CHECK(p[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
        CHECK(p[2] == 1.0);
    }
    SUBCASE("stationary point of -2P - P^2 + 1") {
        const double root = std::sqrt(2.0) - 1.0;
        for (double v : riccati_mode_oracle(1.0, 0.0, 1.0, 1.0, root, 1.0, t)) {
            CHECK(v == doctest::Approx(root).epsilon(1e-9));
        }
    }
    SUBCASE("long horizon tends to the stationary point") {
        const auto p = riccati_mode_oracle(1.0, 0.0, 1.0, 1.0, 0.0, 20.0, std::vector<double>{0.0});
        CHECK(p[0] == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-9));
    }
    SUBCASE("no data") {
        for (double v : riccati_mode_oracle(4.0, 0.3, 1.0, 0.0, 0.0, 1.0, t)) CHECK(v == 0.0);
    }
    SUBCASE("blow-up is reported") {
        CHECK_THROWS_AS(riccati_mode_oracle(1.0, 3.0, 0.0, 0.0, 1.0, 4.0, t), OracleFailure);
    }
}

TEST_CASE("solver matches the mode oracle") {
    const auto model = constant_model(4, 1000, 0.3, 1.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const std::vector<double> t{0.0, 0.5};
    for (std::size_t k = 0; k < 4; ++k) {
        const auto oracle = riccati_mode_oracle(model.basis()->lambda(k), 0.3, 1.0, 1.0, 1.0, 1.0, t);
        const auto kk = static_cast<Eigen::Index>(k);
        CAPTURE(k);
        CHECK(std::abs(sol.p.mean(0)(kk, kk) - oracle[0]) <= 1e-4 * oracle[0]);
        CHECK(std::abs(sol.p.mean(500)(kk, kk) - oracle[1]) <= 1e-4 * oracle[1]);
    }
    for (std::size_t i = 0; i <= 1000; i += 50) CHECK(max_off_diagonal(sol.p.mean(i)) <= 1e-10);
}

TEST_CASE("the error is first order in the step") {
    // Left-point treatment of the quadratic term: halving h halves the error.
    const double lambda = 1.0;
    const double oracle = riccati_mode_oracle(lambda, 0.3, 1.0, 1.0, 1.0, 1.0, std::vector<double>{0.0})[0];
    std::vector<double> err;
    for (std::size_t steps : {100u, 200u, 400u}) {
        const auto sol = riccati_solve(constant_model(1, steps, 0.3, 1.0, 1.0, 1.0), {}, {});
        err.push_back(std::abs(sol.p.mean(0)(0, 0) - oracle));
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double order = std::log2(err[k - 1] / err[k]);
        CAPTURE(order);
        CHECK(order > 0.8);
    }
}

TEST_CASE("zero data gives the zero solution") {
    const auto sol = riccati_solve(constant_model(3, 100, 0.3, 1.0, 0.0, 0.0), {}, {});
    for (std::size_t i = 0; i <= 100; ++i) CHECK(sol.p.mean(i).isZero(0.0));
}

TEST_CASE("without control the Riccati and Lyapunov solutions coincide") {
    const auto model = constant_model(4, 400, 0.5, 0.0, 1.0, 1.0);
    const auto ric = riccati_solve(model, {}, {});
    const auto lyap = picard_solve(model, {}, {});
    for (std::size_t i = 0; i <= 400; i += 40) CHECK(max_abs(ric.p.mean(i) - lyap.p.mean(i)) <= 1e-10);
}

TEST_CASE("Lambda with a vanishing input is the Lyapunov solve") {
    const auto model = constant_model(3, 200, 0.4, 1.0, 1.0, 1.0);
    const auto lyap = picard_solve(model, {}, {});
    const OperatorProcess zero(model.grid(), 3);
    const auto lam = lambda_apply(zero, model, model.terminal(), 10.0, {});
    CHECK(max_abs(lam.p.mean(0) - lyap.p.mean(0)) <= 1e-10);
    CHECK(lam.p.mean(200) == model.terminal());

    // B = 0 makes Lambda independent of K.
    const auto uncontrolled = constant_model(3, 200, 0.4, 0.0, 1.0, 1.0);
    OperatorProcess k(model.grid(), 3);
    for (std::size_t i = 0; i <= 200; ++i) k.set_constant(i, Eigen::MatrixXd::Identity(3, 3));
    const auto a = lambda_apply(k, uncontrolled, uncontrolled.terminal(), 10.0, {});
    const auto b = lambda_apply(zero, uncontrolled, uncontrolled.terminal(), 10.0, {});
    for (std::size_t i = 0; i <= 200; ++i) CHECK(a.p.mean(i) == b.p.mean(i));
}

TEST_CASE("the Riccati solution is a fixed point of Lambda") {
    const auto model = constant_model(4, 400, 0.3, 1.0, 1.0, 1.0);
    RiccatiConfig rc;
    rc.tol = 1e-12;
    const auto sol = riccati_solve(model, rc, {});
    const auto again = lambda_apply(sol.p, model, model.terminal(), *sol.meta.radius, {});
    double gap = 0.0;
    for (std::size_t i = 0; i <= 400; ++i) gap = std::max(gap, max_abs(again.p.mean(i) - sol.p.mean(i)));
    CHECK(gap <= 1e-10);
}

TEST_CASE("positivity and ordering against the uncontrolled solution") {
    const auto model = constant_model(5, 400, 0.5, 1.0, 1.0, 1.0);
    const auto ric = riccati_solve(model, {}, {});
    const auto lyap = picard_solve(model, {}, {});
    for (std::size_t i = 0; i <= 400; i += 20) {
        CHECK(min_eigenvalue(ric.p.mean(i)) >= -1e-12);
        CHECK(min_eigenvalue(lyap.p.mean(i) - ric.p.mean(i)) >= -1e-12);
        CHECK(ric.P(i).symmetric());
    }
    CHECK(ric.meta.min_eigenvalue.size() == 401);
}

TEST_CASE("window length does not change the answer") {
    const auto model = constant_model(3, 400, 0.3, 1.0, 1.0, 1.0, 2.0);
    RiccatiConfig a, b;
    a.delta = 2.0;
    b.delta = 0.25;
    const auto pa = riccati_solve(model, a, {}), pb = riccati_solve(model, b, {});
    CHECK(pb.meta.windows.size() == 8);
    CHECK(max_abs(pa.p.mean(0) - pb.p.mean(0)) <= 1e-9);
}

TEST_CASE("ball constants and violations") {
    const auto model = constant_model(3, 100, 0.3, 1.0, 1.0, 1.0);
    const RiccatiBounds bounds = riccati_bounds(model, {}, {});
    CHECK(bounds.c2 == doctest::Approx(2.0));
    CHECK(bounds.radius == doctest::Approx(2.0 * bounds.base));
    REQUIRE(bounds.theoretical_delta.has_value());
    CHECK(*bounds.theoretical_delta > 0.0);

    RiccatiConfig rc;
    rc.radius = bounds.base;
    CHECK_THROWS_AS(riccati_bounds(model, rc, {}), InvalidConfiguration);

    OperatorProcess big(model.grid(), 3);
    for (std::size_t i = 0; i <= 100; ++i) big.set_constant(i, 5.0 * Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS(lambda_apply(big, model, model.terminal(), 4.0, {}), BallViolation);
    CHECK_NOTHROW(lambda_apply(big, model, model.terminal(), 5.0, {}));
}

TEST_CASE("invalid Riccati settings") {
    const auto model = constant_model(2, 10, 0.1, 1.0, 1.0, 1.0);
    RiccatiConfig rc;
    rc.delta = -1.0;
    CHECK_THROWS_AS(riccati_solve(model, rc, {}), InvalidConfiguration);
    rc.delta.reset();
    rc.tol = -1.0;
    CHECK_THROWS_AS(riccati_solve(model, rc, {}), InvalidConfiguration);
}

TEST_CASE("random-field Riccati solution on the Monte Carlo backend") {
    const auto model = CoefficientModel::scalar_random_field(
        laplacian_basis(3, 0.4), TimeGrid(1.0, 100), Expression::parse("0.3*cos(w)"),
        Expression::parse("1 + 0.5*sin(w)"), v1(0.5), v1(1.0), ModelBounds{0.3, 0.5, 1.5});
    SolverOptions o;
    o.backend = Backend::MonteCarlo;
    o.n_paths = 1000;
    o.seed = 2;
    const auto sol = riccati_solve(model, {}, o);
    REQUIRE(sol.meta.c2.has_value());
    CHECK(*sol.meta.c2 >= 2.0);
    // Bounded by the uncontrolled solution on the same ensemble.
    const auto lyap = lyapunov_representation_solve(model, o);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(sol.p.mean(0)(k, k) <= lyap.p.mean(0)(k, k) + 1e-12);
    CHECK(min_eigenvalue(sol.p.mean(0)) > 0.0);
    // Worker count does not enter the answer.
    o.workers = 3;
    const auto again = riccati_solve(model, {}, o);
    CHECK(again.p.mean(0) == sol.p.mean(0));
}
