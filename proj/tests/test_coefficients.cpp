#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsre/brownian.hpp"
#include "bsre/coefficients.hpp"
#include "bsre/errors.hpp"
#include "bsre/expression.hpp"
#include "bsre/parallel.hpp"
#include "bsre/spectral.hpp"

#include <cmath>
#include <numbers>

using namespace bsre;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

ModelBounds bounds(double mc, double mb, std::optional<double> ms = std::nullopt) { return {mc, mb, ms}; }

}  // namespace

TEST_CASE("paths are reproducible from seed and index") {
    const TimeGrid grid(1.0, 50);
    const BrownianPath a = sample_path(grid, 42, 3), b = sample_path(grid, 42, 3), c = sample_path(grid, 42, 4);
    CHECK(a.increments() == b.increments());
    CHECK(a.increments() != c.increments());
    CHECK(a.w(0) == 0.0);
    const auto ensemble = sample_paths(grid, 8, 42, 3);
    CHECK(ensemble[3].increments() == a.increments());
    const PathEnsemble packed(grid, 8, 42, 2);
    for (std::size_t i = 0; i <= grid.steps(); ++i) CHECK(packed.w(3, i) == a.w(i));
}

TEST_CASE("zero-length grid is rejected") {
    CHECK_THROWS_AS(TimeGrid(1.0, 0), InvalidConfiguration);
    CHECK_THROWS_AS(TimeGrid(0.0, 10), InvalidConfiguration);
}

TEST_CASE("terminal Brownian moments") {
    const double horizon = 2.0;
    const std::size_t n = 20000;
    const auto paths = sample_paths(TimeGrid(horizon, 16), n, 9, 2);
    std::vector<double> wt(n);
    for (std::size_t j = 0; j < n; ++j) wt[j] = paths[j].w(16);
    const MeanAndError me = mean_and_error(wt);
    CHECK(std::abs(me.mean) <= 3.0 * std::sqrt(horizon / n));
    const double var_se = horizon * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(me.variance - horizon) <= 3.0 * var_se);
}

TEST_CASE("constant-diagonal coefficients") {
    const auto basis = laplacian_basis(3, 0.4);
    const TimeGrid grid(1.0, 10);
    const auto model = CoefficientModel::constant_diagonal(basis, grid, v1(0.3), v1(1.0), v1(1.0), v1(0.0));
    const BrownianPath path = sample_path(grid, 1, 0);
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        const CoefficientSet set = eval_coefficients(model, i, path);
        CHECK(set.c.entries() == (0.3 * Eigen::MatrixXd::Identity(3, 3)).eval());
        CHECK(set.s.symmetric());
    }
    const ModelReport rep = validate_model(model);
    CHECK(rep.verdict == "A3 satisfied");
    CHECK(rep.a2);
    CHECK(rep.observed_c == doctest::Approx(0.3));
}

TEST_CASE("negative terminal entry violates A3") {
    const auto basis = laplacian_basis(3, 0.4);
    Eigen::VectorXd m(3);
    m << 1.0, -0.5, 1.0;
    const auto model =
        CoefficientModel::constant_diagonal(basis, TimeGrid(1.0, 10), v1(0.0), v1(1.0), v1(1.0), m);
    const ModelReport rep = validate_model(model);
    CHECK(rep.verdict == "A3 violated: M not PSD");
    CHECK_FALSE(rep.m_psd);
}

TEST_CASE("declared bounds smaller than the data are refused") {
    const auto basis = laplacian_basis(2, 0.4);
    CHECK_THROWS_AS(CoefficientModel::constant_diagonal(basis, TimeGrid(1.0, 10), v1(0.5), v1(1.0), v1(1.0),
                                                        v1(0.0), bounds(0.1, 1.0)),
                    BoundViolation);
}

TEST_CASE("deterministic schedule is tabulated on the grid") {
    const auto basis = laplacian_basis(2, 0.4);
    const TimeGrid grid(1.0, 4);
    const auto model = CoefficientModel::deterministic_schedule(
        basis, grid, {Expression::parse("0.1*t")}, {Expression::parse("1")},
        {Expression::parse("1 + t"), Expression::parse("2")}, v1(1.0));
    const Coefficients co = model.evaluate(2);
    CHECK(co.c(0, 0) == doctest::Approx(0.05));
    CHECK(co.s(0, 0) == doctest::Approx(1.5));
    CHECK(co.s(1, 1) == doctest::Approx(2.0));
    CHECK_THROWS_AS(CoefficientModel::deterministic_schedule(basis, grid, {Expression::parse("sin(w)")},
                                                             {Expression::parse("1")}, {Expression::parse("1")},
                                                             v1(1.0)),
                    InvalidConfiguration);
}

TEST_CASE("scalar random field is bounded and adapted") {
    const auto basis = laplacian_basis(3, 0.4);
    const TimeGrid grid(1.0, 100);
    const auto model = CoefficientModel::scalar_random_field(basis, grid, Expression::parse("0.2*sin(w)"),
                                                             Expression::parse("1 + 0.5*sin(w)"), v1(0.5),
                                                             v1(1.0), bounds(0.2, 0.5, 1.5));
    for (std::uint64_t j = 0; j < 20; ++j) {
        const BrownianPath path = sample_path(grid, 5, j);
        for (std::size_t i = 0; i <= grid.steps(); ++i) {
            const CoefficientSet set = eval_coefficients(model, i, path);
            CHECK(norm(set.c, NormKind::OpH) <= 0.2);
            CHECK(set.c(0, 0) == doctest::Approx(0.2 * std::sin(path.w(i))).epsilon(1e-15));
            // Adaptedness: a prefix is all the model can see.
            const Coefficients co = model.evaluate(i, path.prefix(i));
            CHECK(co.c(1, 1) == set.c(1, 1));
        }
    }
}

TEST_CASE("a random field above its declared bound raises on a violating path") {
    const auto basis = laplacian_basis(2, 0.4);
    const TimeGrid grid(1.0, 100);
    const auto model = CoefficientModel::scalar_random_field(basis, grid, Expression::parse("0.2*sin(w)"),
                                                             Expression::parse("1"), v1(0.5), v1(1.0),
                                                             bounds(0.1, 0.5, 1.0));
    bool found = false;
    for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
        const BrownianPath path = sample_path(grid, seed, 0);
        for (std::size_t i = 0; i <= grid.steps(); ++i) {
            if (std::abs(std::sin(path.w(i))) > 0.5) {
                CHECK_THROWS_AS(eval_coefficients(model, i, path), BoundViolation);
                found = true;
                break;
            }
            CHECK_NOTHROW(eval_coefficients(model, i, path));
        }
    }
    CHECK(found);
}

TEST_CASE("multiplication matrices") {
    const Eigen::MatrixXd one = multiplication_matrix(Expression::parse("1"), 6);
    CHECK((one - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::MatrixXd x = multiplication_matrix(Expression::parse("x"), 6);
    CHECK(x == x.transpose());
    // <x e_1, e_1> = pi / 2 for the normalized sine basis.
    CHECK(x(0, 0) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
}

TEST_CASE("profile statistics of a square-integrable unbounded field") {
    const ProfileStats st = profile_stats(Expression::parse("x^(-0.25)"));
    CHECK(st.l2_norm == doctest::Approx(std::sqrt(2.0 * std::sqrt(std::numbers::pi))).epsilon(1e-6));
    CHECK(st.endpoint_sup > 100.0);
}

TEST_CASE("multiplication-operator model is A3-prime only") {
    const auto basis = laplacian_basis(4, 0.4);
    const auto model = CoefficientModel::scalar_random_field(
        basis, TimeGrid(1.0, 20), Expression::parse("0.2*sin(w)"), Expression::parse("1 + 0.5*cos(w)"), v1(0.0),
        v1(1.0), bounds(0.2, 0.0), Expression::parse("x^(-0.25)"));
    const ModelReport rep = validate_model(model);
    CHECK(rep.verdict == "A3′ satisfied, A3 violated");
    CHECK(rep.a3_weak);
    CHECK_FALSE(rep.a3);
}
