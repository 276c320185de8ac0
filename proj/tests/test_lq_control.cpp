#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsre/errors.hpp"
#include "bsre/lq_control.hpp"
#include "bsre/riccati.hpp"

#include <cmath>

using namespace bsre;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

CoefficientModel constant_model(std::size_t n, std::size_t steps, double c, double b, double s, double m) {
    return CoefficientModel::constant_diagonal(laplacian_basis(n, 0.4), TimeGrid(1.0, steps), v1(c), v1(b), v1(s),
                                               v1(m));
}

Eigen::VectorXd dyadic(std::size_t n) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = std::ldexp(1.0, -static_cast<int>(k));
    return x;
}

}  // namespace

TEST_CASE("matrix square root") {
    const Eigen::Matrix2d s{{4.0, 0.0}, {0.0, 9.0}};
    CHECK(max_abs(psd_sqrt(s) - Eigen::Matrix2d{{2.0, 0.0}, {0.0, 3.0}}) <= 1e-14);
    const Eigen::Matrix2d g{{2.0, 1.0}, {1.0, 2.0}};
    const Eigen::MatrixXd r = psd_sqrt(g);
    CHECK(max_abs(r * r - g) <= 1e-14);
    CHECK_THROWS_AS(psd_sqrt(Eigen::Matrix2d{{1.0, 0.0}, {0.0, -0.1}}), ContractViolation);
    CHECK(max_abs(psd_sqrt(Eigen::Matrix2d{{1.0, 0.0}, {0.0, -1e-12}}) - Eigen::Matrix2d{{1.0, 0.0}, {0.0, 0.0}}) ==
          0.0);
}

TEST_CASE("feedback is -B'P y") {
    const auto basis = laplacian_basis(2, 0.4);
    const OperatorMatrix p(basis, Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}});
    const OperatorMatrix b(basis, Eigen::Matrix2d{{1.0, 0.0}, {0.0, 3.0}});
    const Eigen::VectorXd y = Eigen::Vector2d(1.0, -1.0);
    CHECK(max_abs(feedback(p, b, y) - Eigen::Vector2d(-1.5, 1.5)) <= 1e-15);
}

TEST_CASE("feedback special cases") {
    const auto basis = laplacian_basis(3, 0.4);
    const Eigen::VectorXd y = Eigen::Vector3d(1.0, -2.0, 0.5);
    const OperatorMatrix id = OperatorMatrix::identity(basis);
    CHECK(feedback(id, id, y) == -y);
    CHECK(feedback(id, OperatorMatrix::zero(basis), y).isZero(0.0));
    const Eigen::Vector3d pk(0.3, 0.2, 0.1);
    const OperatorMatrix p(basis, Eigen::MatrixXd(pk.asDiagonal()));
    const OperatorMatrix b(basis, 0.5 * Eigen::MatrixXd::Identity(3, 3));
    const Eigen::VectorXd u = feedback(p, b, y);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(u(k) == doctest::Approx(-0.5 * pk(k) * y(k)).epsilon(1e-15));
}

TEST_CASE("realized cost matches a direct recomputation") {
    const auto model = constant_model(4, 200, 0.3, 0.5, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const auto path = sample_path(model.grid(), 7, 3);
    const ControlRun run = closed_loop(dyadic(4), sol, model, path);
    CHECK(run.path_index == 3);
    CHECK(run.seed == 7);
    const double h = model.grid().step();
    double direct = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        direct += h * (run.trajectory.y[i].squaredNorm() + run.trajectory.u[i].squaredNorm());
        const Eigen::VectorXd u = -0.5 * (sol.p.mean(i) * run.trajectory.y[i]);
        CHECK(max_abs(u - run.trajectory.u[i]) <= 1e-14);
    }
    direct += run.trajectory.y.back().squaredNorm();
    CHECK(run.cost == doctest::Approx(direct).epsilon(1e-12));
    CHECK(realized_cost(run.trajectory, model, path) == run.cost);
}

TEST_CASE("cost of a random field weights the state by s(t, W_t)") {
    const auto model = CoefficientModel::scalar_random_field(
        laplacian_basis(3, 0.4), TimeGrid(1.0, 50), Expression::parse("0.2*cos(w)"), Expression::parse("1 + 0.5*sin(w)"),
        v1(0.5), v1(2.0), ModelBounds{0.2, 0.5, 1.5});
    const auto path = sample_path(model.grid(), 1, 0);
    const ControlRun run = run_policy(Eigen::VectorXd::Ones(3), ControlPolicy::zero(), model, path);
    double direct = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        direct += model.grid().step() * (1.0 + 0.5 * std::sin(path.w(i))) * run.trajectory.y[i].squaredNorm();
    }
    direct += 2.0 * run.trajectory.y.back().squaredNorm();
    CHECK(run.cost == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("without control authority the closed loop is the uncontrolled system") {
    const auto model = constant_model(3, 100, 0.3, 0.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const auto path = sample_path(model.grid(), 4, 0);
    const ControlRun fb = closed_loop(dyadic(3), sol, model, path);
    const ControlRun zero = run_policy(dyadic(3), ControlPolicy::zero(), model, path);
    for (std::size_t i = 0; i <= 100; ++i) CHECK(fb.trajectory.y[i] == zero.trajectory.y[i]);
    CHECK(fb.cost == zero.cost);
}

TEST_CASE("zero initial state costs nothing") {
    const auto model = constant_model(3, 100, 0.3, 1.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const ControlRun run = closed_loop(Eigen::VectorXd::Zero(3), sol, model, sample_path(model.grid(), 1, 0));
    CHECK(run.cost == 0.0);
}

TEST_CASE("cost is quadratic in the initial state") {
    const auto model = constant_model(3, 100, 0.3, 1.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const auto path = sample_path(model.grid(), 2, 5);
    const double one = closed_loop(dyadic(3), sol, model, path).cost;
    const double two = closed_loop(2.0 * dyadic(3), sol, model, path).cost;
    CHECK(two == doctest::Approx(4.0 * one).epsilon(1e-12));
}

TEST_CASE("value check against the quadratic form") {
    const auto model = constant_model(4, 200, 0.3, 0.5, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const ValueCheck v = value_check(dyadic(4), sol, model, 4000, 11, 2);
    CAPTURE(v.z_score);
    CHECK(v.costs.size() == 4000);
    CHECK(v.predicted == doctest::Approx(dyadic(4).dot(sol.p.mean(0) * dyadic(4))).epsilon(1e-15));
    CHECK(std::abs(v.mean_cost - v.predicted) <= 3.0 * v.std_error + 10.0 * model.grid().step() * v.predicted);
    const ValueCheck again = value_check(dyadic(4), sol, model, 4000, 11, 1);
    CHECK(again.mean_cost == v.mean_cost);
    CHECK_THROWS_AS(value_check(dyadic(4), sol, model, 999, 11), InvalidConfiguration);
}

TEST_CASE("noiseless uncontrolled cost is the Lyapunov value up to O(h)") {
    const auto model = constant_model(4, 1000, 0.0, 0.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const ValueCheck v = value_check(dyadic(4), sol, model, 1000, 3);
    CHECK(v.std_error <= 1e-12 * v.predicted);
    CHECK(std::abs(v.mean_cost - v.predicted) <= 10.0 * model.grid().step() * v.predicted);
}

TEST_CASE("value check against the independent mode oracle") {
    const auto model = constant_model(4, 200, 0.3, 0.5, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const Eigen::VectorXd x = dyadic(4);
    double oracle = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double pk =
            riccati_mode_oracle(model.basis()->lambda(k), 0.3, 0.5, 1.0, 1.0, 1.0, std::vector<double>{0.0})[0];
        oracle += pk * x(static_cast<Eigen::Index>(k)) * x(static_cast<Eigen::Index>(k));
    }
    const ValueCheck v = value_check(x, sol, model, 10000, 12, 2);
    CAPTURE(v.mean_cost);
    CAPTURE(oracle);
    CHECK(std::abs(v.mean_cost - oracle) <= 3.0 * v.std_error + 10.0 * model.grid().step() * oracle);
}

TEST_CASE("without control authority any control only adds its energy") {
    const auto model = constant_model(4, 200, 0.3, 0.0, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const double amplitude = 0.5;
    const std::vector<Challenger> ch{zero_challenger(), random_open_loop_challenger(amplitude, 3)};
    const SuboptimalityReport rep = suboptimality_probe(dyadic(4), sol, model, ch, 2000, 5);
    CHECK(rep.challengers[0].difference == 0.0);
    // Same trajectory on every path: the difference is sum h |u|^2, mean amplitude^2 N T.
    const ChallengerResult& r = rep.challengers[1];
    CAPTURE(r.difference);
    CHECK(std::abs(r.difference - amplitude * amplitude * 4.0) <= 3.0 * r.paired_std_error);
    CHECK(r.feedback_strictly_better);
}

TEST_CASE("suboptimality probe") {
    const auto model = constant_model(4, 200, 0.3, 0.5, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    const Eigen::VectorXd x = dyadic(4);
    const std::vector<Challenger> challengers{zero_challenger(), random_open_loop_challenger(0.5, 3),
                                              gain_challenger(1.0), feedback_challenger(sol, model)};
    const SuboptimalityReport rep = suboptimality_probe(x, sol, model, challengers, 2000, 5, 2);
    CHECK(rep.passed);
    REQUIRE(rep.challengers.size() == 4);
    CHECK(rep.challengers[0].name == "zero");
    CHECK(rep.challengers[1].name == "random-open-loop");
    for (const auto& c : rep.challengers) {
        CAPTURE(c.name);
        CHECK(c.feedback_not_worse);
    }
    // The feedback against itself on common paths differs by exactly nothing.
    CHECK(rep.challengers[3].name == "feedback");
    CHECK(rep.challengers[3].difference == 0.0);
    CHECK(rep.challengers[3].paired_std_error == 0.0);
    CHECK(rep.challengers[1].feedback_strictly_better);

    const std::vector<Challenger> missing{zero_challenger()};
    CHECK_THROWS_AS(suboptimality_probe(x, sol, model, missing, 2000, 5), InvalidConfiguration);
}

TEST_CASE("completion of squares") {
    const auto model = constant_model(4, 400, 0.3, 0.5, 1.0, 1.0);
    const auto sol = riccati_solve(model, {}, {});
    for (const Challenger& ch : {zero_challenger(), gain_challenger(1.0), feedback_challenger(sol, model)}) {
        const CompletionOfSquares cs = completion_of_squares(dyadic(4), sol, model, ch, 2000, 9);
        CAPTURE(ch.name);
        CAPTURE(cs.residual);
        CAPTURE(cs.std_error);
        CHECK(std::abs(cs.residual) <= 3.0 * cs.std_error + 10.0 * model.grid().step() * cs.predicted);
        CHECK(cs.mean_gap >= 0.0);
    }
}
