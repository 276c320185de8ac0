#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bsre/errors.hpp"
#include "bsre/spectral.hpp"

#include <cmath>
#include <random>

using namespace bsre;

namespace {

Eigen::MatrixXd random_matrix(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = z(rng);
    return g;
}

}  // namespace

TEST_CASE("laplacian eigenvalues are k squared") {
    const auto b = laplacian_basis(3, 0.4);
    CHECK(b->lambdas() == std::vector<double>{1.0, 4.0, 9.0});
    CHECK(laplacian_basis(1, 0.3)->lambdas() == std::vector<double>{1.0});
}

TEST_CASE("basis rejects N = 0 and rho outside the open interval") {
    CHECK_THROWS_AS(laplacian_basis(0, 0.4), InvalidConfiguration);
    CHECK_THROWS_AS(laplacian_basis(5, 0.25), InvalidConfiguration);
    CHECK_THROWS_AS(laplacian_basis(5, 0.5), InvalidConfiguration);
    CHECK_THROWS_WITH_AS(laplacian_basis(5, 0.6), doctest::Contains("(1/4, 1/2)"), InvalidConfiguration);
}

TEST_CASE("tail weight increments decrease") {
    const auto b = laplacian_basis(50, 0.4);
    for (Eigen::Index k = 1; k < b->weights().size(); ++k) CHECK(b->weights()(k) < b->weights()(k - 1));
    CHECK(b->tail_weight() == doctest::Approx(b->weights().sum()).epsilon(1e-15));
}

TEST_CASE("semigroup conjugation") {
    const auto b = laplacian_basis(2, 0.4);
    SUBCASE("identity goes to diag(exp(-2 lambda t))") {
        const auto g = semigroup_conjugate(OperatorMatrix::identity(b), 0.3);
        CHECK(g(0, 0) == doctest::Approx(std::exp(-0.6)).epsilon(1e-15));
        CHECK(g(1, 1) == doctest::Approx(std::exp(-2.4)).epsilon(1e-15));
        CHECK(g(0, 1) == 0.0);
    }
    SUBCASE("t = 0 leaves G unchanged") {
        std::mt19937_64 rng(1);
        const OperatorMatrix g(b, random_matrix(2, rng));
        CHECK(semigroup_conjugate(g, 0.0).entries() == g.entries());
    }
    SUBCASE("unit entry scaled by exp(-(lambda_j + lambda_k) t)") {
        const auto g = semigroup_conjugate(OperatorMatrix::unit(b, 1, 0), 0.5);
        CHECK(g(1, 0) == doctest::Approx(std::exp(-2.5)).epsilon(1e-15));
    }
    SUBCASE("negative time is a domain error") {
        CHECK_THROWS_AS(semigroup_conjugate(OperatorMatrix::identity(b), -1e-3), DomainError);
    }
}

TEST_CASE("semigroup property holds to associativity") {
    const auto b = laplacian_basis(6, 0.35);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const OperatorMatrix g(b, random_matrix(6, rng));
        const double s = 0.01 * (trial + 1), t = 0.02 * (trial + 3);
        const auto two = semigroup_conjugate(semigroup_conjugate(g, s), t);
        const auto one = semigroup_conjugate(g, s + t);
        CHECK((two.entries() - one.entries()).cwiseAbs().maxCoeff() <=
              1e-13 * std::max(1.0, one.entries().cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("norm examples") {
    const auto b = laplacian_basis(3, 0.4);
    for (NormKind k : {NormKind::OpH, NormKind::K, NormKind::HS}) CHECK(norm(OperatorMatrix::zero(b), k) == 0.0);
    CHECK(norm(OperatorMatrix::unit(b, 0, 0), NormKind::K) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    const double expected = std::sqrt(2.0 * (1.0 + std::pow(4.0, -0.8) + std::pow(9.0, -0.8)));
    CHECK(norm(OperatorMatrix::identity(b), NormKind::K) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(expected == doctest::Approx(1.7334).epsilon(1e-4));
}

TEST_CASE("Ks on a non-symmetric operator is a contract violation") {
    const auto b = laplacian_basis(3, 0.4);
    CHECK_THROWS_AS(norm(OperatorMatrix::unit(b, 0, 1), NormKind::Ks), ContractViolation);
}

TEST_CASE("norm properties on random operators") {
    const auto b = laplacian_basis(8, 0.4);
    std::mt19937_64 rng(11);
    const double ratio_cap = std::sqrt(2.0 * b->tail_weight());
    for (int trial = 0; trial < 50; ++trial) {
        const OperatorMatrix g(b, random_matrix(8, rng)), h(b, random_matrix(8, rng));
        for (NormKind k : {NormKind::OpH, NormKind::K, NormKind::HS}) {
            CHECK(norm(g + h, k) <= norm(g, k) + norm(h, k) + 1e-12);
            CHECK(norm(-2.5 * g, k) == doctest::Approx(2.5 * norm(g, k)).epsilon(1e-13));
        }
        CHECK(norm(g, NormKind::K) <= ratio_cap * norm(g, NormKind::OpH) * (1 + 1e-12));
        const OperatorMatrix s = g.symmetrized();
        CHECK(s.asymmetry() == 0.0);
        CHECK(norm(s, NormKind::Ks) == doctest::Approx(norm(s, NormKind::K)).epsilon(1e-12));
    }
}

TEST_CASE("J_n conjugation") {
    const auto b = laplacian_basis(4, 0.4);
    CHECK(jn_conjugate(OperatorMatrix::unit(b, 0, 0), 1.0)(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(jn_conjugate(OperatorMatrix::identity(b), 0.0), DomainError);
    CHECK_THROWS_AS(jn_operator(b, -1.0), DomainError);

    std::mt19937_64 rng(3);
    const OperatorMatrix g(b, random_matrix(4, rng));
    double previous = std::numeric_limits<double>::infinity();
    for (double n : {1.0, 10.0, 100.0, 1e4, 1e6}) {
        const auto gn = jn_conjugate(g, n);
        CHECK(norm(gn, NormKind::OpH) <= norm(g, NormKind::OpH) + 1e-14);
        const double gap = (gn.entries() - g.entries()).cwiseAbs().maxCoeff();
        CHECK(gap < previous);
        previous = gap;
    }
    CHECK(previous < 1e-4);

    const OperatorMatrix p = OperatorMatrix(b, g.entries() * g.entries().transpose()).symmetrized().with_psd_flag();
    REQUIRE(p.psd() == std::optional<bool>(true));
    const auto pn = jn_conjugate(p, 3.0);
    CHECK(pn.symmetric());
    CHECK(pn.asymmetry() == 0.0);
    CHECK(pn.psd() == std::optional<bool>(true));
}

TEST_CASE("smoothing audit") {
    const auto b = laplacian_basis(20, 0.4);
    const auto grid = log_grid(1e-6, 10.0, 4001);
    const SmoothingReport r = smoothing_audit(*b, grid);
    CHECK(r.within_unit_bound);
    CHECK(r.max_value <= 1.0);
    CHECK(r.analytic_sup == doctest::Approx(std::pow(0.4 / std::exp(1.0), 0.4)).epsilon(1e-15));
    CHECK(r.analytic_sup == doctest::Approx(0.4646).epsilon(1e-4));
    CHECK(std::abs(r.max_value - r.analytic_sup) <= 1e-3);
    CHECK_THROWS_AS(smoothing_audit(*b, std::vector<double>{}), InvalidConfiguration);
}

TEST_CASE("J_n properties at truncation") {
    const auto b = laplacian_basis(10, 0.4);
    const std::vector<double> ns{1.0, 10.0, 100.0};
    for (const auto& c : jn_property_audit(b, ns)) {
        CAPTURE(c.n);
        CHECK(c.passed);
        CHECK(c.eigen_action_error <= 1e-15);
        CHECK(c.norm_h <= 1.0);
    }
}
