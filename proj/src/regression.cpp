#include "bsre/regression.hpp"

#include "bsre/errors.hpp"
#include "bsre/parallel.hpp"
#include "bsre/spectral.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace bsre {

void hermite_features(double z, std::size_t degree, double* out) {
    out[0] = 1.0;
    if (degree == 0) return;
    out[1] = z;
    for (std::size_t d = 1; d < degree; ++d) {
        out[d + 1] = z * out[d] - static_cast<double>(d) * out[d - 1];
    }
}

GaussHermite gauss_hermite(std::size_t points) {
    if (points == 0) throw InvalidConfiguration("Gauss-Hermite rule needs at least one point");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
    const auto n = static_cast<Eigen::Index>(points);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermite rule;
    for (Eigen::Index k = 0; k < n; ++k) {
        rule.nodes.push_back(es.eigenvalues()(k));
        const double v = es.eigenvectors()(0, k);
        rule.weights.push_back(v * v);
    }
    return rule;
}

OperatorProcess::OperatorProcess(TimeGrid grid, std::size_t modes)
    : grid_(grid), modes_(modes),
      coeffs_(grid.steps() + 1,
              std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(modes),
                                                                 static_cast<Eigen::Index>(modes))}) {}

void OperatorProcess::set(std::size_t i, std::vector<Eigen::MatrixXd> coefficients) {
    if (coefficients.empty() || coefficients.size() > kMaxRegressionDegree + 1) {
        throw ContractViolation("process slice needs between 1 and 13 coefficients");
    }
    if (i == 0 && coefficients.size() > 1) throw ContractViolation("the slice at t = 0 must be constant");
    coeffs_.at(i) = std::move(coefficients);
}

void OperatorProcess::set_constant(std::size_t i, Eigen::MatrixXd value) {
    coeffs_.at(i) = std::vector<Eigen::MatrixXd>{std::move(value)};
}

void OperatorProcess::at_into(std::size_t i, double w, Eigen::MatrixXd& out) const {
    const auto& c = coeffs_.at(i);
    out = c[0];
    if (c.size() == 1) return;
    std::array<double, kMaxRegressionDegree + 1> f{};
    hermite_features(w / std::sqrt(grid_.time(i)), c.size() - 1, f.data());
    for (std::size_t d = 1; d < c.size(); ++d) out.noalias() += f[d] * c[d];
}

Eigen::MatrixXd OperatorProcess::at(std::size_t i, double w) const {
    Eigen::MatrixXd out;
    at_into(i, w, out);
    return out;
}

bool OperatorProcess::deterministic() const {
    for (const auto& c : coeffs_) {
        if (c.size() > 1) return false;
    }
    return true;
}

std::vector<double> OperatorProcess::probe_points(std::size_t i) const {
    if (i == 0 || coeffs_.at(i).size() == 1) return {0.0};
    const double s = std::sqrt(grid_.time(i));
    return {-3 * s, -2 * s, -1.5 * s, -s, 0.0, s, 1.5 * s, 2 * s, 3 * s};
}

double sup_distance(const OperatorProcess& a, const OperatorProcess& b, std::size_t first, std::size_t last) {
    double out = 0.0;
    Eigen::MatrixXd x, y;
    for (std::size_t i = first; i <= last; ++i) {
        const bool both_constant = a.coefficients(i).size() == 1 && b.coefficients(i).size() == 1;
        const auto probes = both_constant ? std::vector<double>{0.0}
                                          : (a.coefficients(i).size() > 1 ? a.probe_points(i) : b.probe_points(i));
        for (double w : probes) {
            a.at_into(i, w, x);
            b.at_into(i, w, y);
            out = std::max(out, op_norm(x - y));
        }
    }
    return out;
}

SurfaceFit fit_surface(std::span<const double> w, const std::vector<Eigen::MatrixXd>& targets, double t,
                       const RegressionConfig& config, bool symmetric) {
    const std::size_t n = targets.size();
    if (n == 0 || w.size() != n) throw ContractViolation("regression needs one regressor per target");
    if (config.degree > kMaxRegressionDegree) {
        throw InvalidConfiguration("regression degree above " + std::to_string(kMaxRegressionDegree));
    }
    const auto rows = targets.front().rows();
    const auto cols = targets.front().cols();
    const std::size_t degree = t > 0.0 ? config.degree : 0;
    const std::size_t features = degree + 1;
    if (n < features) {
        throw InvalidConfiguration("regression underdetermined: " + std::to_string(n) + " paths for " +
                                   std::to_string(features) + " features");
    }

    // Targets flattened to n x m, keeping only the upper triangle when symmetric.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> index;
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (!symmetric || r <= c) index.emplace_back(r, c);
        }
    }
    const auto m = static_cast<Eigen::Index>(index.size());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), m);
    for (std::size_t j = 0; j < n; ++j) {
        for (Eigen::Index q = 0; q < m; ++q) y(static_cast<Eigen::Index>(j), q) = targets[j](index[q].first, index[q].second);
    }

    SurfaceFit fit;
    auto unflatten = [&](const Eigen::RowVectorXd& v) {
        Eigen::MatrixXd out(rows, cols);
        for (Eigen::Index q = 0; q < m; ++q) {
            out(index[q].first, index[q].second) = v(q);
            if (symmetric) out(index[q].second, index[q].first) = v(q);
        }
        return out;
    };

    if (degree == 0) {
        Eigen::RowVectorXd mean(m), se(m);
        std::vector<double> column(n);
        for (Eigen::Index q = 0; q < m; ++q) {
            for (std::size_t j = 0; j < n; ++j) column[j] = y(static_cast<Eigen::Index>(j), q);
            const MeanAndError me = mean_and_error(column);
            mean(q) = me.mean;
            se(q) = me.std_error;
        }
        fit.coefficients.push_back(unflatten(mean));
        fit.mean_std_error = unflatten(se);
        return fit;
    }

    const auto p = static_cast<Eigen::Index>(features);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), p);
    const double scale = 1.0 / std::sqrt(t);
    std::array<double, kMaxRegressionDegree + 1> f{};
    for (std::size_t j = 0; j < n; ++j) {
        hermite_features(w[j] * scale, degree, f.data());
        for (Eigen::Index d = 0; d < p; ++d) design(static_cast<Eigen::Index>(j), d) = f[static_cast<std::size_t>(d)];
    }
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += config.ridge * static_cast<double>(n);
    const Eigen::MatrixXd rhs = design.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
        throw InvalidConfiguration("regression design is degenerate");
    }
    const Eigen::MatrixXd beta = ldlt.solve(rhs);
    for (Eigen::Index d = 0; d < p; ++d) fit.coefficients.push_back(unflatten(beta.row(d)));
    return fit;
}

}  // namespace bsre
