#include "bsre/spectral.hpp"

#include "bsre/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace bsre {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidConfiguration: return "invalid-configuration";
        case ErrorKind::Domain: return "domain-error";
        case ErrorKind::ContractViolation: return "contract-violation";
        case ErrorKind::BoundViolation: return "bound-violation";
        case ErrorKind::BallViolation: return "ball-violation";
        case ErrorKind::NonConvergence: return "non-convergence";
        case ErrorKind::OracleFailure: return "oracle-failure";
    }
    return "unknown";
}

SpectralBasis::SpectralBasis(std::vector<double> lambdas, double rho)
    : lambdas_(std::move(lambdas)), rho_(rho) {
    if (lambdas_.empty()) {
        throw InvalidConfiguration("truncation level N must be at least 1");
    }
    if (!(rho_ > 0.25 && rho_ < 0.5)) {
        std::ostringstream os;
        os << "rho = " << rho_ << " must lie in the open interval (1/4, 1/2)";
        throw InvalidConfiguration(os.str());
    }
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
        if (!(lambdas_[k] > 0.0) || !std::isfinite(lambdas_[k])) {
            throw InvalidConfiguration("eigenvalues of -A must be finite and strictly positive");
        }
        if (k > 0 && lambdas_[k] < lambdas_[k - 1]) {
            throw InvalidConfiguration("eigenvalues of -A must be nondecreasing");
        }
    }
    weights_.resize(static_cast<Eigen::Index>(lambdas_.size()));
    for (std::size_t k = 0; k < lambdas_.size(); ++k) {
        weights_(static_cast<Eigen::Index>(k)) = std::pow(lambdas_[k], -2.0 * rho_);
    }
    tail_weight_ = weights_.sum();
}

Eigen::Map<const Eigen::VectorXd> SpectralBasis::lambda_vector() const {
    return {lambdas_.data(), static_cast<Eigen::Index>(lambdas_.size())};
}

BasisPtr laplacian_basis(std::size_t n, double rho) {
    if (n == 0) {
        throw InvalidConfiguration("truncation level N must be at least 1");
    }
    std::vector<double> lambdas(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double m = static_cast<double>(k + 1);
        lambdas[k] = m * m;
    }
    return std::make_shared<const SpectralBasis>(std::move(lambdas), rho);
}

// ---------------------------------------------------------------------------

OperatorMatrix::OperatorMatrix(BasisPtr basis, Eigen::MatrixXd entries)
    : basis_(std::move(basis)), entries_(std::move(entries)) {
    if (!basis_) {
        throw ContractViolation("operator matrix requires a basis");
    }
    const auto n = static_cast<Eigen::Index>(basis_->size());
    if (entries_.rows() != n || entries_.cols() != n) {
        throw ContractViolation("operator matrix shape does not match the basis truncation");
    }
}

OperatorMatrix OperatorMatrix::zero(const BasisPtr& basis) {
    const auto n = static_cast<Eigen::Index>(basis->size());
    OperatorMatrix out(basis, Eigen::MatrixXd::Zero(n, n));
    out.symmetric_ = true;
    out.psd_ = true;
    return out;
}

OperatorMatrix OperatorMatrix::identity(const BasisPtr& basis) {
    const auto n = static_cast<Eigen::Index>(basis->size());
    OperatorMatrix out(basis, Eigen::MatrixXd::Identity(n, n));
    out.symmetric_ = true;
    out.psd_ = true;
    return out;
}

OperatorMatrix OperatorMatrix::diagonal(const BasisPtr& basis, const Eigen::VectorXd& d) {
    OperatorMatrix out(basis, d.asDiagonal().toDenseMatrix());
    out.symmetric_ = true;
    out.psd_ = (d.array() >= 0.0).all();
    return out;
}

OperatorMatrix OperatorMatrix::unit(const BasisPtr& basis, std::size_t row, std::size_t col) {
    const auto n = static_cast<Eigen::Index>(basis->size());
    if (row >= basis->size() || col >= basis->size()) {
        throw ContractViolation("unit operator index outside the truncation");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = 1.0;
    OperatorMatrix out(basis, std::move(m));
    out.symmetric_ = row == col;
    if (row == col) out.psd_ = true;
    return out;
}

double OperatorMatrix::asymmetry() const {
    return (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
}

OperatorMatrix OperatorMatrix::symmetrized() const {
    OperatorMatrix out(basis_, 0.5 * (entries_ + entries_.transpose()));
    out.symmetric_ = true;
    out.psd_ = psd_;
    return out;
}

double OperatorMatrix::min_eigenvalue() const {
    const Eigen::MatrixXd sym = 0.5 * (entries_ + entries_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

OperatorMatrix OperatorMatrix::with_psd_flag(double tol) const {
    OperatorMatrix out = *this;
    out.psd_ = min_eigenvalue() >= -tol;
    return out;
}

OperatorMatrix OperatorMatrix::transpose() const {
    OperatorMatrix out(basis_, entries_.transpose());
    out.symmetric_ = symmetric_;
    out.psd_ = psd_;
    return out;
}

OperatorMatrix OperatorMatrix::with_entries(Eigen::MatrixXd entries) const {
    OperatorMatrix out(basis_, std::move(entries));
    out.symmetric_ = symmetric_;
    out.psd_ = psd_;
    return out;
}

OperatorMatrix OperatorMatrix::with_psd(std::optional<bool> psd) const {
    OperatorMatrix out = *this;
    out.psd_ = psd;
    return out;
}

namespace {

void require_same_basis(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.basis() != b.basis() && !(*a.basis() == *b.basis())) {
        throw ContractViolation("operators live on different bases");
    }
}

}  // namespace

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_basis(a, b);
    OperatorMatrix out(a.basis(), a.entries() + b.entries());
    if (!(a.symmetric() && b.symmetric())) return out;
    const bool both_psd = a.psd().value_or(false) && b.psd().value_or(false);
    return out.symmetrized().with_psd(both_psd ? std::optional<bool>(true) : std::nullopt);
}

OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_basis(a, b);
    OperatorMatrix out(a.basis(), a.entries() - b.entries());
    if (!(a.symmetric() && b.symmetric())) return out;
    return out.symmetrized().with_psd(std::nullopt);
}

OperatorMatrix operator*(double s, const OperatorMatrix& a) {
    OperatorMatrix out(a.basis(), s * a.entries());
    if (!a.symmetric()) return out;
    return out.symmetrized().with_psd(s >= 0.0 ? a.psd() : std::nullopt);
}

// ---------------------------------------------------------------------------

double op_norm(const Eigen::MatrixXd& g) {
    if (g.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
    return svd.singularValues()(0);
}

double k_norm(const Eigen::MatrixXd& g, const Eigen::VectorXd& weights) {
    const Eigen::VectorXd cols = g.colwise().squaredNorm().transpose();
    const Eigen::VectorXd rows = g.rowwise().squaredNorm();
    return std::sqrt(weights.dot(cols + rows));
}

double ks_norm(const Eigen::MatrixXd& g, const Eigen::VectorXd& weights) {
    const Eigen::VectorXd cols = g.colwise().squaredNorm().transpose();
    return std::sqrt(2.0 * weights.dot(cols));
}

double norm(const OperatorMatrix& g, NormKind which) {
    switch (which) {
        case NormKind::OpH: return op_norm(g.entries());
        case NormKind::HS: return g.entries().norm();
        case NormKind::K: return k_norm(g.entries(), g.basis()->weights());
        case NormKind::Ks:
            if (!g.symmetric()) {
                throw ContractViolation("Ks norm requested on an operator without the symmetric flag");
            }
            return ks_norm(g.entries(), g.basis()->weights());
    }
    return 0.0;
}

namespace {

// Coordinates in the orthonormal basis of each space: x_V = lambda^rho x_H.
Eigen::VectorXd space_scale(const SpectralBasis& basis, Space s) {
    const Eigen::ArrayXd lam = basis.lambda_vector().array();
    switch (s) {
        case Space::H: return Eigen::VectorXd::Ones(lam.size());
        case Space::V: return lam.pow(basis.rho()).matrix();
        case Space::VPrime: return lam.pow(-basis.rho()).matrix();
    }
    return {};
}

}  // namespace

double induced_norm(const OperatorMatrix& g, Space from, Space to) {
    const auto& basis = *g.basis();
    const Eigen::VectorXd out_scale = space_scale(basis, to);
    const Eigen::VectorXd in_scale = space_scale(basis, from).cwiseInverse();
    const Eigen::MatrixXd scaled = out_scale.asDiagonal() * g.entries() * in_scale.asDiagonal();
    return op_norm(scaled);
}

OperatorMatrix semigroup_conjugate(const OperatorMatrix& g, double t) {
    if (!(t >= 0.0)) {
        throw DomainError("semigroup is defined for t >= 0 only");
    }
    const Eigen::VectorXd d = (-t * g.basis()->lambda_vector().array()).exp().matrix();
    return g.with_entries(d.asDiagonal() * g.entries() * d.asDiagonal());
}

OperatorMatrix jn_operator(const BasisPtr& basis, double n) {
    if (!(n > 0.0)) {
        throw DomainError("resolvent regularizer index n must be positive");
    }
    const Eigen::ArrayXd lam = basis->lambda_vector().array();
    return OperatorMatrix::diagonal(basis, (n / (n + lam)).matrix());
}

OperatorMatrix jn_conjugate(const OperatorMatrix& g, double n) {
    if (!(n > 0.0)) {
        throw DomainError("resolvent regularizer index n must be positive");
    }
    const Eigen::ArrayXd lam = g.basis()->lambda_vector().array();
    const Eigen::VectorXd d = (n / (n + lam)).matrix();
    return g.with_entries(d.asDiagonal() * g.entries() * d.asDiagonal());
}

// ---------------------------------------------------------------------------

SmoothingReport smoothing_audit(const SpectralBasis& basis, std::span<const double> t_grid) {
    if (t_grid.empty()) {
        throw InvalidConfiguration("smoothing audit needs a nonempty time grid");
    }
    SmoothingReport rep;
    const double rho = basis.rho();
    rep.analytic_sup = std::pow(rho / std::exp(1.0), rho);
    for (double t : t_grid) {
        if (!(t > 0.0)) {
            throw InvalidConfiguration("smoothing audit times must be strictly positive");
        }
        for (std::size_t k = 0; k < basis.size(); ++k) {
            const double x = basis.lambda(k) * t;
            const double v = std::pow(x, rho) * std::exp(-x);
            if (v > rep.max_value) {
                rep.max_value = v;
                rep.argmax_t = t;
                rep.argmax_mode = k;
            }
        }
    }
    rep.within_unit_bound = rep.max_value <= 1.0;
    return rep;
}

std::vector<double> log_grid(double t_min, double t_max, std::size_t points) {
    if (!(t_min > 0.0) || !(t_max > t_min) || points < 2) {
        throw InvalidConfiguration("log grid needs 0 < t_min < t_max and at least two points");
    }
    std::vector<double> out(points);
    const double a = std::log(t_min);
    const double b = std::log(t_max);
    for (std::size_t i = 0; i < points; ++i) {
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    return out;
}

std::vector<JnPropertyCheck> jn_property_audit(const BasisPtr& basis, std::span<const double> ns) {
    std::vector<double> sorted(ns.begin(), ns.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n_modes = static_cast<Eigen::Index>(basis->size());
    const Eigen::VectorXd probe = Eigen::VectorXd::Ones(n_modes).normalized();
    const Eigen::MatrixXd a = -Eigen::MatrixXd(basis->lambda_vector().asDiagonal());
    const double inclusion_hs = std::sqrt(basis->tail_weight());
    const double tiny = 1e-13;

    std::vector<JnPropertyCheck> out;
    double previous_gap = std::numeric_limits<double>::infinity();
    for (double n : sorted) {
        JnPropertyCheck c;
        c.n = n;
        const OperatorMatrix jn = jn_operator(basis, n);
        const Eigen::MatrixXd resolvent =
            n * (n * Eigen::MatrixXd::Identity(n_modes, n_modes) - a).inverse();
        c.eigen_action_error = (resolvent - jn.entries()).cwiseAbs().maxCoeff();
        c.norm_h = induced_norm(jn, Space::H, Space::H);
        c.norm_v = induced_norm(jn, Space::V, Space::V);
        c.norm_vprime = induced_norm(jn, Space::VPrime, Space::VPrime);
        c.norm_h_to_v = induced_norm(jn, Space::H, Space::V);
        c.norm_vprime_to_h = induced_norm(jn, Space::VPrime, Space::H);
        c.n_pow_rho = std::pow(n, basis->rho());
        c.strong_limit_gap = (jn.entries() * probe - probe).norm();
        c.hs_norm = jn.entries().norm();
        c.hs_bound = inclusion_hs * c.norm_h_to_v;
        c.passed = c.eigen_action_error <= tiny
                   && c.norm_h <= 1.0 + tiny && c.norm_v <= 1.0 + tiny && c.norm_vprime <= 1.0 + tiny
                   && c.norm_h_to_v <= c.n_pow_rho * (1.0 + tiny)
                   && c.norm_vprime_to_h <= c.n_pow_rho * (1.0 + tiny)
                   && c.strong_limit_gap < previous_gap
                   && c.hs_norm <= c.hs_bound * (1.0 + tiny);
        previous_gap = c.strong_limit_gap;
        out.push_back(c);
    }
    return out;
}

}  // namespace bsre
