#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bsre {

/// Eigen-coordinates of the generator: A e_k = -lambda_k e_k, truncated at N
/// modes, together with the fractional exponent rho that defines
/// V = D((-A)^rho) and V' = D((-A)^-rho).
class SpectralBasis {
public:
    /// Throws InvalidConfiguration unless lambdas is nonempty, strictly
    /// positive and nondecreasing, and 1/4 < rho < 1/2.
    SpectralBasis(std::vector<double> lambdas, double rho);

    std::size_t size() const noexcept { return lambdas_.size(); }
    double rho() const noexcept { return rho_; }
    double lambda(std::size_t k) const { return lambdas_.at(k); }
    const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    Eigen::Map<const Eigen::VectorXd> lambda_vector() const;

    /// sum_{k<=N} lambda_k^{-2 rho}
    double tail_weight() const noexcept { return tail_weight_; }
    /// lambda_k^{-2 rho} for each k; successive tail_weight increments.
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    bool operator==(const SpectralBasis& other) const {
        return rho_ == other.rho_ && lambdas_ == other.lambdas_;
    }

private:
    std::vector<double> lambdas_;
    double rho_;
    double tail_weight_ = 0.0;
    Eigen::VectorXd weights_;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

/// Dirichlet Laplacian on [0, pi]: lambda_k = k^2.
BasisPtr laplacian_basis(std::size_t n, double rho);

/// An operator on H written in the eigenbasis, G_jk = <G e_k, e_j>.
class OperatorMatrix {
public:
    OperatorMatrix(BasisPtr basis, Eigen::MatrixXd entries);

    static OperatorMatrix zero(const BasisPtr& basis);
    static OperatorMatrix identity(const BasisPtr& basis);
    static OperatorMatrix diagonal(const BasisPtr& basis, const Eigen::VectorXd& d);
    /// e_row (x) e_col: the single entry (row, col) equal to one.
    static OperatorMatrix unit(const BasisPtr& basis, std::size_t row, std::size_t col);

    const BasisPtr& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    double operator()(std::size_t j, std::size_t k) const { return entries_(j, k); }

    bool symmetric() const noexcept { return symmetric_; }
    std::optional<bool> psd() const noexcept { return psd_; }

    /// max |G_jk - G_kj|
    double asymmetry() const;
    /// (G + G')/2 with the symmetric flag set. Exactly symmetric.
    OperatorMatrix symmetrized() const;
    /// Smallest eigenvalue of the symmetric part.
    double min_eigenvalue() const;
    /// Records the PSD flag: true when the smallest eigenvalue is >= -tol.
    OperatorMatrix with_psd_flag(double tol = 1e-10) const;

    OperatorMatrix transpose() const;

    // Flag-preserving rebuild used by the congruence operations below.
    OperatorMatrix with_entries(Eigen::MatrixXd entries) const;
    OperatorMatrix with_psd(std::optional<bool> psd) const;

private:
    BasisPtr basis_;
    Eigen::MatrixXd entries_;
    bool symmetric_ = false;
    std::optional<bool> psd_;
};

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator*(double s, const OperatorMatrix& a);

enum class NormKind { OpH, K, Ks, HS };

/// opH: largest singular value. K: sum_k lambda_k^{-2rho}(|G e_k|^2 + |G' e_k|^2).
/// Ks: 2 sum_k lambda_k^{-2rho}|G e_k|^2, symmetric inputs only. HS: Frobenius.
double norm(const OperatorMatrix& g, NormKind which);
double op_norm(const Eigen::MatrixXd& g);
double k_norm(const Eigen::MatrixXd& g, const Eigen::VectorXd& weights);
double ks_norm(const Eigen::MatrixXd& g, const Eigen::VectorXd& weights);

enum class Space { H, V, VPrime };

/// Operator norm of G viewed as a map `from` -> `to` among V, H, V'.
double induced_norm(const OperatorMatrix& g, Space from, Space to);

/// Entries e^{-(lambda_j + lambda_k) t} G_jk; t must be nonnegative.
OperatorMatrix semigroup_conjugate(const OperatorMatrix& g, double t);

/// D_n G D_n with D_n = diag(n / (n + lambda_k)); n must be positive.
OperatorMatrix jn_conjugate(const OperatorMatrix& g, double n);
/// The resolvent regularizer n (nI - A)^{-1} itself.
OperatorMatrix jn_operator(const BasisPtr& basis, double n);

struct SmoothingReport {
    double max_value = 0.0;     ///< max over (t, k) of t^rho lambda_k^rho e^{-lambda_k t}
    double analytic_sup = 0.0;  ///< (rho/e)^rho
    double argmax_t = 0.0;
    std::size_t argmax_mode = 0;
    bool within_unit_bound = false;
};

SmoothingReport smoothing_audit(const SpectralBasis& basis, std::span<const double> t_grid);

/// Log-spaced grid on [t_min, t_max], handy for smoothing audits.
std::vector<double> log_grid(double t_min, double t_max, std::size_t points);

struct JnPropertyCheck {
    double n = 0.0;
    double eigen_action_error = 0.0;  ///< |n(nI-A)^{-1} - diag(n/(n+lambda))|_max
    double norm_h = 0.0, norm_v = 0.0, norm_vprime = 0.0;
    double norm_h_to_v = 0.0, norm_vprime_to_h = 0.0, n_pow_rho = 0.0;
    double strong_limit_gap = 0.0;    ///< |J_n x - x| for the probe vector
    double hs_norm = 0.0, hs_bound = 0.0;
    bool passed = false;
};

/// Checks the five resolvent properties at truncation for each n; the probe
/// vector for the strong limit is the normalized all-ones vector.
std::vector<JnPropertyCheck> jn_property_audit(const BasisPtr& basis, std::span<const double> ns);

}  // namespace bsre
