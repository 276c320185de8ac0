#pragma once

#include "bsre/brownian.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace bsre {

struct RegressionConfig {
    std::size_t degree = 4;
    double ridge = 1e-8;

    bool operator==(const RegressionConfig&) const = default;
};

/// Highest polynomial degree accepted by the regression backend.
inline constexpr std::size_t kMaxRegressionDegree = 12;

/// Probabilists' Hermite polynomials He_0(z)..He_degree(z).
void hermite_features(double z, std::size_t degree, double* out);

/// Nodes and weights of the Gauss rule for E f(Z), Z ~ N(0, 1).
struct GaussHermite {
    std::vector<double> nodes, weights;
};
GaussHermite gauss_hermite(std::size_t points);

/// A matrix-valued function of (t_i, W_{t_i}) on the grid:
///   X_i(w) = sum_d coeff[i][d] He_d(w / sqrt(t_i)).
/// Deterministic processes carry only the d = 0 coefficient. Since
/// W_{t_i}/sqrt(t_i) is standard normal, coeff[i][0] is E X_i.
class OperatorProcess {
public:
    OperatorProcess() = default;
    /// Zero process on the grid.
    OperatorProcess(TimeGrid grid, std::size_t modes);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t modes() const noexcept { return modes_; }
    std::size_t size() const noexcept { return coeffs_.size(); }

    std::size_t degree(std::size_t i) const { return coeffs_.at(i).size() - 1; }
    const std::vector<Eigen::MatrixXd>& coefficients(std::size_t i) const { return coeffs_.at(i); }
    const Eigen::MatrixXd& mean(std::size_t i) const { return coeffs_.at(i).front(); }

    void set(std::size_t i, std::vector<Eigen::MatrixXd> coefficients);
    void set_constant(std::size_t i, Eigen::MatrixXd value);

    /// X_i(w).
    Eigen::MatrixXd at(std::size_t i, double w) const;
    void at_into(std::size_t i, double w, Eigen::MatrixXd& out) const;

    bool deterministic() const;

    /// Points w at which stochastic slices are compared: {-3..3} sqrt(t_i)
    /// plus +-1.5 sqrt(t_i); just w = 0 at t = 0 or for constant slices.
    std::vector<double> probe_points(std::size_t i) const;

private:
    TimeGrid grid_{1.0, 1};
    std::size_t modes_ = 0;
    std::vector<std::vector<Eigen::MatrixXd>> coeffs_;
};

/// sup over the probe points of opH(a_i(w) - b_i(w)), for i in [first, last].
double sup_distance(const OperatorProcess& a, const OperatorProcess& b, std::size_t first, std::size_t last);

struct SurfaceFit {
    std::vector<Eigen::MatrixXd> coefficients;
    /// Entrywise standard error of the mean; filled for degree-0 fits.
    Eigen::MatrixXd mean_std_error;
};

/// Least squares of the matrix targets on Hermite features of w / sqrt(t)
/// with ridge penalty `ridge * n` on the normal equations. At t = 0 the fit
/// is the plain sample mean. Symmetric targets give symmetric coefficients
/// (only the upper triangle is regressed). Throws InvalidConfiguration when
/// there are fewer samples than features.
SurfaceFit fit_surface(std::span<const double> w, const std::vector<Eigen::MatrixXd>& targets, double t,
                       const RegressionConfig& config, bool symmetric);

}  // namespace bsre
