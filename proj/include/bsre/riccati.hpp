#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/coefficients.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>

namespace bsre {

struct RiccatiConfig {
    std::optional<double> radius;  ///< ball radius r; empty selects 2 x the Lyapunov bound
    std::optional<double> delta;   ///< window length; empty starts at T and halves as needed
    double tol = 1e-10;
    std::size_t max_iter = 200;
    std::size_t max_halvings = 5;
    std::size_t c2_paths = 1000;   ///< paths for the empirical C_2 of random models
};

/// Ball and window constants of the Lambda construction.
struct RiccatiBounds {
    double c2 = 0.0;
    double base = 0.0;    ///< C_2^2 |M| + 2 C_2^2 T sup|S|
    double radius = 0.0;
    std::optional<double> theoretical_delta;  ///< (r - base) / (C_2^2 M_B^2 r^2); empty when M_B = 0
};

/// InvalidConfiguration if a user radius does not exceed the base bound.
RiccatiBounds riccati_bounds(const CoefficientModel& model, const RiccatiConfig& config,
                             const SolverOptions& options);

/// Lyapunov solve with source S - K B B' K and final datum m_tilde at
/// t_last (default T) on [t_first, t_last]. BallViolation if K leaves B(r).
BackwardSolution lambda_apply(const OperatorProcess& k, const CoefficientModel& model,
                              const Eigen::MatrixXd& m_tilde, double radius, const SolverOptions& options,
                              std::optional<std::size_t> first = std::nullopt,
                              std::optional<std::size_t> last = std::nullopt);

BackwardSolution riccati_solve(const CoefficientModel& model, const RiccatiConfig& config,
                               const SolverOptions& options);

/// Scalar Riccati ODE of one eigenmode,
///   -P' = (-2 lambda + c^2) P - b^2 P^2 + s,  P(T) = m,
/// integrated backward by adaptive Dormand-Prince (relative tolerance `tol`,
/// absolute 1e-8 tol).
/// Values at the requested times. OracleFailure if |P| exceeds 1/tol.
std::vector<double> riccati_mode_oracle(double lambda, double c, double b, double s, double m, double horizon,
                                        std::span<const double> t_grid, double tol = 1e-10);

/// Per-mode oracle for every mode: result(k, j) = P_k(t_grid[j]).
Eigen::MatrixXd diagonal_oracle(const Eigen::VectorXd& lambda, const Eigen::VectorXd& c, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& s, const Eigen::VectorXd& m, double horizon,
                                std::span<const double> t_grid, double tol = 1e-10);

}  // namespace bsre
