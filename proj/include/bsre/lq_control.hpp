#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/coefficients.hpp"
#include "bsre/forward_flow.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace bsre {

/// One closed-loop (or challenger) run: trajectory, controls and realized
/// cost sum_i h (|sqrt(S_i) y_i|^2 + |u_i|^2) + <M y_L, y_L>.
struct ControlRun {
    Trajectory trajectory;
    double cost = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
};

/// u = -B' P y.
Eigen::VectorXd feedback(const OperatorMatrix& p, const OperatorMatrix& b, const Eigen::VectorXd& y);

/// Symmetric square root with eigenvalues clipped at zero; eigenvalues below
/// -psd_tol are a ContractViolation.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s, double psd_tol = 1e-10);

/// Realized cost of a trajectory under the model's S and M (left-endpoint sums).
double realized_cost(const Trajectory& trajectory, const CoefficientModel& model, const BrownianPath& path);

/// Feedback policy from a Riccati solution; reads P(t_i) on the path's W_{t_i}.
ControlPolicy feedback_policy(const BackwardSolution& riccati, const CoefficientModel& model,
                              const BrownianPath& path);

ControlRun closed_loop(const Eigen::VectorXd& x, const BackwardSolution& riccati, const CoefficientModel& model,
                       const BrownianPath& path);

/// Run of an arbitrary policy with its cost.
ControlRun run_policy(const Eigen::VectorXd& x, const ControlPolicy& policy, const CoefficientModel& model,
                      const BrownianPath& path);

struct ValueCheck {
    double mean_cost = 0.0;
    double std_error = 0.0;
    double predicted = 0.0;  ///< <P(0) x, x>
    double z_score = 0.0;    ///< 0 when both sides vanish
    std::size_t n_paths = 0;
    std::vector<double> costs;
};

/// Monte Carlo mean of closed-loop costs against <P(0)x, x>; n_paths >= 1000.
ValueCheck value_check(const Eigen::VectorXd& x, const BackwardSolution& riccati, const CoefficientModel& model,
                       std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

/// A challenger policy for the probe, built per path (open-loop controls may
/// depend on the path index but not on the driver).
struct Challenger {
    std::string name;
    std::function<ControlPolicy(const BrownianPath&)> make;
};

Challenger zero_challenger();
/// u_i = amplitude * xi_i with xi standard normal vectors drawn from
/// (seed, path index), independent of the driver.
Challenger random_open_loop_challenger(double amplitude, std::uint64_t seed);
/// u = -gain * y.
Challenger gain_challenger(double gain);
/// The optimal feedback itself, for sanity checks.
Challenger feedback_challenger(const BackwardSolution& riccati, const CoefficientModel& model);

struct ChallengerResult {
    std::string name;
    double mean_cost = 0.0;
    double std_error = 0.0;
    double difference = 0.0;           ///< challenger - feedback, paired per path
    double paired_std_error = 0.0;
    double combined_std_error = 0.0;   ///< sqrt(se_feedback^2 + se_challenger^2)
    bool feedback_not_worse = true;    ///< feedback <= challenger + 3 combined SE
    bool feedback_strictly_better = false;  ///< difference > 3 combined SE
};

struct SuboptimalityReport {
    double feedback_mean = 0.0;
    double feedback_std_error = 0.0;
    std::size_t n_paths = 0;
    std::vector<ChallengerResult> challengers;
    bool passed = true;
};

/// Requires a zero challenger and a random open-loop challenger among
/// `challengers` (InvalidConfiguration otherwise). Paths are shared across
/// policies.
SuboptimalityReport suboptimality_probe(const Eigen::VectorXd& x, const BackwardSolution& riccati,
                                        const CoefficientModel& model, const std::vector<Challenger>& challengers,
                                        std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

struct CompletionOfSquares {
    double mean_cost = 0.0;
    double predicted = 0.0;
    double mean_gap = 0.0;  ///< mean sum_i h |B'P y_i + u_i|^2
    double residual = 0.0;  ///< mean_cost - predicted - mean_gap
    double std_error = 0.0;
    double z_score = 0.0;
};

/// cost - <P(0)x,x> - sum h |B'P y + u|^2, averaged over paths, for an
/// arbitrary policy.
CompletionOfSquares completion_of_squares(const Eigen::VectorXd& x, const BackwardSolution& riccati,
                                          const CoefficientModel& model, const Challenger& policy,
                                          std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

}  // namespace bsre
