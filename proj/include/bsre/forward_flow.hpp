#pragma once

#include "bsre/brownian.hpp"
#include "bsre/coefficients.hpp"
#include "bsre/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace bsre {

/// States (and controls, when a control was applied) on the grid.
struct Trajectory {
    TimeGrid grid;
    std::vector<Eigen::VectorXd> y;  ///< y[0..L]
    std::vector<Eigen::VectorXd> u;  ///< u[0..L-1]; empty for the zero control
};

/// Control supplied to the state equation at step i given the current state.
class ControlPolicy {
public:
    using Rule = std::function<Eigen::VectorXd(std::size_t, const Eigen::VectorXd&)>;

    static ControlPolicy zero();
    /// u_i fixed in advance (one vector per step).
    static ControlPolicy open_loop(std::vector<Eigen::VectorXd> u);
    static ControlPolicy feedback(Rule rule);

    bool is_zero() const noexcept { return kind_ == Kind::Zero; }
    Eigen::VectorXd operator()(std::size_t i, const Eigen::VectorXd& y) const;

private:
    enum class Kind { Zero, OpenLoop, Feedback };
    Kind kind_ = Kind::Zero;
    std::vector<Eigen::VectorXd> fixed_;
    Rule rule_;
};

/// One exponential Euler step
///   y_{i+1} = e^{hA}(y_i + h B_i u_i + C_i y_i dW_i).
/// `u` may be empty (zero control).
Eigen::VectorXd euler_step(const Eigen::VectorXd& decay, const Coefficients& co, const Eigen::VectorXd& y,
                           const Eigen::VectorXd* u, double h, double dw);

/// diag(e^{-lambda_k h}) as a vector.
Eigen::VectorXd step_decay(const SpectralBasis& basis, double h);

/// G_i = e^{hA}(I + C_i dW_i), the linear map y_i -> y_{i+1} without control.
Eigen::MatrixXd step_matrix(const Eigen::VectorXd& decay, const Eigen::MatrixXd& c, double dw);

Trajectory propagate(const Eigen::VectorXd& x, const ControlPolicy& control, const CoefficientModel& model,
                     const BrownianPath& path);

struct FlowMatrix {
    std::size_t from = 0, to = 0;
    OperatorMatrix phi;
};

/// Phi(t_i -> t_L) for i = 0..L. Refuses to allocate beyond `memory_budget`
/// bytes (InvalidConfiguration).
std::vector<FlowMatrix> flow_matrices(const CoefficientModel& model, const BrownianPath& path,
                                      std::size_t memory_budget = std::size_t{1} << 30);

/// Phi(t_i -> t_j), j >= i, as the ordered product of step matrices.
OperatorMatrix flow(const CoefficientModel& model, const BrownianPath& path, std::size_t i, std::size_t j);

struct MomentReport {
    std::vector<double> second_moment;  ///< E|y(t_i)|^2 per grid time
    double sup_second_moment = 0.0;
    double bracket = 0.0;               ///< |x|^2 + E sum_i h |u_i|^2
    std::optional<double> ratio;        ///< empty when the bracket vanishes
    std::size_t n_paths = 0;
};

/// n_paths below 1000 is refused (InvalidConfiguration).
MomentReport moment_audit(const CoefficientModel& model, const Eigen::VectorXd& x, const ControlPolicy& control,
                          std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

/// Exact E|y(t_i)|^2 of the uncontrolled scheme for deterministic
/// coefficients: Sigma_{i+1} = e^{hA}(Sigma_i + h C_i Sigma_i C_i')e^{hA}.
std::vector<double> exact_second_moments(const CoefficientModel& model, const Eigen::VectorXd& x);

/// 2 * max(1, max_k sup_i E|y^{e_k}(t_i)|^2): exact for deterministic
/// coefficients, estimated on `n_paths` paths otherwise.
double empirical_c2(const CoefficientModel& model, std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

}  // namespace bsre
