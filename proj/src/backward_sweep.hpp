#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/brownian.hpp"
#include "bsre/coefficients.hpp"
#include "bsre/regression.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace bsre::detail {

/// Effective source at step i on the event W_{t_i} = w.
using SourceFn = std::function<void(std::size_t i, double w, const Coefficients& co, Eigen::MatrixXd& out)>;

struct SweepSpec {
    std::size_t first = 0, last = 0;
    SourceFn source;
    /// Include C'PC of the unknown itself (the full second-order flow on
    /// the Monte Carlo side). Off for the Gamma map, whose C'PC is frozen in
    /// the source.
    bool self_cpc = true;
    bool extract_q = true;
};

/// One backward linear solve on a window: the final datum is read from
/// p at spec.last, p and q are written on [first, last).
///
/// Deterministic backend: exponential trapezoid per mode pair, exact for
/// sources linear in time between grid points, with the implicit C'PC term
/// resolved by fixed-point iteration at every step.
///
/// Monte Carlo backend: pathwise backward recursion
///   Y_i = G_i' Y_{i+1} G_i + w_L o S_i
/// on a fixed ensemble, projected on Hermite features of W_{t_i} at each
/// step; Q from the regressed martingale increments.
class SweepEngine {
public:
    SweepEngine(const CoefficientModel& model, const SolverOptions& options);

    void run(const SweepSpec& spec, OperatorProcess& p, OperatorProcess& q,
             std::optional<Eigen::MatrixXd>* p0_std_error = nullptr) const;

    const CoefficientModel& model() const noexcept { return model_; }
    const SolverOptions& options() const noexcept { return options_; }
    const PathEnsemble* paths() const noexcept { return paths_ ? &*paths_ : nullptr; }

private:
    void run_deterministic(const SweepSpec& spec, OperatorProcess& p) const;
    void run_monte_carlo(const SweepSpec& spec, OperatorProcess& p, OperatorProcess& q,
                         std::optional<Eigen::MatrixXd>* p0_std_error) const;

    const CoefficientModel& model_;
    SolverOptions options_;
    std::optional<PathEnsemble> paths_;
    Eigen::VectorXd decay_;
    Eigen::MatrixXd decay_pair_, w0_, w1_, wl_;
};

/// Q from the regressed martingale increments of P on [first, last):
/// (P_{i+1}(W_{i+1}) - P_i(W_i)) dW_i / h projected on features of W_i.
void extract_q_window(const OperatorProcess& p, const PathEnsemble& paths, std::size_t first, std::size_t last,
                      const RegressionConfig& regression, std::size_t workers, OperatorProcess& q);

/// Windowed fixed-point iteration shared by the Picard (Gamma) and Riccati
/// (Lambda) solvers. Windows are aligned to grid steps and pasted backward
/// from T; each starts from its final datum held constant in time.
struct FixedPointSetup {
    /// Sweep spec for one application of the map to `iterate`.
    std::function<SweepSpec(const OperatorProcess& iterate)> map;
    std::size_t window_steps = 1;
    bool auto_window = false;
    double tol = 1e-10;
    std::size_t max_iter = 200;
    std::size_t max_halvings = 5;
    std::optional<double> radius;  ///< ball B(r); escape halves auto windows or throws
};

/// Runs the windows; fills p, q and the window records, delta and halvings
/// of `meta`. `p` must hold the final datum at L.
void windowed_fixed_point(const SweepEngine& engine, const FixedPointSetup& setup, OperatorProcess& p,
                          OperatorProcess& q, SolverMeta& meta);

/// sup over [first, last] and probe points of opH(x_i(w)).
double sup_op_norm(const OperatorProcess& x, std::size_t first, std::size_t last);

/// Records min eigenvalues of E P(t_i); when `enforce` (data PSD,
/// deterministic backend) clips eigenvalues in (-psd_tol, 0) and throws on
/// anything more negative. Monte Carlo slices are only reported.
void finalize_positivity(BackwardSolution& solution, bool enforce, double psd_tol);

/// Exponential-trapezoid weights for rate alpha and step h:
/// w0 = h (phi1 - psi), w1 = h psi, left = h phi1.
struct TrapezoidWeights {
    double decay, w0, w1, left;
};
TrapezoidWeights trapezoid_weights(double alpha, double h);

}  // namespace bsre::detail
