#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/coefficients.hpp"

#include <optional>
#include <span>
#include <vector>

namespace bsre {

struct PicardOptions {
    std::optional<double> delta;  ///< window length; empty selects the automatic window
    double tol = 1e-10;
    std::size_t max_iter = 200;
    std::size_t max_halvings = 5;
};

/// Automatic Picard window min(T, 0.5 / (M_C^2 + 1)).
double auto_lyapunov_window(const CoefficientModel& model);

/// P(t) = E^{F_t}[Phi(t->T)' M Phi(t->T) + int_t^T Phi(t->s)' S(s) Phi(t->s) ds]
/// on the whole grid.
BackwardSolution lyapunov_representation_solve(const CoefficientModel& model, const SolverOptions& options);

/// One application of Gamma: the linear equation with source
/// S + C' P_in C (P_in frozen) and final datum M. Gamma is applied on the
/// grid window [first, last] (default: whole grid), with P_in(t_last) used as
/// final datum when last < L.
BackwardSolution gamma_apply(const OperatorProcess& p_in, const CoefficientModel& model,
                             const SolverOptions& options, std::optional<std::size_t> first = std::nullopt,
                             std::optional<std::size_t> last = std::nullopt);

/// Windowed fixed point of Gamma, pasted backward from T.
BackwardSolution picard_solve(const CoefficientModel& model, const PicardOptions& picard,
                              const SolverOptions& options);

/// Q by regression of martingale increments of P on the ensemble.
OperatorProcess extract_q(const OperatorProcess& p, const PathEnsemble& paths, const RegressionConfig& regression,
                          std::size_t workers = 1);

struct AprioriRow {
    double delta = 0.0;
    double p_sup_sq = 0.0;    ///< sup over the window of E|P(t)|^2
    double q_integral = 0.0;  ///< E int |Q|_K^2 over the window
    double lhs = 0.0;
    double rhs = 0.0;
    std::optional<double> ratio;
    bool finite = true;
};

struct AprioriReport {
    bool weak_source = false;
    std::vector<AprioriRow> rows;  ///< in the order of the requested deltas
    bool all_finite = true;
    bool monotone = true;          ///< LHS nonincreasing as delta decreases
};

/// LHS and RHS of the a-priori bound on [T - delta, T]. With weak_source the
/// RHS uses delta^{1-2 rho} E int |S|_K^2 instead of delta E int |S|^2.
/// Expectations over W_t use a 24-point Gauss-Hermite rule on the fitted
/// surfaces.
AprioriReport apriori_audit(const BackwardSolution& solution, const CoefficientModel& model,
                            std::span<const double> deltas, bool weak_source = false);

struct JnStabilityReport {
    double epsilon = 0.0, delta = 0.0;
    std::vector<double> ns;
    std::vector<double> distance;           ///< sup over [T-delta, T-epsilon] of |P^n - P|
    std::vector<double> terminal_distance;  ///< |J_n M J_n - M| at t = T
    std::vector<double> terminal_k_gap;     ///< |M - J_n M J_n|_K
    bool decreasing = true;
    double tolerance = 1e-6;
    bool below_tolerance = false;           ///< last distance below tolerance
};

/// Solves the J_n-regularized equation (data J_n M J_n, J_n S J_n and
/// C'(J_n P J_n)C with P the unregularized solution) for each n and measures
/// the distance to P on [T - delta, T - epsilon].
JnStabilityReport jn_stability_audit(const CoefficientModel& model, std::span<const double> ns, double epsilon,
                                     double delta, const SolverOptions& options, double tolerance = 1e-6);

/// Lyapunov solve for a source that is only K-valued. BoundViolation if S
/// has infinite K-norm at some grid time.
BackwardSolution weak_source_solve(const CoefficientModel& model, const SolverOptions& options);

struct KNormAudit {
    std::size_t samples = 0;
    double bound_sup = 0.0;        ///< sqrt(2 tail) sup|g|, infinite for unbounded profiles
    double bound_l2 = 0.0;         ///< sqrt(2 tail 2/pi) |g|_{L^2}
    double max_ratio_sup = 0.0;    ///< max |S|_K / (|s| bound_sup)
    double max_ratio_l2 = 0.0;     ///< max |S|_K / (|s| bound_l2)
    bool holds = true;
};

/// |S(t)|_K against the truncated summation bounds on every grid time of
/// every sampled path.
KNormAudit source_k_audit(const CoefficientModel& model, std::size_t n_paths, std::uint64_t seed,
                          std::size_t workers = 1);

/// Coefficients at step i on the event W_{t_i} = w (Markov models).
Coefficients coefficients_at(const CoefficientModel& model, std::size_t i, double w);

}  // namespace bsre
