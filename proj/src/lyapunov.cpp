#include "bsre/lyapunov.hpp"

#include "backward_sweep.hpp"
#include "bsre/errors.hpp"
#include "bsre/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace bsre {

namespace {

using detail::SweepEngine;
using detail::SweepSpec;

BackwardSolution empty_solution(const CoefficientModel& model, const SolverOptions& options, std::string solver) {
    BackwardSolution sol{model.grid(), model.basis(), OperatorProcess(model.grid(), model.modes()),
                         OperatorProcess(model.grid(), model.modes()), {}};
    sol.meta.solver = std::move(solver);
    sol.meta.backend = options.backend;
    sol.meta.regression = options.regression;
    if (options.backend == Backend::MonteCarlo) {
        sol.meta.seed = options.seed;
        sol.meta.n_paths = options.n_paths;
    }
    sol.p.set_constant(model.grid().steps(), model.terminal());
    return sol;
}

bool data_psd(const CoefficientModel& model) {
    const ModelReport rep = validate_model(model);
    return rep.s_psd && rep.m_psd;
}

std::size_t steps_for(double length, const TimeGrid& grid) {
    return static_cast<std::size_t>(std::llround(length / grid.step()));
}

// E f(X_i(W_{t_i})) for a process slice, W_{t_i} ~ N(0, t_i).
template <typename F>
double expect(const OperatorProcess& x, std::size_t i, const GaussHermite& gh, const F& f) {
    if (x.coefficients(i).size() == 1) return f(x.mean(i));
    const double s = std::sqrt(x.grid().time(i));
    double acc = 0.0;
    Eigen::MatrixXd v;
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
        x.at_into(i, s * gh.nodes[k], v);
        acc += gh.weights[k] * f(v);
    }
    return acc;
}

}  // namespace

Coefficients coefficients_at(const CoefficientModel& model, std::size_t i, double w) {
    std::vector<double> prefix(i + 1, 0.0);
    prefix.back() = w;
    return model.evaluate(i, PathPrefix{prefix});
}

double auto_lyapunov_window(const CoefficientModel& model) {
    const double mc = model.bounds().m_c;
    return std::min(model.grid().horizon(), 0.5 / (mc * mc + 1.0));
}

BackwardSolution lyapunov_representation_solve(const CoefficientModel& model, const SolverOptions& options) {
    SweepEngine engine(model, options);
    BackwardSolution sol = empty_solution(model, options, "lyapunov-representation");
    SweepSpec spec;
    spec.first = 0;
    spec.last = model.grid().steps();
    spec.source = [](std::size_t, double, const Coefficients& co, Eigen::MatrixXd& out) { out = co.s; };
    spec.self_cpc = true;
    engine.run(spec, sol.p, sol.q, &sol.meta.p0_std_error);
    detail::finalize_positivity(sol, data_psd(model), options.psd_tol);
    return sol;
}

BackwardSolution gamma_apply(const OperatorProcess& p_in, const CoefficientModel& model,
                             const SolverOptions& options, std::optional<std::size_t> first,
                             std::optional<std::size_t> last) {
    const std::size_t steps = model.grid().steps();
    if (!(p_in.grid() == model.grid()) || p_in.modes() != model.modes()) {
        throw ContractViolation("input process does not match the model grid and basis");
    }
    const std::size_t lo = first.value_or(0), hi = last.value_or(steps);
    if (lo >= hi || hi > steps) throw ContractViolation("gamma window must satisfy first < last <= L");
    SweepEngine engine(model, options);
    BackwardSolution sol = empty_solution(model, options, "gamma");
    sol.p = p_in;
    if (hi == steps) sol.p.set_constant(steps, model.terminal());
    SweepSpec spec;
    spec.first = lo;
    spec.last = hi;
    spec.source = [&p_in](std::size_t i, double w, const Coefficients& co, Eigen::MatrixXd& out) {
        const Eigen::MatrixXd p = p_in.at(i, w);
        out = co.s;
        out.noalias() += co.c.transpose() * p * co.c;
    };
    spec.self_cpc = false;
    engine.run(spec, sol.p, sol.q, &sol.meta.p0_std_error);
    return sol;
}

BackwardSolution picard_solve(const CoefficientModel& model, const PicardOptions& picard,
                              const SolverOptions& options) {
    const TimeGrid& grid = model.grid();
    if (picard.delta && (!(*picard.delta > 0.0) || *picard.delta > grid.horizon())) {
        throw InvalidConfiguration("Picard window delta must lie in (0, T]");
    }
    if (!(picard.tol > 0.0)) throw InvalidConfiguration("Picard tolerance must be positive");
    SweepEngine engine(model, options);
    BackwardSolution sol = empty_solution(model, options, "lyapunov-picard");
    detail::FixedPointSetup setup;
    setup.map = [](const OperatorProcess& iterate) {
        SweepSpec spec;
        spec.source = [&iterate](std::size_t i, double w, const Coefficients& co, Eigen::MatrixXd& out) {
            const Eigen::MatrixXd p = iterate.at(i, w);
            out = co.s;
            out.noalias() += co.c.transpose() * p * co.c;
        };
        spec.self_cpc = false;
        return spec;
    };
    const double delta = picard.delta.value_or(auto_lyapunov_window(model));
    setup.window_steps = std::max<std::size_t>(1, steps_for(delta, grid));
    setup.auto_window = !picard.delta.has_value();
    setup.tol = picard.tol;
    setup.max_iter = picard.max_iter;
    setup.max_halvings = picard.max_halvings;
    detail::windowed_fixed_point(engine, setup, sol.p, sol.q, sol.meta);
    sol.meta.tolerance = picard.tol;
    detail::finalize_positivity(sol, data_psd(model), options.psd_tol);
    return sol;
}

OperatorProcess extract_q(const OperatorProcess& p, const PathEnsemble& paths, const RegressionConfig& regression,
                          std::size_t workers) {
    if (!(p.grid() == paths.grid())) throw ContractViolation("ensemble grid does not match the solution grid");
    OperatorProcess q(p.grid(), p.modes());
    detail::extract_q_window(p, paths, 0, p.grid().steps(), regression, workers, q);
    return q;
}

AprioriReport apriori_audit(const BackwardSolution& solution, const CoefficientModel& model,
                            std::span<const double> deltas, bool weak_source) {
    const TimeGrid& grid = solution.grid;
    const std::size_t steps = grid.steps();
    const double h = grid.step();
    const auto& weights = solution.basis->weights();
    const double rho = solution.basis->rho();
    const GaussHermite gh = gauss_hermite(24);

    // Per-step integrands, summed backward from T so that shorter windows
    // are partial sums of longer ones.
    std::vector<double> p_sq(steps + 1), q_sq(steps), s_sq(steps);
    for (std::size_t i = 0; i <= steps; ++i) {
        p_sq[i] = expect(solution.p, i, gh, [](const Eigen::MatrixXd& v) {
            const double n = op_norm(v);
            return n * n;
        });
    }
    for (std::size_t i = 0; i < steps; ++i) {
        q_sq[i] = expect(solution.q, i, gh, [&](const Eigen::MatrixXd& v) {
            const double n = k_norm(v, weights);
            return n * n;
        });
        auto s_norm = [&](double w) {
            const Coefficients co = coefficients_at(model, i, w);
            const double n = weak_source ? k_norm(co.s, weights) : op_norm(co.s);
            return n * n;
        };
        if (model.deterministic() || i == 0) {
            s_sq[i] = s_norm(0.0);
        } else {
            const double sd = std::sqrt(grid.time(i));
            double acc = 0.0;
            for (std::size_t k = 0; k < gh.nodes.size(); ++k) acc += gh.weights[k] * s_norm(sd * gh.nodes[k]);
            s_sq[i] = acc;
        }
    }
    const double m_norm = op_norm(model.terminal());

    AprioriReport report;
    report.weak_source = weak_source;
    for (double delta : deltas) {
        if (!(delta > 0.0) || delta > grid.horizon() + 1e-12) {
            throw InvalidConfiguration("a-priori audit windows must lie in (0, T]");
        }
        const std::size_t first = steps - std::min(steps, steps_for(delta, grid));
        AprioriRow row;
        row.delta = delta;
        double s_int = 0.0;
        for (std::size_t i = steps; i-- > first;) {
            row.q_integral += h * q_sq[i];
            s_int += h * s_sq[i];
        }
        for (std::size_t i = first; i <= steps; ++i) row.p_sup_sq = std::max(row.p_sup_sq, p_sq[i]);
        row.lhs = row.p_sup_sq + row.q_integral;
        const double weight = weak_source ? std::pow(delta, 1.0 - 2.0 * rho) : delta;
        row.rhs = m_norm * m_norm + weight * s_int;
        if (row.rhs > 0.0) row.ratio = row.lhs / row.rhs;
        row.finite = std::isfinite(row.lhs);
        report.all_finite = report.all_finite && row.finite;
        report.rows.push_back(row);
    }
    std::vector<AprioriRow> sorted = report.rows;
    std::sort(sorted.begin(), sorted.end(), [](const AprioriRow& a, const AprioriRow& b) { return a.delta < b.delta; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].lhs < sorted[k - 1].lhs) report.monotone = false;
    }
    return report;
}

JnStabilityReport jn_stability_audit(const CoefficientModel& model, std::span<const double> ns, double epsilon,
                                     double delta, const SolverOptions& options, double tolerance) {
    const TimeGrid& grid = model.grid();
    if (!(epsilon >= 0.0) || !(epsilon < delta) || delta > grid.horizon()) {
        throw InvalidConfiguration("J_n audit needs 0 <= epsilon < delta <= T");
    }
    const std::size_t steps = grid.steps();
    const std::size_t first = steps - std::min(steps, steps_for(delta, grid));
    const std::size_t hi = steps - std::min(steps, steps_for(epsilon, grid));
    if (first >= steps) throw InvalidConfiguration("J_n audit window is shorter than one step");

    const BackwardSolution base = lyapunov_representation_solve(model, options);
    SweepEngine engine(model, options);
    const auto& basis = *model.basis();
    const Eigen::MatrixXd& m = model.terminal();

    JnStabilityReport report;
    report.epsilon = epsilon;
    report.delta = delta;
    report.tolerance = tolerance;
    for (double n : ns) {
        if (!(n > 0.0)) throw DomainError("J_n requires n > 0");
        const Eigen::VectorXd d = (n / (n + basis.lambda_vector().array())).matrix();
        const Eigen::MatrixXd jj = d * d.transpose();
        OperatorProcess pn(grid, model.modes()), qn(grid, model.modes());
        pn.set_constant(steps, jj.cwiseProduct(m));
        SweepSpec spec;
        spec.first = first;
        spec.last = steps;
        spec.source = [&](std::size_t i, double w, const Coefficients& co, Eigen::MatrixXd& out) {
            const Eigen::MatrixXd p = jj.cwiseProduct(base.p.at(i, w));
            out = jj.cwiseProduct(co.s);
            out.noalias() += co.c.transpose() * p * co.c;
        };
        spec.self_cpc = false;
        spec.extract_q = false;
        engine.run(spec, pn, qn);
        report.ns.push_back(n);
        report.distance.push_back(sup_distance(pn, base.p, first, hi));
        report.terminal_distance.push_back(op_norm(jj.cwiseProduct(m) - m));
        report.terminal_k_gap.push_back(k_norm(m - jj.cwiseProduct(m), basis.weights()));
    }
    for (std::size_t k = 1; k < report.distance.size(); ++k) {
        if (!(report.distance[k] < report.distance[k - 1])) report.decreasing = false;
    }
    report.below_tolerance = !report.distance.empty() && report.distance.back() <= tolerance;
    return report;
}

BackwardSolution weak_source_solve(const CoefficientModel& model, const SolverOptions& options) {
    const ModelReport rep = validate_model(model);
    if (!rep.a3_weak || !std::isfinite(rep.observed_s_k)) {
        throw BoundViolation("source has no finite K-norm on the grid: " + rep.verdict);
    }
    BackwardSolution sol = lyapunov_representation_solve(model, options);
    sol.meta.solver = "weak-source";
    if (!rep.a3) sol.meta.warnings.push_back(rep.verdict);
    return sol;
}

KNormAudit source_k_audit(const CoefficientModel& model, std::size_t n_paths, std::uint64_t seed,
                          std::size_t workers) {
    const auto& basis = *model.basis();
    const TimeGrid& grid = model.grid();
    const double tail = basis.tail_weight();
    KNormAudit audit;
    double g_sup = 1.0, g_l2 = std::sqrt(std::numbers::pi);
    if (model.profile()) {
        const ProfileStats ps = profile_stats(*model.profile());
        g_sup = ps.endpoint_sup;
        g_l2 = ps.l2_norm;
    }
    const bool field = !model.deterministic();
    audit.bound_sup = std::sqrt(2.0 * tail) * g_sup;
    audit.bound_l2 = field ? std::sqrt(2.0 * tail * 2.0 / std::numbers::pi) * g_l2 : 0.0;

    const std::size_t paths = field ? n_paths : 1;
    if (paths == 0) throw InvalidConfiguration("K-norm audit needs at least one path");
    std::vector<std::pair<double, double>> slots(paths);
    parallel_for(paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(grid, seed, j);
        Coefficients co;
        double r_sup = 0.0, r_l2 = 0.0;
        for (std::size_t i = 0; i <= grid.steps(); ++i) {
            model.evaluate_into(i, path.prefix(i), co);
            const double ks = k_norm(co.s, basis.weights());
            // Size of the field: |s(t, W_t)| for a random field, sup |s_k| otherwise.
            const double size = field ? std::abs((*model.s_field())(grid.time(i), path.w(i)))
                                      : co.s.cwiseAbs().maxCoeff();
            if (size == 0.0) continue;
            r_sup = std::max(r_sup, ks / (size * audit.bound_sup));
            if (field) r_l2 = std::max(r_l2, ks / (size * audit.bound_l2));
        }
        slots[j] = {r_sup, r_l2};
    });
    for (const auto& [a, b] : slots) {
        audit.max_ratio_sup = std::max(audit.max_ratio_sup, a);
        audit.max_ratio_l2 = std::max(audit.max_ratio_l2, b);
    }
    audit.samples = paths * (grid.steps() + 1);
    const double slack = 1.0 + 1e-10;
    audit.holds = audit.max_ratio_sup <= slack && audit.max_ratio_l2 <= slack;
    return audit;
}

}  // namespace bsre
