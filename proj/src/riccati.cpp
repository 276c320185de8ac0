#include "bsre/riccati.hpp"

#include "backward_sweep.hpp"
#include "bsre/errors.hpp"
#include "bsre/forward_flow.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace bsre {

namespace {

using detail::SweepEngine;
using detail::SweepSpec;

SweepSpec lambda_spec(const OperatorProcess& k) {
    SweepSpec spec;
    spec.source = [&k](std::size_t i, double w, const Coefficients& co, Eigen::MatrixXd& out) {
        const Eigen::MatrixXd kb = k.at(i, w) * co.b;
        out = co.s;
        out.noalias() -= kb * kb.transpose();
    };
    spec.self_cpc = true;
    return spec;
}

BackwardSolution fresh_solution(const CoefficientModel& model, const SolverOptions& options, std::string solver) {
    BackwardSolution sol{model.grid(), model.basis(), OperatorProcess(model.grid(), model.modes()),
                         OperatorProcess(model.grid(), model.modes()), {}};
    sol.meta.solver = std::move(solver);
    sol.meta.backend = options.backend;
    sol.meta.regression = options.regression;
    if (options.backend == Backend::MonteCarlo) {
        sol.meta.seed = options.seed;
        sol.meta.n_paths = options.n_paths;
    }
    return sol;
}

}  // namespace

RiccatiBounds riccati_bounds(const CoefficientModel& model, const RiccatiConfig& config,
                             const SolverOptions& options) {
    RiccatiBounds out;
    out.c2 = empirical_c2(model, std::max<std::size_t>(config.c2_paths, 1000), options.seed, options.workers);
    const ModelReport rep = validate_model(model);
    const double c2sq = out.c2 * out.c2;
    out.base = c2sq * op_norm(model.terminal()) + 2.0 * c2sq * model.grid().horizon() * rep.observed_s;
    if (config.radius) {
        if (!(*config.radius > out.base)) {
            throw InvalidConfiguration("ball radius r = " + std::to_string(*config.radius) +
                                       " must exceed the Lyapunov bound " + std::to_string(out.base));
        }
        out.radius = *config.radius;
    } else {
        out.radius = out.base > 0.0 ? 2.0 * out.base : 1.0;
    }
    const double mb = model.bounds().m_b;
    if (mb > 0.0) out.theoretical_delta = (out.radius - out.base) / (c2sq * mb * mb * out.radius * out.radius);
    return out;
}

BackwardSolution lambda_apply(const OperatorProcess& k, const CoefficientModel& model,
                              const Eigen::MatrixXd& m_tilde, double radius, const SolverOptions& options,
                              std::optional<std::size_t> first, std::optional<std::size_t> last) {
    const std::size_t steps = model.grid().steps();
    if (!(k.grid() == model.grid()) || k.modes() != model.modes()) {
        throw ContractViolation("input process does not match the model grid and basis");
    }
    const std::size_t lo = first.value_or(0), hi = last.value_or(steps);
    if (lo >= hi || hi > steps) throw ContractViolation("lambda window must satisfy first < last <= L");
    if (m_tilde.rows() != static_cast<Eigen::Index>(model.modes()) || m_tilde.cols() != m_tilde.rows()) {
        throw ContractViolation("final datum has the wrong dimension");
    }
    const double size = detail::sup_op_norm(k, lo, hi);
    if (!(size <= radius)) {
        throw BallViolation("input process leaves the ball: sup |K| = " + std::to_string(size) +
                            " > r = " + std::to_string(radius));
    }
    SweepEngine engine(model, options);
    BackwardSolution sol = fresh_solution(model, options, "lambda");
    sol.p = k;
    sol.p.set_constant(hi, symmetric_part(m_tilde));
    SweepSpec spec = lambda_spec(k);
    spec.first = lo;
    spec.last = hi;
    engine.run(spec, sol.p, sol.q, &sol.meta.p0_std_error);
    sol.meta.radius = radius;
    return sol;
}

BackwardSolution riccati_solve(const CoefficientModel& model, const RiccatiConfig& config,
                               const SolverOptions& options) {
    const TimeGrid& grid = model.grid();
    if (config.delta && (!(*config.delta > 0.0) || *config.delta > grid.horizon())) {
        throw InvalidConfiguration("Riccati window delta must lie in (0, T]");
    }
    if (!(config.tol > 0.0)) throw InvalidConfiguration("Riccati tolerance must be positive");
    const RiccatiBounds bounds = riccati_bounds(model, config, options);

    SweepEngine engine(model, options);
    BackwardSolution sol = fresh_solution(model, options, "riccati");
    sol.p.set_constant(grid.steps(), model.terminal());
    detail::FixedPointSetup setup;
    setup.map = [](const OperatorProcess& iterate) { return lambda_spec(iterate); };
    const double delta = config.delta.value_or(grid.horizon());
    setup.window_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(delta / grid.step())));
    setup.auto_window = !config.delta.has_value();
    setup.tol = config.tol;
    setup.max_iter = config.max_iter;
    setup.max_halvings = config.max_halvings;
    setup.radius = bounds.radius;
    detail::windowed_fixed_point(engine, setup, sol.p, sol.q, sol.meta);
    sol.meta.tolerance = config.tol;
    sol.meta.radius = bounds.radius;
    sol.meta.theoretical_delta = bounds.theoretical_delta;
    sol.meta.c2 = bounds.c2;
    const ModelReport rep = validate_model(model);
    detail::finalize_positivity(sol, rep.s_psd && rep.m_psd, options.psd_tol);
    return sol;
}

std::vector<double> riccati_mode_oracle(double lambda, double c, double b, double s, double m, double horizon,
                                        std::span<const double> t_grid, double tol) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 1>;
    if (t_grid.empty()) return {};
    if (!(horizon > 0.0)) throw DomainError("oracle horizon must be positive");
    const double limit = 1.0 / tol;
    // tau = T - t runs forward from 0.
    std::vector<double> taus{0.0};
    for (double t : t_grid) {
        if (t < 0.0 || t > horizon) throw DomainError("oracle times must lie in [0, T]");
        taus.push_back(horizon - t);
    }
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    auto rhs = [&](const State& x, State& dx, double) {
        dx[0] = (-2.0 * lambda + c * c) * x[0] - b * b * x[0] * x[0] + s;
    };
    std::vector<double> values;
    values.reserve(taus.size());
    auto observe = [&](const State& x, double) {
        if (!std::isfinite(x[0]) || std::abs(x[0]) > limit) {
            throw OracleFailure("scalar Riccati oracle blew up (|P| > " + std::to_string(limit) + ")");
        }
        values.push_back(x[0]);
    };
    if (taus.size() == 1) {
        values.push_back(m);
    } else {
        State x{m};
        // Relative control: modes decaying far below `tol` keep their digits.
        auto stepper = odeint::make_dense_output(1e-8 * tol, tol, odeint::runge_kutta_dopri5<State>());
        odeint::integrate_times(stepper, rhs, x, taus.begin(), taus.end(), 1e-4 * taus.back(), observe);
    }
    if (values.size() != taus.size()) throw OracleFailure("scalar Riccati oracle missed an output time");
    std::vector<double> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        const auto it = std::lower_bound(taus.begin(), taus.end(), horizon - t);
        out.push_back(values[static_cast<std::size_t>(it - taus.begin())]);
    }
    return out;
}

Eigen::MatrixXd diagonal_oracle(const Eigen::VectorXd& lambda, const Eigen::VectorXd& c, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& s, const Eigen::VectorXd& m, double horizon,
                                std::span<const double> t_grid, double tol) {
    const Eigen::Index n = lambda.size();
    if (c.size() != n || b.size() != n || s.size() != n || m.size() != n) {
        throw ContractViolation("oracle coefficient vectors must have one entry per mode");
    }
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(t_grid.size()));
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto v = riccati_mode_oracle(lambda(k), c(k), b(k), s(k), m(k), horizon, t_grid, tol);
        for (std::size_t j = 0; j < v.size(); ++j) out(k, static_cast<Eigen::Index>(j)) = v[j];
    }
    return out;
}

}  // namespace bsre
