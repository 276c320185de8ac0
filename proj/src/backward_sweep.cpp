#include "backward_sweep.hpp"

#include "bsre/errors.hpp"
#include "bsre/forward_flow.hpp"
#include "bsre/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bsre::detail {

TrapezoidWeights trapezoid_weights(double alpha, double h) {
    const double z = alpha * h;
    double phi1 = 0.0, psi = 0.0;
    if (z < 0.1) {
        // phi1 = sum (-z)^n/(n+1)!, psi = sum (-z)^n/(n!(n+2))
        double term = 1.0;  // (-z)^n / n!
        for (int n = 0; n < 30; ++n) {
            phi1 += term / (n + 1);
            psi += term / (n + 2);
            term *= -z / (n + 1);
        }
    } else {
        const double one_minus = -std::expm1(-z);
        phi1 = one_minus / z;
        psi = (one_minus - z * std::exp(-z)) / (z * z);
    }
    return {std::exp(-z), h * (phi1 - psi), h * psi, h * phi1};
}

SweepEngine::SweepEngine(const CoefficientModel& model, const SolverOptions& options)
    : model_(model), options_(options) {
    const auto& basis = *model.basis();
    const double h = model.grid().step();
    const auto n = static_cast<Eigen::Index>(basis.size());
    decay_ = step_decay(basis, h);
    decay_pair_.resize(n, n);
    w0_.resize(n, n);
    w1_.resize(n, n);
    wl_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto w = trapezoid_weights(basis.lambda(static_cast<std::size_t>(j)) +
                                                 basis.lambda(static_cast<std::size_t>(k)),
                                             h);
            decay_pair_(j, k) = w.decay;
            w0_(j, k) = w.w0;
            w1_(j, k) = w.w1;
            wl_(j, k) = w.left;
        }
    }
    if (options_.backend == Backend::DeterministicExact) {
        if (!model.deterministic()) {
            throw InvalidConfiguration(
                "deterministic-exact backend requires a constant-diagonal or deterministic-schedule model");
        }
    } else {
        if (options_.n_paths < 100) {
            throw InvalidConfiguration("monte-carlo backend needs at least 100 paths");
        }
        if (options_.n_paths < options_.regression.degree + 1) {
            throw InvalidConfiguration("regression underdetermined: fewer paths than features");
        }
        if (options_.regression.degree > kMaxRegressionDegree) {
            throw InvalidConfiguration("regression degree above " + std::to_string(kMaxRegressionDegree));
        }
        paths_.emplace(model.grid(), options_.n_paths, options_.seed, options_.workers);
    }
}

void SweepEngine::run(const SweepSpec& spec, OperatorProcess& p, OperatorProcess& q,
                      std::optional<Eigen::MatrixXd>* p0_std_error) const {
    if (spec.first >= spec.last || spec.last > model_.grid().steps()) {
        throw ContractViolation("sweep window must satisfy first < last <= L");
    }
    if (options_.backend == Backend::DeterministicExact) {
        run_deterministic(spec, p);
    } else {
        run_monte_carlo(spec, p, q, p0_std_error);
    }
}

void SweepEngine::run_deterministic(const SweepSpec& spec, OperatorProcess& p) const {
    Eigen::MatrixXd src, next_f, base, iterate, update;
    Coefficients co = model_.evaluate(spec.last);
    spec.source(spec.last, 0.0, co, next_f);
    if (spec.self_cpc) next_f.noalias() += co.c.transpose() * p.mean(spec.last) * co.c;

    for (std::size_t i = spec.last; i-- > spec.first;) {
        co = model_.evaluate(i);
        spec.source(i, 0.0, co, src);
        base = decay_pair_.cwiseProduct(p.mean(i + 1)) + w1_.cwiseProduct(next_f) + w0_.cwiseProduct(src);
        if (spec.self_cpc) {
            iterate = base + w0_.cwiseProduct(co.c.transpose() * p.mean(i + 1) * co.c);
            for (int k = 0;; ++k) {
                update = base + w0_.cwiseProduct(co.c.transpose() * iterate * co.c);
                const double change = (update - iterate).cwiseAbs().maxCoeff();
                iterate.swap(update);
                if (change <= 4e-16 * iterate.cwiseAbs().maxCoeff() || change == 0.0) break;
                if (k == 200) {
                    throw NonConvergence("implicit step at index " + std::to_string(i) + " did not converge",
                                         {change});
                }
            }
        } else {
            iterate = base;
        }
        Eigen::MatrixXd value = symmetric_part(iterate);
        next_f = src;
        if (spec.self_cpc) next_f.noalias() += co.c.transpose() * value * co.c;
        p.set_constant(i, std::move(value));
    }
}

void SweepEngine::run_monte_carlo(const SweepSpec& spec, OperatorProcess& p, OperatorProcess& q,
                                  std::optional<Eigen::MatrixXd>* p0_std_error) const {
    const PathEnsemble& paths = *paths_;
    const std::size_t n = paths.size();
    const TimeGrid& grid = model_.grid();

    std::vector<Eigen::MatrixXd> y(n);
    std::vector<double> w_now(n);
    parallel_for(n, options_.workers, [&](std::size_t j) { y[j] = p.at(spec.last, paths.w(j, spec.last)); });

    for (std::size_t i = spec.last; i-- > spec.first;) {
        parallel_for(n, options_.workers, [&](std::size_t j) {
            Coefficients co;
            model_.evaluate_into(i, paths.prefix(j, i), co);
            const double dw = paths.increment(j, i);
            Eigen::MatrixXd next;
            if (spec.self_cpc) {
                const Eigen::MatrixXd g = step_matrix(decay_, co.c, dw);
                next = g.transpose() * y[j] * g;
            } else {
                Eigen::MatrixXd inner = y[j];
                inner.noalias() += dw * (co.c.transpose() * y[j]);
                inner.noalias() += dw * (y[j] * co.c);
                next = decay_.asDiagonal() * inner * decay_.asDiagonal();
            }
            Eigen::MatrixXd src;
            spec.source(i, paths.w(j, i), co, src);
            next += wl_.cwiseProduct(src);
            y[j] = symmetric_part(next);
        });
        for (std::size_t j = 0; j < n; ++j) w_now[j] = paths.w(j, i);
        SurfaceFit fit = fit_surface(w_now, y, grid.time(i), options_.regression, true);
        if (i == 0 && p0_std_error) *p0_std_error = fit.mean_std_error;
        p.set(i, std::move(fit.coefficients));
    }
    if (spec.extract_q) {
        extract_q_window(p, paths, spec.first, spec.last, options_.regression, options_.workers, q);
    }
}

void extract_q_window(const OperatorProcess& p, const PathEnsemble& paths, std::size_t first, std::size_t last,
                      const RegressionConfig& regression, std::size_t workers, OperatorProcess& q) {
    const std::size_t n = paths.size();
    const TimeGrid& grid = paths.grid();
    const double h = grid.step();
    std::vector<Eigen::MatrixXd> targets(n);
    std::vector<double> w_now(n);
    for (std::size_t i = first; i < last; ++i) {
        parallel_for(n, workers, [&](std::size_t j) {
            const double w0 = paths.w(j, i), w1 = paths.w(j, i + 1);
            targets[j] = (p.at(i + 1, w1) - p.at(i, w0)) * ((w1 - w0) / h);
        });
        for (std::size_t j = 0; j < n; ++j) w_now[j] = paths.w(j, i);
        SurfaceFit fit = fit_surface(w_now, targets, grid.time(i), regression, true);
        q.set(i, std::move(fit.coefficients));
    }
}

double sup_op_norm(const OperatorProcess& x, std::size_t first, std::size_t last) {
    double out = 0.0;
    Eigen::MatrixXd value;
    for (std::size_t i = first; i <= last; ++i) {
        for (double w : x.probe_points(i)) {
            x.at_into(i, w, value);
            out = std::max(out, op_norm(value));
        }
    }
    return out;
}

namespace {

// Slices [first, last) set to the slice at `last` (constant slice at t = 0).
void hold_terminal(OperatorProcess& x, std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
        if (i == 0) {
            x.set_constant(0, x.mean(last));
        } else {
            x.set(i, x.coefficients(last));
        }
    }
}

}  // namespace

void windowed_fixed_point(const SweepEngine& engine, const FixedPointSetup& setup, OperatorProcess& p,
                          OperatorProcess& q, SolverMeta& meta) {
    const TimeGrid& grid = engine.model().grid();
    const double scale_floor = 64 * std::numeric_limits<double>::epsilon();
    std::size_t steps = std::max<std::size_t>(1, std::min(setup.window_steps, grid.steps()));
    std::size_t last = grid.steps();
    meta.windows.clear();
    meta.halvings = 0;

    auto halve = [&](const std::string& why, const std::vector<double>& residuals) {
        if (!setup.auto_window) return false;
        if (steps == 1 || meta.halvings >= setup.max_halvings) {
            throw NonConvergence("automatic window gave up after " + std::to_string(meta.halvings) +
                                     " halvings: " + why,
                                 residuals);
        }
        steps = std::max<std::size_t>(1, steps / 2);
        ++meta.halvings;
        return true;
    };

    while (last > 0) {
        const std::size_t first = last > steps ? last - steps : 0;
        OperatorProcess iterate = p;
        hold_terminal(iterate, first, last);
        WindowRecord record{first, last, 0, {}, {}};
        bool restart = false;
        for (std::size_t m = 1;; ++m) {
            OperatorProcess next = iterate;
            SweepSpec spec = setup.map(iterate);
            spec.first = first;
            spec.last = last;
            spec.extract_q = false;
            engine.run(spec, next, q, first == 0 ? &meta.p0_std_error : nullptr);
            const double residual = sup_distance(next, iterate, first, last);
            record.residuals.push_back(residual);
            record.iterations = m;
            if (record.residuals.size() >= 2) {
                const double prev = record.residuals[record.residuals.size() - 2];
                record.ratios.push_back(prev > 0.0 ? residual / prev : 0.0);
            }
            if (setup.radius) {
                const double size = sup_op_norm(next, first, last);
                if (!(size <= *setup.radius)) {
                    const std::string why = "iterate left the ball: sup |P| = " + std::to_string(size) +
                                            " > r = " + std::to_string(*setup.radius);
                    if (halve(why, record.residuals)) {
                        restart = true;
                        break;
                    }
                    throw BallViolation(why + " on window [" + std::to_string(grid.time(first)) + ", " +
                                        std::to_string(grid.time(last)) + "]");
                }
            }
            iterate = std::move(next);
            const double magnitude = std::max(1.0, sup_op_norm(iterate, last, last));
            if (residual <= setup.tol || residual <= scale_floor * magnitude) break;
            if (!record.ratios.empty() && record.ratios.back() >= 0.9 &&
                halve("measured contraction ratio " + std::to_string(record.ratios.back()), record.residuals)) {
                restart = true;
                break;
            }
            if (m >= setup.max_iter) {
                throw NonConvergence("window [" + std::to_string(grid.time(first)) + ", " +
                                         std::to_string(grid.time(last)) + "] did not converge in " +
                                         std::to_string(setup.max_iter) + " iterations",
                                     record.residuals);
            }
        }
        if (restart) continue;
        for (std::size_t i = first; i < last; ++i) p.set(i, iterate.coefficients(i));
        if (const PathEnsemble* paths = engine.paths()) {
            extract_q_window(p, *paths, first, last, engine.options().regression, engine.options().workers, q);
        }
        meta.windows.push_back(std::move(record));
        last = first;
    }
    meta.delta = static_cast<double>(steps) * grid.step();
}

void finalize_positivity(BackwardSolution& solution, bool enforce, double psd_tol) {
    const std::size_t steps = solution.grid.steps();
    solution.meta.min_eigenvalue.assign(steps + 1, 0.0);
    const bool deterministic = solution.meta.backend == Backend::DeterministicExact;
    for (std::size_t i = 0; i <= steps; ++i) {
        const Eigen::MatrixXd& mean = solution.p.mean(i);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean);
        double lo = es.eigenvalues().minCoeff();
        if (!deterministic) {
            for (double w : solution.p.probe_points(i)) {
                const Eigen::MatrixXd v = solution.p.at(i, w);
                lo = std::min(lo, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(v, Eigen::EigenvaluesOnly)
                                      .eigenvalues()
                                      .minCoeff());
            }
        }
        solution.meta.min_eigenvalue[i] = lo;
        if (!enforce) continue;
        if (!deterministic) {
            if (lo < -psd_tol) {
                solution.meta.warnings.push_back("P(t_" + std::to_string(i) + ") has eigenvalue " +
                                                 std::to_string(lo) + " below -psd_tol");
            }
            continue;
        }
        if (lo < -psd_tol) {
            throw NonConvergence("P(t_" + std::to_string(i) + ") is not positive semidefinite: eigenvalue " +
                                     std::to_string(lo),
                                 {});
        }
        if (lo < 0.0 && i < steps) {
            Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
            solution.p.set_constant(i, symmetric_part(es.eigenvectors() * ev.asDiagonal() *
                                                      es.eigenvectors().transpose()));
            solution.meta.min_eigenvalue[i] = 0.0;
        }
    }
}

}  // namespace bsre::detail
