#include "bsre/lq_control.hpp"

#include "bsre/errors.hpp"
#include "bsre/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace bsre {

namespace {

// sqrt(S_i) per step, cached where S does not depend on the driver.
class CostFunctional {
public:
    CostFunctional(const CoefficientModel& model, double psd_tol = 1e-10) : model_(model) {
        const std::size_t steps = model.grid().steps();
        switch (model.variant()) {
            case ModelVariant::ConstantDiagonal:
                roots_.push_back(psd_sqrt(model.evaluate(0).s, psd_tol));
                break;
            case ModelVariant::DeterministicSchedule:
                for (std::size_t i = 0; i < steps; ++i) roots_.push_back(psd_sqrt(model.evaluate(i).s, psd_tol));
                break;
            case ModelVariant::ScalarRandomField:
                roots_.push_back(psd_sqrt(model.source_shape(), psd_tol));
                break;
        }
    }

    double operator()(const Trajectory& tr, const BrownianPath& path) const {
        const TimeGrid& grid = model_.grid();
        const double h = grid.step();
        double running = 0.0;
        for (std::size_t i = 0; i < grid.steps(); ++i) {
            double state = 0.0;
            switch (model_.variant()) {
                case ModelVariant::ConstantDiagonal: state = (roots_[0] * tr.y[i]).squaredNorm(); break;
                case ModelVariant::DeterministicSchedule: state = (roots_[i] * tr.y[i]).squaredNorm(); break;
                case ModelVariant::ScalarRandomField: {
                    const double s = (*model_.s_field())(grid.time(i), path.w(i));
                    if (s < 0.0) {
                        throw ContractViolation("cost weight S(t) is not positive semidefinite (s = " +
                                                std::to_string(s) + ")");
                    }
                    state = s * (roots_[0] * tr.y[i]).squaredNorm();
                    break;
                }
            }
            const double control = tr.u.empty() ? 0.0 : tr.u[i].squaredNorm();
            running += h * (state + control);
        }
        const Eigen::VectorXd& y = tr.y.back();
        return running + y.dot(model_.terminal() * y);
    }

private:
    const CoefficientModel& model_;
    std::vector<Eigen::MatrixXd> roots_;
};

double z_of(double diff, double se) {
    if (se > 0.0) return diff / se;
    if (diff == 0.0) return 0.0;
    return std::copysign(std::numeric_limits<double>::infinity(), diff);
}

Eigen::MatrixXd p_at(const BackwardSolution& sol, std::size_t i, double w) {
    return sol.p.coefficients(i).size() == 1 ? sol.p.mean(i) : sol.p.at(i, w);
}

void require_grid(const BackwardSolution& sol, const CoefficientModel& model) {
    if (!(sol.grid == model.grid()) || sol.p.modes() != model.modes()) {
        throw ContractViolation("Riccati solution and model use different grids or bases");
    }
}

}  // namespace

Eigen::VectorXd feedback(const OperatorMatrix& p, const OperatorMatrix& b, const Eigen::VectorXd& y) {
    if (p.size() != b.size() || static_cast<std::size_t>(y.size()) != p.size()) {
        throw ContractViolation("feedback operands have mismatched dimensions");
    }
    return -(b.entries().transpose() * (p.entries() * y));
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s, double psd_tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw ContractViolation("eigendecomposition of S failed");
    if (es.eigenvalues().minCoeff() < -psd_tol) {
        throw ContractViolation("cost weight S is not positive semidefinite");
    }
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double realized_cost(const Trajectory& trajectory, const CoefficientModel& model, const BrownianPath& path) {
    return CostFunctional(model)(trajectory, path);
}

ControlPolicy feedback_policy(const BackwardSolution& riccati, const CoefficientModel& model,
                              const BrownianPath& path) {
    require_grid(riccati, model);
    return ControlPolicy::feedback([&riccati, &model, &path](std::size_t i, const Eigen::VectorXd& y) {
        const Coefficients co = model.evaluate(i, path.prefix(i));
        const Eigen::MatrixXd p = p_at(riccati, i, path.w(i));
        return Eigen::VectorXd(-(co.b.transpose() * (p * y)));
    });
}

ControlRun run_policy(const Eigen::VectorXd& x, const ControlPolicy& policy, const CoefficientModel& model,
                      const BrownianPath& path) {
    ControlRun run{propagate(x, policy, model, path), 0.0, path.seed(), path.index()};
    run.cost = realized_cost(run.trajectory, model, path);
    return run;
}

ControlRun closed_loop(const Eigen::VectorXd& x, const BackwardSolution& riccati, const CoefficientModel& model,
                       const BrownianPath& path) {
    return run_policy(x, feedback_policy(riccati, model, path), model, path);
}

ValueCheck value_check(const Eigen::VectorXd& x, const BackwardSolution& riccati, const CoefficientModel& model,
                       std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    require_grid(riccati, model);
    if (n_paths < 1000) throw InvalidConfiguration("value check needs at least 1000 paths");
    const CostFunctional cost(model);
    ValueCheck out;
    out.n_paths = n_paths;
    out.costs.resize(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(model.grid(), seed, j);
        out.costs[j] = cost(propagate(x, feedback_policy(riccati, model, path), model, path), path);
    });
    const MeanAndError me = mean_and_error(out.costs);
    out.mean_cost = me.mean;
    out.std_error = me.std_error;
    out.predicted = x.dot(riccati.p.mean(0) * x);
    out.z_score = z_of(out.mean_cost - out.predicted, out.std_error);
    return out;
}

Challenger zero_challenger() {
    return {"zero", [](const BrownianPath&) { return ControlPolicy::zero(); }};
}

Challenger random_open_loop_challenger(double amplitude, std::uint64_t seed) {
    return {"random-open-loop", [amplitude, seed](const BrownianPath& path) {
                // Drawn step by step from a stream that never touches the driver.
                std::mt19937_64 engine(path_stream_seed(seed ^ 0x6a09e667f3bcc908ULL, path.index()));
                return ControlPolicy::feedback(
                    [amplitude, engine, normal = std::normal_distribution<double>(0.0, 1.0)](
                        std::size_t, const Eigen::VectorXd& y) mutable {
                        Eigen::VectorXd u(y.size());
                        for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = amplitude * normal(engine);
                        return u;
                    });
            }};
}

Challenger gain_challenger(double gain) {
    return {"gain-" + std::to_string(gain), [gain](const BrownianPath&) {
                return ControlPolicy::feedback(
                    [gain](std::size_t, const Eigen::VectorXd& y) { return Eigen::VectorXd(-gain * y); });
            }};
}

Challenger feedback_challenger(const BackwardSolution& riccati, const CoefficientModel& model) {
    return {"feedback", [&riccati, &model](const BrownianPath& path) { return feedback_policy(riccati, model, path); }};
}

SuboptimalityReport suboptimality_probe(const Eigen::VectorXd& x, const BackwardSolution& riccati,
                                        const CoefficientModel& model, const std::vector<Challenger>& challengers,
                                        std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    require_grid(riccati, model);
    bool has_zero = false, has_random = false;
    for (const auto& c : challengers) {
        has_zero = has_zero || c.name == "zero";
        has_random = has_random || c.name == "random-open-loop";
    }
    if (!has_zero || !has_random) {
        throw InvalidConfiguration("the probe needs a zero and a random open-loop challenger");
    }
    if (n_paths < 2) throw InvalidConfiguration("the probe needs at least two paths");
    const CostFunctional cost(model);
    const std::size_t k = challengers.size();
    std::vector<double> base(n_paths);
    std::vector<std::vector<double>> other(k, std::vector<double>(n_paths));
    parallel_for(n_paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(model.grid(), seed, j);
        base[j] = cost(propagate(x, feedback_policy(riccati, model, path), model, path), path);
        for (std::size_t c = 0; c < k; ++c) {
            other[c][j] = cost(propagate(x, challengers[c].make(path), model, path), path);
        }
    });
    SuboptimalityReport report;
    report.n_paths = n_paths;
    const MeanAndError fb = mean_and_error(base);
    report.feedback_mean = fb.mean;
    report.feedback_std_error = fb.std_error;
    std::vector<double> diff(n_paths);
    for (std::size_t c = 0; c < k; ++c) {
        ChallengerResult r;
        r.name = challengers[c].name;
        const MeanAndError me = mean_and_error(other[c]);
        r.mean_cost = me.mean;
        r.std_error = me.std_error;
        for (std::size_t j = 0; j < n_paths; ++j) diff[j] = other[c][j] - base[j];
        const MeanAndError d = mean_and_error(diff);
        r.difference = d.mean;
        r.paired_std_error = d.std_error;
        r.combined_std_error = std::sqrt(fb.std_error * fb.std_error + me.std_error * me.std_error);
        r.feedback_not_worse = fb.mean <= me.mean + 3.0 * r.combined_std_error;
        r.feedback_strictly_better = r.difference > 3.0 * r.combined_std_error;
        report.passed = report.passed && r.feedback_not_worse;
        report.challengers.push_back(std::move(r));
    }
    return report;
}

CompletionOfSquares completion_of_squares(const Eigen::VectorXd& x, const BackwardSolution& riccati,
                                          const CoefficientModel& model, const Challenger& policy,
                                          std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    require_grid(riccati, model);
    if (n_paths < 2) throw InvalidConfiguration("completion-of-squares check needs at least two paths");
    const CostFunctional cost(model);
    const double h = model.grid().step();
    std::vector<double> costs(n_paths), gaps(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(model.grid(), seed, j);
        const Trajectory tr = propagate(x, policy.make(path), model, path);
        double gap = 0.0;
        for (std::size_t i = 0; i < model.grid().steps(); ++i) {
            const Coefficients co = model.evaluate(i, path.prefix(i));
            Eigen::VectorXd v = co.b.transpose() * (p_at(riccati, i, path.w(i)) * tr.y[i]);
            if (!tr.u.empty()) v += tr.u[i];
            gap += h * v.squaredNorm();
        }
        costs[j] = cost(tr, path);
        gaps[j] = gap;
    });
    CompletionOfSquares out;
    out.predicted = x.dot(riccati.p.mean(0) * x);
    std::vector<double> residual(n_paths);
    for (std::size_t j = 0; j < n_paths; ++j) residual[j] = costs[j] - out.predicted - gaps[j];
    out.mean_cost = mean_and_error(costs).mean;
    out.mean_gap = mean_and_error(gaps).mean;
    const MeanAndError r = mean_and_error(residual);
    out.residual = r.mean;
    out.std_error = r.std_error;
    out.z_score = z_of(r.mean, r.std_error);
    return out;
}

}  // namespace bsre
