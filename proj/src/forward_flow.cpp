#include "bsre/forward_flow.hpp"

#include "bsre/errors.hpp"
#include "bsre/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace bsre {

namespace {

void check_dimensions(const Eigen::VectorXd& x, const CoefficientModel& model, const BrownianPath& path) {
    if (static_cast<std::size_t>(x.size()) != model.modes()) {
        throw ContractViolation("state dimension " + std::to_string(x.size()) + " does not match " +
                                std::to_string(model.modes()) + " modes");
    }
    if (!(path.grid() == model.grid())) throw ContractViolation("path grid does not match the model grid");
}

}  // namespace

ControlPolicy ControlPolicy::zero() { return {}; }

ControlPolicy ControlPolicy::open_loop(std::vector<Eigen::VectorXd> u) {
    ControlPolicy p;
    p.kind_ = Kind::OpenLoop;
    p.fixed_ = std::move(u);
    return p;
}

ControlPolicy ControlPolicy::feedback(Rule rule) {
    ControlPolicy p;
    p.kind_ = Kind::Feedback;
    p.rule_ = std::move(rule);
    return p;
}

Eigen::VectorXd ControlPolicy::operator()(std::size_t i, const Eigen::VectorXd& y) const {
    switch (kind_) {
        case Kind::Zero: return Eigen::VectorXd::Zero(y.size());
        case Kind::OpenLoop:
            if (i >= fixed_.size()) throw ContractViolation("open-loop control shorter than the grid");
            return fixed_[i];
        case Kind::Feedback: return rule_(i, y);
    }
    return {};
}

Eigen::VectorXd step_decay(const SpectralBasis& basis, double h) {
    return (-h * basis.lambda_vector().array()).exp().matrix();
}

Eigen::VectorXd euler_step(const Eigen::VectorXd& decay, const Coefficients& co, const Eigen::VectorXd& y,
                           const Eigen::VectorXd* u, double h, double dw) {
    Eigen::VectorXd next = y + co.c * y * dw;
    if (u) next.noalias() += h * (co.b * *u);
    return decay.cwiseProduct(next);
}

Eigen::MatrixXd step_matrix(const Eigen::VectorXd& decay, const Eigen::MatrixXd& c, double dw) {
    Eigen::MatrixXd g = dw * c;
    g.diagonal().array() += 1.0;
    return decay.asDiagonal() * g;
}

Trajectory propagate(const Eigen::VectorXd& x, const ControlPolicy& control, const CoefficientModel& model,
                     const BrownianPath& path) {
    check_dimensions(x, model, path);
    const TimeGrid& grid = model.grid();
    const double h = grid.step();
    const Eigen::VectorXd decay = step_decay(*model.basis(), h);
    Trajectory tr{grid, {}, {}};
    tr.y.reserve(grid.steps() + 1);
    tr.y.push_back(x);
    if (!control.is_zero()) tr.u.reserve(grid.steps());
    Coefficients co;
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        model.evaluate_into(i, path.prefix(i), co);
        const Eigen::VectorXd& y = tr.y.back();
        if (control.is_zero()) {
            tr.y.push_back(euler_step(decay, co, y, nullptr, h, path.increment(i)));
        } else {
            Eigen::VectorXd u = control(i, y);
            if (u.size() != x.size()) throw ContractViolation("control dimension does not match the state");
            tr.y.push_back(euler_step(decay, co, y, &u, h, path.increment(i)));
            tr.u.push_back(std::move(u));
        }
    }
    return tr;
}

std::vector<FlowMatrix> flow_matrices(const CoefficientModel& model, const BrownianPath& path,
                                      std::size_t memory_budget) {
    if (!(path.grid() == model.grid())) throw ContractViolation("path grid does not match the model grid");
    const std::size_t n = model.modes();
    const std::size_t steps = model.grid().steps();
    const double bytes = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(steps + 1) * 8.0;
    if (bytes > static_cast<double>(memory_budget)) {
        throw InvalidConfiguration("flow matrices need " + std::to_string(static_cast<std::size_t>(bytes)) +
                                   " bytes, above the memory budget of " + std::to_string(memory_budget));
    }
    const Eigen::VectorXd decay = step_decay(*model.basis(), model.grid().step());
    std::vector<FlowMatrix> out(steps + 1, FlowMatrix{0, 0, OperatorMatrix::identity(model.basis())});
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    out[steps] = {steps, steps, OperatorMatrix(model.basis(), phi)};
    Coefficients co;
    for (std::size_t i = steps; i-- > 0;) {
        model.evaluate_into(i, path.prefix(i), co);
        phi = phi * step_matrix(decay, co.c, path.increment(i));
        out[i] = {i, steps, OperatorMatrix(model.basis(), phi)};
    }
    return out;
}

OperatorMatrix flow(const CoefficientModel& model, const BrownianPath& path, std::size_t i, std::size_t j) {
    if (!(path.grid() == model.grid())) throw ContractViolation("path grid does not match the model grid");
    if (j < i || j > model.grid().steps()) throw ContractViolation("flow needs from <= to <= L");
    const auto n = static_cast<Eigen::Index>(model.modes());
    const Eigen::VectorXd decay = step_decay(*model.basis(), model.grid().step());
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
    Coefficients co;
    for (std::size_t k = i; k < j; ++k) {
        model.evaluate_into(k, path.prefix(k), co);
        phi = step_matrix(decay, co.c, path.increment(k)) * phi;
    }
    return OperatorMatrix(model.basis(), std::move(phi));
}

MomentReport moment_audit(const CoefficientModel& model, const Eigen::VectorXd& x, const ControlPolicy& control,
                          std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    if (n_paths < 1000) throw InvalidConfiguration("moment audit needs at least 1000 paths");
    const TimeGrid& grid = model.grid();
    const std::size_t steps = grid.steps();
    // Slot per path: squared norms per time, then the control energy.
    std::vector<std::vector<double>> slots(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(grid, seed, j);
        const Trajectory tr = propagate(x, control, model, path);
        std::vector<double> v(steps + 2, 0.0);
        for (std::size_t i = 0; i <= steps; ++i) v[i] = tr.y[i].squaredNorm();
        double energy = 0.0;
        for (const auto& u : tr.u) energy += grid.step() * u.squaredNorm();
        v[steps + 1] = energy;
        slots[j] = std::move(v);
    });
    MomentReport r;
    r.n_paths = n_paths;
    r.second_moment.resize(steps + 1);
    const auto column = [&](std::size_t i) {
        return pairwise_reduce<double>(0, n_paths, [&](std::size_t j) { return slots[j][i]; }) /
               static_cast<double>(n_paths);
    };
    for (std::size_t i = 0; i <= steps; ++i) r.second_moment[i] = column(i);
    r.sup_second_moment = *std::max_element(r.second_moment.begin(), r.second_moment.end());
    r.bracket = x.squaredNorm() + column(steps + 1);
    if (r.bracket > 0.0) r.ratio = r.sup_second_moment / r.bracket;
    return r;
}

std::vector<double> exact_second_moments(const CoefficientModel& model, const Eigen::VectorXd& x) {
    if (!model.deterministic()) throw ContractViolation("exact second moments need deterministic coefficients");
    if (static_cast<std::size_t>(x.size()) != model.modes()) throw ContractViolation("state dimension mismatch");
    const TimeGrid& grid = model.grid();
    const double h = grid.step();
    const Eigen::VectorXd decay = step_decay(*model.basis(), h);
    Eigen::MatrixXd sigma = x * x.transpose();
    std::vector<double> out{sigma.trace()};
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        const Coefficients co = model.evaluate(i);
        Eigen::MatrixXd next = sigma + h * co.c * sigma * co.c.transpose();
        sigma = decay.asDiagonal() * next * decay.asDiagonal();
        out.push_back(sigma.trace());
    }
    return out;
}

double empirical_c2(const CoefficientModel& model, std::size_t n_paths, std::uint64_t seed, std::size_t workers) {
    const std::size_t n = model.modes();
    double worst = 0.0;
    if (model.deterministic()) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto m = exact_second_moments(model, Eigen::VectorXd::Unit(static_cast<Eigen::Index>(n),
                                                                             static_cast<Eigen::Index>(k)));
            worst = std::max(worst, *std::max_element(m.begin(), m.end()));
        }
    } else {
        if (n_paths < 1000) throw InvalidConfiguration("empirical C2 needs at least 1000 paths");
        const TimeGrid& grid = model.grid();
        const Eigen::VectorXd decay = step_decay(*model.basis(), grid.step());
        // Column norms of the running flow Phi(0 -> t_i), all unit vectors at once.
        std::vector<Eigen::MatrixXd> slots(n_paths);
        parallel_for(n_paths, workers, [&](std::size_t j) {
            const BrownianPath path = sample_path(grid, seed, j);
            Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            Eigen::MatrixXd norms(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.steps() + 1));
            norms.col(0) = phi.colwise().squaredNorm().transpose();
            Coefficients co;
            for (std::size_t i = 0; i < grid.steps(); ++i) {
                model.evaluate_into(i, path.prefix(i), co);
                phi = step_matrix(decay, co.c, path.increment(i)) * phi;
                norms.col(static_cast<Eigen::Index>(i + 1)) = phi.colwise().squaredNorm().transpose();
            }
            slots[j] = std::move(norms);
        });
        Eigen::MatrixXd mean = pairwise_reduce<Eigen::MatrixXd>(0, n_paths, [&](std::size_t j) { return slots[j]; });
        mean /= static_cast<double>(n_paths);
        worst = mean.maxCoeff();
    }
    return 2.0 * std::max(1.0, worst);
}

}  // namespace bsre
