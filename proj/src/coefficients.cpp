#include "bsre/coefficients.hpp"

#include "bsre/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace bsre {

namespace {

constexpr std::size_t kPanels = 512;
constexpr std::size_t kGradedLevels = 40;
constexpr double kGrading = 0.15;

Eigen::VectorXd broadcast(const Eigen::VectorXd& v, std::size_t n, const char* name) {
    if (v.size() == 1) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), v(0));
    if (static_cast<std::size_t>(v.size()) != n) {
        std::ostringstream msg;
        msg << "coefficient '" << name << "' has " << v.size() << " entries, expected 1 or " << n;
        throw InvalidConfiguration(msg.str());
    }
    return v;
}

std::vector<Expression> broadcast(std::vector<Expression> v, std::size_t n, const char* name) {
    if (v.size() == 1) return std::vector<Expression>(n, v.front());
    if (v.size() != n) {
        std::ostringstream msg;
        msg << "schedule '" << name << "' has " << v.size() << " expressions, expected 1 or " << n;
        throw InvalidConfiguration(msg.str());
    }
    return v;
}

void require_finite(const Eigen::VectorXd& v, const char* name) {
    if (!v.allFinite()) throw InvalidConfiguration(std::string("coefficient '") + name + "' is not finite");
}

void require_no_w(const Expression& e, const char* name) {
    if (e.uses_w() || e.uses_x()) {
        throw InvalidConfiguration(std::string("deterministic schedule '") + name +
                                   "' may only depend on t: " + e.source());
    }
}

[[noreturn]] void bound_violation(const char* what, double value, double bound, std::size_t i, double w) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "|" << what << "| = " << value << " exceeds declared bound " << bound << " at step " << i
        << " (W = " << w << ")";
    throw BoundViolation(msg.str());
}

// Quadrature nodes and weights on [0, pi].
struct Rule {
    std::vector<double> x, w;
};

const Rule& profile_rule() {
    static const Rule rule = [] {
        using gauss = boost::math::quadrature::gauss<double, 8>;
        const auto& a = gauss::abscissa();
        const auto& wt = gauss::weights();
        Rule r;
        const auto panel = [&](double lo, double hi) {
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            for (std::size_t j = 0; j < a.size(); ++j) {
                for (double sign : {-1.0, 1.0}) {
                    r.x.push_back(mid + sign * a[j] * half);
                    r.w.push_back(wt[j] * half);
                }
            }
        };
        // Uniform interior panels; the two end panels are graded
        // geometrically so integrable endpoint singularities converge.
        const double width = std::numbers::pi / static_cast<double>(kPanels);
        for (std::size_t p = 1; p + 1 < kPanels; ++p) {
            panel(static_cast<double>(p) * width, static_cast<double>(p + 1) * width);
        }
        for (std::size_t k = 0; k < kGradedLevels; ++k) {
            const double hi = width * std::pow(kGrading, static_cast<double>(k));
            const double lo = k + 1 == kGradedLevels ? 0.0 : hi * kGrading;
            panel(lo, hi);
            panel(std::numbers::pi - hi, std::numbers::pi - lo);
        }
        return r;
    }();
    return rule;
}

}  // namespace

std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::ConstantDiagonal: return "constant-diagonal";
        case ModelVariant::DeterministicSchedule: return "deterministic-schedule";
        case ModelVariant::ScalarRandomField: return "scalar-random-field";
    }
    return "unknown";
}

CoefficientModel CoefficientModel::constant_diagonal(BasisPtr basis, TimeGrid grid, const Eigen::VectorXd& c,
                                                     const Eigen::VectorXd& b, const Eigen::VectorXd& s,
                                                     const Eigen::VectorXd& m,
                                                     std::optional<ModelBounds> bounds) {
    CoefficientModel model(std::move(basis), grid);
    const std::size_t n = model.modes();
    model.variant_ = ModelVariant::ConstantDiagonal;
    model.c_const_ = broadcast(c, n, "c");
    model.b_const_ = broadcast(b, n, "b");
    model.s_const_ = broadcast(s, n, "s");
    const Eigen::VectorXd mv = broadcast(m, n, "m");
    require_finite(model.c_const_, "c");
    require_finite(model.b_const_, "b");
    require_finite(model.s_const_, "s");
    require_finite(mv, "m");
    model.m_ = mv.asDiagonal();
    model.profile_matrix_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    const double c_sup = model.c_const_.cwiseAbs().maxCoeff();
    const double b_sup = model.b_const_.cwiseAbs().maxCoeff();
    const double s_sup = model.s_const_.cwiseAbs().maxCoeff();
    model.bounds_ = bounds.value_or(ModelBounds{c_sup, b_sup, s_sup});
    if (c_sup > model.bounds_.m_c) bound_violation("C", c_sup, model.bounds_.m_c, 0, 0.0);
    if (b_sup > model.bounds_.m_b) bound_violation("B", b_sup, model.bounds_.m_b, 0, 0.0);
    if (model.bounds_.m_s && s_sup > *model.bounds_.m_s) bound_violation("S", s_sup, *model.bounds_.m_s, 0, 0.0);
    return model;
}

CoefficientModel CoefficientModel::deterministic_schedule(BasisPtr basis, TimeGrid grid, std::vector<Expression> c,
                                                          std::vector<Expression> b, std::vector<Expression> s,
                                                          const Eigen::VectorXd& m,
                                                          std::optional<ModelBounds> bounds) {
    CoefficientModel model(std::move(basis), grid);
    const std::size_t n = model.modes();
    model.variant_ = ModelVariant::DeterministicSchedule;
    model.c_sched_ = broadcast(std::move(c), n, "c");
    model.b_sched_ = broadcast(std::move(b), n, "b");
    model.s_sched_ = broadcast(std::move(s), n, "s");
    for (const auto& e : model.c_sched_) require_no_w(e, "c");
    for (const auto& e : model.b_sched_) require_no_w(e, "b");
    for (const auto& e : model.s_sched_) require_no_w(e, "s");
    const Eigen::VectorXd mv = broadcast(m, n, "m");
    require_finite(mv, "m");
    model.m_ = mv.asDiagonal();
    model.profile_matrix_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    const auto steps = static_cast<Eigen::Index>(grid.steps() + 1);
    model.c_table_.resize(static_cast<Eigen::Index>(n), steps);
    model.b_table_.resize(static_cast<Eigen::Index>(n), steps);
    model.s_table_.resize(static_cast<Eigen::Index>(n), steps);
    for (Eigen::Index i = 0; i < steps; ++i) {
        const double t = grid.time(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < n; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            model.c_table_(kk, i) = model.c_sched_[k](t, 0.0);
            model.b_table_(kk, i) = model.b_sched_[k](t, 0.0);
            model.s_table_(kk, i) = model.s_sched_[k](t, 0.0);
        }
    }
    if (!model.c_table_.allFinite() || !model.b_table_.allFinite() || !model.s_table_.allFinite()) {
        throw InvalidConfiguration("deterministic schedule produced non-finite values on the grid");
    }
    const double c_sup = model.c_table_.cwiseAbs().maxCoeff();
    const double b_sup = model.b_table_.cwiseAbs().maxCoeff();
    const double s_sup = model.s_table_.cwiseAbs().maxCoeff();
    model.bounds_ = bounds.value_or(ModelBounds{c_sup, b_sup, s_sup});
    if (c_sup > model.bounds_.m_c) bound_violation("C", c_sup, model.bounds_.m_c, 0, 0.0);
    if (b_sup > model.bounds_.m_b) bound_violation("B", b_sup, model.bounds_.m_b, 0, 0.0);
    if (model.bounds_.m_s && s_sup > *model.bounds_.m_s) bound_violation("S", s_sup, *model.bounds_.m_s, 0, 0.0);
    return model;
}

CoefficientModel CoefficientModel::scalar_random_field(BasisPtr basis, TimeGrid grid, Expression c, Expression s,
                                                       const Eigen::VectorXd& b, const Eigen::VectorXd& m,
                                                       ModelBounds bounds, std::optional<Expression> profile) {
    CoefficientModel model(std::move(basis), grid);
    const std::size_t n = model.modes();
    model.variant_ = ModelVariant::ScalarRandomField;
    if (c.uses_x() || s.uses_x()) {
        throw InvalidConfiguration("field expressions c and s may depend on t and w only");
    }
    model.c_field_ = std::move(c);
    model.s_field_ = std::move(s);
    model.b_const_ = broadcast(b, n, "b");
    require_finite(model.b_const_, "b");
    const Eigen::VectorXd mv = broadcast(m, n, "m");
    require_finite(mv, "m");
    model.m_ = mv.asDiagonal();
    if (!(bounds.m_c >= 0.0) || !(bounds.m_b >= 0.0)) {
        throw InvalidConfiguration("bounds M_C and M_B must be nonnegative");
    }
    model.bounds_ = bounds;
    const double b_sup = model.b_const_.cwiseAbs().maxCoeff();
    if (b_sup > bounds.m_b) bound_violation("B", b_sup, bounds.m_b, 0, 0.0);
    if (profile) {
        if (profile->uses_t() || profile->uses_w()) {
            throw InvalidConfiguration("source profile may depend on x only");
        }
        model.profile_matrix_ = multiplication_matrix(*profile, n);
        model.profile_ = std::move(profile);
    } else {
        model.profile_matrix_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    }
    return model;
}

void CoefficientModel::evaluate_into(std::size_t i, PathPrefix prefix, Coefficients& out) const {
    const auto n = static_cast<Eigen::Index>(modes());
    if (i > grid_.steps()) throw ContractViolation("coefficient evaluation beyond the grid");
    switch (variant_) {
        case ModelVariant::ConstantDiagonal:
            out.c = c_const_.asDiagonal();
            out.b = b_const_.asDiagonal();
            out.s = s_const_.asDiagonal();
            return;
        case ModelVariant::DeterministicSchedule: {
            const auto col = static_cast<Eigen::Index>(i);
            out.c = c_table_.col(col).asDiagonal();
            out.b = b_table_.col(col).asDiagonal();
            out.s = s_table_.col(col).asDiagonal();
            return;
        }
        case ModelVariant::ScalarRandomField: {
            if (prefix.w.size() != i + 1) {
                throw ContractViolation("path prefix does not end at the evaluation step");
            }
            const double t = grid_.time(i);
            const double w = prefix.current();
            const double cv = (*c_field_)(t, w);
            const double sv = (*s_field_)(t, w);
            if (!std::isfinite(cv)) bound_violation("C", cv, bounds_.m_c, i, w);
            if (!(std::abs(cv) <= bounds_.m_c)) bound_violation("C", std::abs(cv), bounds_.m_c, i, w);
            if (!std::isfinite(sv)) {
                throw BoundViolation("source is not finite at step " + std::to_string(i));
            }
            if (bounds_.m_s && !profile_ && std::abs(sv) > *bounds_.m_s) {
                bound_violation("S", std::abs(sv), *bounds_.m_s, i, w);
            }
            out.c.setIdentity(n, n);
            out.c *= cv;
            out.b = b_const_.asDiagonal();
            out.s = sv * profile_matrix_;
            return;
        }
    }
}

Coefficients CoefficientModel::evaluate(std::size_t i, PathPrefix prefix) const {
    Coefficients out;
    evaluate_into(i, prefix, out);
    return out;
}

Coefficients CoefficientModel::evaluate(std::size_t i) const {
    if (!deterministic()) {
        throw ContractViolation("random-field coefficients need a path to be evaluated");
    }
    return evaluate(i, PathPrefix{});
}

CoefficientModel CoefficientModel::with_terminal(const Eigen::MatrixXd& m) const {
    if (m.rows() != m_.rows() || m.cols() != m_.cols()) {
        throw ContractViolation("final datum has the wrong dimension");
    }
    CoefficientModel copy = *this;
    copy.m_ = m;
    return copy;
}

CoefficientSet eval_coefficients(const CoefficientModel& model, std::size_t i, const BrownianPath& path) {
    if (!(path.grid() == model.grid())) throw ContractViolation("path grid does not match the model grid");
    Coefficients raw = model.evaluate(i, path.prefix(i));
    const auto& basis = model.basis();
    return {OperatorMatrix(basis, std::move(raw.c)), OperatorMatrix(basis, std::move(raw.b)),
            OperatorMatrix(basis, std::move(raw.s)).symmetrized()};
}

Eigen::MatrixXd multiplication_matrix(const Expression& g, std::size_t modes) {
    const Rule& rule = profile_rule();
    const auto n = static_cast<Eigen::Index>(modes);
    const auto q = static_cast<Eigen::Index>(rule.x.size());
    // Pi = E' diag(w g) E with E the basis sampled at the nodes.
    Eigen::MatrixXd e(q, n);
    Eigen::VectorXd wg(q);
    const double norm = std::sqrt(2.0 / std::numbers::pi);
    for (Eigen::Index j = 0; j < q; ++j) {
        const double x = rule.x[static_cast<std::size_t>(j)];
        const double gx = g(0.0, 0.0, x);
        if (!std::isfinite(gx)) {
            throw InvalidConfiguration("source profile is not finite at x = " + std::to_string(x));
        }
        wg(j) = rule.w[static_cast<std::size_t>(j)] * gx;
        for (Eigen::Index k = 0; k < n; ++k) e(j, k) = norm * std::sin(static_cast<double>(k + 1) * x);
    }
    Eigen::MatrixXd pi = e.transpose() * wg.asDiagonal() * e;
    Eigen::MatrixXd sym = pi;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = 0; k < j; ++k) sym(j, k) = sym(k, j);
    }
    return sym;
}

ProfileStats profile_stats(const Expression& g) {
    const Rule& rule = profile_rule();
    ProfileStats out;
    double l2 = 0.0;
    for (std::size_t j = 0; j < rule.x.size(); ++j) {
        const double gx = g(0.0, 0.0, rule.x[j]);
        l2 += rule.w[j] * gx * gx;
        out.sampled_sup = std::max(out.sampled_sup, std::abs(gx));
    }
    out.l2_norm = std::sqrt(l2);
    out.endpoint_sup = out.sampled_sup;
    for (int k = 1; k <= 12; ++k) {
        const double d = std::numbers::pi * std::pow(10.0, -k);
        for (double x : {d, std::numbers::pi - d}) {
            const double gx = std::abs(g(0.0, 0.0, x));
            out.endpoint_sup = std::isfinite(gx) ? std::max(out.endpoint_sup, gx)
                                                 : std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

ModelReport validate_model(const CoefficientModel& model) {
    ModelReport r;
    r.variant = to_string(model.variant());
    r.declared = model.bounds();
    const auto& basis = *model.basis();
    const TimeGrid& grid = model.grid();

    const Eigen::MatrixXd& m = model.terminal();
    r.m_symmetric = (m - m.transpose()).cwiseAbs().maxCoeff() == 0.0;
    r.m_psd = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() >=
              -1e-10;

    double s_min = std::numeric_limits<double>::infinity();
    bool s_finite = true;
    double s_scalar_sup = 0.0;
    auto visit = [&](const Coefficients& co) {
        r.observed_c = std::max(r.observed_c, op_norm(co.c));
        r.observed_b = std::max(r.observed_b, op_norm(co.b));
        if (!co.s.allFinite()) {
            s_finite = false;
            return;
        }
        r.observed_s = std::max(r.observed_s, op_norm(co.s));
        r.observed_s_k = std::max(r.observed_s_k, k_norm(co.s, basis.weights()));
        r.s_symmetric = r.s_symmetric && (co.s - co.s.transpose()).cwiseAbs().maxCoeff() <= 1e-12;
        s_min = std::min(s_min, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(co.s, Eigen::EigenvaluesOnly)
                                    .eigenvalues()
                                    .minCoeff());
    };

    if (model.deterministic()) {
        const std::size_t stride = model.variant() == ModelVariant::ConstantDiagonal ? grid.steps() : 1;
        for (std::size_t i = 0; i <= grid.steps(); i += stride) visit(model.evaluate(i));
    } else {
        // Sample (t, w) directly; bound violations are reported, not thrown.
        const auto& cf = *model.c_field();
        const auto& sf = *model.s_field();
        const double span = 6.0 * std::sqrt(grid.horizon());
        const std::size_t stride = std::max<std::size_t>(1, grid.steps() / 200);
        double s_lo = std::numeric_limits<double>::infinity();
        double s_hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i <= grid.steps(); i += stride) {
            for (int j = -20; j <= 20; ++j) {
                const double w = span * j / 20.0;
                const double t = grid.time(i);
                const double cv = cf(t, w), sv = sf(t, w);
                if (!std::isfinite(cv) || !std::isfinite(sv)) {
                    s_finite = false;
                    continue;
                }
                r.observed_c = std::max(r.observed_c, std::abs(cv));
                s_scalar_sup = std::max(s_scalar_sup, std::abs(sv));
                s_lo = std::min(s_lo, sv);
                s_hi = std::max(s_hi, sv);
            }
        }
        r.observed_b = model.b_const().cwiseAbs().maxCoeff();
        const Eigen::MatrixXd& pi = model.source_shape();
        r.observed_s = s_scalar_sup * op_norm(pi);
        r.observed_s_k = s_scalar_sup * k_norm(pi, basis.weights());
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pi, Eigen::EigenvaluesOnly).eigenvalues();
        // Spectrum of s Pi is linear in s, so the extremes sit at the sampled ends.
        if (s_lo <= s_hi) {
            s_min = std::min({s_lo * ev.minCoeff(), s_lo * ev.maxCoeff(), s_hi * ev.minCoeff(),
                              s_hi * ev.maxCoeff()});
        }
    }
    r.s_psd = s_finite && s_min >= -1e-10;

    r.a2 = r.observed_c <= r.declared.m_c;
    r.a4 = r.observed_b <= r.declared.m_b;
    if (!r.a2) r.notes.push_back("A2 violated: observed |C| exceeds M_C");
    if (!r.a4) r.notes.push_back("A4 violated: observed |B| exceeds M_B");

    // Quadrature roundoff in Pi must not fail a bound declared at the exact sup.
    const auto within = [](double observed, double bound) { return observed <= bound * (1.0 + 1e-12); };
    bool s_bounded = r.declared.m_s.has_value() && within(r.observed_s, *r.declared.m_s);
    if (model.profile()) {
        const ProfileStats ps = profile_stats(*model.profile());
        if (!r.declared.m_s || !within(ps.endpoint_sup * s_scalar_sup, *r.declared.m_s)) {
            s_bounded = false;
            r.notes.push_back("source profile is not bounded by M_S near the boundary (sup probe " +
                              std::to_string(ps.endpoint_sup) + ")");
        }
    }
    if (!r.declared.m_s) r.notes.push_back("no bound M_S declared for S");

    r.a3 = s_finite && r.s_symmetric && r.s_psd && s_bounded && r.m_symmetric && r.m_psd;
    r.a3_weak = s_finite && r.s_symmetric && r.m_symmetric;
    if (r.a3) {
        r.verdict = "A3 satisfied";
    } else if (!r.m_psd) {
        r.verdict = "A3 violated: M not PSD";
    } else if (!r.s_psd && s_finite) {
        r.verdict = "A3 violated: S not PSD";
    } else if (r.a3_weak) {
        r.verdict = "A3′ satisfied, A3 violated";
    } else {
        r.verdict = "A3 and A3′ violated";
    }
    return r;
}

}  // namespace bsre
