#include "bsre/verify.hpp"

#include "bsre/errors.hpp"
#include "bsre/forward_flow.hpp"
#include "bsre/lq_control.hpp"
#include "bsre/lyapunov.hpp"
#include "bsre/report.hpp"
#include "bsre/riccati.hpp"
#include "bsre/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace bsre {

using nlohmann::json;

namespace {

// Seeds of the independent ensembles used by the audits, derived from the
// master seed by a fixed offset per consumer.
enum class Stream : std::uint64_t { Value = 1, Probe = 2, Completion = 3, Moments = 4, KNorm = 5, Challenger = 6 };

std::uint64_t stream_seed(const ExperimentConfig& c, Stream s) {
    return path_stream_seed(c.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(s));
}

double min_eigenvalue(const Eigen::MatrixXd& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool exactly_symmetric(const Eigen::MatrixXd& g) { return g == g.transpose(); }

Eigen::VectorXd broadcast(const Eigen::VectorXd& v, std::size_t n) {
    return v.size() == 1 ? Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), v(0)) : v;
}

OracleComparison compare_with_oracle(const CoefficientModel& model, const BackwardSolution& sol) {
    const std::size_t n = model.modes();
    const Eigen::VectorXd lambda = model.basis()->lambda_vector();
    const Eigen::VectorXd c = broadcast(model.c_const(), n), b = broadcast(model.b_const(), n),
                          s = broadcast(model.s_const(), n);
    const Eigen::VectorXd m = model.terminal().diagonal();
    const std::vector<double> times{0.0};
    const Eigen::MatrixXd oracle = diagonal_oracle(lambda, c, b, s, m, model.grid().horizon(), times);

    OracleComparison out;
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        OracleRow row{k + 1, lambda(kk), sol.p.mean(0)(kk, kk), oracle(kk, 0), 0.0};
        const double scale = std::abs(row.oracle);
        row.relative_error = scale > 0.0 ? std::abs(row.solver - row.oracle) / scale : std::abs(row.solver);
        out.max_relative_error = std::max(out.max_relative_error, row.relative_error);
        out.rows.push_back(row);
    }
    for (std::size_t i = 0; i <= model.grid().steps(); ++i) {
        Eigen::MatrixXd off = sol.p.mean(i);
        off.diagonal().setZero();
        out.max_off_diagonal = std::max(out.max_off_diagonal, off.cwiseAbs().maxCoeff());
    }
    return out;
}

// Lazily computed solver outputs shared by the audits.
class Context {
public:
    explicit Context(const ExperimentConfig& config)
        : config(config), model(build_model(config.model)), options(solver_options(config)) {}

    const BackwardSolution& lyapunov() {
        if (!lyapunov_) lyapunov_ = picard_solve(model, picard_options(config), options);
        return *lyapunov_;
    }

    const BackwardSolution& riccati() {
        if (!riccati_) riccati_ = riccati_solve(model, riccati_config(config), options);
        return *riccati_;
    }

    const ExperimentConfig& config;
    CoefficientModel model;
    SolverOptions options;

private:
    std::optional<BackwardSolution> lyapunov_, riccati_;
};

// Exact symmetry and PSD of P over the grid (at every probe point for
// random solutions).
json positivity_details(const BackwardSolution& sol, double psd_tol, bool& ok) {
    double min_eig = std::numeric_limits<double>::infinity();
    std::size_t asymmetric = 0;
    for (std::size_t i = 0; i <= sol.grid.steps(); ++i) {
        std::vector<double> ws{0.0};
        if (!sol.p.deterministic()) ws = sol.p.probe_points(i);
        for (double w : ws) {
            const Eigen::MatrixXd p = sol.p.deterministic() ? sol.p.mean(i) : sol.p.at(i, w);
            if (!exactly_symmetric(p)) ++asymmetric;
            min_eig = std::min(min_eig, min_eigenvalue(p));
        }
    }
    ok = ok && asymmetric == 0 && min_eig >= -psd_tol;
    return {{"asymmetric_slices", asymmetric}, {"min_eigenvalue", min_eig}, {"psd_tol", psd_tol}};
}

AuditResult audit_symmetry_psd(Context& ctx) {
    AuditResult r{"symmetry-psd", true, {}};
    const double tol = ctx.options.psd_tol;
    r.details["lyapunov"] = positivity_details(ctx.lyapunov(), tol, r.passed);
    r.details["riccati"] = positivity_details(ctx.riccati(), tol, r.passed);
    // Lyapunov minus Riccati is PSD: the quadratic term only removes cost.
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= ctx.model.grid().steps(); ++i) {
        gap = std::min(gap, min_eigenvalue(ctx.lyapunov().p.mean(i) - ctx.riccati().p.mean(i)));
    }
    const bool random = !ctx.model.deterministic();
    // With Monte Carlo means the ordering holds up to statistical error only.
    const double order_tol = random ? 1e-2 * std::max(1.0, op_norm(ctx.lyapunov().p.mean(0))) : tol;
    r.details["min_eigenvalue_lyapunov_minus_riccati"] = gap;
    r.details["ordering_tolerance"] = order_tol;
    r.passed = r.passed && gap >= -order_tol;
    return r;
}

json windows_json(const SolverMeta& meta, bool& ok, std::size_t max_halvings) {
    double worst = 0.0;
    std::size_t iterations = 0;
    for (const auto& w : meta.windows) {
        iterations = std::max(iterations, w.iterations);
        for (double q : w.ratios) worst = std::max(worst, q);
    }
    ok = ok && worst < 1.0 && meta.halvings <= max_halvings;
    return {{"windows", meta.windows.size()},
            {"max_ratio", worst},
            {"max_iterations", iterations},
            {"halvings", meta.halvings},
            {"delta", meta.delta}};
}

AuditResult audit_contraction(Context& ctx) {
    AuditResult r{"contraction", true, {}};
    r.details["lyapunov"] = windows_json(ctx.lyapunov().meta, r.passed, 5);
    r.details["riccati"] = windows_json(ctx.riccati().meta, r.passed, 5);
    return r;
}

AuditResult audit_oracle(Context& ctx) {
    const OracleComparison cmp = compare_with_oracle(ctx.model, ctx.riccati());
    AuditResult r{"oracle", cmp.max_relative_error <= 1e-4 && cmp.max_off_diagonal <= 1e-10, to_json(cmp)};
    r.details["tolerance"] = 1e-4;
    return r;
}

// Lyapunov P_k(0) of a constant-diagonal model in closed form:
// m e^{-a T} + s (1 - e^{-a T}) / a with a = 2 lambda_k - c_k^2.
double lyapunov_closed_form(double lambda, double c, double s, double m, double horizon) {
    const double a = 2.0 * lambda - c * c;
    const double decay = std::exp(-a * horizon);
    const double integral = a == 0.0 ? horizon : -std::expm1(-a * horizon) / a;
    return m * decay + s * integral;
}

AuditResult audit_closed_form(Context& ctx) {
    const CoefficientModel& model = ctx.model;
    const std::size_t n = model.modes();
    const Eigen::VectorXd c = broadcast(model.c_const(), n), s = broadcast(model.s_const(), n);
    const bool no_noise = c.cwiseAbs().maxCoeff() == 0.0;
    const double tol = no_noise ? 1e-8 : 1e-6;
    AuditResult r{"closed-form", true, {}};
    json rows = json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double exact = lyapunov_closed_form(model.basis()->lambda(k), c(kk), s(kk), model.terminal()(kk, kk),
                                                  model.grid().horizon());
        const double got = ctx.lyapunov().p.mean(0)(kk, kk);
        const double err = std::abs(got - exact) / std::max(std::abs(exact), 1e-300);
        worst = std::max(worst, exact == 0.0 ? std::abs(got) : err);
        rows.push_back({{"mode", k + 1}, {"solver", got}, {"closed_form", exact}, {"relative_error", err}});
    }
    r.passed = worst <= tol;
    r.details = {{"modes", rows}, {"max_relative_error", worst}, {"tolerance", tol}};
    return r;
}

// Deterministic closed loops (C = 0) have no Monte Carlo spread; they match
// the value up to the O(h) time quadrature.
bool agrees(double diff, double se, double scale, double h) {
    if (std::abs(diff) <= 3.0 * se) return true;
    return se <= 1e-12 * std::max(1.0, std::abs(scale)) && std::abs(diff) <= 10.0 * h * std::max(1.0, std::abs(scale));
}

json z_json(double diff, double se) {
    if (se > 0.0) return diff / se;
    if (diff == 0.0) return 0.0;
    return nullptr;
}

// The representation solve keeps one pathwise estimator from T down to 0, so
// its standard error covers the whole horizon.
AuditResult audit_backend_agreement(Context& ctx) {
    SolverOptions mc = ctx.options;
    mc.backend = Backend::MonteCarlo;
    const BackwardSolution sol = lyapunov_representation_solve(ctx.model, mc);
    const Eigen::MatrixXd& exact = ctx.lyapunov().p.mean(0);
    const Eigen::MatrixXd& est = sol.p.mean(0);
    const Eigen::MatrixXd se = sol.meta.p0_std_error.value_or(Eigen::MatrixXd::Zero(exact.rows(), exact.cols()));
    bool ok = true;
    json modes = json::array();
    for (Eigen::Index j = 0; j < exact.rows(); ++j) {
        const double diff = est(j, j) - exact(j, j);
        ok = ok && agrees(diff, se(j, j), exact(j, j), ctx.model.grid().step());
        modes.push_back({{"mode", j + 1},
                         {"exact", exact(j, j)},
                         {"monte_carlo", est(j, j)},
                         {"std_error", se(j, j)},
                         {"z_score", z_json(diff, se(j, j))}});
    }
    return {"backend-agreement", ok, {{"modes", modes}, {"n_paths", sol.meta.n_paths}}};
}

AuditResult audit_moments(Context& ctx) {
    const Eigen::VectorXd x = initial_state(ctx.config);
    const MomentReport rep = moment_audit(ctx.model, x, ControlPolicy::zero(), ctx.config.verification.n_paths,
                                          stream_seed(ctx.config, Stream::Moments), ctx.config.workers);
    const bool finite = std::isfinite(rep.sup_second_moment);
    json d{{"sup_second_moment", rep.sup_second_moment}, {"bracket", rep.bracket}, {"n_paths", rep.n_paths}};
    if (rep.ratio) d["ratio"] = *rep.ratio;
    if (ctx.model.deterministic()) {
        const auto exact = exact_second_moments(ctx.model, x);
        d["exact_sup_second_moment"] = *std::max_element(exact.begin(), exact.end());
    }
    return {"moments", finite, d};
}

AuditResult audit_value(Context& ctx) {
    const Eigen::VectorXd x = initial_state(ctx.config);
    const ValueCheck v = value_check(x, ctx.riccati(), ctx.model, ctx.config.verification.n_paths,
                                     stream_seed(ctx.config, Stream::Value), ctx.config.workers);
    const double diff = v.mean_cost - v.predicted;
    const bool ok = agrees(diff, v.std_error, v.predicted, ctx.model.grid().step());
    return {"value", ok,
            {{"mean_cost", v.mean_cost},
             {"std_error", v.std_error},
             {"predicted", v.predicted},
             {"z_score", z_json(diff, v.std_error)},
             {"n_paths", v.n_paths}}};
}

AuditResult audit_optimality(Context& ctx) {
    const Eigen::VectorXd x = initial_state(ctx.config);
    const std::vector<Challenger> challengers{
        zero_challenger(),
        random_open_loop_challenger(ctx.config.verification.challenger_amplitude,
                                    stream_seed(ctx.config, Stream::Challenger)),
        gain_challenger(1.0)};
    const SuboptimalityReport rep = suboptimality_probe(x, ctx.riccati(), ctx.model, challengers,
                                                        ctx.config.verification.n_paths,
                                                        stream_seed(ctx.config, Stream::Probe), ctx.config.workers);
    json rows = json::array();
    for (const auto& c : rep.challengers) {
        rows.push_back({{"name", c.name},
                        {"mean_cost", c.mean_cost},
                        {"std_error", c.std_error},
                        {"difference", c.difference},
                        {"paired_std_error", c.paired_std_error},
                        {"combined_std_error", c.combined_std_error},
                        {"feedback_not_worse", c.feedback_not_worse},
                        {"feedback_strictly_better", c.feedback_strictly_better}});
    }
    return {"optimality", rep.passed,
            {{"feedback_mean", rep.feedback_mean},
             {"feedback_std_error", rep.feedback_std_error},
             {"n_paths", rep.n_paths},
             {"challengers", rows}}};
}

AuditResult audit_completion(Context& ctx) {
    const Eigen::VectorXd x = initial_state(ctx.config);
    const CompletionOfSquares c =
        completion_of_squares(x, ctx.riccati(), ctx.model, zero_challenger(), ctx.config.verification.n_paths,
                              stream_seed(ctx.config, Stream::Completion), ctx.config.workers);
    const bool ok = agrees(c.residual, c.std_error, c.predicted, ctx.model.grid().step());
    return {"completion", ok,
            {{"policy", "zero"},
             {"mean_cost", c.mean_cost},
             {"predicted", c.predicted},
             {"mean_gap", c.mean_gap},
             {"residual", c.residual},
             {"std_error", c.std_error},
             {"z_score", z_json(c.residual, c.std_error)}}};
}

AuditResult audit_smoothing(Context& ctx) {
    const auto grid = log_grid(1e-6, 10.0, 4001);
    const SmoothingReport s = smoothing_audit(*ctx.model.basis(), grid);
    const bool ok = s.within_unit_bound && std::abs(s.max_value - s.analytic_sup) <= 1e-3;
    return {"smoothing", ok,
            {{"max_value", s.max_value},
             {"analytic_sup", s.analytic_sup},
             {"argmax_t", s.argmax_t},
             {"argmax_mode", s.argmax_mode + 1}}};
}

AuditResult audit_jn_properties(Context& ctx) {
    const std::vector<double> ns{1.0, 10.0, 100.0};
    const auto checks = jn_property_audit(ctx.model.basis(), ns);
    AuditResult r{"jn-properties", true, {}};
    json rows = json::array();
    for (const auto& c : checks) {
        r.passed = r.passed && c.passed;
        rows.push_back({{"n", c.n},
                        {"eigen_action_error", c.eigen_action_error},
                        {"norm_h", c.norm_h},
                        {"norm_v", c.norm_v},
                        {"norm_vprime", c.norm_vprime},
                        {"norm_h_to_v", c.norm_h_to_v},
                        {"norm_vprime_to_h", c.norm_vprime_to_h},
                        {"n_pow_rho", c.n_pow_rho},
                        {"strong_limit_gap", c.strong_limit_gap},
                        {"hs_norm", c.hs_norm},
                        {"hs_bound", c.hs_bound},
                        {"passed", c.passed}});
    }
    const BasisPtr& basis = ctx.model.basis();
    const double k_identity = k_norm(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(basis->size()),
                                                               static_cast<Eigen::Index>(basis->size())),
                                     basis->weights());
    const double expected = std::sqrt(2.0 * basis->tail_weight());
    r.passed = r.passed && std::abs(k_identity - expected) <= 1e-12;
    r.details = {{"checks", rows}, {"k_norm_identity", k_identity}, {"k_norm_identity_expected", expected}};
    return r;
}

AuditResult audit_jn_stability(Context& ctx) {
    const VerificationSpec& v = ctx.config.verification;
    const double delta = v.jn_delta.value_or(ctx.model.grid().horizon());
    const JnStabilityReport rep = jn_stability_audit(ctx.model, v.jn_ns, v.jn_epsilon, delta, ctx.options);
    return {"jn-stability", rep.decreasing,
            {{"ns", rep.ns},
             {"distance", rep.distance},
             {"terminal_distance", rep.terminal_distance},
             {"terminal_k_gap", rep.terminal_k_gap},
             {"epsilon", rep.epsilon},
             {"delta", rep.delta},
             {"decreasing", rep.decreasing},
             {"below_tolerance", rep.below_tolerance}}};
}

json apriori_json(const AprioriReport& rep) {
    json rows = json::array();
    for (const auto& row : rep.rows) {
        json j{{"delta", row.delta},
               {"p_sup_sq", row.p_sup_sq},
               {"q_integral", row.q_integral},
               {"lhs", row.lhs},
               {"rhs", row.rhs},
               {"finite", row.finite}};
        if (row.ratio) j["ratio"] = *row.ratio;
        rows.push_back(j);
    }
    return {{"rows", rows}, {"all_finite", rep.all_finite}, {"monotone", rep.monotone}};
}

AuditResult audit_apriori(Context& ctx) {
    const AprioriReport rep = apriori_audit(ctx.lyapunov(), ctx.model, ctx.config.verification.apriori_deltas);
    return {"apriori", rep.all_finite, apriori_json(rep)};
}

json k_norm_json(const KNormAudit& k) {
    return {{"samples", k.samples},
            {"bound_sup", std::isfinite(k.bound_sup) ? json(k.bound_sup) : json(nullptr)},
            {"bound_l2", k.bound_l2},
            {"max_ratio_sup", k.max_ratio_sup},
            {"max_ratio_l2", k.max_ratio_l2},
            {"holds", k.holds}};
}

AuditResult audit_weak_source(Context& ctx) {
    const BackwardSolution sol = weak_source_solve(ctx.model, ctx.options);
    const AprioriReport rep = apriori_audit(sol, ctx.model, ctx.config.verification.apriori_deltas, true);
    const KNormAudit k = source_k_audit(ctx.model, 1000, stream_seed(ctx.config, Stream::KNorm), ctx.config.workers);
    bool positive = true;
    json psd = positivity_details(sol, ctx.options.psd_tol, positive);
    return {"weak-source", rep.all_finite && k.holds && positive,
            {{"apriori", apriori_json(rep)},
             {"k_norm", k_norm_json(k)},
             {"positivity", psd},
             {"warnings", sol.meta.warnings}}};
}

AuditResult audit_k_norm(Context& ctx) {
    const KNormAudit k = source_k_audit(ctx.model, 1000, stream_seed(ctx.config, Stream::KNorm), ctx.config.workers);
    return {"k-norm", k.holds, k_norm_json(k)};
}

using AuditFn = AuditResult (*)(Context&);

const std::map<std::string, AuditFn>& audit_table() {
    static const std::map<std::string, AuditFn> table{
        {"symmetry-psd", audit_symmetry_psd},   {"contraction", audit_contraction},
        {"oracle", audit_oracle},               {"closed-form", audit_closed_form},
        {"backend-agreement", audit_backend_agreement}, {"moments", audit_moments},
        {"value", audit_value},                 {"optimality", audit_optimality},
        {"completion", audit_completion},       {"smoothing", audit_smoothing},
        {"jn-properties", audit_jn_properties}, {"jn-stability", audit_jn_stability},
        {"apriori", audit_apriori},             {"weak-source", audit_weak_source},
        {"k-norm", audit_k_norm}};
    return table;
}

}  // namespace

std::vector<std::string> applicable_audits(const ExperimentConfig& config) {
    const ModelSpec& m = config.model;
    const bool deterministic = m.variant != ModelVariant::ScalarRandomField;
    const bool constant = m.variant == ModelVariant::ConstantDiagonal;
    const bool exact_backend = config.solver.backend == Backend::DeterministicExact;
    std::vector<std::string> out;
    for (const auto& name : known_audits()) {
        bool use = true;
        if (name == "oracle" || name == "closed-form") use = constant && exact_backend;
        if (name == "backend-agreement" || name == "jn-stability") use = deterministic && exact_backend;
        if (name == "weak-source") use = m.variant == ModelVariant::ScalarRandomField && m.profile.has_value();
        if (name == "k-norm") use = m.variant == ModelVariant::ScalarRandomField && !m.profile.has_value();
        if (name == "apriori") use = !(m.variant == ModelVariant::ScalarRandomField && m.profile.has_value());
        if (name == "symmetry-psd" || name == "contraction" || name == "value" || name == "optimality" ||
            name == "completion") {
            // A profile with an unbounded sup only has a weak-source Lyapunov solve.
            use = !(m.variant == ModelVariant::ScalarRandomField && m.profile.has_value() && !m.bounds->m_s);
        }
        if (use) out.push_back(name);
    }
    return out;
}

VerifyReport run_verification(const ExperimentConfig& config) {
    const std::vector<std::string> applicable = applicable_audits(config);
    std::vector<std::string> selected = config.verification.audits.empty() ? applicable : config.verification.audits;
    for (const auto& name : selected) {
        if (std::find(applicable.begin(), applicable.end(), name) == applicable.end()) {
            throw InvalidConfiguration("audit '" + name + "' does not apply to this model and backend");
        }
    }
    Context ctx(config);
    VerifyReport report;
    for (const auto& name : known_audits()) {
        if (std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
        AuditResult r = audit_table().at(name)(ctx);
        report.passed = report.passed && r.passed;
        report.audits.push_back(std::move(r));
    }
    return report;
}

json to_json(const VerifyReport& report) {
    json audits = json::array();
    for (const auto& a : report.audits) {
        audits.push_back({{"name", a.name}, {"passed", a.passed}, {"details", a.details}});
    }
    return {{"passed", report.passed}, {"audits", audits}};
}

OracleComparison oracle_compare(const ExperimentConfig& config) {
    if (config.model.variant != ModelVariant::ConstantDiagonal) {
        throw InvalidConfiguration("oracle-compare needs a constant-diagonal model");
    }
    const CoefficientModel model = build_model(config.model);
    return compare_with_oracle(model, riccati_solve(model, riccati_config(config), solver_options(config)));
}

json to_json(const OracleComparison& cmp) {
    json rows = json::array();
    for (const auto& r : cmp.rows) {
        rows.push_back({{"mode", r.mode},
                        {"lambda", r.lambda},
                        {"solver", r.solver},
                        {"oracle", r.oracle},
                        {"relative_error", r.relative_error}});
    }
    return {{"modes", rows}, {"max_relative_error", cmp.max_relative_error},
            {"max_off_diagonal", cmp.max_off_diagonal}};
}

}  // namespace bsre
