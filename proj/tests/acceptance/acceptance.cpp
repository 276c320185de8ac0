// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Oracles are computed here, independently of the solver
// code where possible.

#include "bsre/config.hpp"
#include "bsre/errors.hpp"
#include "bsre/lq_control.hpp"
#include "bsre/lyapunov.hpp"
#include "bsre/riccati.hpp"
#include "bsre/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace bsre;

namespace {

const std::vector<std::string> kShipped{"riccati_reference.json", "lyapunov_closed_form.json", "lq_reference.json",
                                        "random_field.json", "weak_source.json"};

ExperimentConfig shipped(const std::string& name) { return load_config(fs::path(BSRE_CONFIG_DIR) / name); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
    bool passed = false;
    std::string detail;
};

// Same stream numbering as the verify command, so the two report the same
// sample for the same config.
std::uint64_t audit_seed(const ExperimentConfig& c, std::uint64_t stream) {
    return path_stream_seed(c.seed, 0x5eed0000ULL + stream);
}

// Weak-source configs declare no bound on S in L(H).
bool weak_source(const ExperimentConfig& c) { return c.model.profile.has_value() && !c.model.bounds->m_s; }

BackwardSolution lyapunov_for(const ExperimentConfig& c, const CoefficientModel& model) {
    if (weak_source(c)) return weak_source_solve(model, solver_options(c));
    return picard_solve(model, picard_options(c), solver_options(c));
}

// Exact symmetry and min eigenvalue of every slice at its probe points.
struct SliceScan {
    double worst_asymmetry = 0.0;
    double min_eigenvalue = std::numeric_limits<double>::infinity();
};

SliceScan scan(const BackwardSolution& sol) {
    SliceScan s;
    for (std::size_t i = 0; i <= sol.grid.steps(); ++i) {
        for (double w : sol.p.probe_points(i)) {
            const Eigen::MatrixXd p = sol.p.at(i, w);
            s.worst_asymmetry = std::max(s.worst_asymmetry, (p - p.transpose()).cwiseAbs().maxCoeff());
            const double ev =
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
            s.min_eigenvalue = std::min(s.min_eigenvalue, ev);
        }
    }
    return s;
}

// Residuals fall and the measured ratio stays below one in every window.
bool contracting(const SolverMeta& meta, double& worst_ratio) {
    bool ok = meta.halvings <= 5;
    for (const auto& w : meta.windows) {
        for (std::size_t k = 1; k < w.residuals.size(); ++k) ok = ok && w.residuals[k] < w.residuals[k - 1];
        for (double r : w.ratios) {
            worst_ratio = std::max(worst_ratio, r);
            ok = ok && r < 1.0;
        }
    }
    return ok;
}

Outcome criterion_1() {
    const ExperimentConfig c = shipped("riccati_reference.json");
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientModel model = build_model(c.model);
    const BackwardSolution sol = riccati_solve(model, riccati_config(c), solver_options(c));
    const double elapsed = seconds_since(t0);
    // Scalar mode ODEs integrated here with a fine fixed-step RK4, a second
    // oracle next to the adaptive one in the library.
    double worst = 0.0, worst_rk4 = 0.0;
    const std::vector<double> t0_only{0.0};
    for (std::size_t k = 0; k < model.modes(); ++k) {
        const double lambda = model.basis()->lambda(k);
        const double c_k = model.c_const()(0), b_k = model.b_const()(0), s_k = model.s_const()(0);
        const double m_k = model.terminal()(0, 0);
        const double oracle = riccati_mode_oracle(lambda, c_k, b_k, s_k, m_k, 1.0, t0_only)[0];
        const auto f = [&](double p) { return (-2.0 * lambda + c_k * c_k) * p - b_k * b_k * p * p + s_k; };
        double p = m_k;
        const int n = 200000;
        const double h = 1.0 / n;
        for (int j = 0; j < n; ++j) {
            const double k1 = f(p), k2 = f(p + 0.5 * h * k1), k3 = f(p + 0.5 * h * k2), k4 = f(p + h * k3);
            p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const auto kk = static_cast<Eigen::Index>(k);
        worst = std::max(worst, std::abs(sol.p.mean(0)(kk, kk) - oracle) / std::abs(oracle));
        worst_rk4 = std::max(worst_rk4, std::abs(p - oracle) / std::abs(oracle));
    }
    return {worst <= 1e-4 && worst_rk4 <= 1e-10 && elapsed < 10.0,
            "max rel. error " + fmt(worst) + " (oracle cross-check " + fmt(worst_rk4) + "), solve " +
                fmt(elapsed) + " s"};
}

Outcome criterion_2() {
    // C = 0: P_k(t) = m e^{-2 lambda_k (T-t)} + s (1 - e^{-2 lambda_k (T-t)}) / (2 lambda_k).
    ExperimentConfig c = shipped("lyapunov_closed_form.json");
    std::string detail;
    bool ok = true;
    for (const auto& [s, m] : std::vector<std::pair<double, double>>{{0.0, 1.0}, {1.0, 0.5}}) {
        double error = 0.0;
        for (std::size_t steps : {1000u, 4000u}) {
            c.model.steps = steps;
            c.model.s = {s};
            c.model.m = {m};
            const CoefficientModel model = build_model(c.model);
            const BackwardSolution sol = picard_solve(model, picard_options(c), solver_options(c));
            error = 0.0;
            for (std::size_t k = 0; k < model.modes(); ++k) {
                const double a = 2.0 * model.basis()->lambda(k);
                const double exact = m * std::exp(-a) + s * -std::expm1(-a) / a;
                const auto kk = static_cast<Eigen::Index>(k);
                error = std::max(error, std::abs(sol.p.mean(0)(kk, kk) - exact) / exact);
            }
        }
        ok = ok && error <= 1e-8;
        detail += (detail.empty() ? "" : ", ") + std::string("s=") + fmt(s) + " m=" + fmt(m) + ": " + fmt(error);
    }
    return {ok, "max rel. error at h = 2.5e-4, " + detail};
}

Outcome criterion_3() {
    const ExperimentConfig c = shipped("lq_reference.json");
    const auto t0 = std::chrono::steady_clock::now();
    const CoefficientModel model = build_model(c.model);
    const BackwardSolution sol = riccati_solve(model, riccati_config(c), solver_options(c));
    const ValueCheck v = value_check(initial_state(c), sol, model, 10000, audit_seed(c, 1), c.workers);
    const double elapsed = seconds_since(t0);
    const double gap = std::abs(v.mean_cost - v.predicted);
    return {gap <= 3.0 * v.std_error && elapsed < 120.0,
            "mean " + fmt(v.mean_cost) + " vs <P(0)x,x> " + fmt(v.predicted) + ", |z| = " + fmt(gap / v.std_error) +
                ", " + fmt(elapsed) + " s"};
}

Outcome criterion_4() {
    const ExperimentConfig c = shipped("lq_reference.json");
    const CoefficientModel model = build_model(c.model);
    const BackwardSolution sol = riccati_solve(model, riccati_config(c), solver_options(c));
    const std::vector<Challenger> ch{zero_challenger(),
                                     random_open_loop_challenger(c.verification.challenger_amplitude, audit_seed(c, 6))};
    const SuboptimalityReport rep =
        suboptimality_probe(initial_state(c), sol, model, ch, 10000, audit_seed(c, 2), c.workers);
    const ChallengerResult& zero = rep.challengers.front();
    const double margin = zero.difference / zero.combined_std_error;
    return {zero.feedback_strictly_better && margin > 3.0,
            "zero-control cost " + fmt(zero.mean_cost) + " - feedback " + fmt(rep.feedback_mean) + " = " +
                fmt(margin) + " combined SE"};
}

struct ShippedSolves {
    std::string name;
    CoefficientModel model;
    BackwardSolution lyapunov;
    std::optional<BackwardSolution> riccati;
};

std::vector<ShippedSolves> solve_shipped() {
    std::vector<ShippedSolves> out;
    for (const auto& name : kShipped) {
        const ExperimentConfig c = shipped(name);
        CoefficientModel model = build_model(c.model);
        BackwardSolution lyap = lyapunov_for(c, model);
        std::optional<BackwardSolution> ric;
        if (!weak_source(c)) ric = riccati_solve(model, riccati_config(c), solver_options(c));
        out.push_back({name, std::move(model), std::move(lyap), std::move(ric)});
    }
    return out;
}

Outcome criterion_5(const std::vector<ShippedSolves>& solves) {
    if (solves.size() != kShipped.size()) return {false, "shipped instances did not all solve"};
    double asym = 0.0, min_ev = std::numeric_limits<double>::infinity();
    for (const auto& s : solves) {
        for (const BackwardSolution* sol : {&s.lyapunov, s.riccati ? &*s.riccati : nullptr}) {
            if (!sol) continue;
            const SliceScan r = scan(*sol);
            asym = std::max(asym, r.worst_asymmetry);
            min_ev = std::min(min_ev, r.min_eigenvalue);
        }
    }
    return {asym == 0.0 && min_ev >= -1e-10,
            "max asymmetry " + fmt(asym) + ", min eigenvalue " + fmt(min_ev) + " over " +
                std::to_string(solves.size()) + " instances"};
}

Outcome criterion_6(const std::vector<ShippedSolves>& solves) {
    if (solves.size() != kShipped.size()) return {false, "shipped instances did not all solve"};
    bool ok = true;
    double worst = 0.0;
    std::size_t halvings = 0, windows = 0;
    for (const auto& s : solves) {
        const ExperimentConfig c = shipped(s.name);
        // Weak-source instances are solved by the representation; their
        // Picard windows are audited here on the same model.
        const BackwardSolution picard =
            weak_source(c) ? picard_solve(s.model, picard_options(c), solver_options(c)) : s.lyapunov;
        for (const SolverMeta* meta : {&picard.meta, s.riccati ? &s.riccati->meta : nullptr}) {
            if (!meta) continue;
            ok = contracting(*meta, worst) && ok;
            halvings = std::max(halvings, meta->halvings);
            windows += meta->windows.size();
        }
    }
    return {ok, "max ratio " + fmt(worst) + " over " + std::to_string(windows) + " windows, max halvings " +
                    std::to_string(halvings)};
}

Outcome criterion_7() {
    const auto basis = laplacian_basis(4, 0.4);
    const SmoothingReport sm = smoothing_audit(*basis, log_grid(1e-6, 10.0, 4001));
    const double target = std::pow(0.4 / std::exp(1.0), 0.4);
    double tail = 0.0;
    for (int k = 1; k <= 4; ++k) tail += std::pow(double(k * k), -0.8);
    const double k_identity = norm(OperatorMatrix::identity(basis), NormKind::K);
    const double k_error = std::abs(k_identity - std::sqrt(2.0 * tail));
    bool jn_ok = true;
    const std::vector<double> ns{1.0, 10.0, 100.0};
    for (const auto& row : jn_property_audit(basis, ns)) jn_ok = jn_ok && row.passed;
    return {sm.max_value <= 1.0 && std::abs(sm.max_value - target) <= 1e-3 && k_error <= 1e-12 && jn_ok,
            "smoothing max " + fmt(sm.max_value) + " (analytic " + fmt(target) + "), |I|_K error " + fmt(k_error) +
                ", J_n properties " + (jn_ok ? "hold" : "fail") + " for n = 1, 10, 100"};
}

Outcome criterion_8() {
    const ExperimentConfig c = shipped("riccati_reference.json");
    const CoefficientModel model = build_model(c.model);
    const std::vector<double> ns{4.0, 16.0, 64.0, 256.0};
    const JnStabilityReport r = jn_stability_audit(model, ns, 0.1, model.grid().horizon(), solver_options(c));
    std::string d;
    for (double v : r.distance) d += (d.empty() ? "" : ", ") + fmt(v);
    return {r.decreasing, "distances " + d};
}

Outcome criterion_9(const std::vector<ShippedSolves>& solves) {
    if (solves.size() != kShipped.size()) return {false, "shipped instances did not all solve"};
    bool finite = true, k_holds = true, weak_done = false;
    std::string detail;
    for (const auto& s : solves) {
        const ExperimentConfig c = shipped(s.name);
        const bool weak = weak_source(c);
        const AprioriReport ap = apriori_audit(s.lyapunov, s.model, c.verification.apriori_deltas, weak);
        finite = finite && ap.all_finite;
        if (weak) {
            weak_done = s.lyapunov.meta.solver == "weak-source";
            const KNormAudit k = source_k_audit(s.model, 1000, audit_seed(c, 5), c.workers);
            k_holds = k_holds && k.holds;
            detail = "weak-source K-norm ratios " + fmt(k.max_ratio_sup) + " (sup), " + fmt(k.max_ratio_l2) +
                     " (L2) on " + std::to_string(k.samples) + " samples";
        }
    }
    return {finite && weak_done && k_holds,
            std::string("a-priori LHS ") + (finite ? "finite" : "not finite") + " on all instances; " + detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion_10() {
    const fs::path scratch = fs::temp_directory_path() / "bsre_acceptance_determinism";
    fs::remove_all(scratch);
    std::string reference;
    bool ok = true;
    int status = 0;
    for (int workers : {1, 2, 8}) {
        const fs::path out = scratch / ("w" + std::to_string(workers));
        const std::string cmd = std::string(BSRE_CLI) + " verify --config " + BSRE_CONFIG_DIR +
                                "/random_field.json --workers " + std::to_string(workers) + " --out " + out.string() +
                                " > " + (scratch / "log.txt").string() + " 2>&1";
        fs::create_directories(scratch);
        const int raw = std::system(cmd.c_str());
        status = std::max(status, WIFEXITED(raw) ? WEXITSTATUS(raw) : 255);
        const std::string report = slurp(out / "verify.json");
        if (report.empty()) ok = false;
        if (reference.empty()) reference = report;
        ok = ok && report == reference;
    }
    fs::remove_all(scratch);
    return {ok && status == 0, std::string("verify.json ") + (ok ? "identical" : "differs") +
                                   " for 1, 2, 8 workers (random_field, exit " + std::to_string(status) + ")"};
}

}  // namespace

int main() {
    bool all = true;
    const auto report = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        all = all && o.passed;
        std::cout << (o.passed ? "PASS" : "FAIL") << "  " << id << ". " << title << ": " << o.detail << std::endl;
    };

    report(1, "diagonal Riccati oracle", criterion_1);
    report(2, "Lyapunov closed form", criterion_2);
    report(3, "value-function identity", criterion_3);
    report(4, "optimality probe", criterion_4);
    std::vector<ShippedSolves> solves;
    try {
        solves = solve_shipped();
    } catch (const std::exception& e) {
        std::cout << "solving the shipped instances threw: " << e.what() << std::endl;
    }
    report(5, "positivity and symmetry", [&] { return criterion_5(solves); });
    report(6, "contraction diagnostics", [&] { return criterion_6(solves); });
    report(7, "functional-analytic audits", criterion_7);
    report(8, "J_n stability", criterion_8);
    report(9, "a-priori audit", [&] { return criterion_9(solves); });
    report(10, "determinism", criterion_10);
    return all ? 0 : 1;
}
