#include "bsre/config.hpp"
#include "bsre/errors.hpp"
#include "bsre/forward_flow.hpp"
#include "bsre/lq_control.hpp"
#include "bsre/lyapunov.hpp"
#include "bsre/report.hpp"
#include "bsre/riccati.hpp"
#include "bsre/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kVerificationFailed = 1, kConfigError = 2, kSolverError = 3 };

int exit_code(bsre::ErrorKind kind) {
    switch (kind) {
        case bsre::ErrorKind::InvalidConfiguration:
        case bsre::ErrorKind::Domain:
        case bsre::ErrorKind::ContractViolation:
        case bsre::ErrorKind::BoundViolation:
            return kConfigError;
        case bsre::ErrorKind::BallViolation:
        case bsre::ErrorKind::NonConvergence:
        case bsre::ErrorKind::OracleFailure:
            return kSolverError;
    }
    return kSolverError;
}

void report_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}, {"exit_status", code}}.dump() << '\n';
}

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
};

bsre::ExperimentConfig load(const Overrides& o) {
    bsre::ExperimentConfig c = bsre::load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.workers) {
        if (*o.workers == 0) throw bsre::InvalidConfiguration("--workers must be at least 1");
        c.workers = *o.workers;
    }
    if (o.out) c.output.directory = *o.out;
    return c;
}

int solve_lyapunov(const bsre::ExperimentConfig& c) {
    const auto model = bsre::build_model(c.model);
    const auto sol = bsre::picard_solve(model, bsre::picard_options(c), bsre::solver_options(c));
    bsre::write_solution_report(c.output.directory, "lyapunov", sol);
    return kOk;
}

int solve_riccati(const bsre::ExperimentConfig& c) {
    const auto model = bsre::build_model(c.model);
    const auto sol = bsre::riccati_solve(model, bsre::riccati_config(c), bsre::solver_options(c));
    bsre::write_solution_report(c.output.directory, "riccati", sol);
    return kOk;
}

int simulate(const bsre::ExperimentConfig& c, std::size_t n_paths, bool flows) {
    const auto model = bsre::build_model(c.model);
    const auto sol = bsre::riccati_solve(model, bsre::riccati_config(c), bsre::solver_options(c));
    const fs::path dir = c.output.directory;
    fs::create_directories(dir);
    const Eigen::VectorXd x = bsre::initial_state(c);
    json runs = json::array();
    for (std::size_t j = 0; j < n_paths; ++j) {
        const bsre::BrownianPath path = bsre::sample_path(model.grid(), c.seed, j);
        const bsre::ControlRun run = bsre::closed_loop(x, sol, model, path);
        const std::string stem = "trajectory_" + std::to_string(j);
        std::ofstream out(dir / (stem + ".csv"));
        bsre::write_trajectory_csv(out, run.trajectory);
        runs.push_back({{"path_index", run.path_index}, {"seed", run.seed}, {"cost", run.cost},
                        {"file", stem + ".csv"}});
        if (flows) {
            const auto phi = bsre::flow_matrices(model, path, c.memory_budget);
            std::ofstream f(dir / ("flow_" + std::to_string(j) + ".csv"));
            bsre::write_matrix_csv(f, phi.front().phi.entries(), model.basis()->rho());
        }
    }
    json summary{{"runs", runs}, {"predicted", x.dot(sol.p.mean(0) * x)}};
    if (c.output.dump_costs) {
        const auto v = bsre::value_check(x, sol, model, c.verification.n_paths, c.seed, c.workers);
        std::ofstream out(dir / "costs.csv");
        out << "path,cost\n";
        for (std::size_t j = 0; j < v.costs.size(); ++j) out << j << ',' << bsre::format_double(v.costs[j]) << '\n';
        summary["mean_cost"] = v.mean_cost;
        summary["std_error"] = v.std_error;
        summary["z_score"] = v.z_score;
    }
    bsre::write_json(dir / "simulate.json", summary);
    return kOk;
}

int verify(const bsre::ExperimentConfig& c) {
    const bsre::VerifyReport rep = bsre::run_verification(c);
    const json j = bsre::to_json(rep);
    fs::create_directories(c.output.directory);
    bsre::write_json(fs::path(c.output.directory) / "verify.json", j);
    for (const auto& a : rep.audits) std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << '\n';
    return rep.passed ? kOk : kVerificationFailed;
}

int run_oracle_compare(const bsre::ExperimentConfig& c) {
    const bsre::OracleComparison cmp = bsre::oracle_compare(c);
    const fs::path dir = c.output.directory;
    fs::create_directories(dir);
    bsre::write_json(dir / "oracle.json", bsre::to_json(cmp));
    std::ofstream out(dir / "oracle.csv");
    out << "mode,lambda,solver,oracle,relative_error\n";
    for (const auto& r : cmp.rows) {
        out << r.mode << ',' << bsre::format_double(r.lambda) << ',' << bsre::format_double(r.solver) << ','
            << bsre::format_double(r.oracle) << ',' << bsre::format_double(r.relative_error) << '\n';
        std::cout << "mode " << r.mode << "  rel.err " << bsre::format_double(r.relative_error) << '\n';
    }
    return cmp.max_relative_error <= 1e-4 ? kOk : kVerificationFailed;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config,-c", o.config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", o.seed, "Override the master seed");
    cmd->add_option("--workers", o.workers, "Override the worker count");
    cmd->add_option("--out", o.out, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral-Galerkin solver for backward stochastic Riccati equations"};
    app.require_subcommand(1);
    Overrides o;
    std::size_t sim_paths = 1;
    bool sim_flows = false;

    auto* lyap = app.add_subcommand("solve-lyapunov", "Solve the linear (B = 0) equation by Picard windows");
    auto* ric = app.add_subcommand("solve-riccati", "Solve the Riccati equation by Lambda windows");
    auto* sim = app.add_subcommand("simulate", "Closed-loop trajectories under the Riccati feedback");
    auto* ver = app.add_subcommand("verify", "Run the audit suite; exit 1 if any audit fails");
    auto* orc = app.add_subcommand("oracle-compare", "Compare P_k(0) with the per-mode ODE oracle");
    for (auto* cmd : {lyap, ric, sim, ver, orc}) add_common(cmd, o);
    sim->add_option("--paths", sim_paths, "Number of trajectories to export")->check(CLI::PositiveNumber);
    sim->add_flag("--flows", sim_flows, "Also export the flow matrix Phi(0 -> T) of each path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("InvalidConfiguration", e.what(), kConfigError);
        return kConfigError;
    }

    try {
        const bsre::ExperimentConfig c = load(o);
        if (*lyap) return solve_lyapunov(c);
        if (*ric) return solve_riccati(c);
        if (*sim) return simulate(c, sim_paths, sim_flows);
        if (*ver) return verify(c);
        if (*orc) return run_oracle_compare(c);
    } catch (const bsre::Error& e) {
        const int code = exit_code(e.kind());
        report_error(std::string(bsre::to_string(e.kind())), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        report_error("Internal", e.what(), kSolverError);
        return kSolverError;
    }
    return kConfigError;
}
