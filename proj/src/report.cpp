#include "bsre/report.hpp"

#include "bsre/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <fstream>

namespace bsre {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& g, double rho) {
    os << g.rows() << ',' << format_double(rho) << '\n';
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            if (c) os << ',';
            os << format_double(g(r, c));
        }
        os << '\n';
    }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    const Eigen::Index n = tr.y.empty() ? 0 : tr.y.front().size();
    os << 't';
    for (Eigen::Index k = 1; k <= n; ++k) os << ",y_" << k;
    for (Eigen::Index k = 1; k <= n; ++k) os << ",u_" << k;
    os << '\n';
    for (std::size_t i = 0; i < tr.y.size(); ++i) {
        os << format_double(tr.grid.time(i));
        for (Eigen::Index k = 0; k < n; ++k) os << ',' << format_double(tr.y[i](k));
        const bool last = i + 1 == tr.y.size();
        for (Eigen::Index k = 0; k < n; ++k) {
            os << ',';
            if (last) continue;
            os << format_double(tr.u.empty() ? 0.0 : tr.u[i](k));
        }
        os << '\n';
    }
}

void write_solution_csv(std::ostream& os, const BackwardSolution& sol) {
    const std::size_t n = sol.p.modes();
    os << 't';
    for (std::size_t k = 1; k <= n; ++k) os << ",eig_" << k;
    os << ",q_ks_norm\n";
    for (std::size_t i = 0; i <= sol.grid.steps(); ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.p.mean(i), Eigen::EigenvaluesOnly);
        os << format_double(sol.grid.time(i));
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) os << ',' << format_double(es.eigenvalues()(k));
        os << ',' << format_double(ks_norm(sol.q.mean(i), sol.basis->weights())) << '\n';
    }
}

json matrix_json(const Eigen::MatrixXd& g) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json solution_meta_json(const BackwardSolution& sol) {
    const SolverMeta& m = sol.meta;
    json windows = json::array();
    for (const auto& w : m.windows) {
        windows.push_back({{"t_first", sol.grid.time(w.first)},
                           {"t_last", sol.grid.time(w.last)},
                           {"first", w.first},
                           {"last", w.last},
                           {"iterations", w.iterations},
                           {"residuals", w.residuals},
                           {"ratios", w.ratios}});
    }
    json j{{"solver", m.solver},
           {"backend", to_string(m.backend)},
           {"N", sol.p.modes()},
           {"rho", sol.basis->rho()},
           {"T", sol.grid.horizon()},
           {"steps", sol.grid.steps()},
           {"delta", m.delta},
           {"halvings", m.halvings},
           {"tolerance", m.tolerance},
           {"windows", windows},
           {"regression", {{"degree", m.regression.degree}, {"ridge", m.regression.ridge}}},
           {"min_eigenvalue", m.min_eigenvalue},
           {"warnings", m.warnings},
           {"p0", matrix_json(sol.p.mean(0))}};
    if (m.backend == Backend::MonteCarlo) {
        j["seed"] = m.seed;
        j["n_paths"] = m.n_paths;
    }
    if (m.radius) j["radius"] = *m.radius;
    if (m.theoretical_delta) j["theoretical_delta"] = *m.theoretical_delta;
    if (m.c2) j["c2"] = *m.c2;
    if (m.p0_std_error) j["p0_std_error"] = matrix_json(*m.p0_std_error);
    return j;
}

void write_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw InvalidConfiguration("cannot write '" + file.string() + "'");
    out << j.dump(2) << '\n';
}

void write_solution_report(const std::filesystem::path& dir, const std::string& stem, const BackwardSolution& sol) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / (stem + ".csv"));
        if (!out) throw InvalidConfiguration("cannot write into '" + dir.string() + "'");
        write_solution_csv(out, sol);
    }
    {
        std::ofstream out(dir / (stem + "_p0.csv"));
        write_matrix_csv(out, sol.p.mean(0), sol.basis->rho());
    }
    write_json(dir / (stem + ".json"), solution_meta_json(sol));
}

}  // namespace bsre
