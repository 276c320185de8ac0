#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/forward_flow.hpp"
#include "bsre/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <string>

namespace bsre {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

/// Row-major matrix block. First line holds N and rho, then N rows.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& g, double rho);

/// Columns t, y_1..y_N, u_1..u_N; the controls of the final row are empty.
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

/// Per grid time: t, ascending eigenvalues of E P(t_i), and |E Q(t_i)|_Ks.
void write_solution_csv(std::ostream& os, const BackwardSolution& solution);

/// Metadata block: backend, windows with residuals and ratios, seeds and
/// warnings. Contains no wall-clock data.
nlohmann::json solution_meta_json(const BackwardSolution& solution);

nlohmann::json matrix_json(const Eigen::MatrixXd& g);

/// Writes <dir>/<stem>.csv, <dir>/<stem>_p0.csv and <dir>/<stem>.json.
void write_solution_report(const std::filesystem::path& dir, const std::string& stem,
                           const BackwardSolution& solution);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& file, const nlohmann::json& j);

}  // namespace bsre
