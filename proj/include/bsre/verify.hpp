#pragma once

#include "bsre/config.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bsre {

struct AuditResult {
    std::string name;
    bool passed = false;
    nlohmann::json details;
};

struct VerifyReport {
    std::vector<AuditResult> audits;
    bool passed = true;
};

/// Audits that make sense for the configured model and backend, in the
/// order of known_audits().
std::vector<std::string> applicable_audits(const ExperimentConfig& config);

/// Runs the audits selected in the config (all applicable ones when the list
/// is empty). Selecting an audit that does not apply is InvalidConfiguration.
VerifyReport run_verification(const ExperimentConfig& config);

nlohmann::json to_json(const VerifyReport& report);

struct OracleRow {
    std::size_t mode = 0;
    double lambda = 0.0;
    double solver = 0.0;
    double oracle = 0.0;
    double relative_error = 0.0;
};

struct OracleComparison {
    std::vector<OracleRow> rows;
    double max_relative_error = 0.0;
    double max_off_diagonal = 0.0;  ///< largest |P_jk(t_i)|, j != k, over the grid
};

/// Riccati P_k(0) from the configured solver against the per-mode ODE
/// oracle. Constant-diagonal models only (InvalidConfiguration otherwise).
OracleComparison oracle_compare(const ExperimentConfig& config);

nlohmann::json to_json(const OracleComparison& comparison);

}  // namespace bsre
