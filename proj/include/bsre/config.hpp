#pragma once

#include "bsre/backward_solution.hpp"
#include "bsre/coefficients.hpp"
#include "bsre/lyapunov.hpp"
#include "bsre/regression.hpp"
#include "bsre/riccati.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bsre {

/// Model section of an experiment. Which coefficient fields are used depends
/// on the variant:
///   constant-diagonal       c, b, s, m numeric (length 1 or N)
///   deterministic-schedule  c_expr, b_expr, s_expr (length 1 or N), m numeric
///   scalar-random-field     c_expr[0], s_expr[0], optional profile; b, m numeric
struct ModelSpec {
    ModelVariant variant = ModelVariant::ConstantDiagonal;
    std::size_t n = 4;
    double rho = 0.4;
    double horizon = 1.0;
    std::size_t steps = 1000;
    std::optional<ModelBounds> bounds;
    std::vector<double> c, b, s, m;
    std::vector<std::string> c_expr, b_expr, s_expr;
    std::optional<std::string> profile;

    bool operator==(const ModelSpec&) const = default;
};

struct SolverSpec {
    Backend backend = Backend::DeterministicExact;
    std::optional<double> delta;
    double tol = 1e-10;
    std::size_t max_iter = 200;
    std::size_t max_halvings = 5;
    std::optional<double> radius;
    RegressionConfig regression;
    std::size_t n_paths = 2000;
    double psd_tol = 1e-10;
    std::size_t c2_paths = 1000;

    bool operator==(const SolverSpec&) const = default;
};

/// Names accepted in `verification.audits`.
const std::vector<std::string>& known_audits();

struct VerificationSpec {
    std::size_t n_paths = 10000;
    std::vector<double> x;             ///< initial state; empty selects x_k = 2^{-k}
    std::vector<std::string> audits;   ///< empty selects every audit applicable to the model
    double challenger_amplitude = 0.5;
    std::vector<double> jn_ns{4, 16, 64, 256};
    double jn_epsilon = 0.1;
    std::optional<double> jn_delta;    ///< empty selects T
    std::vector<double> apriori_deltas{1.0, 0.5, 0.25, 0.125};

    bool operator==(const VerificationSpec&) const = default;
};

struct OutputSpec {
    std::string directory = "out";
    bool dump_costs = false;

    bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
    ModelSpec model;
    SolverSpec solver;
    VerificationSpec verification;
    OutputSpec output;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t memory_budget = std::size_t{1} << 30;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and out-of-range values are
/// InvalidConfiguration.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field written explicitly, so parse(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& config);

CoefficientModel build_model(const ModelSpec& spec);
SolverOptions solver_options(const ExperimentConfig& config);
PicardOptions picard_options(const ExperimentConfig& config);
RiccatiConfig riccati_config(const ExperimentConfig& config);
/// The configured initial state, or x_k = 2^{-k} when none is given.
Eigen::VectorXd initial_state(const ExperimentConfig& config);

}  // namespace bsre
