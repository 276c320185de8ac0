#pragma once

#include "bsre/brownian.hpp"
#include "bsre/regression.hpp"
#include "bsre/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsre {

enum class Backend { DeterministicExact, MonteCarlo };

std::string to_string(Backend b);
/// "deterministic-exact" or "monte-carlo"; anything else is InvalidConfiguration.
Backend parse_backend(const std::string& name);

/// Options shared by every backward solve.
struct SolverOptions {
    Backend backend = Backend::DeterministicExact;
    std::size_t n_paths = 2000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    RegressionConfig regression;
    double psd_tol = 1e-10;
};

/// One fixed-point window [t_first, t_last].
struct WindowRecord {
    std::size_t first = 0, last = 0;
    std::size_t iterations = 0;
    std::vector<double> residuals;  ///< sup-distance between successive iterates
    std::vector<double> ratios;     ///< residuals[m+1] / residuals[m]
};

struct SolverMeta {
    std::string solver;
    Backend backend = Backend::DeterministicExact;
    std::vector<WindowRecord> windows;
    double delta = 0.0;
    std::size_t halvings = 0;
    double tolerance = 0.0;
    std::optional<double> radius;
    std::optional<double> theoretical_delta;
    std::optional<double> c2;
    std::uint64_t seed = 0;
    std::size_t n_paths = 0;
    RegressionConfig regression;
    std::optional<Eigen::MatrixXd> p0_std_error;
    std::vector<double> min_eigenvalue;  ///< of E P(t_i)
    std::vector<std::string> warnings;
};

/// Time-indexed pair (P, Q). P(t_L) equals the final datum bitwise.
struct BackwardSolution {
    TimeGrid grid;
    BasisPtr basis;
    OperatorProcess p, q;
    SolverMeta meta;

    /// E P(t_i), flagged symmetric and with its PSD status.
    OperatorMatrix P(std::size_t i) const;
    /// P(t_i) on the event W_{t_i} = w.
    OperatorMatrix P(std::size_t i, double w) const;
    OperatorMatrix Q(std::size_t i) const;
    OperatorMatrix Q(std::size_t i, double w) const;
};

/// Symmetric part, exactly symmetric.
Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& g);

}  // namespace bsre
