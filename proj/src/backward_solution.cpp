#include "bsre/backward_solution.hpp"

#include "bsre/errors.hpp"

namespace bsre {

std::string to_string(Backend b) {
    return b == Backend::DeterministicExact ? "deterministic-exact" : "monte-carlo";
}

Backend parse_backend(const std::string& name) {
    if (name == "deterministic-exact") return Backend::DeterministicExact;
    if (name == "monte-carlo") return Backend::MonteCarlo;
    throw InvalidConfiguration("unknown backend '" + name + "' (expected deterministic-exact or monte-carlo)");
}

Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& g) {
    Eigen::MatrixXd s = 0.5 * (g + g.transpose());
    // Mirror so that the result is symmetric bit for bit.
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
        for (Eigen::Index k = 0; k < j; ++k) s(j, k) = s(k, j);
    }
    return s;
}

OperatorMatrix BackwardSolution::P(std::size_t i) const {
    return OperatorMatrix(basis, p.mean(i)).symmetrized().with_psd_flag();
}

OperatorMatrix BackwardSolution::P(std::size_t i, double w) const {
    return OperatorMatrix(basis, p.at(i, w)).symmetrized().with_psd_flag();
}

OperatorMatrix BackwardSolution::Q(std::size_t i) const {
    return OperatorMatrix(basis, q.mean(i)).symmetrized();
}

OperatorMatrix BackwardSolution::Q(std::size_t i, double w) const {
    return OperatorMatrix(basis, q.at(i, w)).symmetrized();
}

}  // namespace bsre
