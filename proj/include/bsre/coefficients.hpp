#pragma once

#include "bsre/brownian.hpp"
#include "bsre/expression.hpp"
#include "bsre/spectral.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace bsre {

enum class ModelVariant { ConstantDiagonal, DeterministicSchedule, ScalarRandomField };

std::string to_string(ModelVariant v);

/// Declared bounds: |C| <= M_C and |B| <= M_B everywhere; M_S, when present,
/// bounds |S| in L(H). An absent M_S declares the source as possibly
/// unbounded on H (square integrable in K only).
struct ModelBounds {
    double m_c = 0.0;
    double m_b = 0.0;
    std::optional<double> m_s;

    bool operator==(const ModelBounds&) const = default;
};

/// Raw coefficient entries, reused as scratch in the path loops.
struct Coefficients {
    Eigen::MatrixXd c, b, s;
};

/// Typed view returned by eval_coefficients.
struct CoefficientSet {
    OperatorMatrix c, b, s;
};

/// Coefficient processes B, C, S and the final datum M on a fixed basis and
/// time grid. Immutable once built.
class CoefficientModel {
public:
    /// Per-mode constants; vectors of length 1 are broadcast to all modes.
    /// Missing bounds default to the data maxima.
    static CoefficientModel constant_diagonal(BasisPtr basis, TimeGrid grid, const Eigen::VectorXd& c,
                                              const Eigen::VectorXd& b, const Eigen::VectorXd& s,
                                              const Eigen::VectorXd& m,
                                              std::optional<ModelBounds> bounds = std::nullopt);

    /// Per-mode expressions of t (length 1 broadcast), tabulated on the grid.
    static CoefficientModel deterministic_schedule(BasisPtr basis, TimeGrid grid, std::vector<Expression> c,
                                                   std::vector<Expression> b, std::vector<Expression> s,
                                                   const Eigen::VectorXd& m,
                                                   std::optional<ModelBounds> bounds = std::nullopt);

    /// C(t) = c(t, W_t) I and S(t) = s(t, W_t) Pi, where Pi is the
    /// multiplication operator by `profile(x)` on L^2(0, pi) in the sine basis
    /// (the identity when no profile is given). B is the constant diag(b).
    static CoefficientModel scalar_random_field(BasisPtr basis, TimeGrid grid, Expression c, Expression s,
                                                const Eigen::VectorXd& b, const Eigen::VectorXd& m,
                                                ModelBounds bounds,
                                                std::optional<Expression> profile = std::nullopt);

    ModelVariant variant() const noexcept { return variant_; }
    const BasisPtr& basis() const noexcept { return basis_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const ModelBounds& bounds() const noexcept { return bounds_; }
    std::size_t modes() const noexcept { return basis_->size(); }

    /// True when no coefficient depends on the driver.
    bool deterministic() const noexcept { return variant_ != ModelVariant::ScalarRandomField; }

    /// C, B, S at step i. Reads only the supplied prefix (its last value is
    /// W_{t_i}). Throws BoundViolation if a declared bound is exceeded.
    void evaluate_into(std::size_t i, PathPrefix prefix, Coefficients& out) const;
    Coefficients evaluate(std::size_t i, PathPrefix prefix) const;
    /// Deterministic models only.
    Coefficients evaluate(std::size_t i) const;

    const Eigen::MatrixXd& terminal() const noexcept { return m_; }
    /// Multiplication-operator matrix (identity when no profile).
    const Eigen::MatrixXd& source_shape() const noexcept { return profile_matrix_; }
    const std::optional<Expression>& profile() const noexcept { return profile_; }

    const Eigen::VectorXd& c_const() const noexcept { return c_const_; }
    const Eigen::VectorXd& b_const() const noexcept { return b_const_; }
    const Eigen::VectorXd& s_const() const noexcept { return s_const_; }
    const std::vector<Expression>& c_schedule() const noexcept { return c_sched_; }
    const std::vector<Expression>& b_schedule() const noexcept { return b_sched_; }
    const std::vector<Expression>& s_schedule() const noexcept { return s_sched_; }
    const std::optional<Expression>& c_field() const noexcept { return c_field_; }
    const std::optional<Expression>& s_field() const noexcept { return s_field_; }

    /// Copy with the final datum and source replaced, used for derived
    /// problems (identical dynamics).
    CoefficientModel with_terminal(const Eigen::MatrixXd& m) const;

private:
    CoefficientModel(BasisPtr basis, TimeGrid grid) : basis_(std::move(basis)), grid_(grid) {}

    ModelVariant variant_ = ModelVariant::ConstantDiagonal;
    BasisPtr basis_;
    TimeGrid grid_;
    ModelBounds bounds_;
    Eigen::MatrixXd m_;

    Eigen::VectorXd c_const_, b_const_, s_const_;
    std::vector<Expression> c_sched_, b_sched_, s_sched_;
    Eigen::MatrixXd c_table_, b_table_, s_table_;  // modes x (steps + 1)

    std::optional<Expression> c_field_, s_field_, profile_;
    Eigen::MatrixXd profile_matrix_;
};

CoefficientSet eval_coefficients(const CoefficientModel& model, std::size_t i, const BrownianPath& path);

/// Matrix of the multiplication operator by g on L^2(0, pi) in the basis
/// sqrt(2/pi) sin(k x), by composite Gauss-Legendre quadrature.
Eigen::MatrixXd multiplication_matrix(const Expression& g, std::size_t modes);

/// |g|_{L^2(0,pi)} and a sampled sup |g| (quadrature nodes plus probes
/// approaching both endpoints).
struct ProfileStats {
    double l2_norm = 0.0;
    double sampled_sup = 0.0;
    double endpoint_sup = 0.0;
};
ProfileStats profile_stats(const Expression& g);

struct ModelReport {
    std::string variant;
    ModelBounds declared;
    double observed_c = 0.0;  ///< sup opH(C) over the sampled (t, w)
    double observed_b = 0.0;
    double observed_s = 0.0;
    double observed_s_k = 0.0;  ///< sup K-norm of S
    bool s_symmetric = true, s_psd = true;
    bool m_symmetric = true, m_psd = true;
    bool a2 = true, a3 = true, a3_weak = true, a4 = true;
    std::string verdict;
    std::vector<std::string> notes;
};

/// Report only; never throws for hypothesis failures. Random fields are
/// sampled on every grid time and a symmetric w-grid of +-6 sqrt(T).
ModelReport validate_model(const CoefficientModel& model);

}  // namespace bsre
