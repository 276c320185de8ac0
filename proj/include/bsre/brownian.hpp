#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bsre {

/// Uniform grid 0 = t_0 < ... < t_L = T.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double step() const noexcept { return step_; }
    double time(std::size_t i) const noexcept {
        return i == steps_ ? horizon_ : static_cast<double>(i) * step_;
    }

    bool operator==(const TimeGrid& o) const { return horizon_ == o.horizon_ && steps_ == o.steps_; }

private:
    double horizon_;
    std::size_t steps_;
    double step_;
};

/// What the coefficients may see at step i: W_0..W_i and nothing later.
struct PathPrefix {
    std::span<const double> w;
    double current() const { return w.back(); }
    std::size_t step() const { return w.size() - 1; }
};

/// One sampled driver path. Values are stored cumulatively, W_0 = 0.
class BrownianPath {
public:
    BrownianPath(TimeGrid grid, std::vector<double> increments, std::uint64_t seed, std::uint64_t index);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t index() const noexcept { return index_; }

    double w(std::size_t i) const { return values_[i]; }
    double increment(std::size_t i) const { return values_[i + 1] - values_[i]; }
    const std::vector<double>& increments() const noexcept { return increments_; }
    PathPrefix prefix(std::size_t i) const { return {std::span<const double>(values_.data(), i + 1)}; }

    /// Same path observed on a grid `factor` times coarser.
    BrownianPath coarsen(std::size_t factor) const;

private:
    TimeGrid grid_;
    std::vector<double> increments_;
    std::vector<double> values_;
    std::uint64_t seed_;
    std::uint64_t index_;
};

/// Seed of the stream for (master seed, path index); SplitMix64 finalizer.
std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t index);

/// Path `index` of the ensemble with master `seed`; a pure function of both.
BrownianPath sample_path(const TimeGrid& grid, std::uint64_t seed, std::uint64_t index);

/// Independent paths 0..n_paths-1. Generated in parallel on `workers`
/// threads; the result does not depend on the worker count.
std::vector<BrownianPath> sample_paths(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                       std::size_t workers = 1);

/// The same paths stored compactly as a (steps + 1) x n_paths matrix of
/// W values, column j being path j. Used by the regression backend.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(w_.cols()); }
    std::uint64_t seed() const noexcept { return seed_; }

    double w(std::size_t path, std::size_t i) const {
        return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(path));
    }
    double increment(std::size_t path, std::size_t i) const { return w(path, i + 1) - w(path, i); }
    PathPrefix prefix(std::size_t path, std::size_t i) const {
        return {std::span<const double>(w_.col(static_cast<Eigen::Index>(path)).data(), i + 1)};
    }

private:
    TimeGrid grid_;
    std::uint64_t seed_;
    Eigen::MatrixXd w_;
};

}  // namespace bsre
