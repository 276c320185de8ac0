#include "bsre/brownian.hpp"

#include "bsre/errors.hpp"
#include "bsre/parallel.hpp"

#include <cmath>
#include <random>

namespace bsre {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps), step_(0.0) {
    if (steps_ == 0) {
        throw InvalidConfiguration("time grid needs at least one step");
    }
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) {
        throw InvalidConfiguration("time horizon T must be positive and finite");
    }
    step_ = horizon_ / static_cast<double>(steps_);
}

BrownianPath::BrownianPath(TimeGrid grid, std::vector<double> increments, std::uint64_t seed,
                           std::uint64_t index)
    : grid_(grid), increments_(std::move(increments)), seed_(seed), index_(index) {
    if (increments_.size() != grid_.steps()) {
        throw ContractViolation("path increments do not match the grid");
    }
    values_.resize(increments_.size() + 1);
    values_[0] = 0.0;
    for (std::size_t i = 0; i < increments_.size(); ++i) {
        values_[i + 1] = values_[i] + increments_[i];
    }
}

BrownianPath BrownianPath::coarsen(std::size_t factor) const {
    if (factor == 0 || grid_.steps() % factor != 0) {
        throw InvalidConfiguration("coarsening factor must divide the number of steps");
    }
    std::vector<double> coarse(grid_.steps() / factor);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        coarse[i] = values_[(i + 1) * factor] - values_[i * factor];
    }
    return BrownianPath(TimeGrid(grid_.horizon(), coarse.size()), std::move(coarse), seed_, index_);
}

std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

BrownianPath sample_path(const TimeGrid& grid, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 engine(path_stream_seed(seed, index));
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.step()));
    std::vector<double> inc(grid.steps());
    for (double& d : inc) d = normal(engine);
    return BrownianPath(grid, std::move(inc), seed, index);
}

std::vector<BrownianPath> sample_paths(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                       std::size_t workers) {
    if (n_paths == 0) {
        throw InvalidConfiguration("ensemble needs at least one path");
    }
    std::vector<BrownianPath> out;
    out.reserve(n_paths);
    // Fill with placeholders so workers can assign slots independently.
    for (std::size_t j = 0; j < n_paths; ++j) {
        out.emplace_back(grid, std::vector<double>(grid.steps(), 0.0), seed, j);
    }
    parallel_for(n_paths, workers, [&](std::size_t j) { out[j] = sample_path(grid, seed, j); });
    return out;
}

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t n_paths, std::uint64_t seed, std::size_t workers)
    : grid_(grid), seed_(seed) {
    if (n_paths == 0) {
        throw InvalidConfiguration("ensemble needs at least one path");
    }
    w_.resize(static_cast<Eigen::Index>(grid.steps() + 1), static_cast<Eigen::Index>(n_paths));
    parallel_for(n_paths, workers, [&](std::size_t j) {
        const BrownianPath path = sample_path(grid_, seed_, j);
        for (std::size_t i = 0; i <= grid_.steps(); ++i) {
            w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = path.w(i);
        }
    });
}

}  // namespace bsre
