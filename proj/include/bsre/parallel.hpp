#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace bsre {

/// Runs fn(0..n-1) over `workers` threads in contiguous blocks. Each index
/// is handled exactly once; the first exception thrown is rethrown here.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Fixed-order pairwise summation. The association tree depends only on the
/// length, so results are reproducible bitwise.
double pairwise_sum(std::span<const double> values);

/// Same tree, applied to arbitrary addable values.
template <typename T, typename Get>
T pairwise_reduce(std::size_t begin, std::size_t end, const Get& get) {
    if (end - begin == 1) return get(begin);
    const std::size_t mid = begin + (end - begin) / 2;
    T left = pairwise_reduce<T>(begin, mid, get);
    left += pairwise_reduce<T>(mid, end, get);
    return left;
}

struct MeanAndError {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;  ///< unbiased sample variance
};

/// Sample mean, unbiased variance and standard error of the mean, both sums
/// taken pairwise.
MeanAndError mean_and_error(std::span<const double> values);

}  // namespace bsre
