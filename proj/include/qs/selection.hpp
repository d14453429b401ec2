#ifndef QS_SELECTION_HPP
#define QS_SELECTION_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace qs::selection {

struct FeaturePoint {
    double pga = 0.0;
    double pgv = 0.0;
    std::string motion_id;
};

struct SelectionPlan {
    int n_source_train = 1200;
    int n_validation = 60;
    std::vector<int> target_sizes = {10, 20, 40, 60, 80, 120};
    std::vector<uint64_t> replicate_seeds = {101, 102, 103, 104, 105, 106, 107, 108, 109};

    void validate(size_t pool_size) const;
};

// Greedy max-min farthest point sampling in PGA-PGV space. Optionally
// standardizes each feature to zero mean / unit variance over the candidate
// pool. Starts from the point of maximum feature norm (ties -> lowest
// index), then repeatedly adds the point farthest from the selected set.
std::vector<size_t> select_fps(const std::vector<FeaturePoint>& points,
                               size_t k, bool standardize = true);

// Replicate variant: the start point is drawn uniformly from the pool with
// the given seed instead of the max-norm rule; the greedy itself is
// unchanged.
std::vector<size_t> select_fps_seeded(const std::vector<FeaturePoint>& points,
                                      size_t k, bool standardize,
                                      uint64_t start_seed);

struct PoolPartition {
    std::vector<size_t> source_train;
    std::vector<size_t> validation;
    // target_train[size_index][replicate] -> indices into the original pool,
    // each a subset of source_train.
    std::vector<std::vector<std::vector<size_t>>> target_train;
};

// Fig.-3 style pool split: source training first, validation from the
// remainder, target training sets re-sampled from the source pool with
// seeded starts.
PoolPartition partition_pools(const std::vector<FeaturePoint>& points,
                              const SelectionPlan& plan);

} // namespace qs::selection

#endif // QS_SELECTION_HPP
