#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "looplens/common.hpp"

namespace looplens::dml {

// Feature matrix stored by column; all columns share one length.
struct ColMatrix {
    std::vector<std::vector<double>> cols;

    std::size_t n_rows() const { return cols.empty() ? 0 : cols.front().size(); }
    std::size_t n_cols() const { return cols.size(); }
};

struct GbtParams {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    double subsample = 1.0; // row fraction per tree, (0, 1]

    void validate() const;
};

// Least-squares gradient boosting over depth-limited regression trees.
// Exact greedy splits on presorted columns; gain ties keep the first
// candidate in (feature, threshold) scan order, so a (data, params, seed)
// triple always yields the identical model.
class GbtRegressor {
public:
    static GbtRegressor fit(const ColMatrix& X, std::span<const double> y,
                            const GbtParams& params, std::uint64_t seed);

    double predict_row(const double* row) const; // row has n_features values
    std::vector<double> predict(const ColMatrix& X) const;

    double base_score() const { return base_score_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t n_trees() const { return trees_.size(); }

    struct Node {
        std::int32_t feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0; // leaf value, already scaled by the learning rate
    };

    const std::vector<std::vector<Node>>& trees() const { return trees_; }

private:
    double base_score_ = 0.0;
    std::size_t n_features_ = 0;
    std::vector<std::vector<Node>> trees_;
};

} // namespace looplens::dml
