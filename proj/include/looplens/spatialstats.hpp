#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "looplens/common.hpp"
#include "looplens/gridmap.hpp"

namespace looplens::stats {

// Sparse row-major weights. After row_standardize() every non-island row
// sums to one; the diagonal is always zero.
struct WeightsMatrix {
    std::size_t n = 0;
    std::vector<std::int64_t> indptr;  // size n+1
    std::vector<std::int32_t> indices; // column ids
    std::vector<double> weights;
    bool row_standardized = false;
    std::vector<std::int32_t> islands; // rows with no neighbors

    static WeightsMatrix from_neighbor_lists(const std::vector<std::vector<std::int32_t>>& nbrs);
    void row_standardize();
    double s0() const; // sum of all weights
    std::size_t row_size(std::size_t i) const { return std::size_t(indptr[i + 1] - indptr[i]); }
};

// k nearest neighbors by projected distance, symmetrized by union, then
// row-standardized. Distance ties break toward the lower index.
WeightsMatrix build_weights_knn(const std::vector<grid::XY>& points, int k);

// Queen contiguity: polygons sharing at least one vertex (coordinates snapped
// to 1e-7 degrees) are neighbors. Row-standardized.
WeightsMatrix build_weights_queen(const std::vector<grid::Street>& polygons);

// All points within `band_m` meters. Rows with no neighbor are flagged as
// islands and left empty. Row-standardized.
WeightsMatrix build_weights_distance_band(const std::vector<grid::XY>& points, double band_m);

struct MoranResult {
    double I = 0.0;
    double expected = 0.0; // -1/(n-1) under the null
    double p_value = -1.0; // set by the permutation test
    int n_perm = 0;
    std::uint64_t seed = 0;
};

MoranResult morans_i(std::span<const double> y, const WeightsMatrix& w);

// Two-sided permutation test with +1 smoothing:
//   p = (1 + #{ |I*| - E >= |I - E| }) / (n_perm + 1)
// Permutation streams are derived per index from the seed, so any thread
// count reproduces the sequential result.
MoranResult morans_permutation_test(std::span<const double> y, const WeightsMatrix& w,
                                    int n_perm = 999, std::uint64_t seed = 0, int threads = 1);

struct VifEntry {
    std::string name;
    double vif = 0.0;
};

struct VifResult {
    std::vector<VifEntry> entries;
    double mean_vif = 0.0;
};

// VIF_j = 1 / (1 - R2_j) from regressing column j on the remaining columns
// plus an intercept. Exact collinearity raises input_error naming the column.
VifResult vif(const std::vector<std::vector<double>>& columns,
              const std::vector<std::string>& names);

} // namespace looplens::stats
