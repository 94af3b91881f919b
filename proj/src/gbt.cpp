#include "looplens/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "looplens/kernels.hpp"
#include "looplens/rng.hpp"

namespace looplens::dml {

void GbtParams::validate() const {
    if (n_trees < 1) throw input_error("gbt: n_trees must be >= 1");
    if (max_depth < 1) throw input_error("gbt: max_depth must be >= 1");
    if (!(learning_rate > 0.0) || learning_rate > 1.0)
        throw input_error("gbt: learning_rate must be in (0, 1]");
    if (min_samples_leaf < 1) throw input_error("gbt: min_samples_leaf must be >= 1");
    if (!(subsample > 0.0) || subsample > 1.0)
        throw input_error("gbt: subsample must be in (0, 1]");
}

namespace {

struct Grower {
    const ColMatrix& X;
    const std::vector<std::vector<std::int32_t>>& sort_idx;
    const std::vector<double>& resid;
    const GbtParams& params;

    struct NodeAgg {
        std::int64_t count = 0;
        double sum = 0.0;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
    };

    // per-node scan state while sweeping one feature
    struct ScanState {
        std::int64_t left_count = 0;
        double left_sum = 0.0;
        double prev_value = 0.0;
    };

    std::vector<GbtRegressor::Node> grow(std::vector<std::int32_t>& node_of) {
        std::size_t n = resid.size();
        std::vector<GbtRegressor::Node> nodes(1);
        std::vector<NodeAgg> agg(1);
        for (std::size_t i = 0; i < n; ++i) {
            if (node_of[i] < 0) continue;
            agg[0].count += 1;
            agg[0].sum += resid[i];
        }

        std::size_t frontier_begin = 0;
        std::size_t frontier_end = 1;
        for (int depth = 0; depth < params.max_depth && frontier_begin < frontier_end; ++depth) {
            find_best_splits(node_of, nodes, agg, frontier_begin, frontier_end);

            // materialize children for nodes with a usable split
            std::size_t next_begin = nodes.size();
            for (std::size_t nid = frontier_begin; nid < frontier_end; ++nid) {
                if (agg[nid].best_feature < 0) continue;
                nodes[nid].feature = agg[nid].best_feature;
                nodes[nid].threshold = agg[nid].best_threshold;
                nodes[nid].left = std::int32_t(nodes.size());
                nodes[nid].right = std::int32_t(nodes.size() + 1);
                nodes.emplace_back();
                nodes.emplace_back();
                agg.emplace_back();
                agg.emplace_back();
            }
            if (nodes.size() == next_begin) break; // nothing split

            for (std::size_t i = 0; i < n; ++i) {
                std::int32_t nid = node_of[i];
                if (nid < 0 || std::size_t(nid) < frontier_begin || std::size_t(nid) >= frontier_end)
                    continue;
                const auto& parent = nodes[std::size_t(nid)];
                if (parent.feature < 0) continue;
                std::int32_t child = X.cols[std::size_t(parent.feature)][i] <= parent.threshold
                                         ? parent.left
                                         : parent.right;
                node_of[i] = child;
                agg[std::size_t(child)].count += 1;
                agg[std::size_t(child)].sum += resid[i];
            }
            frontier_begin = next_begin;
            frontier_end = nodes.size();
        }

        for (std::size_t nid = 0; nid < nodes.size(); ++nid) {
            if (nodes[nid].feature >= 0) continue;
            nodes[nid].value = agg[nid].count > 0
                                   ? params.learning_rate * (agg[nid].sum / double(agg[nid].count))
                                   : 0.0;
        }
        return nodes;
    }

    void find_best_splits(const std::vector<std::int32_t>& node_of,
                          const std::vector<GbtRegressor::Node>&,
                          std::vector<NodeAgg>& agg,
                          std::size_t frontier_begin, std::size_t frontier_end) {
        std::size_t width = frontier_end - frontier_begin;
        std::vector<ScanState> st(width);
        for (std::size_t j = 0; j < X.n_cols(); ++j) {
            std::fill(st.begin(), st.end(), ScanState{});
            const auto& col = X.cols[j];
            for (std::int32_t i : sort_idx[j]) {
                std::int32_t nid = node_of[std::size_t(i)];
                if (nid < 0 || std::size_t(nid) < frontier_begin || std::size_t(nid) >= frontier_end)
                    continue;
                NodeAgg& a = agg[std::size_t(nid)];
                ScanState& s = st[std::size_t(nid) - frontier_begin];
                double v = col[std::size_t(i)];
                if (s.left_count > 0 && v > s.prev_value) {
                    std::int64_t right_count = a.count - s.left_count;
                    if (s.left_count >= params.min_samples_leaf &&
                        right_count >= params.min_samples_leaf) {
                        double right_sum = a.sum - s.left_sum;
                        double gain = s.left_sum * s.left_sum / double(s.left_count) +
                                      right_sum * right_sum / double(right_count) -
                                      a.sum * a.sum / double(a.count);
                        if (gain > a.best_gain && gain > 0.0) {
                            a.best_gain = gain;
                            a.best_feature = std::int32_t(j);
                            a.best_threshold = 0.5 * (s.prev_value + v);
                        }
                    }
                }
                s.left_count += 1;
                s.left_sum += resid[std::size_t(i)];
                s.prev_value = v;
            }
        }
    }
};

} // namespace

GbtRegressor GbtRegressor::fit(const ColMatrix& X, std::span<const double> y,
                               const GbtParams& params, std::uint64_t seed) {
    params.validate();
    std::size_t n = y.size();
    if (n == 0) throw input_error("gbt: empty training set");
    if (X.n_cols() == 0) throw input_error("gbt: no features");
    for (const auto& c : X.cols)
        if (c.size() != n) throw input_error("gbt: feature column length does not match y");

    GbtRegressor model;
    model.n_features_ = X.n_cols();

    // exact base for a constant target keeps residuals at literal zero
    auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    model.base_score_ = (*mn == *mx) ? *mn : kernels::sum(y.data(), n) / double(n);

    std::vector<std::vector<std::int32_t>> sort_idx(X.n_cols());
    for (std::size_t j = 0; j < X.n_cols(); ++j) {
        auto& idx = sort_idx[j];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0);
        const auto& col = X.cols[j];
        std::sort(idx.begin(), idx.end(), [&col](std::int32_t a, std::int32_t b) {
            double va = col[std::size_t(a)], vb = col[std::size_t(b)];
            return va < vb || (va == vb && a < b);
        });
    }

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - model.base_score_;

    std::size_t bag_size = std::size_t(params.subsample * double(n));
    bag_size = std::clamp<std::size_t>(bag_size, 1, n);
    std::vector<std::int32_t> draw(n);
    std::vector<std::int32_t> node_of(n);

    model.trees_.reserve(std::size_t(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        if (bag_size == n) {
            std::fill(node_of.begin(), node_of.end(), 0);
        } else {
            std::fill(node_of.begin(), node_of.end(), -1);
            rng::Stream stream(rng::derive_seed(seed, "gbt-bag", std::uint64_t(t)));
            std::iota(draw.begin(), draw.end(), 0);
            for (std::size_t k = 0; k < bag_size; ++k) {
                std::size_t pick = k + std::size_t(stream.next_below(n - k));
                std::swap(draw[k], draw[pick]);
                node_of[std::size_t(draw[k])] = 0;
            }
        }

        Grower grower{X, sort_idx, resid, params};
        std::vector<Node> nodes = grower.grow(node_of);

        // update running predictions through the tree so out-of-bag rows and
        // predict() agree bit for bit
        for (std::size_t i = 0; i < n; ++i) {
            const Node* nd = nodes.data();
            while (nd->feature >= 0)
                nd = &nodes[std::size_t(X.cols[std::size_t(nd->feature)][i] <= nd->threshold
                                            ? nd->left
                                            : nd->right)];
            resid[i] -= nd->value;
        }
        model.trees_.push_back(std::move(nodes));
    }
    return model;
}

double GbtRegressor::predict_row(const double* row) const {
    double acc = base_score_;
    for (const auto& tree : trees_) {
        const Node* nd = tree.data();
        while (nd->feature >= 0)
            nd = &tree[std::size_t(row[nd->feature] <= nd->threshold ? nd->left : nd->right)];
        acc += nd->value;
    }
    return acc;
}

std::vector<double> GbtRegressor::predict(const ColMatrix& X) const {
    if (X.n_cols() != n_features_) throw input_error("gbt: feature count mismatch in predict");
    std::size_t n = X.n_rows();
    std::vector<double> out(n, base_score_);
    for (const auto& tree : trees_) {
        for (std::size_t i = 0; i < n; ++i) {
            const Node* nd = tree.data();
            while (nd->feature >= 0)
                nd = &tree[std::size_t(X.cols[std::size_t(nd->feature)][i] <= nd->threshold
                                           ? nd->left
                                           : nd->right)];
            out[i] += nd->value;
        }
    }
    return out;
}

} // namespace looplens::dml
