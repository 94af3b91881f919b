#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace looplens {

// Column-oriented numeric table keyed by column name. The causal-effect and
// report plumbing passes these around; row order is meaningful and preserved
// by every operation.
struct DataFrame {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;

    std::size_t n_rows() const { return cols.empty() ? 0 : cols.front().size(); }
    std::size_t n_cols() const { return cols.size(); }

    int find(const std::string& name) const;
    // Throws looplens::input_error naming the column when absent.
    const std::vector<double>& col(const std::string& name) const;
    void add(std::string name, std::vector<double> values);

    // Keeps rows whose index appears in `rows`, in the given order.
    DataFrame select_rows(const std::vector<std::size_t>& rows) const;
};

} // namespace looplens
