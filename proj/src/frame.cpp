#include "looplens/frame.hpp"

#include "looplens/common.hpp"

namespace looplens {

int DataFrame::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return int(i);
    return -1;
}

const std::vector<double>& DataFrame::col(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw input_error("missing column: " + name);
    return cols[std::size_t(i)];
}

void DataFrame::add(std::string name, std::vector<double> values) {
    if (!cols.empty() && values.size() != n_rows())
        throw input_error("column " + name + " has " + std::to_string(values.size()) +
                          " rows, table has " + std::to_string(n_rows()));
    names.push_back(std::move(name));
    cols.push_back(std::move(values));
}

DataFrame DataFrame::select_rows(const std::vector<std::size_t>& rows) const {
    DataFrame out;
    out.names = names;
    out.cols.resize(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.cols[c].reserve(rows.size());
        for (std::size_t r : rows) out.cols[c].push_back(cols[c][r]);
    }
    return out;
}

} // namespace looplens
