#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace looplens::csv {

// Splits one CSV record. Double-quoted fields may contain commas and doubled
// quotes. No multi-line fields; the formats here never need them.
std::vector<std::string> split_line(std::string_view line);

// Splits on commas in place without unquoting; fast path for known-simple
// rows (event streams). Returns number of fields written, or 0 if the row
// has more fields than `max_fields`.
std::size_t split_simple(std::string_view line, std::string_view* fields, std::size_t max_fields);

// Quotes a field if it contains a comma, quote, or newline.
std::string escape(std::string_view field);

// Shortest decimal form that round-trips the exact double; locale-free, so
// report files are byte-stable across environments.
std::string format_double(double v);

// Reads a whole small CSV file: first row is the header. Skips leading '#'
// comment lines and a UTF-8 BOM. Throws looplens::input_error on missing
// file or ragged rows.
struct Document {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(std::string_view name) const; // -1 when absent
};

Document read_file(const std::string& path);

} // namespace looplens::csv
