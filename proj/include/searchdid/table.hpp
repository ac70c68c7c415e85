#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace searchdid {

// Raised when supplied data (not configuration) violates a contract:
// malformed panels, missing columns, clamp budgets, degenerate designs.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Long-format data table: named columns of equal length, numeric or text.
// CSV round-trips preserve values exactly (numerics printed shortest-round-trip).
struct DataTable {
    std::vector<std::string> numeric_names;
    std::vector<std::vector<double>> numeric_cols;
    std::vector<std::string> text_names;
    std::vector<std::vector<std::string>> text_cols;
    std::size_t n_rows = 0;

    bool has_numeric(const std::string& name) const;
    bool has_text(const std::string& name) const;
    bool has_column(const std::string& name) const { return has_numeric(name) || has_text(name); }

    // Throw std::out_of_range naming the column when absent.
    const std::vector<double>& numeric(const std::string& name) const;
    const std::vector<std::string>& text(const std::string& name) const;

    // Appending a column must match n_rows (or set it when the table is empty).
    void add_numeric(const std::string& name, std::vector<double> values);
    void add_text(const std::string& name, std::vector<std::string> values);

    std::vector<std::string> column_order;  // header order for CSV output
};

// Shortest-round-trip formatting; integral values print without a decimal point.
std::string format_double(double x);

// Plain comma-separated values, no quoting; a column is numeric iff every
// non-empty cell parses fully as a double (empty cells become NaN).
DataTable read_csv(const std::string& path);
void write_csv(const DataTable& table, const std::string& path);

// Rows where the named text column equals `value`; column order preserved.
DataTable subset_by_text(const DataTable& table, const std::string& column, const std::string& value);

}  // namespace searchdid
