#include "searchdid/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace searchdid {

namespace {

std::size_t find_name(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

}  // namespace

bool DataTable::has_numeric(const std::string& name) const {
    return find_name(numeric_names, name) < numeric_names.size();
}

bool DataTable::has_text(const std::string& name) const {
    return find_name(text_names, name) < text_names.size();
}

const std::vector<double>& DataTable::numeric(const std::string& name) const {
    const std::size_t i = find_name(numeric_names, name);
    if (i == numeric_names.size()) throw std::out_of_range("no numeric column named '" + name + "'");
    return numeric_cols[i];
}

const std::vector<std::string>& DataTable::text(const std::string& name) const {
    const std::size_t i = find_name(text_names, name);
    if (i == text_names.size()) throw std::out_of_range("no text column named '" + name + "'");
    return text_cols[i];
}

void DataTable::add_numeric(const std::string& name, std::vector<double> values) {
    if (has_column(name)) throw std::invalid_argument("duplicate column name '" + name + "'");
    if (numeric_names.empty() && text_names.empty()) n_rows = values.size();
    if (values.size() != n_rows) throw std::invalid_argument("column '" + name + "' length mismatch");
    numeric_names.push_back(name);
    numeric_cols.push_back(std::move(values));
    column_order.push_back(name);
}

void DataTable::add_text(const std::string& name, std::vector<std::string> values) {
    if (has_column(name)) throw std::invalid_argument("duplicate column name '" + name + "'");
    if (numeric_names.empty() && text_names.empty()) n_rows = values.size();
    if (values.size() != n_rows) throw std::invalid_argument("column '" + name + "' length mismatch");
    text_names.push_back(name);
    text_cols.push_back(std::move(values));
    column_order.push_back(name);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "";
    if (x == std::floor(x) && std::abs(x) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", x);
        return buf;
    }
    char buf[40];
    // %.17g always round-trips; prefer the shorter %.15g / %.16g when they do.
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    return buf;
}

DataTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> headers;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) headers.push_back(cell);
        if (!line.empty() && line.back() == ',') headers.push_back("");
    }
    const std::size_t ncol = headers.size();
    for (const std::string& h : headers)
        if (h.empty()) throw DataError("CSV file '" + path + "' has an empty header name");

    std::vector<std::vector<std::string>> raw(ncol);
    std::size_t line_no = 1;
    std::vector<std::string> cells;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        cells.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (cells.size() != ncol) {
            std::ostringstream os;
            os << "CSV file '" << path << "' line " << line_no << " has " << cells.size()
               << " cells, expected " << ncol;
            throw DataError(os.str());
        }
        for (std::size_t c = 0; c < ncol; ++c) raw[c].push_back(std::move(cells[c]));
    }

    DataTable out;
    for (std::size_t c = 0; c < ncol; ++c) {
        bool numeric = true;
        double tmp;
        for (const std::string& cell : raw[c]) {
            if (cell.empty()) continue;
            if (!parse_double(cell, tmp)) {
                numeric = false;
                break;
            }
        }
        if (numeric) {
            std::vector<double> vals;
            vals.reserve(raw[c].size());
            for (const std::string& cell : raw[c])
                vals.push_back(cell.empty() ? std::nan("") : std::strtod(cell.c_str(), nullptr));
            out.add_numeric(headers[c], std::move(vals));
        } else {
            out.add_text(headers[c], std::move(raw[c]));
        }
    }
    return out;
}

DataTable subset_by_text(const DataTable& table, const std::string& column, const std::string& value) {
    const std::vector<std::string>& key = table.text(column);
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < table.n_rows; ++r)
        if (key[r] == value) keep.push_back(r);

    DataTable out;
    for (const std::string& name : table.column_order) {
        if (table.has_numeric(name)) {
            const std::vector<double>& src = table.numeric(name);
            std::vector<double> vals;
            vals.reserve(keep.size());
            for (std::size_t r : keep) vals.push_back(src[r]);
            out.add_numeric(name, std::move(vals));
        } else {
            const std::vector<std::string>& src = table.text(name);
            std::vector<std::string> vals;
            vals.reserve(keep.size());
            for (std::size_t r : keep) vals.push_back(src[r]);
            out.add_text(name, std::move(vals));
        }
    }
    return out;
}

void write_csv(const DataTable& table, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write CSV file '" + path + "'");

    std::vector<const std::vector<double>*> num_ptr;
    std::vector<const std::vector<std::string>*> txt_ptr;
    for (std::size_t i = 0; i < table.column_order.size(); ++i) {
        const std::string& name = table.column_order[i];
        if (table.has_numeric(name)) {
            num_ptr.push_back(&table.numeric(name));
            txt_ptr.push_back(nullptr);
        } else {
            num_ptr.push_back(nullptr);
            txt_ptr.push_back(&table.text(name));
        }
        outf << (i ? "," : "") << name;
    }
    outf << "\n";
    for (std::size_t r = 0; r < table.n_rows; ++r) {
        for (std::size_t c = 0; c < table.column_order.size(); ++c) {
            if (c) outf << ",";
            if (num_ptr[c]) outf << format_double((*num_ptr[c])[r]);
            else outf << (*txt_ptr[c])[r];
        }
        outf << "\n";
    }
    if (!outf) throw std::runtime_error("failed while writing CSV file '" + path + "'");
}

}  // namespace searchdid
