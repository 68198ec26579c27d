#include "core/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace cvf::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(status_code::failure, "cannot open " + path.string());
    table t;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (line_no == 1) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            fail(status_code::failure, path.string() + ":" + std::to_string(line_no) + ": row has " +
                                           std::to_string(cells.size()) + " columns, expected " +
                                           std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty())
        fail(status_code::failure, path.string() + ": missing header row");
    return t;
}

void write(const std::filesystem::path& path, const table& t) {
    std::ofstream out(path);
    if (!out) fail(status_code::failure, "cannot write " + path.string());
    auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    emit(t.header);
    for (const auto& row : t.rows) emit(row);
    if (!out) fail(status_code::failure, "write failed for " + path.string());
}

std::string format_double(double value) {
    char buf[64];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

double parse_double(const std::string& cell, const std::filesystem::path& path, size_t line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
        fail(status_code::failure,
             path.string() + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
    return v;
}

int64_t parse_int(const std::string& cell, const std::filesystem::path& path, size_t line) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(cell.c_str(), &end, 10);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE)
        fail(status_code::failure,
             path.string() + ":" + std::to_string(line) + ": not an integer: '" + cell + "'");
    return v;
}

void write_histogram(const std::filesystem::path& path, const std::string& key_name,
                     const std::string& value_name, const std::map<int64_t, uint64_t>& bins) {
    table t;
    t.header = {key_name, value_name};
    for (const auto& [key, count] : bins)
        t.rows.push_back({std::to_string(key), std::to_string(count)});
    write(path, t);
}

} // namespace cvf::csv
