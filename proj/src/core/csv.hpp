#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cvf::csv {

struct table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Reads a comma-separated file with a mandatory header row. Rows whose width
// differs from the header produce a parse error naming the 1-based line.
table read(const std::filesystem::path& path);

void write(const std::filesystem::path& path, const table& t);

// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

double parse_double(const std::string& cell, const std::filesystem::path& path, size_t line);
int64_t parse_int(const std::string& cell, const std::filesystem::path& path, size_t line);

void write_histogram(const std::filesystem::path& path, const std::string& key_name,
                     const std::string& value_name, const std::map<int64_t, uint64_t>& bins);

} // namespace cvf::csv
