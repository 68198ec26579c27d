#include "core/dataset.hpp"

#include <algorithm>
#include <string>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace cvf::data {

void validate_spec(const dataset_spec& spec) {
    if (spec.node_range.empty())
        fail(status_code::config, "node range is empty");
    if (!std::is_sorted(spec.node_range.begin(), spec.node_range.end()))
        fail(status_code::config, "node range must be ascending");
    const uint32_t max_n = spec.node_range.back();
    if (max_n + 1 > spec.input_neurons)
        fail(status_code::config, "input_neurons=" + std::to_string(spec.input_neurons) +
                                      " cannot hold N=" + std::to_string(max_n) +
                                      " (need at least N+1 slots)");
    if (spec.mode == dataset_spec::split_mode::random_fraction &&
        !(spec.split_ratio > 0.0 && spec.split_ratio < 1.0))
        fail(status_code::config, "split ratio must lie strictly between 0 and 1");
    if (spec.mode == dataset_spec::split_mode::holdout_nodes && spec.holdout.empty())
        fail(status_code::config, "holdout split requires at least one N value");
}

std::vector<dataset_row> build_rows(const dataset_spec& spec,
                                    std::span<const rank::rank_table> tables) {
    validate_spec(spec);
    if (tables.size() != spec.node_range.size())
        fail(status_code::config, "need one rank table per N in the node range");

    std::vector<dataset_row> rows;
    for (size_t ni = 0; ni < spec.node_range.size(); ++ni) {
        const uint32_t n = spec.node_range[ni];
        const ring::system_params params{n, spec.k_for(n)};
        const uint64_t total = ring::state_count(params);
        const rank::rank_table& table = tables[ni];
        if (table.records.size() != total)
            fail(status_code::config, "rank table for N=" + std::to_string(n) +
                                          " has the wrong state count");
        rows.reserve(rows.size() + total);
        ring::for_each_state(params, [&](uint64_t index, const ring::config_values& values) {
            dataset_row row;
            row.n_nodes = n;
            row.features.assign(spec.input_neurons, spec.pad_value);
            for (uint32_t i = 0; i < n; ++i) row.features[i] = values[i];
            row.features[n] = n;
            const rank::rank_record& rec = table.records[index];
            row.label = static_cast<double>(
                spec.target == rank::metric::avg_ceil ? rec.avg_ceil : rec.max_adjust);
            rows.push_back(std::move(row));
        });
    }
    return rows;
}

std::pair<std::vector<dataset_row>, std::vector<dataset_row>> split(
    const std::vector<dataset_row>& rows, const dataset_spec& spec) {
    validate_spec(spec);
    if (rows.empty()) fail(status_code::config, "cannot split an empty dataset");

    std::vector<dataset_row> train;
    std::vector<dataset_row> test;
    if (spec.mode == dataset_spec::split_mode::holdout_nodes) {
        for (const dataset_row& row : rows) {
            const bool held = std::find(spec.holdout.begin(), spec.holdout.end(), row.n_nodes) !=
                              spec.holdout.end();
            (held ? test : train).push_back(row);
        }
    } else {
        std::vector<size_t> perm(rows.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng gen(derive_seed(spec.seed, 0x5911ull));
        gen.shuffle(perm);
        const size_t n_train = static_cast<size_t>(spec.split_ratio * rows.size());
        std::vector<size_t> train_idx(perm.begin(), perm.begin() + n_train);
        std::vector<size_t> test_idx(perm.begin() + n_train, perm.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
        for (size_t i : train_idx) train.push_back(rows[i]);
        for (size_t i : test_idx) test.push_back(rows[i]);
    }
    if (train.empty() || test.empty())
        fail(status_code::config, "split left one side empty (train=" +
                                      std::to_string(train.size()) + ", test=" +
                                      std::to_string(test.size()) + ")");
    return {std::move(train), std::move(test)};
}

void write_csv(const std::vector<dataset_row>& rows, const std::filesystem::path& path) {
    if (rows.empty()) fail(status_code::config, "refusing to write an empty dataset");
    const size_t width = rows.front().features.size();
    csv::table t;
    for (size_t i = 0; i < width; ++i) t.header.push_back("f" + std::to_string(i));
    t.header.push_back("label");
    for (const dataset_row& row : rows) {
        if (row.features.size() != width)
            fail(status_code::config, "inconsistent feature width in dataset rows");
        std::vector<std::string> cells;
        cells.reserve(width + 1);
        for (double v : row.features) cells.push_back(csv::format_double(v));
        cells.push_back(csv::format_double(row.label));
        t.rows.push_back(std::move(cells));
    }
    csv::write(path, t);
}

std::vector<dataset_row> read_csv(const std::filesystem::path& path) {
    const csv::table t = csv::read(path);
    if (t.header.size() < 2 || t.header.back() != "label")
        fail(status_code::failure, path.string() + ": expected header f0,...,label");
    std::vector<dataset_row> rows;
    rows.reserve(t.rows.size());
    for (size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cells = t.rows[r];
        dataset_row row;
        row.features.reserve(cells.size() - 1);
        for (size_t i = 0; i + 1 < cells.size(); ++i)
            row.features.push_back(csv::parse_double(cells[i], path, r + 2));
        row.label = csv::parse_double(cells.back(), path, r + 2);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace cvf::data
