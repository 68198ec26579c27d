#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "core/rank.hpp"
#include "core/ring.hpp"

namespace cvf::data {

// Fixed-width padded feature layout shared by all ring sizes:
//   features[0..N-1] = configuration, features[N] = N,
//   features[N+1..input_neurons-1] = pad_value; label = target rank field.
struct dataset_spec {
    std::vector<uint32_t> node_range;  // ascending N values
    uint32_t fixed_k = 0;              // 0 means K = N
    uint32_t input_neurons = 15;
    rank::metric target = rank::metric::avg_ceil;
    double pad_value = 0.0;
    uint64_t seed = 0;

    enum class split_mode { random_fraction, holdout_nodes };
    split_mode mode = split_mode::random_fraction;
    double split_ratio = 0.8;              // fraction of rows in the train side
    std::vector<uint32_t> holdout;         // N values routed to the test side

    uint32_t k_for(uint32_t n) const { return fixed_k == 0 ? n : fixed_k; }
};

struct dataset_row {
    std::vector<double> features;
    double label = 0.0;
    uint32_t n_nodes = 0;  // provenance for holdout splits; not persisted
};

void validate_spec(const dataset_spec& spec);

// One row per state per N, ascending N then state index. tables[i] must be
// the rank table for node_range[i].
std::vector<dataset_row> build_rows(const dataset_spec& spec,
                                    std::span<const rank::rank_table> tables);

// Seeded, reproducible split; either side empty is a config error.
std::pair<std::vector<dataset_row>, std::vector<dataset_row>> split(
    const std::vector<dataset_row>& rows, const dataset_spec& spec);

// Header f0,...,f{width-1},label; decimal text, lossless round-trip.
void write_csv(const std::vector<dataset_row>& rows, const std::filesystem::path& path);
std::vector<dataset_row> read_csv(const std::filesystem::path& path);

} // namespace cvf::data
