#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace cvf::ring {

// Dijkstra's K-state token ring. Node 0 (the bottom machine) is privileged
// when its value equals its left neighbour's (node N-1) and moves by
// incrementing mod K; every other node is privileged when its value differs
// from its left neighbour's and moves by copying it.
struct system_params {
    uint32_t n_nodes = 0;
    uint32_t k_domain = 0;
};

using config_values = std::vector<uint32_t>;

// Throws a config error unless n_nodes >= 2 and k_domain >= 2.
void validate_params(const system_params& params);

// Throws an invalid-input (config) error on length or domain violations.
void validate_config(const config_values& values, const system_params& params);

// Number of states K^N. Throws a capacity error if it overflows uint64, or
// exceeds `budget` when budget is nonzero.
uint64_t state_count(const system_params& params, uint64_t budget = 0);

// State index <-> configuration, node 0 as the least significant base-K digit.
uint64_t encode_state(const config_values& values, const system_params& params);
config_values decode_state(uint64_t index, const system_params& params);

std::vector<uint32_t> privileged_nodes(const config_values& values, const system_params& params);

// Precondition: `node` is privileged; throws a config error otherwise.
config_values apply_move(const config_values& values, uint32_t node, const system_params& params);

// One entry per privileged node, ascending node index.
std::vector<std::pair<uint32_t, config_values>> successors(const config_values& values,
                                                           const system_params& params);

// Legitimacy predicate: exactly one privileged node.
bool is_invariant(const config_values& values, const system_params& params);

// Visits every configuration in ascending state-index order. Checks the state
// count against `budget` before any work.
void for_each_state(const system_params& params,
                    const std::function<void(uint64_t index, const config_values&)>& visit,
                    uint64_t budget = 0);

} // namespace cvf::ring
