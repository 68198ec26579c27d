#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core/ring.hpp"

namespace cvf::rank {

// Path counts and total path lengths grow combinatorially with N, so both are
// kept in arbitrary precision; they can never wrap silently.
using bigint = boost::multiprecision::cpp_int;

// Per-state path statistics over all program paths to the first invariant
// state reached: total_len (L), path_count (C), avg = L/C exact (A),
// avg_ceil (Ar) and max_adjust (M = longest path + 1; 0 for invariant states).
struct rank_record {
    bigint total_len;
    bigint path_count = 1;
    int64_t avg_ceil = 0;
    int64_t max_adjust = 0;
    int32_t maxlen = 0;
    bool invariant = true;

    // Exact average path length, reduced: "7/2", or "3" when integral.
    std::string avg_string() const;
};

// Program transitions in compressed sparse row form; the out-edges of state s
// are targets[offsets[s] .. offsets[s+1]) ordered by ascending moved node.
struct transition_graph {
    uint64_t n_states = 0;
    std::vector<uint64_t> offsets;
    std::vector<uint64_t> targets;
    std::vector<uint32_t> moved_node;

    std::span<const uint64_t> successors_of(uint64_t s) const {
        return {targets.data() + offsets[s], targets.data() + offsets[s + 1]};
    }
    uint64_t out_degree(uint64_t s) const { return offsets[s + 1] - offsets[s]; }
    uint64_t edge_count() const { return targets.size(); }
};

// Builds the full program-transition graph. `budget` caps the state count
// (0 = caller already checked).
transition_graph build_transition_graph(const ring::system_params& params, uint64_t budget = 0);

// mask[s] != 0 marks invariant states.
std::vector<uint8_t> invariant_mask(const ring::system_params& params, uint64_t budget = 0);

// Orders the variant states so that every program edge between variant states
// points from later to earlier in the order (invariant states are sinks).
// Throws a cyclic error if the variant subgraph has a cycle, which signals a
// K too small for self-stabilization.
std::vector<uint64_t> check_convergence_dag(const transition_graph& graph,
                                            const std::vector<uint8_t>& invariant);

struct rank_table {
    std::vector<rank_record> records;
    uint64_t invariant_count = 0;
};

// Dynamic program over the convergence DAG:
//   C(s) = sum C(t),  L(s) = sum (L(t) + C(t)),  maxlen(s) = 1 + max maxlen(t)
// over program successors t, with invariant states absorbing at (0,1,0,0,0).
rank_table compute_ranks(const transition_graph& graph, const std::vector<uint8_t>& invariant);

enum class metric { avg_ceil, max_adjust };

struct effect_sample {
    enum class kind : uint8_t { program, cvf };
    kind sample_kind;
    uint64_t src = 0;
    uint64_t dst = 0;
    uint32_t node = 0;        // moved node (program) or perturbed node (cvf)
    int64_t effect_ar = 0;    // avg_ceil(dst) - avg_ceil(src)
    int64_t effect_m = 0;     // max_adjust(dst) - max_adjust(src)
};

using sample_sink = std::function<void(const effect_sample&)>;

// One sample per program edge, ascending source state then moved node.
void program_rank_effects(const transition_graph& graph, const rank_table& table,
                          const sample_sink& sink);

// All single-node register perturbations of cfg: for each node i and each
// w != cfg[i], the configuration with position i set to w. N*(K-1) entries.
std::vector<std::pair<uint32_t, ring::config_values>> cvf_transitions(
    const ring::config_values& values, const ring::system_params& params);

enum class cvf_direction { in, out };

// Every perturbation s -> s' once, with effect rank(s') - rank(s).
// direction out iterates grouped by source state, direction in by destination
// state; the aggregate over the full state space is identical either way.
void cvf_rank_effects(const rank_table& table, const ring::system_params& params,
                      cvf_direction direction, const sample_sink& sink);

// rank value -> number of states at that rank; totals K^N.
std::map<int64_t, uint64_t> rank_count_histogram(const rank_table& table, metric which);

struct effect_histogram {
    std::map<int64_t, uint64_t> bins;
    uint64_t total = 0;

    void add(int64_t effect) {
        ++bins[effect];
        ++total;
    }
};

int64_t sample_effect(const effect_sample& sample, metric which);

} // namespace cvf::rank
