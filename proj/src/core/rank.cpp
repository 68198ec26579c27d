#include "core/rank.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "core/error.hpp"

namespace cvf::rank {

std::string rank_record::avg_string() const {
    if (path_count == 0) return "0";
    const bigint g = boost::multiprecision::gcd(total_len, path_count);
    const bigint num = total_len / g;
    const bigint den = path_count / g;
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

namespace {

// Walks all states with an in-place odometer and hands each state's privileged
// nodes and successor indices to the visitor. Avoids per-state allocation.
template <typename Visit>
void scan_states(const ring::system_params& params, uint64_t total, Visit&& visit) {
    const uint32_t n = params.n_nodes;
    const uint64_t k = params.k_domain;
    std::vector<uint32_t> values(n, 0);
    std::vector<uint64_t> digit_weight(n);
    digit_weight[0] = 1;
    for (uint32_t i = 1; i < n; ++i) digit_weight[i] = digit_weight[i - 1] * k;

    std::vector<uint32_t> nodes;
    std::vector<uint64_t> succ;
    nodes.reserve(n);
    succ.reserve(n);
    for (uint64_t index = 0; index < total; ++index) {
        nodes.clear();
        succ.clear();
        if (values[0] == values[n - 1]) {
            nodes.push_back(0);
            const uint32_t next = (values[0] + 1) % params.k_domain;
            const int64_t delta = static_cast<int64_t>(next) - values[0];
            succ.push_back(index + static_cast<uint64_t>(delta));
        }
        for (uint32_t i = 1; i < n; ++i) {
            if (values[i] != values[i - 1]) {
                nodes.push_back(i);
                const int64_t delta = static_cast<int64_t>(values[i - 1]) - values[i];
                succ.push_back(index + static_cast<uint64_t>(delta * static_cast<int64_t>(digit_weight[i])));
            }
        }
        visit(index, values, nodes, succ);
        for (uint32_t d = 0; d < n; ++d) {
            if (++values[d] < params.k_domain) break;
            values[d] = 0;
        }
    }
}

constexpr uint64_t default_state_budget = 50'000'000;

} // namespace

transition_graph build_transition_graph(const ring::system_params& params, uint64_t budget) {
    const uint64_t total = ring::state_count(params, budget ? budget : default_state_budget);
    transition_graph graph;
    graph.n_states = total;
    graph.offsets.reserve(total + 1);
    graph.offsets.push_back(0);
    scan_states(params, total,
                [&](uint64_t, const std::vector<uint32_t>&, const std::vector<uint32_t>& nodes,
                    const std::vector<uint64_t>& succ) {
                    for (size_t j = 0; j < nodes.size(); ++j) {
                        graph.targets.push_back(succ[j]);
                        graph.moved_node.push_back(nodes[j]);
                    }
                    graph.offsets.push_back(graph.targets.size());
                });
    return graph;
}

std::vector<uint8_t> invariant_mask(const ring::system_params& params, uint64_t budget) {
    const uint64_t total = ring::state_count(params, budget ? budget : default_state_budget);
    std::vector<uint8_t> mask(total, 0);
    scan_states(params, total,
                [&](uint64_t index, const std::vector<uint32_t>&,
                    const std::vector<uint32_t>& nodes, const std::vector<uint64_t>&) {
                    mask[index] = nodes.size() == 1 ? 1 : 0;
                });
    return mask;
}

std::vector<uint64_t> check_convergence_dag(const transition_graph& graph,
                                            const std::vector<uint8_t>& invariant) {
    if (invariant.size() != graph.n_states)
        fail(status_code::config, "invariant mask size does not match the graph");

    // Kahn's algorithm on the variant->variant edges, taking states whose
    // variant successors are all resolved. FIFO over ascending seeds keeps the
    // order deterministic.
    std::vector<uint64_t> pending(graph.n_states, 0);
    uint64_t n_variant = 0;
    for (uint64_t s = 0; s < graph.n_states; ++s) {
        if (invariant[s]) continue;
        ++n_variant;
        for (uint64_t t : graph.successors_of(s))
            if (!invariant[t]) ++pending[s];
    }

    // Predecessor lists restricted to variant->variant edges.
    std::vector<uint64_t> pred_offsets(graph.n_states + 1, 0);
    for (uint64_t s = 0; s < graph.n_states; ++s) {
        if (invariant[s]) continue;
        for (uint64_t t : graph.successors_of(s))
            if (!invariant[t]) ++pred_offsets[t + 1];
    }
    for (uint64_t i = 1; i <= graph.n_states; ++i) pred_offsets[i] += pred_offsets[i - 1];
    std::vector<uint64_t> preds(pred_offsets[graph.n_states]);
    std::vector<uint64_t> cursor(pred_offsets.begin(), pred_offsets.end() - 1);
    for (uint64_t s = 0; s < graph.n_states; ++s) {
        if (invariant[s]) continue;
        for (uint64_t t : graph.successors_of(s))
            if (!invariant[t]) preds[cursor[t]++] = s;
    }

    std::deque<uint64_t> queue;
    for (uint64_t s = 0; s < graph.n_states; ++s)
        if (!invariant[s] && pending[s] == 0) queue.push_back(s);

    std::vector<uint64_t> order;
    order.reserve(n_variant);
    while (!queue.empty()) {
        const uint64_t s = queue.front();
        queue.pop_front();
        order.push_back(s);
        for (uint64_t i = pred_offsets[s]; i < pred_offsets[s + 1]; ++i) {
            const uint64_t p = preds[i];
            if (--pending[p] == 0) queue.push_back(p);
        }
    }
    if (order.size() != n_variant)
        fail(status_code::cyclic,
             "cycle among variant states: " + std::to_string(n_variant - order.size()) +
                 " of " + std::to_string(n_variant) +
                 " variant states lie on or feed a cycle (K too small for self-stabilization)");
    return order;
}

rank_table compute_ranks(const transition_graph& graph, const std::vector<uint8_t>& invariant) {
    const std::vector<uint64_t> order = check_convergence_dag(graph, invariant);

    rank_table table;
    table.records.assign(graph.n_states, rank_record{});
    for (uint64_t s = 0; s < graph.n_states; ++s)
        if (invariant[s]) ++table.invariant_count;

    for (uint64_t s : order) {
        rank_record rec;
        rec.invariant = false;
        rec.total_len = 0;
        rec.path_count = 0;
        int32_t max_sub = -1;
        for (uint64_t t : graph.successors_of(s)) {
            const rank_record& sub = table.records[t];
            rec.total_len += sub.total_len + sub.path_count;
            rec.path_count += sub.path_count;
            max_sub = std::max(max_sub, sub.maxlen);
        }
        if (rec.path_count == 0)
            fail(status_code::failure, "variant state " + std::to_string(s) + " has no successor");
        rec.maxlen = max_sub + 1;
        rec.max_adjust = rec.maxlen + 1;
        const bigint ceil_avg = (rec.total_len + rec.path_count - 1) / rec.path_count;
        if (ceil_avg > std::numeric_limits<int64_t>::max())
            fail(status_code::capacity, "average path length does not fit in 64 bits");
        rec.avg_ceil = static_cast<int64_t>(ceil_avg);
        if (rec.avg_ceil < 1 || rec.avg_ceil > rec.max_adjust)
            fail(status_code::failure, "rank bounds violated at state " + std::to_string(s));
        table.records[s] = std::move(rec);
    }
    return table;
}

void program_rank_effects(const transition_graph& graph, const rank_table& table,
                          const sample_sink& sink) {
    for (uint64_t s = 0; s < graph.n_states; ++s) {
        const rank_record& src = table.records[s];
        for (uint64_t i = graph.offsets[s]; i < graph.offsets[s + 1]; ++i) {
            const uint64_t t = graph.targets[i];
            const rank_record& dst = table.records[t];
            effect_sample sample;
            sample.sample_kind = effect_sample::kind::program;
            sample.src = s;
            sample.dst = t;
            sample.node = graph.moved_node[i];
            sample.effect_ar = dst.avg_ceil - src.avg_ceil;
            sample.effect_m = dst.max_adjust - src.max_adjust;
            sink(sample);
        }
    }
}

std::vector<std::pair<uint32_t, ring::config_values>> cvf_transitions(
    const ring::config_values& values, const ring::system_params& params) {
    ring::validate_config(values, params);
    std::vector<std::pair<uint32_t, ring::config_values>> out;
    out.reserve(static_cast<size_t>(params.n_nodes) * (params.k_domain - 1));
    for (uint32_t node = 0; node < params.n_nodes; ++node) {
        for (uint32_t w = 0; w < params.k_domain; ++w) {
            if (w == values[node]) continue;
            ring::config_values next = values;
            next[node] = w;
            out.emplace_back(node, std::move(next));
        }
    }
    return out;
}

void cvf_rank_effects(const rank_table& table, const ring::system_params& params,
                      cvf_direction direction, const sample_sink& sink) {
    const uint64_t total = ring::state_count(params);
    if (table.records.size() != total)
        fail(status_code::config, "rank table does not match the system parameters");

    std::vector<uint64_t> digit_weight(params.n_nodes);
    digit_weight[0] = 1;
    for (uint32_t i = 1; i < params.n_nodes; ++i)
        digit_weight[i] = digit_weight[i - 1] * params.k_domain;

    std::vector<uint32_t> values(params.n_nodes, 0);
    for (uint64_t anchor = 0; anchor < total; ++anchor) {
        const rank_record& here = table.records[anchor];
        for (uint32_t node = 0; node < params.n_nodes; ++node) {
            for (uint32_t w = 0; w < params.k_domain; ++w) {
                if (w == values[node]) continue;
                const int64_t delta = static_cast<int64_t>(w) - values[node];
                const uint64_t other =
                    anchor + static_cast<uint64_t>(delta * static_cast<int64_t>(digit_weight[node]));
                const rank_record& there = table.records[other];
                effect_sample sample;
                sample.sample_kind = effect_sample::kind::cvf;
                sample.node = node;
                if (direction == cvf_direction::out) {
                    sample.src = anchor;
                    sample.dst = other;
                    sample.effect_ar = there.avg_ceil - here.avg_ceil;
                    sample.effect_m = there.max_adjust - here.max_adjust;
                } else {
                    sample.src = other;
                    sample.dst = anchor;
                    sample.effect_ar = here.avg_ceil - there.avg_ceil;
                    sample.effect_m = here.max_adjust - there.max_adjust;
                }
                sink(sample);
            }
        }
        for (uint32_t d = 0; d < params.n_nodes; ++d) {
            if (++values[d] < params.k_domain) break;
            values[d] = 0;
        }
    }
}

std::map<int64_t, uint64_t> rank_count_histogram(const rank_table& table, metric which) {
    std::map<int64_t, uint64_t> bins;
    for (const rank_record& rec : table.records)
        ++bins[which == metric::avg_ceil ? rec.avg_ceil : rec.max_adjust];
    return bins;
}

int64_t sample_effect(const effect_sample& sample, metric which) {
    return which == metric::avg_ceil ? sample.effect_ar : sample.effect_m;
}

} // namespace cvf::rank
