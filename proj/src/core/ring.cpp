#include "core/ring.hpp"

#include <limits>
#include <string>

#include "core/error.hpp"

namespace cvf::ring {

void validate_params(const system_params& params) {
    if (params.n_nodes < 2)
        fail(status_code::config, "n_nodes must be >= 2, got " + std::to_string(params.n_nodes));
    if (params.k_domain < 2)
        fail(status_code::config, "k_domain must be >= 2, got " + std::to_string(params.k_domain));
}

void validate_config(const config_values& values, const system_params& params) {
    validate_params(params);
    if (values.size() != params.n_nodes)
        fail(status_code::config, "configuration has " + std::to_string(values.size()) +
                                      " entries, expected " + std::to_string(params.n_nodes));
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= params.k_domain)
            fail(status_code::config, "configuration value " + std::to_string(values[i]) +
                                          " at node " + std::to_string(i) + " is outside [0, " +
                                          std::to_string(params.k_domain) + ")");
    }
}

uint64_t state_count(const system_params& params, uint64_t budget) {
    validate_params(params);
    uint64_t count = 1;
    for (uint32_t i = 0; i < params.n_nodes; ++i) {
        if (count > std::numeric_limits<uint64_t>::max() / params.k_domain)
            fail(status_code::capacity, "state count K^N overflows 64 bits (N=" +
                                            std::to_string(params.n_nodes) + ", K=" +
                                            std::to_string(params.k_domain) + ")");
        count *= params.k_domain;
    }
    if (budget != 0 && count > budget)
        fail(status_code::capacity, "state count " + std::to_string(count) +
                                        " exceeds the budget of " + std::to_string(budget) +
                                        " states");
    return count;
}

uint64_t encode_state(const config_values& values, const system_params& params) {
    validate_config(values, params);
    uint64_t index = 0;
    for (size_t i = values.size(); i-- > 0;) index = index * params.k_domain + values[i];
    return index;
}

config_values decode_state(uint64_t index, const system_params& params) {
    validate_params(params);
    config_values values(params.n_nodes);
    for (uint32_t i = 0; i < params.n_nodes; ++i) {
        values[i] = static_cast<uint32_t>(index % params.k_domain);
        index /= params.k_domain;
    }
    if (index != 0)
        fail(status_code::config, "state index out of range for (N,K)");
    return values;
}

std::vector<uint32_t> privileged_nodes(const config_values& values, const system_params& params) {
    validate_config(values, params);
    std::vector<uint32_t> nodes;
    if (values[0] == values[params.n_nodes - 1]) nodes.push_back(0);
    for (uint32_t i = 1; i < params.n_nodes; ++i)
        if (values[i] != values[i - 1]) nodes.push_back(i);
    return nodes;
}

config_values apply_move(const config_values& values, uint32_t node, const system_params& params) {
    validate_config(values, params);
    const bool privileged = node == 0 ? values[0] == values[params.n_nodes - 1]
                                      : (node < params.n_nodes && values[node] != values[node - 1]);
    if (!privileged)
        fail(status_code::config, "node " + std::to_string(node) + " is not privileged");
    config_values next = values;
    if (node == 0)
        next[0] = (values[0] + 1) % params.k_domain;
    else
        next[node] = values[node - 1];
    return next;
}

std::vector<std::pair<uint32_t, config_values>> successors(const config_values& values,
                                                           const system_params& params) {
    std::vector<std::pair<uint32_t, config_values>> out;
    for (uint32_t node : privileged_nodes(values, params))
        out.emplace_back(node, apply_move(values, node, params));
    return out;
}

bool is_invariant(const config_values& values, const system_params& params) {
    return privileged_nodes(values, params).size() == 1;
}

void for_each_state(const system_params& params,
                    const std::function<void(uint64_t, const config_values&)>& visit,
                    uint64_t budget) {
    const uint64_t total = state_count(params, budget);
    config_values values(params.n_nodes, 0);
    for (uint64_t index = 0; index < total; ++index) {
        visit(index, values);
        for (uint32_t d = 0; d < params.n_nodes; ++d) {
            if (++values[d] < params.k_domain) break;
            values[d] = 0;
        }
    }
}

} // namespace cvf::ring
