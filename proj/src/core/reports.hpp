#pragma once

#include <cstdint>
#include <string>

#include "core/rank.hpp"

namespace cvf::reports {

inline constexpr const char* tool_version = "0.1.0";
inline constexpr uint64_t default_state_budget = 50'000'000;

// analyze --nodes N [--k K] --out DIR [--metric ar|m] [--allow-small-k] [--budget B]
struct analyze_options {
    uint32_t n_nodes = 0;
    uint32_t k_domain = 0;  // 0 means K = N
    std::string out_dir;
    rank::metric metric = rank::metric::avg_ceil;
    bool allow_small_k = false;
    uint64_t state_budget = 0;  // 0 means the default budget
};

// dataset --nodes SPEC [--input-neurons I] [--target ar|m] --out DIR
//         [--split MODE] [--seed S] [--pad V] [--budget B]
struct dataset_options {
    std::string nodes;             // "3..7", "3,4,5" or "4"
    uint32_t input_neurons = 15;
    std::string target = "ar";
    std::string out_dir;
    std::string split = "random:0.8";  // or "holdout:7[,8]"
    uint64_t seed = 0;
    double pad_value = 0.0;
    uint64_t state_budget = 0;
};

// train --data DIR --model OUT [--preset fnn|mirrored] [--epochs E] [--batch B]
//       [--lr L] [--workers W] [--seed S] [--no-dropout] [--no-batchnorm]
//       [--val-sample K]
struct train_options {
    std::string data_dir;
    std::string model_out;
    std::string preset;     // "", "fnn" (300/32) or "mirrored" (200/64)
    uint64_t epochs = 0;    // 0 means take the preset/default
    uint64_t batch = 0;
    double lr = 0.0;
    unsigned workers = 1;
    uint64_t seed = 0;
    bool no_dropout = false;
    bool no_batchnorm = false;
    uint64_t val_sample = 0;  // 0 evaluates on the full test split
};

struct resolved_train_settings {
    uint64_t epochs;
    uint64_t batch;
    double lr;
};

// Preset expansion with explicit flags taking precedence.
resolved_train_settings resolve_train_settings(const train_options& opts);

// predict --model FILE --nodes N [--k K] --out DIR [--budget B]
struct predict_options {
    std::string model_path;
    uint32_t n_nodes = 0;
    uint32_t k_domain = 0;  // 0 means K = N
    std::string out_dir;
    uint64_t state_budget = 0;
};

// plot --in CSV --out SVG --kind counts|effects|comparison
struct plot_options {
    std::string in_csv;
    std::string out_svg;
    std::string kind;
};

void run_analyze(const analyze_options& opts);
void run_dataset(const dataset_options& opts);
void run_train(const train_options& opts);
void run_predict(const predict_options& opts);
void run_plot(const plot_options& opts);

// Exposed for tests and the predict pipeline.
std::vector<uint32_t> parse_nodes_spec(const std::string& spec);
rank::metric parse_metric(const std::string& name);

} // namespace cvf::reports
