#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cvf::nn {

// Dense row-major matrix; rows are examples, cols are features.
struct matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> a;

    matrix() = default;
    matrix(size_t r, size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return a[r * cols + c]; }
    double at(size_t r, size_t c) const { return a[r * cols + c]; }
    std::span<double> row(size_t r) { return {a.data() + r * cols, cols}; }
    std::span<const double> row(size_t r) const { return {a.data() + r * cols, cols}; }
};

// Feedforward regression net: affine layers with rectified hidden units and an
// affine output. Inverted dropout after the first hidden activation and batch
// normalization after the second hidden activation, each present only when the
// corresponding hidden layer exists and its enable flag is set.
struct mlp_model {
    std::vector<size_t> widths;            // e.g. {15, 128, 64, 64, 1}
    std::vector<matrix> weights;           // weights[l]: widths[l+1] x widths[l]
    std::vector<std::vector<double>> biases;

    double dropout_rate = 0.2;
    bool dropout_enabled = true;
    bool batchnorm_enabled = true;
    std::string target = "ar";  // which rank field the model predicts



    std::vector<double> bn_gamma, bn_beta, bn_run_mean, bn_run_var;
    double bn_eps = 1e-5;
    double bn_momentum = 0.99;

    size_t input_width() const { return widths.front(); }
    size_t hidden_count() const { return widths.size() - 2; }
    bool has_dropout_slot() const { return hidden_count() >= 1; }
    bool has_batchnorm_slot() const { return hidden_count() >= 2; }
    // Dropout follows hidden layer 0, batch norm follows hidden layer 1.
    static constexpr size_t dropout_after = 0;
    static constexpr size_t batchnorm_after = 1;
};

// He-style init: weights ~ N(0, sqrt(2/fan_in)), biases zero, bn scale 1 shift
// 0, running stats (0, 1). Fully reproducible from the seed.
mlp_model init_model(std::span<const size_t> widths, uint64_t seed);

struct forward_options {
    bool update_running_stats = true;  // train mode only
    uint64_t dropout_seed = 0;
};

// Everything backward() needs; valid only for the batch it was produced from.
struct forward_cache {
    matrix input;
    std::vector<matrix> pre_act;    // z per layer
    std::vector<matrix> post_act;   // layer output after act/dropout/batchnorm
    matrix dropout_mask;            // scaled keep mask (0 or 1/keep)
    matrix bn_xhat;
    std::vector<double> bn_mean, bn_var;
    bool bn_used = false;          // normalized with batch statistics
    bool bn_running_used = false;  // batch of one, normalized with running stats
    bool bn_stats_applied = false; // forward already updated the running stats
    bool dropout_used = false;
    size_t batch = 0;
    uint64_t model_tag = 0;
};

// Train-mode forward: dropout active (when enabled), batch norm uses batch
// statistics for batches of at least two examples and running statistics
// otherwise. Returns predictions, one per row.
std::vector<double> forward_train(mlp_model& model, const matrix& input,
                                  const forward_options& opts, forward_cache& cache);

// Eval-mode forward: deterministic, dropout is identity, batch norm uses
// running statistics.
std::vector<double> predict(const mlp_model& model, const matrix& input);

double loss_mse(std::span<const double> pred, std::span<const double> labels);
double metric_mae(std::span<const double> pred, std::span<const double> labels);

struct gradients {
    std::vector<matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<double> bn_gamma, bn_beta;
    // Batch statistics carried alongside so a trainer can fold the running
    // average update into the same synchronized apply phase as the gradients.
    // bn_stats_weight lets a reducer renormalize when only part of a global
    // batch produced batch statistics.
    std::vector<double> bn_batch_mean, bn_batch_var;
    bool bn_stats_valid = false;
    double bn_stats_weight = 0.0;
    size_t batch = 0;
};

gradients zero_gradients(const mlp_model& model);

// Backpropagation of mean-reduction MSE through the cached forward pass.
gradients backward(const mlp_model& model, const forward_cache& cache,
                   std::span<const double> labels);

void accumulate_scaled(gradients& acc, const gradients& g, double weight);

struct adam_state {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t t = 0;
    std::vector<matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    std::vector<double> m_gamma, v_gamma, m_beta, v_beta;
};

adam_state init_adam(const mlp_model& model, double lr);

// Bias-corrected Adam update; also folds in the batch-norm running-statistics
// update when the gradient bundle carries valid batch statistics.
void adam_step(mlp_model& model, const gradients& grads, adam_state& state);

bool models_equal(const mlp_model& a, const mlp_model& b);

// Line-oriented text format, header "cvfmlp v1"; lossless round-trip.
void save_model(const mlp_model& model, const std::filesystem::path& path);
mlp_model load_model(const std::filesystem::path& path);

} // namespace cvf::nn
