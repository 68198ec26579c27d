#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "core/dataset.hpp"
#include "core/nn.hpp"

namespace cvf::train {

struct train_config {
    size_t epochs = 300;
    size_t batch_size = 32;
    double lr = 0.001;
    uint64_t seed = 0;
    bool dropout = true;
    bool batchnorm = true;
};

// Synchronous data parallelism: W replicas, one contiguous shard per worker
// per batch, shard-size-weighted gradient mean reduced in ascending worker
// order, and the identical update applied on every replica.
struct parallel_config {
    unsigned workers = 1;
    // Test hook: invoked on each worker before it computes its shard gradient.
    std::function<void(unsigned worker, uint64_t step)> fault_hook;
};

// Contiguous, disjoint, covering shards with sizes differing by at most one.
std::vector<std::pair<size_t, size_t>> shard_batch(size_t batch, unsigned workers);

struct epoch_metrics {
    size_t epoch = 0;
    double loss = 0.0;                  // training-mode loss, batch-size weighted
    std::optional<double> val_mae;
    double seconds = 0.0;
};

struct fit_result {
    std::vector<epoch_metrics> history;
    double final_train_loss = 0.0;
};

// One synchronized training step on an externally managed model; bit-identical
// to what a worker pool with W=1 performs.
void single_device_step(nn::mlp_model& model, const nn::matrix& batch,
                        std::span<const double> labels, nn::adam_state& state,
                        uint64_t dropout_seed, double* loss_out = nullptr);

class worker_pool {
  public:
    worker_pool(const nn::mlp_model& model, double lr, const parallel_config& cfg);
    ~worker_pool();

    worker_pool(const worker_pool&) = delete;
    worker_pool& operator=(const worker_pool&) = delete;

    // Shards the batch, reduces the shard gradients and applies one Adam
    // update on every replica. Returns the batch-weighted training loss.
    double step(const nn::matrix& batch, std::span<const double> labels, uint64_t dropout_seed);

    // The reduced shard-size-weighted gradient for a batch, without updating
    // anything. Matches the full-batch gradient when dropout is off.
    nn::gradients global_gradient(const nn::matrix& batch, std::span<const double> labels,
                                  uint64_t dropout_seed);

    const nn::mlp_model& replica(unsigned worker) const;
    const nn::mlp_model& model() const { return replica(0); }
    bool replicas_equal() const;
    unsigned workers() const;
    uint64_t steps_taken() const;

  private:
    struct impl;
    std::unique_ptr<impl> impl_;
};

// Seeded epoch shuffling, mini-batches, synchronized parallel steps. `val`
// adds a held-out MAE per epoch. Throws a numeric error with epoch/step
// diagnostics when the loss stops being finite.
fit_result fit(nn::mlp_model& model, const std::vector<data::dataset_row>& train_rows,
               const std::vector<data::dataset_row>* val_rows, const train_config& cfg,
               const parallel_config& par);

// Eval-mode (mse, mae) over all rows.
std::pair<double, double> evaluate(const nn::mlp_model& model,
                                   const std::vector<data::dataset_row>& rows);

// Rows -> flat batch matrix + label vector.
std::pair<nn::matrix, std::vector<double>> pack_rows(const std::vector<data::dataset_row>& rows);

} // namespace cvf::train
