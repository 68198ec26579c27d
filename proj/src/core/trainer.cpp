#include "core/trainer.hpp"

#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace cvf::train {

std::vector<std::pair<size_t, size_t>> shard_batch(size_t batch, unsigned workers) {
    if (batch == 0) fail(status_code::config, "cannot shard an empty batch");
    if (workers == 0) fail(status_code::config, "need at least one worker");
    if (workers > batch)
        fail(status_code::config, "worker count " + std::to_string(workers) +
                                      " exceeds the batch size " + std::to_string(batch));
    std::vector<std::pair<size_t, size_t>> shards;
    shards.reserve(workers);
    const size_t base = batch / workers;
    const size_t extra = batch % workers;
    size_t offset = 0;
    for (unsigned w = 0; w < workers; ++w) {
        const size_t len = base + (w < extra ? 1 : 0);
        shards.emplace_back(offset, len);
        offset += len;
    }
    return shards;
}

void single_device_step(nn::mlp_model& model, const nn::matrix& batch,
                        std::span<const double> labels, nn::adam_state& state,
                        uint64_t dropout_seed, double* loss_out) {
    nn::forward_cache cache;
    nn::forward_options opts;
    opts.update_running_stats = false;
    opts.dropout_seed = derive_seed(dropout_seed, 0);
    const std::vector<double> pred = nn::forward_train(model, batch, opts, cache);
    if (loss_out) *loss_out = nn::loss_mse(pred, labels);
    const nn::gradients grads = nn::backward(model, cache, labels);
    nn::adam_step(model, grads, state);
}

struct worker_pool::impl {
    parallel_config cfg;
    unsigned n_workers;
    std::vector<nn::mlp_model> replicas;
    std::vector<nn::adam_state> states;

    std::barrier<> sync;
    std::atomic<bool> stop{false};

    // Published per step by the coordinator.
    const nn::matrix* batch = nullptr;
    const double* labels = nullptr;
    size_t batch_rows = 0;
    std::vector<std::pair<size_t, size_t>> shards;
    uint64_t dropout_seed = 0;
    uint64_t step_no = 0;
    bool apply_update = false;

    std::vector<nn::gradients> worker_grads;
    std::vector<double> worker_loss;
    std::vector<std::exception_ptr> worker_error;
    nn::gradients aggregate;
    bool fault = false;

    std::vector<std::thread> threads;

    impl(const nn::mlp_model& model, double lr, const parallel_config& par)
        : cfg(par),
          n_workers(par.workers),
          sync(static_cast<std::ptrdiff_t>(par.workers) + 1) {
        if (n_workers == 0) fail(status_code::config, "need at least one worker");
        replicas.assign(n_workers, model);
        for (unsigned w = 0; w < n_workers; ++w) states.push_back(nn::init_adam(model, lr));
        worker_grads.resize(n_workers);
        worker_loss.assign(n_workers, 0.0);
        worker_error.assign(n_workers, nullptr);
        for (unsigned w = 0; w < n_workers; ++w)
            threads.emplace_back([this, w] { worker_main(w); });
    }

    void worker_main(unsigned rank) {
        for (;;) {
            sync.arrive_and_wait();  // step published
            if (stop.load()) break;
            worker_error[rank] = nullptr;
            try {
                if (cfg.fault_hook) cfg.fault_hook(rank, step_no);
                compute_shard(rank);
            } catch (...) {
                worker_error[rank] = std::current_exception();
            }
            sync.arrive_and_wait();  // gradients ready
            sync.arrive_and_wait();  // aggregate ready
            if (!fault && apply_update)
                nn::adam_step(replicas[rank], aggregate, states[rank]);
            sync.arrive_and_wait();  // step complete
        }
    }

    void compute_shard(unsigned rank) {
        worker_loss[rank] = 0.0;
        if (rank >= shards.size() || shards[rank].second == 0) {
            worker_grads[rank] = nn::gradients{};
            return;
        }
        const auto [offset, len] = shards[rank];
        nn::matrix shard(len, batch->cols);
        for (size_t r = 0; r < len; ++r) {
            const auto src = batch->row(offset + r);
            std::copy(src.begin(), src.end(), shard.row(r).begin());
        }
        nn::forward_options opts;
        opts.update_running_stats = false;
        opts.dropout_seed = derive_seed(dropout_seed, rank);
        nn::forward_cache cache;
        const std::vector<double> pred = nn::forward_train(replicas[rank], shard, opts, cache);
        const std::span<const double> shard_labels{labels + offset, len};
        worker_loss[rank] = nn::loss_mse(pred, shard_labels);
        worker_grads[rank] = nn::backward(replicas[rank], cache, shard_labels);
    }

    // Runs one synchronized phase: compute, reduce, optionally update.
    double run_step(const nn::matrix& x, std::span<const double> y, uint64_t seed, bool update) {
        if (x.rows == 0) fail(status_code::config, "empty batch");
        if (y.size() != x.rows) fail(status_code::config, "label count mismatch");
        batch = &x;
        labels = y.data();
        batch_rows = x.rows;
        const unsigned effective = static_cast<unsigned>(
            std::min<size_t>(n_workers, batch_rows));
        shards = shard_batch(batch_rows, effective);
        dropout_seed = seed;
        apply_update = update;
        fault = false;
        ++step_no;

        sync.arrive_and_wait();  // release compute
        sync.arrive_and_wait();  // compute done

        for (unsigned w = 0; w < n_workers; ++w) {
            if (worker_error[w]) {
                fault = true;
                break;
            }
        }
        double loss = 0.0;
        if (!fault) {
            // Fixed ascending-rank reduction; shard-size weights make the sum
            // equal the full-batch mean-reduction gradient.
            aggregate = nn::zero_gradients(replicas[0]);
            for (unsigned w = 0; w < shards.size(); ++w) {
                const double weight =
                    static_cast<double>(shards[w].second) / static_cast<double>(batch_rows);
                if (shards[w].second == 0) continue;
                nn::accumulate_scaled(aggregate, worker_grads[w], weight);
                loss += worker_loss[w] * weight;
            }
        }

        sync.arrive_and_wait();  // aggregate ready
        sync.arrive_and_wait();  // update applied

        if (fault) {
            for (unsigned w = 0; w < n_workers; ++w) {
                if (!worker_error[w]) continue;
                try {
                    std::rethrow_exception(worker_error[w]);
                } catch (const std::exception& e) {
                    fail(status_code::failure, "worker " + std::to_string(w) +
                                                   " fault, step aborted without update: " +
                                                   e.what());
                } catch (...) {
                    fail(status_code::failure, "worker " + std::to_string(w) +
                                                   " fault, step aborted without update");
                }
            }
        }
        return loss;
    }

    void shutdown() {
        stop.store(true);
        sync.arrive_and_wait();
        for (auto& t : threads) t.join();
    }
};

worker_pool::worker_pool(const nn::mlp_model& model, double lr, const parallel_config& cfg)
    : impl_(std::make_unique<impl>(model, lr, cfg)) {}

worker_pool::~worker_pool() {
    if (impl_) impl_->shutdown();
}

double worker_pool::step(const nn::matrix& batch, std::span<const double> labels,
                         uint64_t dropout_seed) {
    return impl_->run_step(batch, labels, dropout_seed, true);
}

nn::gradients worker_pool::global_gradient(const nn::matrix& batch,
                                           std::span<const double> labels,
                                           uint64_t dropout_seed) {
    impl_->run_step(batch, labels, dropout_seed, false);
    return impl_->aggregate;
}

const nn::mlp_model& worker_pool::replica(unsigned worker) const {
    if (worker >= impl_->n_workers) fail(status_code::config, "no such worker");
    return impl_->replicas[worker];
}

bool worker_pool::replicas_equal() const {
    for (unsigned w = 1; w < impl_->n_workers; ++w)
        if (!nn::models_equal(impl_->replicas[0], impl_->replicas[w])) return false;
    return true;
}

unsigned worker_pool::workers() const { return impl_->n_workers; }

uint64_t worker_pool::steps_taken() const { return impl_->step_no; }

std::pair<nn::matrix, std::vector<double>> pack_rows(const std::vector<data::dataset_row>& rows) {
    if (rows.empty()) fail(status_code::config, "empty dataset");
    const size_t width = rows.front().features.size();
    nn::matrix x(rows.size(), width);
    std::vector<double> y(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].features.size() != width)
            fail(status_code::config, "inconsistent feature width at row " + std::to_string(r));
        std::copy(rows[r].features.begin(), rows[r].features.end(), x.row(r).begin());
        y[r] = rows[r].label;
    }
    return {std::move(x), std::move(y)};
}

fit_result fit(nn::mlp_model& model, const std::vector<data::dataset_row>& train_rows,
               const std::vector<data::dataset_row>* val_rows, const train_config& cfg,
               const parallel_config& par) {
    if (cfg.epochs == 0) fail(status_code::config, "epochs must be >= 1");
    if (cfg.batch_size == 0) fail(status_code::config, "batch size must be >= 1");
    if (par.workers == 0) fail(status_code::config, "need at least one worker");
    if (par.workers > cfg.batch_size)
        fail(status_code::config, "worker count must not exceed the batch size");
    if (train_rows.empty()) fail(status_code::config, "training set is empty");

    auto [x_all, y_all] = pack_rows(train_rows);
    if (x_all.cols != model.input_width())
        fail(status_code::config, "dataset width " + std::to_string(x_all.cols) +
                                      " does not match model input " +
                                      std::to_string(model.input_width()));

    model.dropout_enabled = cfg.dropout;
    model.batchnorm_enabled = cfg.batchnorm;

    worker_pool pool(model, cfg.lr, par);
    const size_t n = train_rows.size();
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;

    fit_result result;
    uint64_t global_step = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        rng shuffler(derive_seed(cfg.seed, 0xe90cull, epoch));
        shuffler.shuffle(perm);

        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += cfg.batch_size) {
            const size_t len = std::min(cfg.batch_size, n - start);
            nn::matrix xb(len, x_all.cols);
            std::vector<double> yb(len);
            for (size_t r = 0; r < len; ++r) {
                const size_t src = perm[start + r];
                std::copy(x_all.row(src).begin(), x_all.row(src).end(), xb.row(r).begin());
                yb[r] = y_all[src];
            }
            ++global_step;
            const double loss =
                pool.step(xb, yb, derive_seed(cfg.seed, 0x57e9ull, global_step));
            if (!std::isfinite(loss))
                fail(status_code::numeric,
                     "non-finite training loss " + std::to_string(loss) + " at epoch " +
                         std::to_string(epoch + 1) + ", step " + std::to_string(global_step));
            epoch_loss += loss * static_cast<double>(len);
        }
        epoch_loss /= static_cast<double>(n);

        epoch_metrics m;
        m.epoch = epoch + 1;
        m.loss = epoch_loss;
        if (val_rows && !val_rows->empty())
            m.val_mae = evaluate(pool.model(), *val_rows).second;
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                        .count();
        result.history.push_back(m);
        result.final_train_loss = epoch_loss;
    }
    model = pool.model();
    return result;
}

std::pair<double, double> evaluate(const nn::mlp_model& model,
                                   const std::vector<data::dataset_row>& rows) {
    if (rows.empty()) fail(status_code::config, "cannot evaluate an empty set");
    auto [x, y] = pack_rows(rows);
    double sq = 0.0, ab = 0.0;
    constexpr size_t chunk = 4096;
    for (size_t start = 0; start < x.rows; start += chunk) {
        const size_t len = std::min(chunk, x.rows - start);
        nn::matrix xc(len, x.cols);
        std::copy(x.a.begin() + start * x.cols, x.a.begin() + (start + len) * x.cols,
                  xc.a.begin());
        const std::vector<double> pred = nn::predict(model, xc);
        for (size_t r = 0; r < len; ++r) {
            const double d = pred[r] - y[start + r];
            sq += d * d;
            ab += std::abs(d);
        }
    }
    const double denom = static_cast<double>(rows.size());
    return {sq / denom, ab / denom};
}

} // namespace cvf::train
