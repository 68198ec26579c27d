#include "core/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace cvf::nn {

namespace {

uint64_t shape_tag(const mlp_model& model) {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (size_t w : model.widths) h = derive_seed(h, w);
    return h;
}

void validate_widths(std::span<const size_t> widths) {
    if (widths.size() < 2) fail(status_code::config, "need at least input and output widths");
    for (size_t w : widths)
        if (w == 0) fail(status_code::config, "layer widths must be positive");
    if (widths.back() != 1)
        fail(status_code::config, "regression head must have exactly one output");
}

// y[b] = x[b] . w[o] + bias[o]
void affine_forward(const matrix& x, const matrix& w, const std::vector<double>& bias,
                    matrix& y) {
    for (size_t b = 0; b < x.rows; ++b) {
        const double* xb = x.a.data() + b * x.cols;
        double* yb = y.a.data() + b * y.cols;
        for (size_t o = 0; o < w.rows; ++o) {
            const double* wo = w.a.data() + o * w.cols;
            double acc = bias[o];
            for (size_t i = 0; i < w.cols; ++i) acc += xb[i] * wo[i];
            yb[o] = acc;
        }
    }
}

void affine_backward(const matrix& x, const matrix& w, const matrix& dz, matrix& dw,
                     std::vector<double>& db, matrix* dx) {
    for (size_t b = 0; b < x.rows; ++b) {
        const double* xb = x.a.data() + b * x.cols;
        const double* dzb = dz.a.data() + b * dz.cols;
        for (size_t o = 0; o < w.rows; ++o) {
            const double g = dzb[o];
            if (g == 0.0) continue;
            double* dwo = dw.a.data() + o * dw.cols;
            for (size_t i = 0; i < w.cols; ++i) dwo[i] += g * xb[i];
        }
    }
    for (size_t o = 0; o < w.rows; ++o) {
        double acc = 0.0;
        for (size_t b = 0; b < dz.rows; ++b) acc += dz.at(b, o);
        db[o] = acc;
    }
    if (dx) {
        for (size_t b = 0; b < x.rows; ++b) {
            double* dxb = dx->a.data() + b * dx->cols;
            const double* dzb = dz.a.data() + b * dz.cols;
            for (size_t o = 0; o < w.rows; ++o) {
                const double g = dzb[o];
                if (g == 0.0) continue;
                const double* wo = w.a.data() + o * w.cols;
                for (size_t i = 0; i < w.cols; ++i) dxb[i] += g * wo[i];
            }
        }
    }
}

} // namespace

mlp_model init_model(std::span<const size_t> widths, uint64_t seed) {
    validate_widths(widths);
    mlp_model model;
    model.widths.assign(widths.begin(), widths.end());
    rng gen(derive_seed(seed, 0x1417ull));
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        matrix w(widths[l + 1], widths[l]);
        const double scale = std::sqrt(2.0 / static_cast<double>(widths[l]));
        for (double& v : w.a) v = scale * gen.next_normal();
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(widths[l + 1], 0.0);
    }
    if (model.has_batchnorm_slot()) {
        const size_t width = widths[mlp_model::batchnorm_after + 1];
        model.bn_gamma.assign(width, 1.0);
        model.bn_beta.assign(width, 0.0);
        model.bn_run_mean.assign(width, 0.0);
        model.bn_run_var.assign(width, 1.0);
    }
    return model;
}

std::vector<double> forward_train(mlp_model& model, const matrix& input,
                                  const forward_options& opts, forward_cache& cache) {
    if (input.cols != model.input_width())
        fail(status_code::config, "input width " + std::to_string(input.cols) +
                                      " does not match model input " +
                                      std::to_string(model.input_width()));
    if (input.rows == 0) fail(status_code::config, "empty batch");

    const size_t n_layers = model.weights.size();
    cache = forward_cache{};
    cache.input = input;
    cache.batch = input.rows;
    cache.model_tag = shape_tag(model);
    cache.pre_act.resize(n_layers);
    cache.post_act.resize(n_layers);

    const matrix* prev = &input;
    for (size_t l = 0; l < n_layers; ++l) {
        matrix z(input.rows, model.widths[l + 1]);
        affine_forward(*prev, model.weights[l], model.biases[l], z);
        cache.pre_act[l] = z;
        if (l + 1 == n_layers) {
            cache.post_act[l] = std::move(z);
            break;
        }
        matrix act = std::move(z);
        for (double& v : act.a) v = v > 0.0 ? v : 0.0;

        if (l == mlp_model::dropout_after && model.dropout_enabled && model.dropout_rate > 0.0) {
            const double keep = 1.0 - model.dropout_rate;
            rng gen(derive_seed(opts.dropout_seed, 0xd307ull));
            cache.dropout_mask = matrix(act.rows, act.cols);
            for (size_t i = 0; i < act.a.size(); ++i) {
                const double m = gen.next_double() < keep ? 1.0 / keep : 0.0;
                cache.dropout_mask.a[i] = m;
                act.a[i] *= m;
            }
            cache.dropout_used = true;
        }

        if (l == mlp_model::batchnorm_after && model.has_batchnorm_slot() &&
            model.batchnorm_enabled) {
            const size_t width = act.cols;
            if (act.rows >= 2) {
                cache.bn_mean.assign(width, 0.0);
                cache.bn_var.assign(width, 0.0);
                const double inv_b = 1.0 / static_cast<double>(act.rows);
                for (size_t b = 0; b < act.rows; ++b)
                    for (size_t f = 0; f < width; ++f) cache.bn_mean[f] += act.at(b, f);
                for (double& v : cache.bn_mean) v *= inv_b;
                for (size_t b = 0; b < act.rows; ++b)
                    for (size_t f = 0; f < width; ++f) {
                        const double d = act.at(b, f) - cache.bn_mean[f];
                        cache.bn_var[f] += d * d;
                    }
                for (double& v : cache.bn_var) v *= inv_b;
                cache.bn_xhat = matrix(act.rows, width);
                for (size_t b = 0; b < act.rows; ++b)
                    for (size_t f = 0; f < width; ++f) {
                        const double xhat = (act.at(b, f) - cache.bn_mean[f]) /
                                            std::sqrt(cache.bn_var[f] + model.bn_eps);
                        cache.bn_xhat.at(b, f) = xhat;
                        act.at(b, f) = model.bn_gamma[f] * xhat + model.bn_beta[f];
                    }
                cache.bn_used = true;
                if (opts.update_running_stats) {
                    for (size_t f = 0; f < width; ++f) {
                        model.bn_run_mean[f] = model.bn_momentum * model.bn_run_mean[f] +
                                               (1.0 - model.bn_momentum) * cache.bn_mean[f];
                        model.bn_run_var[f] = model.bn_momentum * model.bn_run_var[f] +
                                              (1.0 - model.bn_momentum) * cache.bn_var[f];
                    }
                    cache.bn_stats_applied = true;
                }
            } else {
                // Batches of one normalize with the running statistics.
                cache.bn_xhat = matrix(act.rows, width);
                for (size_t f = 0; f < width; ++f) {
                    const double xhat = (act.at(0, f) - model.bn_run_mean[f]) /
                                        std::sqrt(model.bn_run_var[f] + model.bn_eps);
                    cache.bn_xhat.at(0, f) = xhat;
                    act.at(0, f) = model.bn_gamma[f] * xhat + model.bn_beta[f];
                }
                cache.bn_running_used = true;
            }
        }
        cache.post_act[l] = std::move(act);
        prev = &cache.post_act[l];
    }

    const matrix& out = cache.post_act[n_layers - 1];
    std::vector<double> pred(out.rows);
    for (size_t b = 0; b < out.rows; ++b) pred[b] = out.at(b, 0);
    return pred;
}

std::vector<double> predict(const mlp_model& model, const matrix& input) {
    if (input.cols != model.input_width())
        fail(status_code::config, "input width " + std::to_string(input.cols) +
                                      " does not match model input " +
                                      std::to_string(model.input_width()));
    const size_t n_layers = model.weights.size();
    matrix cur = input;
    for (size_t l = 0; l < n_layers; ++l) {
        matrix z(cur.rows, model.widths[l + 1]);
        affine_forward(cur, model.weights[l], model.biases[l], z);
        if (l + 1 == n_layers) {
            cur = std::move(z);
            break;
        }
        for (double& v : z.a) v = v > 0.0 ? v : 0.0;
        if (l == mlp_model::batchnorm_after && model.has_batchnorm_slot() &&
            model.batchnorm_enabled) {
            for (size_t b = 0; b < z.rows; ++b)
                for (size_t f = 0; f < z.cols; ++f)
                    z.at(b, f) = model.bn_gamma[f] * (z.at(b, f) - model.bn_run_mean[f]) /
                                     std::sqrt(model.bn_run_var[f] + model.bn_eps) +
                                 model.bn_beta[f];
        }
        cur = std::move(z);
    }
    std::vector<double> pred(cur.rows);
    for (size_t b = 0; b < cur.rows; ++b) pred[b] = cur.at(b, 0);
    return pred;
}

double loss_mse(std::span<const double> pred, std::span<const double> labels) {
    if (pred.size() != labels.size()) fail(status_code::config, "prediction/label length mismatch");
    if (pred.empty()) fail(status_code::config, "empty batch");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - labels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double metric_mae(std::span<const double> pred, std::span<const double> labels) {
    if (pred.size() != labels.size()) fail(status_code::config, "prediction/label length mismatch");
    if (pred.empty()) fail(status_code::config, "empty batch");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - labels[i]);
    return acc / static_cast<double>(pred.size());
}

gradients zero_gradients(const mlp_model& model) {
    gradients g;
    for (const matrix& w : model.weights) g.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
    if (model.has_batchnorm_slot()) {
        g.bn_gamma.assign(model.bn_gamma.size(), 0.0);
        g.bn_beta.assign(model.bn_beta.size(), 0.0);
        g.bn_batch_mean.assign(model.bn_gamma.size(), 0.0);
        g.bn_batch_var.assign(model.bn_gamma.size(), 0.0);
    }
    return g;
}

gradients backward(const mlp_model& model, const forward_cache& cache,
                   std::span<const double> labels) {
    if (cache.model_tag != shape_tag(model) || cache.batch == 0)
        fail(status_code::config, "forward cache does not belong to this model");
    if (labels.size() != cache.batch)
        fail(status_code::config, "label count does not match the cached batch");

    const size_t n_layers = model.weights.size();
    const size_t batch = cache.batch;
    gradients grads = zero_gradients(model);

    // d(mean squared error)/d(prediction) = 2 * residual / batch
    matrix dz(batch, 1);
    const matrix& out = cache.post_act[n_layers - 1];
    for (size_t b = 0; b < batch; ++b)
        dz.at(b, 0) = 2.0 * (out.at(b, 0) - labels[b]) / static_cast<double>(batch);

    for (size_t l = n_layers; l-- > 0;) {
        const matrix& layer_in = l == 0 ? cache.input : cache.post_act[l - 1];
        matrix dprev(layer_in.rows, layer_in.cols);
        affine_backward(layer_in, model.weights[l], dz, grads.weights[l], grads.biases[l],
                        l == 0 ? nullptr : &dprev);
        if (l == 0) break;

        // dprev is the gradient w.r.t. post_act[l-1]; undo batchnorm, dropout
        // and the rectifier of the hidden layer l-1, in reverse order.
        const size_t h = l - 1;
        if (h == mlp_model::batchnorm_after && (cache.bn_used || cache.bn_running_used)) {
            const size_t width = dprev.cols;
            if (cache.bn_used) {
                std::vector<double> mean_dxhat(width, 0.0), mean_dxhat_xhat(width, 0.0);
                for (size_t b = 0; b < batch; ++b)
                    for (size_t f = 0; f < width; ++f) {
                        const double dxhat = dprev.at(b, f) * model.bn_gamma[f];
                        grads.bn_gamma[f] += dprev.at(b, f) * cache.bn_xhat.at(b, f);
                        grads.bn_beta[f] += dprev.at(b, f);
                        mean_dxhat[f] += dxhat;
                        mean_dxhat_xhat[f] += dxhat * cache.bn_xhat.at(b, f);
                    }
                const double inv_b = 1.0 / static_cast<double>(batch);
                for (size_t f = 0; f < width; ++f) {
                    mean_dxhat[f] *= inv_b;
                    mean_dxhat_xhat[f] *= inv_b;
                }
                for (size_t b = 0; b < batch; ++b)
                    for (size_t f = 0; f < width; ++f) {
                        const double dxhat = dprev.at(b, f) * model.bn_gamma[f];
                        dprev.at(b, f) = (dxhat - mean_dxhat[f] -
                                          cache.bn_xhat.at(b, f) * mean_dxhat_xhat[f]) /
                                         std::sqrt(cache.bn_var[f] + model.bn_eps);
                    }
                grads.bn_batch_mean = cache.bn_mean;
                grads.bn_batch_var = cache.bn_var;
                grads.bn_stats_valid = !cache.bn_stats_applied;
                grads.bn_stats_weight = grads.bn_stats_valid ? 1.0 : 0.0;
            } else {
                // Running-stats normalization is an affine map with constants.
                for (size_t f = 0; f < width; ++f) {
                    const double inv_sd = 1.0 / std::sqrt(model.bn_run_var[f] + model.bn_eps);
                    for (size_t b = 0; b < batch; ++b) {
                        grads.bn_gamma[f] += dprev.at(b, f) * cache.bn_xhat.at(b, f);
                        grads.bn_beta[f] += dprev.at(b, f);
                        dprev.at(b, f) *= model.bn_gamma[f] * inv_sd;
                    }
                }
            }
        }
        if (h == mlp_model::dropout_after && cache.dropout_used) {
            for (size_t i = 0; i < dprev.a.size(); ++i) dprev.a[i] *= cache.dropout_mask.a[i];
        }
        const matrix& z = cache.pre_act[h];
        for (size_t i = 0; i < dprev.a.size(); ++i)
            if (z.a[i] <= 0.0) dprev.a[i] = 0.0;
        dz = std::move(dprev);
    }
    grads.batch = batch;
    return grads;
}

void accumulate_scaled(gradients& acc, const gradients& g, double weight) {
    for (size_t l = 0; l < acc.weights.size(); ++l) {
        for (size_t i = 0; i < acc.weights[l].a.size(); ++i)
            acc.weights[l].a[i] += weight * g.weights[l].a[i];
        for (size_t i = 0; i < acc.biases[l].size(); ++i)
            acc.biases[l][i] += weight * g.biases[l][i];
    }
    for (size_t i = 0; i < acc.bn_gamma.size(); ++i) acc.bn_gamma[i] += weight * g.bn_gamma[i];
    for (size_t i = 0; i < acc.bn_beta.size(); ++i) acc.bn_beta[i] += weight * g.bn_beta[i];
    if (g.bn_stats_valid) {
        for (size_t i = 0; i < acc.bn_batch_mean.size(); ++i) {
            acc.bn_batch_mean[i] += weight * g.bn_batch_mean[i];
            acc.bn_batch_var[i] += weight * g.bn_batch_var[i];
        }
        acc.bn_stats_valid = true;
        acc.bn_stats_weight += weight * g.bn_stats_weight;
    }
}

adam_state init_adam(const mlp_model& model, double lr) {
    adam_state s;
    s.lr = lr;
    for (const matrix& w : model.weights) {
        s.m_w.emplace_back(w.rows, w.cols);
        s.v_w.emplace_back(w.rows, w.cols);
    }
    for (const auto& b : model.biases) {
        s.m_b.emplace_back(b.size(), 0.0);
        s.v_b.emplace_back(b.size(), 0.0);
    }
    if (model.has_batchnorm_slot()) {
        s.m_gamma.assign(model.bn_gamma.size(), 0.0);
        s.v_gamma.assign(model.bn_gamma.size(), 0.0);
        s.m_beta.assign(model.bn_beta.size(), 0.0);
        s.v_beta.assign(model.bn_beta.size(), 0.0);
    }
    return s;
}

namespace {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const adam_state& s, double bias1, double bias2) {
    for (size_t i = 0; i < param.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        param[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

} // namespace

void adam_step(mlp_model& model, const gradients& grads, adam_state& state) {
    if (grads.weights.size() != model.weights.size())
        fail(status_code::config, "gradient bundle does not match the model");
    ++state.t;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t l = 0; l < model.weights.size(); ++l) {
        adam_update(model.weights[l].a, grads.weights[l].a, state.m_w[l].a, state.v_w[l].a, state,
                    bias1, bias2);
        adam_update(model.biases[l], grads.biases[l], state.m_b[l], state.v_b[l], state, bias1,
                    bias2);
    }
    if (model.has_batchnorm_slot() && !grads.bn_gamma.empty()) {
        adam_update(model.bn_gamma, grads.bn_gamma, state.m_gamma, state.v_gamma, state, bias1,
                    bias2);
        adam_update(model.bn_beta, grads.bn_beta, state.m_beta, state.v_beta, state, bias1, bias2);
    }
    if (grads.bn_stats_valid && grads.bn_stats_weight > 0.0 && model.batchnorm_enabled &&
        model.has_batchnorm_slot()) {
        const double inv_w = 1.0 / grads.bn_stats_weight;
        for (size_t f = 0; f < model.bn_run_mean.size(); ++f) {
            model.bn_run_mean[f] = model.bn_momentum * model.bn_run_mean[f] +
                                   (1.0 - model.bn_momentum) * grads.bn_batch_mean[f] * inv_w;
            model.bn_run_var[f] = model.bn_momentum * model.bn_run_var[f] +
                                  (1.0 - model.bn_momentum) * grads.bn_batch_var[f] * inv_w;
        }
    }
}

bool models_equal(const mlp_model& a, const mlp_model& b) {
    if (a.widths != b.widths || a.dropout_rate != b.dropout_rate ||
        a.dropout_enabled != b.dropout_enabled || a.batchnorm_enabled != b.batchnorm_enabled ||
        a.target != b.target)
        return false;
    for (size_t l = 0; l < a.weights.size(); ++l)
        if (a.weights[l].a != b.weights[l].a || a.biases[l] != b.biases[l]) return false;
    return a.bn_gamma == b.bn_gamma && a.bn_beta == b.bn_beta &&
           a.bn_run_mean == b.bn_run_mean && a.bn_run_var == b.bn_run_var;
}

void save_model(const mlp_model& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(status_code::failure, "cannot write " + path.string());
    out << "cvfmlp v1\n";
    out << "widths";
    for (size_t w : model.widths) out << ' ' << w;
    out << '\n';
    out << "target " << model.target << '\n';
    out << "dropout_rate " << csv::format_double(model.dropout_rate) << '\n';
    out << "dropout_enabled " << (model.dropout_enabled ? 1 : 0) << '\n';
    out << "batchnorm_enabled " << (model.batchnorm_enabled ? 1 : 0) << '\n';
    out << "bn_eps " << csv::format_double(model.bn_eps) << '\n';
    out << "bn_momentum " << csv::format_double(model.bn_momentum) << '\n';
    auto emit_vec = [&](const char* tag, const std::vector<double>& v) {
        out << tag << ' ' << v.size() << '\n';
        for (size_t i = 0; i < v.size(); ++i)
            out << csv::format_double(v[i]) << (i + 1 == v.size() ? '\n' : ' ');
        if (v.empty()) out << '\n';
    };
    for (size_t l = 0; l < model.weights.size(); ++l) {
        const matrix& w = model.weights[l];
        out << "weights " << l << ' ' << w.rows << ' ' << w.cols << '\n';
        for (size_t r = 0; r < w.rows; ++r) {
            for (size_t c = 0; c < w.cols; ++c)
                out << csv::format_double(w.at(r, c)) << (c + 1 == w.cols ? '\n' : ' ');
        }
        emit_vec("biases", model.biases[l]);
    }
    emit_vec("bn_gamma", model.bn_gamma);
    emit_vec("bn_beta", model.bn_beta);
    emit_vec("bn_run_mean", model.bn_run_mean);
    emit_vec("bn_run_var", model.bn_run_var);
    out << "end\n";
    if (!out) fail(status_code::failure, "write failed for " + path.string());
}

namespace {

[[noreturn]] void load_fail(const std::filesystem::path& path, const std::string& what) {
    fail(status_code::failure, path.string() + ": " + what);
}

} // namespace

mlp_model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(status_code::failure, "cannot open " + path.string());
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "cvfmlp")
        load_fail(path, "not a cvfmlp model file");
    if (version != "v1") load_fail(path, "unsupported model file version '" + version + "'");

    mlp_model model;
    std::string tag;
    if (!(in >> tag) || tag != "widths") load_fail(path, "expected widths");
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream ws(rest);
        size_t w;
        while (ws >> w) model.widths.push_back(w);
    }
    validate_widths(model.widths);

    auto expect_tag = [&](const char* want) {
        if (!(in >> tag) || tag != want)
            load_fail(path, std::string("expected '") + want + "', got '" + tag + "'");
    };
    auto read_double = [&](const char* want) {
        expect_tag(want);
        double v;
        if (!(in >> v)) load_fail(path, std::string("truncated value for ") + want);
        return v;
    };
    expect_tag("target");
    if (!(in >> model.target) || (model.target != "ar" && model.target != "m"))
        load_fail(path, "bad target field");
    model.dropout_rate = read_double("dropout_rate");
    model.dropout_enabled = read_double("dropout_enabled") != 0.0;
    model.batchnorm_enabled = read_double("batchnorm_enabled") != 0.0;
    model.bn_eps = read_double("bn_eps");
    model.bn_momentum = read_double("bn_momentum");

    auto read_vec = [&](const char* want, std::vector<double>& v) {
        expect_tag(want);
        size_t n;
        if (!(in >> n)) load_fail(path, std::string("truncated size for ") + want);
        v.resize(n);
        for (size_t i = 0; i < n; ++i)
            if (!(in >> v[i])) load_fail(path, std::string("truncated data in ") + want);
    };
    for (size_t l = 0; l + 1 < model.widths.size(); ++l) {
        expect_tag("weights");
        size_t idx, rows, cols;
        if (!(in >> idx >> rows >> cols) || idx != l || rows != model.widths[l + 1] ||
            cols != model.widths[l])
            load_fail(path, "weight shape mismatch at layer " + std::to_string(l));
        matrix w(rows, cols);
        for (double& v : w.a)
            if (!(in >> v)) load_fail(path, "truncated weights at layer " + std::to_string(l));
        model.weights.push_back(std::move(w));
        std::vector<double> b;
        read_vec("biases", b);
        if (b.size() != rows) load_fail(path, "bias shape mismatch at layer " + std::to_string(l));
        model.biases.push_back(std::move(b));
    }
    read_vec("bn_gamma", model.bn_gamma);
    read_vec("bn_beta", model.bn_beta);
    read_vec("bn_run_mean", model.bn_run_mean);
    read_vec("bn_run_var", model.bn_run_var);
    if (model.has_batchnorm_slot()) {
        const size_t width = model.widths[mlp_model::batchnorm_after + 1];
        if (model.bn_gamma.size() != width || model.bn_run_var.size() != width)
            load_fail(path, "batch-norm parameter shape mismatch");
    }
    expect_tag("end");
    return model;
}

} // namespace cvf::nn
