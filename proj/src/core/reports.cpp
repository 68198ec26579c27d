#include "core/reports.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "core/csv.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/nn.hpp"
#include "core/rng.hpp"
#include "core/svg.hpp"
#include "core/trainer.hpp"

namespace cvf::reports {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const fs::path& path, const std::string& command, const json& flags,
                    const std::vector<std::string>& outputs) {
    json m;
    m["tool"] = "cvf";
    m["version"] = tool_version;
    m["command"] = command;
    m["timestamp"] = timestamp_utc();
    m["flags"] = flags;
    m["outputs"] = outputs;
    std::ofstream out(path);
    if (!out) fail(status_code::failure, "cannot write " + path.string());
    out << m.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(status_code::failure, "cannot write " + path.string());
    out << text;
    if (!out) fail(status_code::failure, "write failed for " + path.string());
}

std::map<int64_t, double> to_double_bins(const std::map<int64_t, uint64_t>& bins) {
    std::map<int64_t, double> out;
    for (const auto& [k, v] : bins) out[k] = static_cast<double>(v);
    return out;
}

const char* metric_name(rank::metric m) {
    return m == rank::metric::avg_ceil ? "ar" : "m";
}

const char* metric_label(rank::metric m) {
    return m == rank::metric::avg_ceil ? "Ar" : "M";
}

} // namespace

std::vector<uint32_t> parse_nodes_spec(const std::string& spec) {
    std::vector<uint32_t> nodes;
    const auto parse_one = [&](const std::string& tok) -> uint32_t {
        size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(tok, &used);
        } catch (...) {
            used = 0;
        }
        if (used != tok.size() || v < 2 || v > 64)
            fail(status_code::config, "bad node count '" + tok + "' in --nodes");
        return static_cast<uint32_t>(v);
    };
    const size_t dots = spec.find("..");
    if (dots != std::string::npos) {
        const uint32_t lo = parse_one(spec.substr(0, dots));
        const uint32_t hi = parse_one(spec.substr(dots + 2));
        if (hi < lo) fail(status_code::config, "descending range in --nodes: " + spec);
        for (uint32_t n = lo; n <= hi; ++n) nodes.push_back(n);
        return nodes;
    }
    size_t start = 0;
    while (start <= spec.size()) {
        const size_t comma = spec.find(',', start);
        const std::string tok =
            spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        nodes.push_back(parse_one(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (!std::is_sorted(nodes.begin(), nodes.end()))
        fail(status_code::config, "--nodes values must be ascending: " + spec);
    return nodes;
}

rank::metric parse_metric(const std::string& name) {
    if (name == "ar") return rank::metric::avg_ceil;
    if (name == "m") return rank::metric::max_adjust;
    fail(status_code::config, "unknown metric '" + name + "' (expected ar or m)");
}

void run_analyze(const analyze_options& opts) {
    if (opts.n_nodes == 0) fail(status_code::config, "--nodes is required");
    if (opts.out_dir.empty()) fail(status_code::config, "--out is required");
    const uint32_t k = opts.k_domain == 0 ? opts.n_nodes : opts.k_domain;
    const ring::system_params params{opts.n_nodes, k};
    ring::validate_params(params);
    if (k < opts.n_nodes && !opts.allow_small_k)
        fail(status_code::config,
             "K < N is not guaranteed to self-stabilize; pass --allow-small-k to attempt it");
    const uint64_t budget = opts.state_budget ? opts.state_budget : default_state_budget;
    const uint64_t total = ring::state_count(params, budget);

    const rank::transition_graph graph = rank::build_transition_graph(params, budget);
    const std::vector<uint8_t> mask = rank::invariant_mask(params, budget);
    const rank::rank_table table = rank::compute_ranks(graph, mask);

    fs::create_directories(opts.out_dir);
    const fs::path dir(opts.out_dir);

    {
        csv::table t;
        t.header = {"index", "config", "L", "C", "A", "Ar", "M"};
        std::vector<std::string> cells;
        ring::for_each_state(params, [&](uint64_t index, const ring::config_values& values) {
            const rank::rank_record& rec = table.records[index];
            std::string cfg;
            for (size_t i = 0; i < values.size(); ++i) {
                if (i) cfg += ' ';
                cfg += std::to_string(values[i]);
            }
            t.rows.push_back({std::to_string(index), std::move(cfg), rec.total_len.str(),
                              rec.path_count.str(), rec.avg_string(),
                              std::to_string(rec.avg_ceil), std::to_string(rec.max_adjust)});
        }, budget);
        csv::write(dir / "states.csv", t);
    }

    const auto counts = rank::rank_count_histogram(table, opts.metric);
    csv::write_histogram(dir / "rank_counts.csv", "rank", "count", counts);

    rank::effect_histogram program_hist;
    rank::program_rank_effects(graph, table, [&](const rank::effect_sample& s) {
        program_hist.add(rank::sample_effect(s, opts.metric));
    });
    csv::write_histogram(dir / "effect_program.csv", "effect", "count", program_hist.bins);

    rank::effect_histogram cvf_in, cvf_out;
    rank::cvf_rank_effects(table, params, rank::cvf_direction::in,
                           [&](const rank::effect_sample& s) {
                               cvf_in.add(rank::sample_effect(s, opts.metric));
                           });
    rank::cvf_rank_effects(table, params, rank::cvf_direction::out,
                           [&](const rank::effect_sample& s) {
                               cvf_out.add(rank::sample_effect(s, opts.metric));
                           });
    csv::write_histogram(dir / "effect_cvf_in.csv", "effect", "count", cvf_in.bins);
    csv::write_histogram(dir / "effect_cvf_out.csv", "effect", "count", cvf_out.bins);

    const std::string ml = metric_label(opts.metric);
    write_text(dir / "rank_counts.svg",
               svg::bar_chart("Rank (" + ml + ") vs. state count", "rank " + ml, "states",
                              {{"states", to_double_bins(counts)}}));
    write_text(dir / "effect_program.svg",
               svg::bar_chart("Program transition rank effect (" + ml + ")", "effect " + ml,
                              "transitions", {{"program", to_double_bins(program_hist.bins)}}));
    write_text(dir / "effect_cvf_in.svg",
               svg::bar_chart("CVF in rank effect (" + ml + ")", "effect " + ml, "events",
                              {{"cvf in", to_double_bins(cvf_in.bins)}}));
    write_text(dir / "effect_cvf_out.svg",
               svg::bar_chart("CVF out rank effect (" + ml + ")", "effect " + ml, "events",
                              {{"cvf out", to_double_bins(cvf_out.bins)}}));

    json flags;
    flags["nodes"] = std::to_string(opts.n_nodes);
    flags["k"] = std::to_string(k);
    flags["metric"] = metric_name(opts.metric);
    flags["out"] = opts.out_dir;
    if (opts.allow_small_k) flags["allow-small-k"] = "true";
    if (opts.state_budget) flags["budget"] = std::to_string(opts.state_budget);
    write_manifest(dir / "manifest.json", "analyze", flags,
                   {"states.csv", "rank_counts.csv", "effect_program.csv", "effect_cvf_in.csv",
                    "effect_cvf_out.csv", "rank_counts.svg", "effect_program.svg",
                    "effect_cvf_in.svg", "effect_cvf_out.svg"});

    std::cout << "analyze: N=" << opts.n_nodes << " K=" << k << " states=" << total
              << " invariant=" << table.invariant_count << " edges=" << graph.edge_count()
              << " -> " << opts.out_dir << "\n";
}

void run_dataset(const dataset_options& opts) {
    if (opts.nodes.empty()) fail(status_code::config, "--nodes is required");
    if (opts.out_dir.empty()) fail(status_code::config, "--out is required");

    data::dataset_spec spec;
    spec.node_range = parse_nodes_spec(opts.nodes);
    spec.input_neurons = opts.input_neurons;
    spec.target = parse_metric(opts.target);
    spec.pad_value = opts.pad_value;
    spec.seed = opts.seed;

    const size_t colon = opts.split.find(':');
    const std::string mode = opts.split.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : opts.split.substr(colon + 1);
    if (mode == "random") {
        spec.mode = data::dataset_spec::split_mode::random_fraction;
        if (!arg.empty()) {
            try {
                spec.split_ratio = std::stod(arg);
            } catch (...) {
                fail(status_code::config, "bad split ratio '" + arg + "'");
            }
        }
    } else if (mode == "holdout") {
        spec.mode = data::dataset_spec::split_mode::holdout_nodes;
        if (arg.empty()) fail(status_code::config, "holdout split needs N values, e.g. holdout:7");
        spec.holdout = parse_nodes_spec(arg);
    } else {
        fail(status_code::config, "unknown split mode '" + mode + "' (random:R or holdout:N)");
    }
    data::validate_spec(spec);

    const uint64_t budget = opts.state_budget ? opts.state_budget : default_state_budget;
    std::vector<rank::rank_table> tables;
    for (uint32_t n : spec.node_range) {
        const ring::system_params params{n, spec.k_for(n)};
        const rank::transition_graph graph = rank::build_transition_graph(params, budget);
        tables.push_back(rank::compute_ranks(graph, rank::invariant_mask(params, budget)));
    }

    const std::vector<data::dataset_row> rows = data::build_rows(spec, tables);
    const auto [train_rows, test_rows] = data::split(rows, spec);

    fs::create_directories(opts.out_dir);
    const fs::path dir(opts.out_dir);
    data::write_csv(train_rows, dir / "train.csv");
    data::write_csv(test_rows, dir / "test.csv");

    json flags;
    flags["nodes"] = opts.nodes;
    flags["input-neurons"] = std::to_string(opts.input_neurons);
    flags["target"] = opts.target;
    flags["split"] = opts.split;
    flags["seed"] = std::to_string(opts.seed);
    flags["pad"] = csv::format_double(opts.pad_value);
    flags["out"] = opts.out_dir;
    if (opts.state_budget) flags["budget"] = std::to_string(opts.state_budget);
    write_manifest(dir / "manifest.json", "dataset", flags, {"train.csv", "test.csv"});

    std::cout << "dataset: " << rows.size() << " rows -> train=" << train_rows.size()
              << " test=" << test_rows.size() << " in " << opts.out_dir << "\n";
}

resolved_train_settings resolve_train_settings(const train_options& opts) {
    resolved_train_settings r{300, 32, 0.001};
    if (opts.preset == "mirrored") {
        r.epochs = 200;
        r.batch = 64;
    } else if (!opts.preset.empty() && opts.preset != "fnn") {
        fail(status_code::config, "unknown preset '" + opts.preset + "' (fnn or mirrored)");
    }
    if (opts.epochs) r.epochs = opts.epochs;
    if (opts.batch) r.batch = opts.batch;
    if (opts.lr != 0.0) r.lr = opts.lr;
    return r;
}

void run_train(const train_options& opts) {
    if (opts.data_dir.empty()) fail(status_code::config, "--data is required");
    if (opts.model_out.empty()) fail(status_code::config, "--model is required");
    const resolved_train_settings settings = resolve_train_settings(opts);

    const fs::path dir(opts.data_dir);
    std::vector<data::dataset_row> train_rows = data::read_csv(dir / "train.csv");
    std::vector<data::dataset_row> test_rows;
    if (fs::exists(dir / "test.csv")) test_rows = data::read_csv(dir / "test.csv");

    std::string target = "ar";
    if (fs::exists(dir / "manifest.json")) {
        std::ifstream mf(dir / "manifest.json");
        json m = json::parse(mf, nullptr, false);
        if (!m.is_discarded() && m.contains("flags") && m["flags"].contains("target"))
            target = m["flags"]["target"].get<std::string>();
    }

    if (opts.val_sample > 0 && test_rows.size() > opts.val_sample) {
        std::vector<size_t> idx(test_rows.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng gen(derive_seed(opts.seed, 0x7a1ull));
        gen.shuffle(idx);
        idx.resize(opts.val_sample);
        std::sort(idx.begin(), idx.end());
        std::vector<data::dataset_row> sampled;
        sampled.reserve(idx.size());
        for (size_t i : idx) sampled.push_back(std::move(test_rows[i]));
        test_rows = std::move(sampled);
    }

    const size_t width = train_rows.front().features.size();
    nn::mlp_model model =
        nn::init_model(std::vector<size_t>{width, 128, 64, 64, 1}, opts.seed);
    model.target = target;

    train::train_config cfg;
    cfg.epochs = settings.epochs;
    cfg.batch_size = settings.batch;
    cfg.lr = settings.lr;
    cfg.seed = opts.seed;
    cfg.dropout = !opts.no_dropout;
    cfg.batchnorm = !opts.no_batchnorm;
    train::parallel_config par;
    par.workers = opts.workers;

    const train::fit_result result =
        train::fit(model, train_rows, test_rows.empty() ? nullptr : &test_rows, cfg, par);

    nn::save_model(model, opts.model_out);
    {
        csv::table metrics;
        metrics.header = {"epoch", "loss", "val_mae"};
        csv::table timings;
        timings.header = {"epoch", "seconds"};
        for (const auto& m : result.history) {
            metrics.rows.push_back({std::to_string(m.epoch), csv::format_double(m.loss),
                                    m.val_mae ? csv::format_double(*m.val_mae) : ""});
            timings.rows.push_back({std::to_string(m.epoch), csv::format_double(m.seconds)});
        }
        csv::write(fs::path(opts.model_out + ".metrics.csv"), metrics);
        csv::write(fs::path(opts.model_out + ".timings.csv"), timings);
    }

    const auto [mse, mae] =
        train::evaluate(model, test_rows.empty() ? train_rows : test_rows);

    json flags;
    flags["data"] = opts.data_dir;
    flags["model"] = opts.model_out;
    if (!opts.preset.empty()) flags["preset"] = opts.preset;
    flags["epochs"] = std::to_string(settings.epochs);
    flags["batch"] = std::to_string(settings.batch);
    flags["lr"] = csv::format_double(settings.lr);
    flags["workers"] = std::to_string(opts.workers);
    flags["seed"] = std::to_string(opts.seed);
    if (opts.no_dropout) flags["no-dropout"] = "true";
    if (opts.no_batchnorm) flags["no-batchnorm"] = "true";
    if (opts.val_sample) flags["val-sample"] = std::to_string(opts.val_sample);
    write_manifest(fs::path(opts.model_out + ".manifest.json"), "train", flags,
                   {opts.model_out, opts.model_out + ".metrics.csv",
                    opts.model_out + ".timings.csv"});

    std::printf("train: epochs=%zu batch=%zu lr=%s workers=%u final %s mse=%.6f mae=%.6f\n",
                static_cast<size_t>(settings.epochs), static_cast<size_t>(settings.batch),
                csv::format_double(settings.lr).c_str(), opts.workers,
                test_rows.empty() ? "train" : "test", mse, mae);
}

void run_predict(const predict_options& opts) {
    if (opts.model_path.empty()) fail(status_code::config, "--model is required");
    if (opts.n_nodes == 0) fail(status_code::config, "--nodes is required");
    if (opts.out_dir.empty()) fail(status_code::config, "--out is required");

    const nn::mlp_model model = nn::load_model(opts.model_path);
    const uint32_t k = opts.k_domain == 0 ? opts.n_nodes : opts.k_domain;
    const ring::system_params params{opts.n_nodes, k};
    ring::validate_params(params);
    if (model.input_width() < opts.n_nodes + 1)
        fail(status_code::config, "model input width " + std::to_string(model.input_width()) +
                                      " cannot hold N=" + std::to_string(opts.n_nodes) +
                                      " (need at least N+1 slots)");
    const uint64_t budget = opts.state_budget ? opts.state_budget : default_state_budget;
    const uint64_t total = ring::state_count(params, budget);

    fs::create_directories(opts.out_dir);
    const fs::path dir(opts.out_dir);

    const size_t width = model.input_width();
    std::map<int64_t, uint64_t> predicted_counts;
    {
        csv::table t;
        t.header = {"index", "predicted", "predicted_rounded"};
        constexpr uint64_t chunk = 8192;
        nn::matrix xc;
        std::vector<uint64_t> indices;
        auto flush = [&]() {
            if (xc.rows == 0) return;
            const std::vector<double> pred = nn::predict(model, xc);
            for (size_t r = 0; r < pred.size(); ++r) {
                const int64_t rounded =
                    std::max<int64_t>(0, static_cast<int64_t>(std::llround(pred[r])));
                ++predicted_counts[rounded];
                t.rows.push_back({std::to_string(indices[r]), csv::format_double(pred[r]),
                                  std::to_string(rounded)});
            }
            xc = nn::matrix();
            indices.clear();
        };
        uint64_t filled = 0;
        ring::for_each_state(params, [&](uint64_t index, const ring::config_values& values) {
            if (xc.rows == 0) {
                xc = nn::matrix(static_cast<size_t>(std::min<uint64_t>(chunk, total - index)),
                                width);
                filled = 0;
            }
            auto row = xc.row(filled);
            std::fill(row.begin(), row.end(), 0.0);
            for (uint32_t i = 0; i < opts.n_nodes; ++i) row[i] = values[i];
            row[opts.n_nodes] = opts.n_nodes;
            indices.push_back(index);
            if (++filled == xc.rows) flush();
        }, budget);
        flush();
        csv::write(dir / "predictions.csv", t);
    }
    csv::write_histogram(dir / "pred_rank_counts.csv", "rank", "count", predicted_counts);

    // Exact comparison when the ring is analyzable at this size.
    bool exact_written = false;
    if (k >= opts.n_nodes) {
        const rank::transition_graph graph = rank::build_transition_graph(params, budget);
        const rank::rank_table table =
            rank::compute_ranks(graph, rank::invariant_mask(params, budget));
        const auto exact_counts =
            rank::rank_count_histogram(table, parse_metric(model.target));
        csv::write_histogram(dir / "exact_rank_counts.csv", "rank", "count", exact_counts);
        {
            csv::table t;
            t.header = {"rank", "exact", "predicted"};
            std::map<int64_t, std::pair<uint64_t, uint64_t>> merged;
            for (const auto& [r, c] : exact_counts) merged[r].first = c;
            for (const auto& [r, c] : predicted_counts) merged[r].second = c;
            for (const auto& [r, pair] : merged)
                t.rows.push_back({std::to_string(r), std::to_string(pair.first),
                                  std::to_string(pair.second)});
            csv::write(dir / "comparison.csv", t);
        }
        write_text(dir / "comparison.svg",
                   svg::bar_chart("Exact vs. predicted rank counts (N=" +
                                      std::to_string(opts.n_nodes) + ")",
                                  "rank", "states",
                                  {{"exact", to_double_bins(exact_counts)},
                                   {"predicted", to_double_bins(predicted_counts)}}));
        exact_written = true;
    }

    json flags;
    flags["model"] = opts.model_path;
    flags["nodes"] = std::to_string(opts.n_nodes);
    flags["k"] = std::to_string(k);
    flags["out"] = opts.out_dir;
    if (opts.state_budget) flags["budget"] = std::to_string(opts.state_budget);
    std::vector<std::string> outputs{"predictions.csv", "pred_rank_counts.csv"};
    if (exact_written) {
        outputs.insert(outputs.end(),
                       {"exact_rank_counts.csv", "comparison.csv", "comparison.svg"});
    }
    write_manifest(dir / "manifest.json", "predict", flags, outputs);

    std::cout << "predict: N=" << opts.n_nodes << " K=" << k << " states=" << total
              << (exact_written ? " (exact comparison written)" : "") << " -> " << opts.out_dir
              << "\n";
}

void run_plot(const plot_options& opts) {
    if (opts.in_csv.empty() || opts.out_svg.empty())
        fail(status_code::config, "--in and --out are required");
    const csv::table t = csv::read(opts.in_csv);

    std::string title, x_label, y_label;
    std::vector<svg::series> series;
    if (opts.kind == "counts" || opts.kind == "effects") {
        const std::vector<std::string> want =
            opts.kind == "counts" ? std::vector<std::string>{"rank", "count"}
                                  : std::vector<std::string>{"effect", "count"};
        if (t.header != want)
            fail(status_code::failure, opts.in_csv + ": expected header " + want[0] + "," +
                                           want[1] + " for kind " + opts.kind);
        svg::series s;
        s.name = want[1];
        for (size_t r = 0; r < t.rows.size(); ++r)
            s.bins[csv::parse_int(t.rows[r][0], opts.in_csv, r + 2)] =
                static_cast<double>(csv::parse_int(t.rows[r][1], opts.in_csv, r + 2));
        series.push_back(std::move(s));
        title = opts.kind == "counts" ? "Rank vs. state count" : "Rank effect frequency";
        x_label = want[0];
        y_label = opts.kind == "counts" ? "states" : "events";
    } else if (opts.kind == "comparison") {
        const std::vector<std::string> want{"rank", "exact", "predicted"};
        if (t.header != want)
            fail(status_code::failure,
                 opts.in_csv + ": expected header rank,exact,predicted for kind comparison");
        svg::series exact{"exact", {}}, predicted{"predicted", {}};
        for (size_t r = 0; r < t.rows.size(); ++r) {
            const int64_t key = csv::parse_int(t.rows[r][0], opts.in_csv, r + 2);
            exact.bins[key] =
                static_cast<double>(csv::parse_int(t.rows[r][1], opts.in_csv, r + 2));
            predicted.bins[key] =
                static_cast<double>(csv::parse_int(t.rows[r][2], opts.in_csv, r + 2));
        }
        series.push_back(std::move(exact));
        series.push_back(std::move(predicted));
        title = "Exact vs. predicted rank counts";
        x_label = "rank";
        y_label = "states";
    } else {
        fail(status_code::config,
             "unknown plot kind '" + opts.kind + "' (counts, effects or comparison)");
    }
    write_text(opts.out_svg, svg::bar_chart(title, x_label, y_label, series));
}

} // namespace cvf::reports
