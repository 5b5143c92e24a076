// Experiment runner for the coded distributed-training simulator.
//
// Subcommands:
//   train         run one experiment from a config file
//   model-curves  emit the checkpoint-period tradeoff CSV over a lambda grid
//   verify-codec  exercise the block codec against random corruption trials
//
// Exit codes: 0 success, 1 runtime failure, 2 config error, 3 I/O error.

#include "codenet/config.hpp"
#include "codenet/dataset.hpp"
#include "codenet/report.hpp"
#include "codenet/runtime_model.hpp"
#include "codenet/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using namespace codenet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int run_train(const std::string& config_path, const std::string& resume_path,
              long seed_override, const std::string& out_override) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
    if (!out_override.empty()) cfg.output_dir = out_override;

    std::vector<Sample> train_set, eval_set;
    try {
        if (!cfg.train_images.empty()) {
            train_set = load_mnist(cfg.train_images, cfg.train_labels);
            if (!cfg.test_images.empty())
                eval_set = load_mnist(cfg.test_images, cfg.test_labels);
        } else {
            int dim = cfg.layers.front();
            int classes = cfg.layers.back();
            train_set = synthetic_dataset(cfg.seed, cfg.synthetic_train, dim, classes);
            eval_set =
                synthetic_dataset(cfg.seed ^ 0x5eedULL, cfg.synthetic_test, dim, classes);
        }
    } catch (const std::exception& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kExitIo;
    }
    if (!eval_set.empty() && eval_set[0].y.size() != cfg.layers.back()) {
        std::cerr << "config error: label width does not match the last layer\n";
        return kExitConfig;
    }

    try {
        fs::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    }

    try {
        auto strategy = make_strategy(cfg.strategy_config());

        RunParams params;
        params.iterations = cfg.iterations;
        params.checkpoint_period = cfg.checkpoint_period;
        params.eval_every = cfg.eval_every;
        params.checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();

        if (!resume_path.empty()) {
            Checkpoint ckpt;
            try {
                auto bytes = read_file(resume_path);
                auto blocks_per_layer = [&](int, const Checkpoint& c) {
                    int m = c.layers[0].m, n = c.layers[0].n, t = c.layers[0].t;
                    switch (c.strategy) {
                        case StrategyKind::CodeNet:
                            return GridLayout::symmetric(m, n, t).total_nodes();
                        case StrategyKind::Replication: return 2 * m * n;
                        case StrategyKind::Uncoded: return m * n;
                    }
                    return 0;
                };
                auto block_shape = [&](int l, int, const Checkpoint& c) {
                    const auto& meta = c.layers[l];
                    detail::LayerGeom geom(int(meta.n_l), int(meta.n_lm1), meta.m, meta.n);
                    return std::pair<int, int>{geom.br, geom.bc};
                };
                ckpt = deserialize(bytes, blocks_per_layer, block_shape);
            } catch (const std::exception& e) {
                std::cerr << "io error: " << e.what() << "\n";
                return kExitIo;
            }
            if (ckpt.strategy != cfg.strategy) {
                std::cerr << "config error: checkpoint strategy does not match config\n";
                return kExitConfig;
            }
            strategy->restore_state(ckpt);
            strategy->faults().set_epoch(ckpt.rng_cursor_lo);
            params.start_iteration = long(ckpt.iteration);
        }

        std::ofstream metrics(fs::path(cfg.output_dir) / "metrics.csv",
                              std::ios::binary | std::ios::trunc);
        if (!metrics) {
            std::cerr << "io error: cannot write metrics.csv\n";
            return kExitIo;
        }
        metrics << metrics_csv_header() << '\n';
        RunSummary summary =
            run_training(*strategy, train_set, eval_set, params,
                         [&](const MetricsRow& row) { metrics << metrics_csv_row(row) << '\n'; });
        metrics.close();

        nlohmann::ordered_json report = run_report_json(cfg, *strategy, summary);
        write_text_file((fs::path(cfg.output_dir) / "run_report.json").string(),
                        report.dump(2) + "\n");

        std::cout << "completed " << summary.completed << " iterations ("
                  << summary.clean << " clean, " << summary.corrected << " corrected, "
                  << summary.rolled_back << " rollbacks), coarse time "
                  << format_g17(summary.coarse_time) << "\n";
        if (!std::isnan(summary.final_accuracy))
            std::cout << "final accuracy " << summary.final_accuracy << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_model_curves(double lambda_min, double lambda_max, int points, double tau_f,
                     double tau_b, double tau_cpt, long iters, const std::string& out_path,
                     const std::string& svg_path) {
    if (points < 1 || lambda_min <= 0 || lambda_max < lambda_min) {
        std::cerr << "config error: bad lambda range\n";
        return kExitConfig;
    }
    std::vector<double> lambdas;
    for (int i = 0; i < points; ++i)
        lambdas.push_back(points == 1 ? lambda_min
                                      : lambda_min + (lambda_max - lambda_min) * i /
                                                         double(points - 1));
    auto rows = tradeoff_curve(lambdas, tau_f, tau_b, tau_cpt, iters);
    try {
        if (out_path.empty() || out_path == "-")
            emit_tradeoff_csv(std::cout, rows);
        else
            emit_tradeoff_csv(out_path, rows);
        if (!svg_path.empty()) {
            // Minimal line chart of ratio vs lambda.
            double max_ratio = 1.0;
            for (const auto& r : rows) max_ratio = std::max(max_ratio, r.ratio);
            const double w = 640, h = 400, pad = 50;
            std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='640' "
                              "height='400' viewBox='0 0 640 400'>\n";
            svg += "<rect width='640' height='400' fill='white'/>\n";
            svg += "<polyline fill='none' stroke='black' stroke-width='1.5' points='";
            for (const auto& r : rows) {
                double x = pad + (w - 2 * pad) * (r.lambda - lambda_min) /
                                     std::max(1e-12, lambda_max - lambda_min);
                double y = h - pad - (h - 2 * pad) * (r.ratio / max_ratio);
                svg += format_g17(x) + "," + format_g17(y) + " ";
            }
            svg += "'/>\n";
            svg += "<text x='320' y='390' text-anchor='middle' font-size='12'>lambda</text>\n";
            svg += "<text x='15' y='200' font-size='12' transform='rotate(-90 15 200)'>"
                   "expected-time ratio</text>\n</svg>\n";
            write_text_file(svg_path, svg);
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    }
}

int run_verify_codec(int k, int t, int trials) {
    if (k < 1 || t < 0 || trials < 1) {
        std::cerr << "config error: need k >= 1, t >= 0, trials >= 1\n";
        return kExitConfig;
    }
    MdsCode code = MdsCode::cauchy(k, t);
    std::mt19937_64 eng(20240917ull + std::uint64_t(k) * 31 + std::uint64_t(t));
    std::normal_distribution<double> g(0.0, 1.0);
    const int block_len = 8;
    bool all_ok = true;

    std::printf("(%d+%d, %d) code, %d trials per row\n", k, 2 * t, k, trials);
    std::printf("%-22s %-12s %-12s\n", "corrupted blocks", "recovered", "detected");
    for (int errors = 0; errors <= t + 1 && errors <= k + 2 * t; ++errors) {
        int recovered = 0, detected = 0;
        for (int trial = 0; trial < trials; ++trial) {
            Eigen::MatrixXd msg(k, block_len);
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < block_len; ++j) msg(i, j) = g(eng);
            BlockVector word = encode_block_vector(code, msg);
            std::vector<int> support;
            while (int(support.size()) < errors) {
                int cand = int(eng() % std::uint64_t(k + 2 * t));
                if (std::find(support.begin(), support.end(), cand) == support.end())
                    support.push_back(cand);
            }
            for (int s : support)
                for (int c = 0; c < block_len; ++c) word.data(s, c) += g(eng);
            if (errors > 0 && syndrome_fires(word, syndrome(code, word))) ++detected;
            DecodeOutcome out = decode(code, word);
            bool exact = out.status != DecodeStatus::Uncorrectable &&
                         (out.message - msg).cwiseAbs().maxCoeff() <=
                             1e-9 * (1.0 + msg.cwiseAbs().maxCoeff());
            if (exact) ++recovered;
        }
        std::printf("%-22d %-12s %-12s\n", errors,
                    (std::to_string(recovered) + "/" + std::to_string(trials)).c_str(),
                    errors == 0 ? "-"
                                : (std::to_string(detected) + "/" + std::to_string(trials))
                                      .c_str());
        if (errors <= t && recovered != trials) all_ok = false;
        if (errors > 0 && detected != trials) all_ok = false;
    }
    std::printf("verdict: %s\n", all_ok ? "ok" : "FAILED");
    return all_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator for error-resilient coded DNN training"};
    app.require_subcommand(1);

    std::string config_path, resume_path, out_override;
    long seed_override = -1;
    auto* train = app.add_subcommand("train", "run one experiment from a config file");
    train->add_option("--config", config_path, "experiment config path")->required();
    train->add_option("--resume", resume_path, "checkpoint file to resume from");
    train->add_option("--seed", seed_override, "override the config seed");
    train->add_option("--out", out_override, "override the output directory");

    double lambda_min = 0.1, lambda_max = 10.0, tau_f = 1.0, tau_b = 1000.0,
           tau_cpt = 1000.0;
    int points = 50;
    long iters = 2000;
    std::string curves_out, svg_out;
    auto* curves =
        app.add_subcommand("model-curves", "emit the checkpoint-period tradeoff CSV");
    curves->add_option("--lambda-min", lambda_min, "smallest lambda");
    curves->add_option("--lambda-max", lambda_max, "largest lambda");
    curves->add_option("--points", points, "number of grid points");
    curves->add_option("--tau-f", tau_f, "error-free iteration time");
    curves->add_option("--tau-b", tau_b, "rollback / corrected iteration time");
    curves->add_option("--tau-cpt", tau_cpt, "checkpoint time");
    curves->add_option("--iters", iters, "iteration count M");
    curves->add_option("--out", curves_out, "CSV output path (default stdout)");
    curves->add_option("--svg", svg_out, "optional SVG chart path");

    int vk = 2, vt = 1, vtrials = 1000;
    auto* verify = app.add_subcommand("verify-codec", "run codec corruption trials");
    verify->add_option("--k", vk, "message block count");
    verify->add_option("--t", vt, "correctable block errors");
    verify->add_option("--trials", vtrials, "trials per corruption count");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return run_train(config_path, resume_path, seed_override, out_override);
    if (curves->parsed())
        return run_model_curves(lambda_min, lambda_max, points, tau_f, tau_b, tau_cpt, iters,
                                curves_out, svg_out);
    if (verify->parsed()) return run_verify_codec(vk, vt, vtrials);
    return kExitConfig;
}
