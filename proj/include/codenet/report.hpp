#pragma once

#include "codenet/config.hpp"
#include "codenet/runtime_model.hpp"
#include "codenet/training.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace codenet {

inline std::string outcome_name(IterationOutcome::Kind kind) {
    switch (kind) {
        case IterationOutcome::Kind::Clean: return "clean";
        case IterationOutcome::Kind::Corrected: return "corrected";
        case IterationOutcome::Kind::RolledBack: return "rolled_back";
    }
    return "?";
}

inline const char* metrics_csv_header() {
    return "iter,outcome,loss,accuracy,coarse_time,comm_time,comp_time,rollbacks";
}

inline std::string metrics_csv_row(const MetricsRow& row) {
    std::string out = std::to_string(row.iteration);
    out += ',';
    out += outcome_name(row.outcome);
    out += ',';
    out += format_g17(row.loss);
    out += ',';
    if (!std::isnan(row.accuracy)) out += format_g17(row.accuracy);
    out += ',';
    out += format_g17(row.coarse_time);
    out += ',';
    out += format_g17(row.comm_time);
    out += ',';
    out += format_g17(row.comp_time);
    out += ',';
    out += std::to_string(row.rollbacks);
    return out;
}

// Full provenance and outcome record for one run. The theorem-3 block pairs
// the ledgered totals with the single-layer cost-model ratios at the run's
// parameters.
inline nlohmann::ordered_json run_report_json(const ExperimentConfig& cfg,
                                              const Strategy& strategy,
                                              const RunSummary& summary) {
    nlohmann::ordered_json report;
    report["strategy"] = cfg.strategy == StrategyKind::CodeNet       ? "codenet"
                         : cfg.strategy == StrategyKind::Replication ? "replication"
                                                                     : "uncoded";
    report["node_count"] = strategy.node_count();
    report["comparable_replication_nodes"] = 2 * cfg.m * cfg.n;

    nlohmann::ordered_json echo;
    for (const auto& [k, v] : cfg.raw_values) echo[k] = v;
    report["config"] = echo;

    report["outcomes"] = {{"completed", summary.completed},
                          {"attempts", summary.attempts},
                          {"clean", summary.clean},
                          {"corrected", summary.corrected},
                          {"rolled_back", summary.rolled_back}};
    report["final_loss"] = summary.final_loss;
    if (!std::isnan(summary.final_accuracy)) report["final_accuracy"] = summary.final_accuracy;
    report["coarse_time"] = summary.coarse_time;
    report["ledger"] = {{"comm_time", summary.comm_time},
                        {"comp_time", summary.comp_time},
                        {"checkpoint_time", summary.checkpoint_time}};

    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l + 1 < cfg.layers.size(); ++l) {
        double n_l = cfg.layers[l + 1], n_lm1 = cfg.layers[l];
        LayerCost cdn = codenet_layer_cost(cfg.m, cfg.n, cfg.t, n_l, n_lm1, cfg.alpha,
                                           cfg.beta, cfg.gamma,
                                           cfg.faults.model == FaultSpec::Model::Probabilistic);
        LayerCost rep =
            replication_layer_cost(cfg.m, cfg.n, n_l, n_lm1, cfg.alpha, cfg.beta, cfg.gamma);
        nlohmann::ordered_json entry;
        entry["n_l"] = n_l;
        entry["n_lm1"] = n_lm1;
        entry["codenet_layer_comm"] = cdn.comm;
        entry["codenet_layer_comp"] = cdn.comp;
        entry["replication_layer_comm"] = rep.comm;
        entry["replication_layer_comp"] = rep.comp;
        entry["comm_ratio"] = rep.comm > 0 ? cdn.comm / rep.comm : 0.0;
        entry["comp_ratio"] = rep.comp > 0 ? cdn.comp / rep.comp : 0.0;
        layers.push_back(entry);
    }
    report["theorem3_layer_costs"] = layers;
    return report;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace codenet
