#pragma once

#include "codenet/strategies.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace codenet {

struct Sample {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
};

struct IterationReport {
    long iteration = 0;
    IterationOutcome outcome;
    double coarse_delta = 0.0;
    double comm_delta = 0.0;
    double comp_delta = 0.0;
};

// One row per completed iteration. Rolled-back attempts never complete an
// iteration index, so they surface through the cumulative rollback counter
// (and the report stream), keeping the iteration column strictly increasing.
struct MetricsRow {
    long iteration = 0;
    IterationOutcome::Kind outcome = IterationOutcome::Kind::Clean;
    double loss = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();  // NaN off eval iterations
    double coarse_time = 0.0;
    double comm_time = 0.0;
    double comp_time = 0.0;
    long rollbacks = 0;
};

struct RunParams {
    long iterations = 0;        // M
    long checkpoint_period = 100;  // I0
    long eval_every = 100;      // 0 disables evaluation
    long start_iteration = 0;   // nonzero when resuming from a checkpoint
    std::string checkpoint_path;   // written on every checkpoint when nonempty
    // Runs that keep rolling back from the same checkpoint are stuck: a
    // beyond-tolerance corruption was persisted. Abort rather than spin.
    int max_consecutive_rollbacks = 25;
};

struct RunSummary {
    long completed = 0;
    long clean = 0;
    long corrected = 0;
    long rolled_back = 0;
    long attempts = 0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    double coarse_time = 0.0;
    double comm_time = 0.0;
    double comp_time = 0.0;
    double checkpoint_time = 0.0;
    std::vector<IterationReport> reports;
};

inline double evaluate_accuracy(const DnnState& weights, const std::vector<Sample>& eval_set) {
    if (eval_set.empty()) return std::numeric_limits<double>::quiet_NaN();
    long hits = 0;
    for (const auto& sample : eval_set) {
        ForwardTrace trace = oracle_feedforward(weights, sample.x);
        Eigen::Index pred, truth;
        trace.output.maxCoeff(&pred);
        sample.y.maxCoeff(&truth);
        if (pred == truth) ++hits;
    }
    return double(hits) / double(eval_set.size());
}

// Serial training loop: checkpoint every I0 iterations, run the iteration,
// classify the outcome onto the coarse clock, and on a rollback restore the
// last checkpoint bit-exactly and replay from its index with fresh fault
// draws (the injector epoch advances).
inline RunSummary run_training(Strategy& strategy, const std::vector<Sample>& train,
                               const std::vector<Sample>& eval_set, const RunParams& params,
                               const std::function<void(const MetricsRow&)>& on_row = {}) {
    if (train.empty()) throw std::invalid_argument("run_training: empty dataset");
    if (params.checkpoint_period < 1)
        throw std::invalid_argument("run_training: checkpoint period must be >= 1");

    RunSummary summary;
    Checkpoint ckpt = strategy.make_checkpoint(params.start_iteration);
    long last_checkpointed = -1;
    int consecutive_rollbacks = 0;
    long next_metrics_row = params.start_iteration;  // replays never re-emit a row

    long k = params.start_iteration;
    while (k < params.iterations) {
        if (k % params.checkpoint_period == 0 && k != last_checkpointed) {
            if (!strategy.state_fit_for_checkpoint()) {
                // Diverged replicas must not be persisted; treat as a detected
                // mismatch and fall back to the previous checkpoint.
                strategy.clock().rollback();
                summary.rolled_back++;
                summary.attempts++;
                IterationReport rep;
                rep.iteration = k;
                rep.outcome.kind = IterationOutcome::Kind::RolledBack;
                rep.outcome.cause = RollbackCause::ReplicaMismatch;
                rep.coarse_delta = strategy.clock().tau_b;
                summary.reports.push_back(rep);
                strategy.restore_state(ckpt);
                strategy.faults().advance_epoch();
                k = static_cast<long>(ckpt.iteration);
                if (++consecutive_rollbacks > params.max_consecutive_rollbacks)
                    throw std::runtime_error("run_training: stuck at checkpoint " +
                                             std::to_string(ckpt.iteration));
                continue;
            }
            ckpt = strategy.make_checkpoint(k);
            if (!params.checkpoint_path.empty())
                write_file(params.checkpoint_path, serialize(ckpt));
            strategy.clock().checkpoint();
            strategy.ledger().charge_checkpoint(strategy.clock().tau_cpt);
            last_checkpointed = k;
        }

        const Sample& sample = train[k % train.size()];
        double coarse0 = strategy.clock().time;
        double comm0 = strategy.ledger().comm_time;
        double comp0 = strategy.ledger().comp_time;
        IterationOutcome outcome = strategy.run_iteration(sample.x, sample.y, k);
        summary.attempts++;

        IterationReport rep;
        rep.iteration = k;
        rep.outcome = outcome;

        if (outcome.kind == IterationOutcome::Kind::RolledBack) {
            strategy.clock().rollback();
            summary.rolled_back++;
            rep.coarse_delta = strategy.clock().time - coarse0;
            rep.comm_delta = strategy.ledger().comm_time - comm0;
            rep.comp_delta = strategy.ledger().comp_time - comp0;
            summary.reports.push_back(rep);
            strategy.restore_state(ckpt);
            strategy.faults().advance_epoch();
            k = static_cast<long>(ckpt.iteration);
            if (++consecutive_rollbacks > params.max_consecutive_rollbacks)
                throw std::runtime_error("run_training: stuck at checkpoint " +
                                         std::to_string(ckpt.iteration));
            continue;
        }
        consecutive_rollbacks = 0;

        if (outcome.kind == IterationOutcome::Kind::Clean) {
            strategy.clock().error_free();
            summary.clean++;
        } else {
            strategy.clock().corrected();
            summary.corrected++;
        }
        rep.coarse_delta = strategy.clock().time - coarse0;
        rep.comm_delta = strategy.ledger().comm_time - comm0;
        rep.comp_delta = strategy.ledger().comp_time - comp0;
        summary.reports.push_back(rep);

        if (k == next_metrics_row) {
            MetricsRow row;
            row.iteration = k;
            row.outcome = outcome.kind;
            row.loss = outcome.loss;
            if (params.eval_every > 0 &&
                ((k + 1) % params.eval_every == 0 || k + 1 == params.iterations))
                row.accuracy = evaluate_accuracy(strategy.assembled_weights(), eval_set);
            row.coarse_time = strategy.clock().time;
            row.comm_time = strategy.ledger().comm_time;
            row.comp_time = strategy.ledger().comp_time;
            row.rollbacks = summary.rolled_back;
            if (on_row) on_row(row);
            if (!std::isnan(row.accuracy)) summary.final_accuracy = row.accuracy;
            summary.completed++;
            ++next_metrics_row;
        }
        summary.final_loss = outcome.loss;
        ++k;
    }

    summary.coarse_time = strategy.clock().time;
    summary.comm_time = strategy.ledger().comm_time;
    summary.comp_time = strategy.ledger().comp_time;
    summary.checkpoint_time = strategy.ledger().checkpoint_time;
    return summary;
}

// ---------------------------------------------------------------------------
// Ledger-only layer cost model

// Charges one interior layer's fault-free iteration schedule (feedforward +
// backprop + update, both redistribution broadcasts present) into a fresh
// ledger, without touching any data. Mirrors the live strategies' charging
// call for call; the tests pin the two against each other.
struct LayerCost {
    double comm = 0.0;
    double comp = 0.0;
};

inline LayerCost codenet_layer_cost(int m, int n, int t, double n_l, double n_lm1, double alpha,
                                    double beta, double gamma, bool model2 = true) {
    CostLedger ledger;
    ledger.alpha = alpha;
    ledger.beta = beta;
    ledger.gamma = gamma;
    GridLayout grid = GridLayout::symmetric(m, n, t);
    const double br = n_l / m, bc = n_lm1 / n;
    // feedforward
    ledger.charge_compute(2.0 * br * bc);
    ledger.charge_all_reduce(n, br);
    if (t > 0) ledger.charge_all_reduce(grid.grid_rows(), 2.0 * t * br);
    if (model2) ledger.charge_detection_verification(grid.total_nodes(), t);
    if (t > 0) ledger.charge_reduce(grid.grid_cols(), 2.0 * t * bc);
    ledger.charge_broadcast(grid.grid_rows(), n_l / n);  // x^{l+1} column parts
    // backprop
    ledger.charge_compute(2.0 * br * bc);
    ledger.charge_all_reduce(m, bc);
    if (t > 0) ledger.charge_all_reduce(grid.grid_cols(), 2.0 * t * bc);
    if (model2) ledger.charge_detection_verification(grid.total_nodes(), t);
    if (t > 0) ledger.charge_reduce(grid.grid_rows(), 2.0 * t * br);
    ledger.charge_broadcast(grid.grid_cols(), n_lm1 / m);  // delta^{l-1} row parts
    // update
    ledger.charge_compute(2.0 * br * bc);
    return {ledger.comm_time, ledger.comp_time};
}

inline LayerCost replication_layer_cost(int m, int n, double n_l, double n_lm1, double alpha,
                                        double beta, double gamma) {
    CostLedger ledger;
    ledger.alpha = alpha;
    ledger.beta = beta;
    ledger.gamma = gamma;
    const double br = n_l / m, bc = n_lm1 / n;
    ledger.charge_compute(2.0 * br * bc);
    ledger.charge_reduce(n, br);
    ledger.charge_broadcast(m, n_l / n);
    ledger.charge_compute(2.0 * br * bc);
    ledger.charge_reduce(m, bc);
    ledger.charge_broadcast(n, n_lm1 / m);
    ledger.charge_compute(2.0 * br * bc);
    return {ledger.comm_time, ledger.comp_time};
}

}  // namespace codenet
