#pragma once

#include "codenet/checkpoint.hpp"
#include "codenet/cluster.hpp"
#include "codenet/dnn.hpp"
#include "codenet/mds_code.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace codenet {

enum class RollbackCause {
    TooManyErrors,
    DetectionDisagreement,
    DecodeDisagreement,
    ReplicaMismatch,
};

inline const char* to_string(RollbackCause c) {
    switch (c) {
        case RollbackCause::TooManyErrors: return "TooManyErrors";
        case RollbackCause::DetectionDisagreement: return "DetectionDisagreement";
        case RollbackCause::DecodeDisagreement: return "DecodeDisagreement";
        case RollbackCause::ReplicaMismatch: return "ReplicaMismatch";
    }
    return "?";
}

struct CorrectionEvent {
    int layer = 0;        // 1-based
    StepKind stage = StepKind::O1;  // O1: flagged rows (feedforward), O2: flagged columns
    std::vector<int> locations;
};

struct IterationOutcome {
    enum class Kind { Clean, Corrected, RolledBack };
    Kind kind = Kind::Clean;
    RollbackCause cause = RollbackCause::TooManyErrors;  // valid when RolledBack
    std::vector<CorrectionEvent> corrections;            // valid when Corrected
    double loss = std::numeric_limits<double>::quiet_NaN();
};

struct StrategyConfig {
    StrategyKind kind = StrategyKind::CodeNet;
    std::vector<int> dims;  // N_0 .. N_L
    Activation activation = Activation::Sigmoid;
    int m = 1;
    int n = 1;
    int t = 0;  // CodeNet only
    double eta = 0.1;
    std::uint64_t seed = 1;
    FaultSpec faults;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double tau_f = 1.0;
    double tau_b = 1.0;
    double tau_cpt = 0.0;
};

namespace detail {

inline int padded_dim(int dim, int parts) { return ((dim + parts - 1) / parts) * parts; }

// Geometry of one layer's block partition over the m x n grid.
struct LayerGeom {
    int n_l = 0;     // logical output dim
    int n_lm1 = 0;   // logical input dim
    int rows_pad = 0;
    int cols_pad = 0;
    int br = 0;  // block rows = rows_pad / m
    int bc = 0;  // block cols = cols_pad / n

    LayerGeom() = default;
    LayerGeom(int out_dim, int in_dim, int m, int n)
        : n_l(out_dim),
          n_lm1(in_dim),
          rows_pad(padded_dim(out_dim, m)),
          cols_pad(padded_dim(in_dim, n)),
          br(rows_pad / m),
          bc(cols_pad / n) {}
};

// Zero-pads v to len. Padding entries stay zero throughout training so the
// padded rows/columns of every weight block remain exactly zero.
inline Eigen::VectorXd zero_pad(const Eigen::VectorXd& v, int len) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(len);
    out.head(v.size()) = v;
    return out;
}

inline std::vector<Eigen::VectorXd> split_parts(const Eigen::VectorXd& padded, int parts) {
    int len = static_cast<int>(padded.size()) / parts;
    std::vector<Eigen::VectorXd> out(parts);
    for (int i = 0; i < parts; ++i) out[i] = padded.segment(i * len, len);
    return out;
}

inline Eigen::VectorXd join_parts(const std::vector<Eigen::VectorXd>& parts, int count) {
    int len = static_cast<int>(parts[0].size());
    Eigen::VectorXd out(count * len);
    for (int i = 0; i < count; ++i) out.segment(i * len, len) = parts[i];
    return out;
}

// Number of source-partition parts a single destination part overlaps within
// the logical range, maximized over destinations. Used to charge the
// redistribution broadcasts when the two partitions disagree (m != n).
inline int max_redistribution_segments(int logical, int src_part_len, int dst_parts,
                                       int dst_part_len) {
    int worst = 1;
    for (int j = 0; j < dst_parts; ++j) {
        int lo = j * dst_part_len;
        int hi = std::min((j + 1) * dst_part_len, logical);
        if (lo >= hi) continue;
        int first = lo / src_part_len;
        int last = (hi - 1) / src_part_len;
        worst = std::max(worst, last - first + 1);
    }
    return worst;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strategy interface

class Strategy {
  public:
    explicit Strategy(const StrategyConfig& cfg)
        : cfg_(cfg), faults_(cfg.faults, cfg.seed) {
        ledger_.alpha = cfg.alpha;
        ledger_.beta = cfg.beta;
        ledger_.gamma = cfg.gamma;
        clock_.tau_f = cfg.tau_f;
        clock_.tau_b = cfg.tau_b;
        clock_.tau_cpt = cfg.tau_cpt;
    }
    virtual ~Strategy() = default;

    virtual StrategyKind kind() const = 0;
    virtual int node_count() const = 0;
    virtual IterationOutcome run_iteration(const Eigen::VectorXd& data,
                                           const Eigen::VectorXd& label, long iteration) = 0;
    virtual Checkpoint make_checkpoint(long iteration) const = 0;
    virtual void restore_state(const Checkpoint& ckpt) = 0;
    // Whether the current state may be persisted. Replication refuses when the
    // replicas have silently diverged; persisting that state would make every
    // replay fail.
    virtual bool state_fit_for_checkpoint() const { return true; }
    // Current weights with padding stripped, e.g. for evaluation.
    virtual DnnState assembled_weights() const = 0;

    const StrategyConfig& config() const { return cfg_; }
    CostLedger& ledger() { return ledger_; }
    const CostLedger& ledger() const { return ledger_; }
    CoarseClock& clock() { return clock_; }
    const CoarseClock& clock() const { return clock_; }
    FaultInjector& faults() { return faults_; }

    // Per-(layer, stage) ledger deltas of the last iteration, captured when
    // enabled. Stages: 'f' feedforward, 't' transition, 'b' backprop,
    // 'u' update.
    struct StageCost {
        int layer = 0;
        char stage = '?';
        double comm = 0.0;
        double comp = 0.0;
    };
    void set_record_stage_costs(bool on) { record_costs_ = on; }
    const std::vector<StageCost>& last_stage_costs() const { return stage_costs_; }

  protected:
    void stage_begin() {
        if (!record_costs_) return;
        mark_comm_ = ledger_.comm_time;
        mark_comp_ = ledger_.comp_time;
    }
    void stage_end(int layer, char stage) {
        if (!record_costs_) return;
        stage_costs_.push_back({layer, stage, ledger_.comm_time - mark_comm_,
                                ledger_.comp_time - mark_comp_});
    }
    void stage_reset() {
        if (record_costs_) stage_costs_.clear();
    }

    StrategyConfig cfg_;
    CostLedger ledger_;
    CoarseClock clock_;
    FaultInjector faults_;
    bool record_costs_ = false;
    std::vector<StageCost> stage_costs_;

  private:
    double mark_comm_ = 0.0;
    double mark_comp_ = 0.0;
};

// ---------------------------------------------------------------------------
// CodeNet

// Weight blocks live on an (m+2t) x (n+2t) grid with the 2t x 2t corner
// empty. Base blocks W_{i,j} sit at i<m, j<n; row-parity blocks at i>=m are
// column-wise combinations through G_r, column-parity blocks at j>=n are
// row-wise combinations through G_c. Encoding happens once, fault-free; every
// later iteration encodes vectors only and the coded update keeps the block
// structure intact.
class CodenetStrategy : public Strategy {
  public:
    explicit CodenetStrategy(const StrategyConfig& cfg)
        : Strategy(cfg),
          grid_(GridLayout::symmetric(cfg.m, cfg.n, cfg.t)),
          row_code_(MdsCode::cauchy(cfg.m, cfg.t)),
          col_code_(MdsCode::cauchy(cfg.n, cfg.t)) {
        DnnState init = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
        setup(init);
    }

    // Paper toy codes and the like: explicit generator matrices.
    CodenetStrategy(const StrategyConfig& cfg, const MdsCode& row_code, const MdsCode& col_code)
        : Strategy(cfg),
          grid_(GridLayout::symmetric(cfg.m, cfg.n, cfg.t)),
          row_code_(row_code),
          col_code_(col_code) {
        DnnState init = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
        setup(init);
    }

    StrategyKind kind() const override { return StrategyKind::CodeNet; }
    int node_count() const override { return grid_.total_nodes(); }
    const GridLayout& grid() const { return grid_; }
    const MdsCode& row_code() const { return row_code_; }
    const MdsCode& col_code() const { return col_code_; }

    Eigen::MatrixXd& block(int l, int i, int j) { return layers_[l].blocks[block_index(i, j)]; }
    const Eigen::MatrixXd& block(int l, int i, int j) const {
        return layers_[l].blocks[block_index(i, j)];
    }
    const detail::LayerGeom& geom(int l) const { return layers_[l].geom; }
    int num_layers() const { return static_cast<int>(layers_.size()); }
    // Last iteration's cached vector partitions, for diagnostics and tests.
    // x parts index the input of 0-based layer l; delta parts of 1-based
    // layer l live at index l.
    const std::vector<Eigen::VectorXd>& cached_x_parts(int l) const { return x_parts_[l]; }
    const std::vector<Eigen::VectorXd>& cached_delta_parts(int l) const {
        return delta_parts_[l];
    }

    // Initial encoding: block-partition each padded W and fill the parity
    // blocks from the systematic codes.
    void setup(const DnnState& init) {
        const int L = static_cast<int>(init.weights.size());
        layers_.assign(L, {});
        x_parts_.assign(L + 1, {});
        delta_parts_.assign(L + 1, {});
        for (int l = 0; l < L; ++l) {
            auto& layer = layers_[l];
            layer.geom = detail::LayerGeom(cfg_.dims[l + 1], cfg_.dims[l], cfg_.m, cfg_.n);
            Eigen::MatrixXd padded =
                Eigen::MatrixXd::Zero(layer.geom.rows_pad, layer.geom.cols_pad);
            padded.topLeftCorner(layer.geom.n_l, layer.geom.n_lm1) = init.weights[l];
            layer.blocks.assign(grid_.grid_rows() * grid_.grid_cols(), Eigen::MatrixXd());
            const int br = layer.geom.br, bc = layer.geom.bc;
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = 0; j < cfg_.n; ++j)
                    block(l, i, j) = padded.block(i * br, j * bc, br, bc);
            for (int i = cfg_.m; i < grid_.grid_rows(); ++i)
                for (int j = 0; j < cfg_.n; ++j) {
                    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(br, bc);
                    for (int u = 0; u < cfg_.m; ++u)
                        acc += row_code_.generator(u, i) * block(l, u, j);
                    block(l, i, j) = std::move(acc);
                }
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = cfg_.n; j < grid_.grid_cols(); ++j) {
                    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(br, bc);
                    for (int v = 0; v < cfg_.n; ++v)
                        acc += col_code_.generator(v, j) * block(l, i, v);
                    block(l, i, j) = std::move(acc);
                }
        }
    }

    struct LayerResult {
        bool rolled_back = false;
        RollbackCause cause = RollbackCause::TooManyErrors;
        bool corrected = false;
        std::vector<int> flagged;
    };

    IterationOutcome run_iteration(const Eigen::VectorXd& data, const Eigen::VectorXd& label,
                                   long iteration) override {
        stage_reset();
        IterationOutcome out;
        const int L = num_layers();

        // Layer-1 input comes from shared memory; every active column reads
        // its slice for free.
        x_parts_[0] = detail::split_parts(
            detail::zero_pad(data, layers_[0].geom.cols_pad), cfg_.n);
        x_parts_[0].resize(grid_.grid_cols());

        for (int l = 0; l < L; ++l) {
            stage_begin();
            LayerResult r = feedforward_layer(l, iteration);
            stage_end(l + 1, 'f');
            if (r.rolled_back) {
                out.kind = IterationOutcome::Kind::RolledBack;
                out.cause = r.cause;
                return out;
            }
            if (r.corrected)
                out.corrections.push_back({l + 1, StepKind::O1, r.flagged});
        }

        stage_begin();
        bool transition_ok = transition(label, iteration);
        stage_end(L, 't');
        out.loss = last_loss_;
        if (!transition_ok) {
            out.kind = IterationOutcome::Kind::RolledBack;
            out.cause = RollbackCause::DetectionDisagreement;
            return out;
        }

        for (int l = L - 1; l >= 0; --l) {
            stage_begin();
            LayerResult r = backprop_layer(l, iteration);
            stage_end(l + 1, 'b');
            if (r.rolled_back) {
                out.kind = IterationOutcome::Kind::RolledBack;
                out.cause = r.cause;
                return out;
            }
            if (r.corrected)
                out.corrections.push_back({l + 1, StepKind::O2, r.flagged});
        }

        for (int l = 0; l < L; ++l) {
            stage_begin();
            update_layer(l, iteration);
            stage_end(l + 1, 'u');
        }

        out.kind = out.corrections.empty() ? IterationOutcome::Kind::Clean
                                           : IterationOutcome::Kind::Corrected;
        return out;
    }

    // Feedforward at layer l (0-based): block products (O1, fault-injectable),
    // row-wise all-reduce, 2t consistency checks, verification, then either
    // the clean path (additional encoding + next input) or the decode /
    // regenerate path.
    LayerResult feedforward_layer(int l, long iteration) {
        LayerResult res;
        const auto& g = layers_[l].geom;
        const int rows = grid_.grid_rows();
        const bool model2 = faults_.spec().model == FaultSpec::Model::Probabilistic;

        std::vector<std::vector<Eigen::VectorXd>> products(rows);
        for (int i = 0; i < rows; ++i) {
            products[i].resize(cfg_.n);
            for (int j = 0; j < cfg_.n; ++j) {
                Eigen::VectorXd p = block(l, i, j) * x_parts_[l][j];
                faults_.maybe_corrupt({iteration, l + 1, StepKind::O1, i, j, 0}, p);
                products[i][j] = std::move(p);
            }
        }
        ledger_.charge_compute(2.0 * g.br * g.bc);

        BlockVector word;
        word.data.resize(rows, g.br);
        for (int i = 0; i < rows; ++i) word.data.row(i) = sum_in_order(products[i]);
        ledger_.charge_all_reduce(cfg_.n, g.br);

        Eigen::MatrixXd synd = syndrome(row_code_, word);
        if (cfg_.t > 0) ledger_.charge_all_reduce(rows, 2.0 * cfg_.t * g.br);
        if (model2) ledger_.charge_detection_verification(grid_.total_nodes(), cfg_.t);

        Eigen::MatrixXd message;
        if (!syndrome_fires(word, synd)) {
            message = word.data.topRows(cfg_.m);
        } else {
            ledger_.charge_all_gather(rows, g.br);
            DecodeOutcome dec = decode(row_code_, word);
            ledger_.charge_compute(double(rows) * cfg_.t * g.br);
            if (model2) ledger_.charge_decode_verification(grid_.total_nodes());
            // Decoding runs on identical gathered data at every node, so a
            // decode disagreement cannot arise here; the rollback cause is
            // still reported by anything that forces one.
            if (dec.status == DecodeStatus::Uncorrectable) {
                res.rolled_back = true;
                res.cause = RollbackCause::TooManyErrors;
                return res;
            }
            message = dec.message;
            res.corrected = true;
            res.flagged = dec.error_locations;
            regenerate_rows(l, dec.error_locations);
        }

        additional_encoding_x(l);
        next_input(l, message, /*redistribute=*/!res.corrected);
        return res;
    }

    // Backpropagation at layer l: mirror of the feedforward along columns.
    LayerResult backprop_layer(int l, long iteration) {
        LayerResult res;
        const auto& g = layers_[l].geom;
        const int cols = grid_.grid_cols();
        const bool model2 = faults_.spec().model == FaultSpec::Model::Probabilistic;

        std::vector<std::vector<Eigen::VectorXd>> products(cols);
        for (int j = 0; j < cols; ++j) {
            products[j].resize(cfg_.m);
            for (int i = 0; i < cfg_.m; ++i) {
                Eigen::VectorXd q = block(l, i, j).transpose() * delta_parts_[l + 1][i];
                faults_.maybe_corrupt({iteration, l + 1, StepKind::O2, i, j, 0}, q);
                products[j][i] = std::move(q);
            }
        }
        ledger_.charge_compute(2.0 * g.br * g.bc);

        BlockVector word;
        word.data.resize(cols, g.bc);
        for (int j = 0; j < cols; ++j) word.data.row(j) = sum_in_order(products[j]);
        ledger_.charge_all_reduce(cfg_.m, g.bc);

        Eigen::MatrixXd synd = syndrome(col_code_, word);
        if (cfg_.t > 0) ledger_.charge_all_reduce(cols, 2.0 * cfg_.t * g.bc);
        if (model2) ledger_.charge_detection_verification(grid_.total_nodes(), cfg_.t);

        Eigen::MatrixXd message;
        if (!syndrome_fires(word, synd)) {
            message = word.data.topRows(cfg_.n);
        } else {
            ledger_.charge_all_gather(cols, g.bc);
            DecodeOutcome dec = decode(col_code_, word);
            ledger_.charge_compute(double(cols) * cfg_.t * g.bc);
            if (model2) ledger_.charge_decode_verification(grid_.total_nodes());
            if (dec.status == DecodeStatus::Uncorrectable) {
                res.rolled_back = true;
                res.cause = RollbackCause::TooManyErrors;
                return res;
            }
            message = dec.message;
            res.corrected = true;
            res.flagged = dec.error_locations;
            regenerate_cols(l, dec.error_locations);
        }

        additional_encoding_delta(l);
        next_delta(l, message);
        return res;
    }

    // Update at layer l: every node applies its rank-1 rule with whichever
    // (possibly coded) vector pair it holds; O3 faults corrupt the stored
    // block and surface at this layer's first O1/O2 output next iteration.
    void update_layer(int l, long iteration) {
        const auto& g = layers_[l].geom;
        for (int i = 0; i < grid_.grid_rows(); ++i)
            for (int j = 0; j < grid_.grid_cols(); ++j) {
                if (grid_.in_corner(i, j)) continue;
                Eigen::MatrixXd& b = block(l, i, j);
                b += cfg_.eta * delta_parts_[l + 1][i] * x_parts_[l][j].transpose();
                faults_.maybe_corrupt({iteration, l + 1, StepKind::O3, i, j, 0}, b);
            }
        ledger_.charge_compute(2.0 * g.br * g.bc);
    }

    const Eigen::VectorXd& estimate() const { return last_estimate_; }

    Checkpoint make_checkpoint(long iteration) const override {
        Checkpoint ckpt;
        ckpt.strategy = StrategyKind::CodeNet;
        ckpt.iteration = static_cast<std::uint64_t>(iteration);
        ckpt.rng_cursor_lo = faults_.epoch();
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = layers_[l].geom;
            ckpt.layers.push_back({std::uint32_t(g.n_l), std::uint32_t(g.n_lm1),
                                   std::uint16_t(cfg_.m), std::uint16_t(cfg_.n),
                                   std::uint16_t(cfg_.t)});
            std::vector<Eigen::MatrixXd> scan;
            for (int i = 0; i < grid_.grid_rows(); ++i)
                for (int j = 0; j < grid_.grid_cols(); ++j)
                    if (!grid_.in_corner(i, j)) scan.push_back(block(l, i, j));
            ckpt.blocks.push_back(std::move(scan));
        }
        return ckpt;
    }

    void restore_state(const Checkpoint& ckpt) override {
        for (int l = 0; l < num_layers(); ++l) {
            std::size_t idx = 0;
            for (int i = 0; i < grid_.grid_rows(); ++i)
                for (int j = 0; j < grid_.grid_cols(); ++j)
                    if (!grid_.in_corner(i, j)) block(l, i, j) = ckpt.blocks[l][idx++];
        }
    }

    DnnState assembled_weights() const override {
        DnnState state;
        state.learning_rate = cfg_.eta;
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = layers_[l].geom;
            Eigen::MatrixXd padded(g.rows_pad, g.cols_pad);
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = 0; j < cfg_.n; ++j)
                    padded.block(i * g.br, j * g.bc, g.br, g.bc) = block(l, i, j);
            state.layers.push_back({g.n_lm1, g.n_l, cfg_.activation});
            state.weights.push_back(padded.topLeftCorner(g.n_l, g.n_lm1));
        }
        return state;
    }

  private:
    int block_index(int i, int j) const { return i * grid_.grid_cols() + j; }

    // delta^L is generated redundantly by every active node of the last
    // layer's rows from the shared label. Under Error Model 2 the redundant
    // copies are exchanged and compared; any disagreement forces a rollback.
    bool transition(const Eigen::VectorXd& label, long iteration) {
        const int L = num_layers();
        const auto& g = layers_[L - 1].geom;
        const bool model2 = faults_.spec().model == FaultSpec::Model::Probabilistic;

        Eigen::VectorXd label_pad = detail::zero_pad(label, g.rows_pad);
        std::vector<Eigen::VectorXd> agreed(cfg_.m);
        bool disagreement = false;
        for (int i = 0; i < cfg_.m; ++i) {
            Eigen::VectorXd base;
            for (int j = 0; j < cfg_.n; ++j) {
                Eigen::VectorXd s_i = s_message_.row(i);
                Eigen::VectorXd y_i = activation_f(cfg_.activation, s_i);
                Eigen::VectorXd copy =
                    2.0 * (label_pad.segment(i * g.br, g.br) - y_i)
                              .cwiseProduct(activation_g(cfg_.activation, y_i));
                zero_padding_tail(copy, i * g.br, g.n_l);
                faults_.maybe_corrupt({iteration, L, StepKind::Transition, i, j, 0}, copy);
                if (j == 0)
                    base = copy;
                else if ((copy.array() != base.array()).any())
                    disagreement = true;
            }
            agreed[i] = base;
        }
        if (model2) ledger_.charge_detection_verification(grid_.total_nodes(), cfg_.t);

        // The estimate and loss come out of the same pass.
        Eigen::VectorXd yhat_pad(g.rows_pad);
        for (int i = 0; i < cfg_.m; ++i)
            yhat_pad.segment(i * g.br, g.br) =
                activation_f(cfg_.activation, Eigen::VectorXd(s_message_.row(i)));
        last_estimate_ = yhat_pad.head(g.n_l);
        last_loss_ = squared_error(last_estimate_, label);

        if (disagreement) return false;

        delta_parts_[L].assign(grid_.grid_rows(), Eigen::VectorXd());
        for (int i = 0; i < cfg_.m; ++i) delta_parts_[L][i] = agreed[i];
        // Parity-column nodes were inactive during the feedforward, so each
        // row's delta part is broadcast to them.
        ledger_.charge_broadcast(grid_.grid_cols(), g.br);
        return true;
    }

    void zero_padding_tail(Eigen::VectorXd& part, int offset, int logical) const {
        for (Eigen::Index e = 0; e < part.size(); ++e)
            if (offset + e >= logical) part(e) = 0.0;
    }

    // x~_j for the inactive columns, one fused reduce per row in parallel.
    void additional_encoding_x(int l) {
        if (cfg_.t == 0) return;
        const auto& g = layers_[l].geom;
        for (int j = cfg_.n; j < grid_.grid_cols(); ++j) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.bc);
            for (int v = 0; v < cfg_.n; ++v) acc += col_code_.generator(v, j) * x_parts_[l][v];
            x_parts_[l][j] = std::move(acc);
        }
        ledger_.charge_reduce(grid_.grid_cols(), 2.0 * cfg_.t * g.bc);
    }

    void additional_encoding_delta(int l) {
        if (cfg_.t == 0) return;
        const auto& g = layers_[l].geom;
        delta_parts_[l + 1].resize(grid_.grid_rows());
        for (int i = cfg_.m; i < grid_.grid_rows(); ++i) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.br);
            for (int u = 0; u < cfg_.m; ++u) acc += row_code_.generator(u, i) * delta_parts_[l + 1][u];
            delta_parts_[l + 1][i] = std::move(acc);
        }
        ledger_.charge_reduce(grid_.grid_rows(), 2.0 * cfg_.t * g.br);
    }

    // Generates the next layer's input partition from the decoded message
    // rows. On the clean path the parts move with per-column broadcasts; after
    // a decode every node already holds all of s, so no communication is
    // needed.
    void next_input(int l, const Eigen::MatrixXd& message, bool redistribute) {
        const auto& g = layers_[l].geom;
        s_message_ = message;
        if (l + 1 >= num_layers()) return;  // the transition consumes s^L directly

        Eigen::VectorXd x_next_pad(g.rows_pad);
        for (int i = 0; i < cfg_.m; ++i)
            x_next_pad.segment(i * g.br, g.br) =
                activation_f(cfg_.activation, Eigen::VectorXd(message.row(i)));
        Eigen::VectorXd logical = x_next_pad.head(g.n_l);

        const auto& g_next = layers_[l + 1].geom;
        Eigen::VectorXd repad = detail::zero_pad(logical, g_next.cols_pad);
        auto parts = detail::split_parts(repad, cfg_.n);
        x_parts_[l + 1].assign(grid_.grid_cols(), Eigen::VectorXd());
        for (int j = 0; j < cfg_.n; ++j) x_parts_[l + 1][j] = parts[j];

        if (redistribute) {
            int segs = detail::max_redistribution_segments(g.n_l, g.br, cfg_.n, g_next.bc);
            for (int s = 0; s < segs; ++s)
                ledger_.charge_broadcast(grid_.grid_rows(), double(g_next.bc) / segs);
        }
    }

    // delta^{l-1} via the diagonal post-multiplication, column-local, then
    // redistributed to the row partition for the next backprop layer.
    void next_delta(int l, const Eigen::MatrixXd& message) {
        if (l == 0) return;  // delta^0 is never used
        const auto& g = layers_[l].geom;
        Eigen::VectorXd c_pad(g.cols_pad);
        for (int j = 0; j < cfg_.n; ++j) {
            Eigen::VectorXd c_j = message.row(j);
            Eigen::VectorXd d_j = c_j.cwiseProduct(activation_g(cfg_.activation, x_parts_[l][j]));
            zero_padding_tail(d_j, j * g.bc, g.n_lm1);
            c_pad.segment(j * g.bc, g.bc) = d_j;
        }
        Eigen::VectorXd logical = c_pad.head(g.n_lm1);

        const auto& g_prev = layers_[l - 1].geom;
        Eigen::VectorXd repad = detail::zero_pad(logical, g_prev.rows_pad);
        auto parts = detail::split_parts(repad, cfg_.m);
        delta_parts_[l].assign(grid_.grid_rows(), Eigen::VectorXd());
        for (int i = 0; i < cfg_.m; ++i) delta_parts_[l][i] = parts[i];

        int segs = detail::max_redistribution_segments(g.n_lm1, g.bc, cfg_.m, g_prev.br);
        for (int s = 0; s < segs; ++s)
            ledger_.charge_broadcast(grid_.grid_cols(), double(g_prev.br) / segs);
    }

    // Rebuilds the stored blocks of flagged rows from m healthy rows through
    // the row code; the cached x parts at those nodes are refetched from
    // column peers. Preferring systematic rows keeps the common case (a parity
    // row flagged) an exact re-encode.
    void regenerate_rows(int l, const std::vector<int>& flagged) {
        const auto& g = layers_[l].geom;
        std::vector<int> healthy;
        for (int i = 0; i < grid_.grid_rows() && int(healthy.size()) < cfg_.m; ++i)
            if (std::find(flagged.begin(), flagged.end(), i) == flagged.end())
                healthy.push_back(i);
        Eigen::MatrixXd gs(cfg_.m, cfg_.m);
        for (int c = 0; c < cfg_.m; ++c) gs.col(c) = row_code_.generator.col(healthy[c]);
        Eigen::MatrixXd inv = gs.transpose().fullPivLu().inverse();
        for (int f : flagged) {
            Eigen::VectorXd coef = inv.transpose() * row_code_.generator.col(f);
            for (int j = 0; j < cfg_.n; ++j) {
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g.br, g.bc);
                for (int c = 0; c < cfg_.m; ++c) acc += coef(c) * block(l, healthy[c], j);
                block(l, f, j) = std::move(acc);
            }
            // m blocks plus the cached sub-vector travel to each rebuilt node.
            ledger_.charge_transfer(grid_.grid_rows(),
                                    double(cfg_.m) * g.br * g.bc + g.bc);
            ledger_.charge_compute(double(cfg_.m) * g.br * g.bc);
        }
    }

    void regenerate_cols(int l, const std::vector<int>& flagged) {
        const auto& g = layers_[l].geom;
        std::vector<int> healthy;
        for (int j = 0; j < grid_.grid_cols() && int(healthy.size()) < cfg_.n; ++j)
            if (std::find(flagged.begin(), flagged.end(), j) == flagged.end())
                healthy.push_back(j);
        Eigen::MatrixXd gs(cfg_.n, cfg_.n);
        for (int c = 0; c < cfg_.n; ++c) gs.col(c) = col_code_.generator.col(healthy[c]);
        Eigen::MatrixXd inv = gs.transpose().fullPivLu().inverse();
        for (int f : flagged) {
            Eigen::VectorXd coef = inv.transpose() * col_code_.generator.col(f);
            for (int i = 0; i < cfg_.m; ++i) {
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g.br, g.bc);
                for (int c = 0; c < cfg_.n; ++c) acc += coef(c) * block(l, i, healthy[c]);
                block(l, i, f) = std::move(acc);
            }
            ledger_.charge_transfer(grid_.grid_cols(),
                                    double(cfg_.n) * g.br * g.bc + g.br);
            ledger_.charge_compute(double(cfg_.n) * g.br * g.bc);
        }
    }

    struct CodedLayer {
        detail::LayerGeom geom;
        std::vector<Eigen::MatrixXd> blocks;
    };

    GridLayout grid_;
    MdsCode row_code_;
    MdsCode col_code_;
    std::vector<CodedLayer> layers_;
    // Transients, refreshed every iteration. x_parts_[l] is the input
    // partition of layer l (0-based); delta_parts_[l+1] holds that layer's
    // delta partition.
    std::vector<std::vector<Eigen::VectorXd>> x_parts_;
    std::vector<std::vector<Eigen::VectorXd>> delta_parts_;
    Eigen::MatrixXd s_message_;
    Eigen::VectorXd last_estimate_;
    double last_loss_ = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Replication

// Two mirrored m x n grids with independent fault draws. After every
// matrix-vector stage the replicas compare outputs; any mismatch rolls the
// run back to the last checkpoint. There is no correction path. Output
// exchange is not charged, mirroring the optimistic replication cost
// accounting the comparison baseline uses.
class ReplicationStrategy : public Strategy {
  public:
    explicit ReplicationStrategy(const StrategyConfig& cfg) : Strategy(cfg) {
        DnnState init = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
        const int L = static_cast<int>(init.weights.size());
        geoms_.resize(L);
        for (int g = 0; g < 2; ++g) blocks_[g].resize(L);
        x_parts_.assign(L + 1, {});
        delta_parts_.assign(L + 1, {});
        for (int l = 0; l < L; ++l) {
            geoms_[l] = detail::LayerGeom(cfg.dims[l + 1], cfg.dims[l], cfg.m, cfg.n);
            const auto& g = geoms_[l];
            Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(g.rows_pad, g.cols_pad);
            padded.topLeftCorner(g.n_l, g.n_lm1) = init.weights[l];
            for (int grid = 0; grid < 2; ++grid) {
                blocks_[grid][l].resize(cfg.m * cfg.n);
                for (int i = 0; i < cfg.m; ++i)
                    for (int j = 0; j < cfg.n; ++j)
                        blocks_[grid][l][i * cfg.n + j] =
                            padded.block(i * g.br, j * g.bc, g.br, g.bc);
            }
        }
    }

    StrategyKind kind() const override { return StrategyKind::Replication; }
    int node_count() const override { return 2 * cfg_.m * cfg_.n; }
    int num_layers() const { return static_cast<int>(geoms_.size()); }

    Eigen::MatrixXd& block(int grid, int l, int i, int j) {
        return blocks_[grid][l][i * cfg_.n + j];
    }

    IterationOutcome run_iteration(const Eigen::VectorXd& data, const Eigen::VectorXd& label,
                                   long iteration) override {
        stage_reset();
        IterationOutcome out;
        const int L = num_layers();
        x_parts_[0] = detail::split_parts(detail::zero_pad(data, geoms_[0].cols_pad), cfg_.n);

        // Feedforward with per-layer replica comparison.
        Eigen::MatrixXd s_agreed;
        for (int l = 0; l < L; ++l) {
            stage_begin();
            bool ok = feedforward_layer(l, iteration, s_agreed);
            stage_end(l + 1, 'f');
            if (!ok) {
                out.kind = IterationOutcome::Kind::RolledBack;
                out.cause = RollbackCause::ReplicaMismatch;
                return out;
            }
        }

        // Transition: both replicas derive delta^L from the shared label.
        stage_begin();
        const auto& gl = geoms_[L - 1];
        Eigen::VectorXd label_pad = detail::zero_pad(label, gl.rows_pad);
        std::vector<Eigen::VectorXd> delta_copies[2];
        for (int grid = 0; grid < 2; ++grid) {
            delta_copies[grid].resize(cfg_.m);
            for (int i = 0; i < cfg_.m; ++i) {
                Eigen::VectorXd s_i = s_agreed.row(i);
                Eigen::VectorXd y_i = activation_f(cfg_.activation, s_i);
                Eigen::VectorXd d =
                    2.0 * (label_pad.segment(i * gl.br, gl.br) - y_i)
                              .cwiseProduct(activation_g(cfg_.activation, y_i));
                zero_tail(d, i * gl.br, gl.n_l);
                faults_.maybe_corrupt({iteration, L, StepKind::Transition, i, 0, grid}, d);
                delta_copies[grid][i] = std::move(d);
            }
        }
        Eigen::VectorXd yhat_pad(gl.rows_pad);
        for (int i = 0; i < cfg_.m; ++i)
            yhat_pad.segment(i * gl.br, gl.br) =
                activation_f(cfg_.activation, Eigen::VectorXd(s_agreed.row(i)));
        out.loss = squared_error(yhat_pad.head(gl.n_l), label);
        for (int i = 0; i < cfg_.m; ++i)
            if ((delta_copies[0][i].array() != delta_copies[1][i].array()).any()) {
                stage_end(L, 't');
                out.kind = IterationOutcome::Kind::RolledBack;
                out.cause = RollbackCause::ReplicaMismatch;
                return out;
            }
        delta_parts_[L] = delta_copies[0];
        stage_end(L, 't');

        for (int l = L - 1; l >= 0; --l) {
            stage_begin();
            bool ok = backprop_layer(l, iteration);
            stage_end(l + 1, 'b');
            if (!ok) {
                out.kind = IterationOutcome::Kind::RolledBack;
                out.cause = RollbackCause::ReplicaMismatch;
                return out;
            }
        }

        for (int l = 0; l < L; ++l) {
            stage_begin();
            const auto& g = geoms_[l];
            for (int grid = 0; grid < 2; ++grid)
                for (int i = 0; i < cfg_.m; ++i)
                    for (int j = 0; j < cfg_.n; ++j) {
                        Eigen::MatrixXd& b = block(grid, l, i, j);
                        b += cfg_.eta * delta_parts_[l + 1][i] * x_parts_[l][j].transpose();
                        faults_.maybe_corrupt({iteration, l + 1, StepKind::O3, i, j, grid}, b);
                    }
            ledger_.charge_compute(2.0 * g.br * g.bc);
            stage_end(l + 1, 'u');
        }

        out.kind = IterationOutcome::Kind::Clean;
        return out;
    }

    bool state_fit_for_checkpoint() const override {
        for (int l = 0; l < num_layers(); ++l)
            for (std::size_t b = 0; b < blocks_[0][l].size(); ++b)
                if ((blocks_[0][l][b].array() != blocks_[1][l][b].array()).any()) return false;
        return true;
    }

    Checkpoint make_checkpoint(long iteration) const override {
        Checkpoint ckpt;
        ckpt.strategy = StrategyKind::Replication;
        ckpt.iteration = static_cast<std::uint64_t>(iteration);
        ckpt.rng_cursor_lo = faults_.epoch();
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = geoms_[l];
            ckpt.layers.push_back({std::uint32_t(g.n_l), std::uint32_t(g.n_lm1),
                                   std::uint16_t(cfg_.m), std::uint16_t(cfg_.n), 0});
            std::vector<Eigen::MatrixXd> scan;
            for (int grid = 0; grid < 2; ++grid)
                for (const auto& b : blocks_[grid][l]) scan.push_back(b);
            ckpt.blocks.push_back(std::move(scan));
        }
        return ckpt;
    }

    void restore_state(const Checkpoint& ckpt) override {
        for (int l = 0; l < num_layers(); ++l) {
            std::size_t idx = 0;
            for (int grid = 0; grid < 2; ++grid)
                for (auto& b : blocks_[grid][l]) b = ckpt.blocks[l][idx++];
        }
    }

    DnnState assembled_weights() const override { return assemble_grid(0); }

  private:
    void zero_tail(Eigen::VectorXd& part, int offset, int logical) const {
        for (Eigen::Index e = 0; e < part.size(); ++e)
            if (offset + e >= logical) part(e) = 0.0;
    }

    bool feedforward_layer(int l, long iteration, Eigen::MatrixXd& s_agreed) {
        const auto& g = geoms_[l];
        Eigen::MatrixXd s[2];
        for (int grid = 0; grid < 2; ++grid) {
            s[grid].resize(cfg_.m, g.br);
            for (int i = 0; i < cfg_.m; ++i) {
                std::vector<Eigen::VectorXd> prods(cfg_.n);
                for (int j = 0; j < cfg_.n; ++j) {
                    Eigen::VectorXd p = block(grid, l, i, j) * x_parts_[l][j];
                    faults_.maybe_corrupt({iteration, l + 1, StepKind::O1, i, j, grid}, p);
                    prods[j] = std::move(p);
                }
                s[grid].row(i) = sum_in_order(prods);
            }
        }
        ledger_.charge_compute(2.0 * g.br * g.bc);
        ledger_.charge_reduce(cfg_.n, g.br);
        if ((s[0].array() != s[1].array()).any()) return false;
        s_agreed = s[0];

        if (l + 1 < num_layers()) {
            Eigen::VectorXd x_next_pad(g.rows_pad);
            for (int i = 0; i < cfg_.m; ++i)
                x_next_pad.segment(i * g.br, g.br) =
                    activation_f(cfg_.activation, Eigen::VectorXd(s_agreed.row(i)));
            const auto& g_next = geoms_[l + 1];
            Eigen::VectorXd repad =
                detail::zero_pad(x_next_pad.head(g.n_l), g_next.cols_pad);
            x_parts_[l + 1] = detail::split_parts(repad, cfg_.n);
            int segs = detail::max_redistribution_segments(g.n_l, g.br, cfg_.n, g_next.bc);
            for (int sgi = 0; sgi < segs; ++sgi)
                ledger_.charge_broadcast(cfg_.m, double(g_next.bc) / segs);
        }
        return true;
    }

    bool backprop_layer(int l, long iteration) {
        const auto& g = geoms_[l];
        Eigen::MatrixXd c[2];
        for (int grid = 0; grid < 2; ++grid) {
            c[grid].resize(cfg_.n, g.bc);
            for (int j = 0; j < cfg_.n; ++j) {
                std::vector<Eigen::VectorXd> prods(cfg_.m);
                for (int i = 0; i < cfg_.m; ++i) {
                    Eigen::VectorXd q =
                        block(grid, l, i, j).transpose() * delta_parts_[l + 1][i];
                    faults_.maybe_corrupt({iteration, l + 1, StepKind::O2, i, j, grid}, q);
                    prods[i] = std::move(q);
                }
                c[grid].row(j) = sum_in_order(prods);
            }
        }
        ledger_.charge_compute(2.0 * g.br * g.bc);
        ledger_.charge_reduce(cfg_.m, g.bc);
        if ((c[0].array() != c[1].array()).any()) return false;

        if (l > 0) {
            Eigen::VectorXd c_pad(g.cols_pad);
            for (int j = 0; j < cfg_.n; ++j) {
                Eigen::VectorXd d_j = Eigen::VectorXd(c[0].row(j))
                                          .cwiseProduct(activation_g(cfg_.activation,
                                                                     x_parts_[l][j]));
                zero_tail(d_j, j * g.bc, g.n_lm1);
                c_pad.segment(j * g.bc, g.bc) = d_j;
            }
            const auto& g_prev = geoms_[l - 1];
            Eigen::VectorXd repad = detail::zero_pad(c_pad.head(g.n_lm1), g_prev.rows_pad);
            delta_parts_[l] = detail::split_parts(repad, cfg_.m);
            int segs = detail::max_redistribution_segments(g.n_lm1, g.bc, cfg_.m, g_prev.br);
            for (int sgi = 0; sgi < segs; ++sgi)
                ledger_.charge_broadcast(cfg_.n, double(g_prev.br) / segs);
        }
        return true;
    }

    DnnState assemble_grid(int grid) const {
        DnnState state;
        state.learning_rate = cfg_.eta;
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = geoms_[l];
            Eigen::MatrixXd padded(g.rows_pad, g.cols_pad);
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = 0; j < cfg_.n; ++j)
                    padded.block(i * g.br, j * g.bc, g.br, g.bc) =
                        blocks_[grid][l][i * cfg_.n + j];
            state.layers.push_back({g.n_lm1, g.n_l, cfg_.activation});
            state.weights.push_back(padded.topLeftCorner(g.n_l, g.n_lm1));
        }
        return state;
    }

    std::vector<detail::LayerGeom> geoms_;
    std::vector<std::vector<Eigen::MatrixXd>> blocks_[2];
    std::vector<std::vector<Eigen::VectorXd>> x_parts_;
    std::vector<std::vector<Eigen::VectorXd>> delta_parts_;
};

// ---------------------------------------------------------------------------
// Uncoded

// A bare m x n grid that performs no error detection at all; faults land in
// products and stored blocks and simply persist.
class UncodedStrategy : public Strategy {
  public:
    explicit UncodedStrategy(const StrategyConfig& cfg) : Strategy(cfg) {
        DnnState init = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
        const int L = static_cast<int>(init.weights.size());
        geoms_.resize(L);
        blocks_.resize(L);
        x_parts_.assign(L + 1, {});
        delta_parts_.assign(L + 1, {});
        for (int l = 0; l < L; ++l) {
            geoms_[l] = detail::LayerGeom(cfg.dims[l + 1], cfg.dims[l], cfg.m, cfg.n);
            const auto& g = geoms_[l];
            Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(g.rows_pad, g.cols_pad);
            padded.topLeftCorner(g.n_l, g.n_lm1) = init.weights[l];
            blocks_[l].resize(cfg.m * cfg.n);
            for (int i = 0; i < cfg.m; ++i)
                for (int j = 0; j < cfg.n; ++j)
                    blocks_[l][i * cfg.n + j] = padded.block(i * g.br, j * g.bc, g.br, g.bc);
        }
    }

    StrategyKind kind() const override { return StrategyKind::Uncoded; }
    int node_count() const override { return cfg_.m * cfg_.n; }
    int num_layers() const { return static_cast<int>(geoms_.size()); }
    Eigen::MatrixXd& block(int l, int i, int j) { return blocks_[l][i * cfg_.n + j]; }

    IterationOutcome run_iteration(const Eigen::VectorXd& data, const Eigen::VectorXd& label,
                                   long iteration) override {
        stage_reset();
        IterationOutcome out;
        const int L = num_layers();
        x_parts_[0] = detail::split_parts(detail::zero_pad(data, geoms_[0].cols_pad), cfg_.n);

        Eigen::MatrixXd s;
        for (int l = 0; l < L; ++l) {
            stage_begin();
            const auto& g = geoms_[l];
            s.resize(cfg_.m, g.br);
            for (int i = 0; i < cfg_.m; ++i) {
                std::vector<Eigen::VectorXd> prods(cfg_.n);
                for (int j = 0; j < cfg_.n; ++j) {
                    Eigen::VectorXd p = block(l, i, j) * x_parts_[l][j];
                    faults_.maybe_corrupt({iteration, l + 1, StepKind::O1, i, j, 0}, p);
                    prods[j] = std::move(p);
                }
                s.row(i) = sum_in_order(prods);
            }
            ledger_.charge_compute(2.0 * g.br * g.bc);
            ledger_.charge_reduce(cfg_.n, g.br);
            if (l + 1 < L) {
                Eigen::VectorXd x_next_pad(g.rows_pad);
                for (int i = 0; i < cfg_.m; ++i)
                    x_next_pad.segment(i * g.br, g.br) =
                        activation_f(cfg_.activation, Eigen::VectorXd(s.row(i)));
                const auto& g_next = geoms_[l + 1];
                x_parts_[l + 1] = detail::split_parts(
                    detail::zero_pad(x_next_pad.head(g.n_l), g_next.cols_pad), cfg_.n);
                int segs =
                    detail::max_redistribution_segments(g.n_l, g.br, cfg_.n, g_next.bc);
                for (int sgi = 0; sgi < segs; ++sgi)
                    ledger_.charge_broadcast(cfg_.m, double(g_next.bc) / segs);
            }
            stage_end(l + 1, 'f');
        }

        stage_begin();
        const auto& gl = geoms_[L - 1];
        Eigen::VectorXd label_pad = detail::zero_pad(label, gl.rows_pad);
        delta_parts_[L].resize(cfg_.m);
        Eigen::VectorXd yhat_pad(gl.rows_pad);
        for (int i = 0; i < cfg_.m; ++i) {
            Eigen::VectorXd s_i = s.row(i);
            Eigen::VectorXd y_i = activation_f(cfg_.activation, s_i);
            yhat_pad.segment(i * gl.br, gl.br) = y_i;
            Eigen::VectorXd d = 2.0 * (label_pad.segment(i * gl.br, gl.br) - y_i)
                                          .cwiseProduct(activation_g(cfg_.activation, y_i));
            zero_tail(d, i * gl.br, gl.n_l);
            faults_.maybe_corrupt({iteration, L, StepKind::Transition, i, 0, 0}, d);
            delta_parts_[L][i] = std::move(d);
        }
        out.loss = squared_error(yhat_pad.head(gl.n_l), label);
        stage_end(L, 't');

        for (int l = L - 1; l >= 0; --l) {
            stage_begin();
            const auto& g = geoms_[l];
            Eigen::MatrixXd c(cfg_.n, g.bc);
            for (int j = 0; j < cfg_.n; ++j) {
                std::vector<Eigen::VectorXd> prods(cfg_.m);
                for (int i = 0; i < cfg_.m; ++i) {
                    Eigen::VectorXd q = block(l, i, j).transpose() * delta_parts_[l + 1][i];
                    faults_.maybe_corrupt({iteration, l + 1, StepKind::O2, i, j, 0}, q);
                    prods[i] = std::move(q);
                }
                c.row(j) = sum_in_order(prods);
            }
            ledger_.charge_compute(2.0 * g.br * g.bc);
            ledger_.charge_reduce(cfg_.m, g.bc);
            if (l > 0) {
                Eigen::VectorXd c_pad(g.cols_pad);
                for (int j = 0; j < cfg_.n; ++j) {
                    Eigen::VectorXd d_j =
                        Eigen::VectorXd(c.row(j)).cwiseProduct(
                            activation_g(cfg_.activation, x_parts_[l][j]));
                    zero_tail(d_j, j * g.bc, g.n_lm1);
                    c_pad.segment(j * g.bc, g.bc) = d_j;
                }
                const auto& g_prev = geoms_[l - 1];
                delta_parts_[l] = detail::split_parts(
                    detail::zero_pad(c_pad.head(g.n_lm1), g_prev.rows_pad), cfg_.m);
                int segs =
                    detail::max_redistribution_segments(g.n_lm1, g.bc, cfg_.m, g_prev.br);
                for (int sgi = 0; sgi < segs; ++sgi)
                    ledger_.charge_broadcast(cfg_.n, double(g_prev.br) / segs);
            }
            stage_end(l + 1, 'b');
        }

        for (int l = 0; l < L; ++l) {
            stage_begin();
            const auto& g = geoms_[l];
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = 0; j < cfg_.n; ++j) {
                    Eigen::MatrixXd& b = block(l, i, j);
                    b += cfg_.eta * delta_parts_[l + 1][i] * x_parts_[l][j].transpose();
                    faults_.maybe_corrupt({iteration, l + 1, StepKind::O3, i, j, 0}, b);
                }
            ledger_.charge_compute(2.0 * g.br * g.bc);
            stage_end(l + 1, 'u');
        }

        out.kind = IterationOutcome::Kind::Clean;
        return out;
    }

    Checkpoint make_checkpoint(long iteration) const override {
        Checkpoint ckpt;
        ckpt.strategy = StrategyKind::Uncoded;
        ckpt.iteration = static_cast<std::uint64_t>(iteration);
        ckpt.rng_cursor_lo = faults_.epoch();
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = geoms_[l];
            ckpt.layers.push_back({std::uint32_t(g.n_l), std::uint32_t(g.n_lm1),
                                   std::uint16_t(cfg_.m), std::uint16_t(cfg_.n), 0});
            ckpt.blocks.push_back(blocks_[l]);
        }
        return ckpt;
    }

    void restore_state(const Checkpoint& ckpt) override {
        for (int l = 0; l < num_layers(); ++l) blocks_[l] = ckpt.blocks[l];
    }

    DnnState assembled_weights() const override {
        DnnState state;
        state.learning_rate = cfg_.eta;
        for (int l = 0; l < num_layers(); ++l) {
            const auto& g = geoms_[l];
            Eigen::MatrixXd padded(g.rows_pad, g.cols_pad);
            for (int i = 0; i < cfg_.m; ++i)
                for (int j = 0; j < cfg_.n; ++j)
                    padded.block(i * g.br, j * g.bc, g.br, g.bc) = blocks_[l][i * cfg_.n + j];
            state.layers.push_back({g.n_lm1, g.n_l, cfg_.activation});
            state.weights.push_back(padded.topLeftCorner(g.n_l, g.n_lm1));
        }
        return state;
    }

  private:
    void zero_tail(Eigen::VectorXd& part, int offset, int logical) const {
        for (Eigen::Index e = 0; e < part.size(); ++e)
            if (offset + e >= logical) part(e) = 0.0;
    }

    std::vector<detail::LayerGeom> geoms_;
    std::vector<std::vector<Eigen::MatrixXd>> blocks_;
    std::vector<std::vector<Eigen::VectorXd>> x_parts_;
    std::vector<std::vector<Eigen::VectorXd>> delta_parts_;
};

inline std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg) {
    switch (cfg.kind) {
        case StrategyKind::CodeNet: return std::make_unique<CodenetStrategy>(cfg);
        case StrategyKind::Replication: return std::make_unique<ReplicationStrategy>(cfg);
        case StrategyKind::Uncoded: return std::make_unique<UncodedStrategy>(cfg);
    }
    throw std::invalid_argument("make_strategy: unknown kind");
}

}  // namespace codenet
