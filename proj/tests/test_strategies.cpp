#include "codenet/strategies.hpp"
#include "codenet/training.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace codenet;

namespace {

Eigen::MatrixXd paper_row_parity() {
    Eigen::MatrixXd a(2, 2);
    a << 1, 1, 1, -1;
    return a;
}

Eigen::MatrixXd paper_col_parity() {
    Eigen::MatrixXd a(2, 2);
    a << 1, 1, 1, 2;
    return a;
}

StrategyConfig base_config(StrategyKind kind, std::vector<int> dims, int m, int n, int t,
                           std::uint64_t seed = 7) {
    StrategyConfig cfg;
    cfg.kind = kind;
    cfg.dims = std::move(dims);
    cfg.m = m;
    cfg.n = n;
    cfg.t = t;
    cfg.eta = 0.1;
    cfg.seed = seed;
    cfg.alpha = 1.0;
    cfg.beta = 0.01;
    cfg.gamma = 1e-6;
    cfg.tau_f = 1.0;
    cfg.tau_b = 50.0;
    cfg.tau_cpt = 10.0;
    return cfg;
}

std::vector<Sample> make_samples(int count, int in_dim, int out_dim, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Sample> out;
    for (int k = 0; k < count; ++k) {
        Sample s;
        s.x.resize(in_dim);
        for (int i = 0; i < in_dim; ++i) s.x(i) = u(eng);
        s.y = Eigen::VectorXd::Zero(out_dim);
        s.y(k % out_dim) = 1.0;
        out.push_back(std::move(s));
    }
    return out;
}

// Single-node reference trajectory from the same seed and sample order.
DnnState oracle_run(const StrategyConfig& cfg, const std::vector<Sample>& samples, long iters) {
    DnnState state = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
    for (long k = 0; k < iters; ++k) {
        const Sample& s = samples[k % samples.size()];
        ForwardTrace trace = oracle_feedforward(state, s.x);
        auto deltas = oracle_backprop(state, trace, s.y);
        oracle_update(state, trace, deltas);
    }
    return state;
}

double max_weight_diff(const DnnState& a, const DnnState& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        worst = std::max(worst, (a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff());
    return worst;
}

double rel_weight_diff(const DnnState& a, const DnnState& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        double scale = 1.0 + b.weights[l].cwiseAbs().maxCoeff();
        worst = std::max(worst,
                         (a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

// Freshly encodes the base blocks and reports the worst parity-block drift.
double parity_drift(const CodenetStrategy& strat) {
    double worst = 0.0;
    const auto& grid = strat.grid();
    const auto& gr = strat.row_code().generator;
    const auto& gc = strat.col_code().generator;
    const int m = grid.m, n = grid.n;
    for (int l = 0; l < strat.num_layers(); ++l) {
        for (int i = m; i < grid.grid_rows(); ++i)
            for (int j = 0; j < n; ++j) {
                Eigen::MatrixXd fresh =
                    Eigen::MatrixXd::Zero(strat.geom(l).br, strat.geom(l).bc);
                for (int u = 0; u < m; ++u) fresh += gr(u, i) * strat.block(l, u, j);
                double scale = 1.0 + fresh.cwiseAbs().maxCoeff();
                worst = std::max(
                    worst, (strat.block(l, i, j) - fresh).cwiseAbs().maxCoeff() / scale);
            }
        for (int i = 0; i < m; ++i)
            for (int j = n; j < grid.grid_cols(); ++j) {
                Eigen::MatrixXd fresh =
                    Eigen::MatrixXd::Zero(strat.geom(l).br, strat.geom(l).bc);
                for (int v = 0; v < n; ++v) fresh += gc(v, j) * strat.block(l, i, v);
                double scale = 1.0 + fresh.cwiseAbs().maxCoeff();
                worst = std::max(
                    worst, (strat.block(l, i, j) - fresh).cwiseAbs().maxCoeff() / scale);
            }
    }
    return worst;
}

}  // namespace

TEST_CASE("initial encoding matches the toy example blocks") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {4, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg, MdsCode::with_parity(2, paper_row_parity()),
                          MdsCode::with_parity(2, paper_col_parity()));
    for (int j = 0; j < 2; ++j) {
        REQUIRE((strat.block(0, 2, j) - (strat.block(0, 0, j) + strat.block(0, 1, j)))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-15);
        REQUIRE((strat.block(0, 3, j) - (strat.block(0, 0, j) - strat.block(0, 1, j)))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-15);
    }
    for (int i = 0; i < 2; ++i) {
        REQUIRE((strat.block(0, i, 2) - (strat.block(0, i, 0) + strat.block(0, i, 1)))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-15);
        REQUIRE((strat.block(0, i, 3) - (strat.block(0, i, 0) + 2 * strat.block(0, i, 1)))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-15);
    }
    REQUIRE(strat.node_count() == 12);
}

TEST_CASE("zero weights encode to zero parity blocks") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {4, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    DnnState zero = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
    for (auto& w : zero.weights) w.setZero();
    strat.setup(zero);
    REQUIRE(parity_drift(strat) == 0.0);
}

TEST_CASE("random weights re-encode to the stored parity blocks") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {7, 5, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    REQUIRE(parity_drift(strat) <= 1e-12);
}

TEST_CASE("fault-free codenet iteration tracks the oracle") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(8, 6, 4, 3);
    for (long k = 0; k < 5; ++k) {
        IterationOutcome out = strat.run_iteration(samples[k].x, samples[k].y, k);
        REQUIRE(out.kind == IterationOutcome::Kind::Clean);
    }
    DnnState oracle = oracle_run(cfg, samples, 5);
    REQUIRE(max_weight_diff(strat.assembled_weights(), oracle) <= 1e-12);
}

TEST_CASE("one O1 fault is corrected in place and the row regenerated") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({0, 1, StepKind::O1, 1, 0, 0});
    CodenetStrategy strat(cfg);
    auto samples = make_samples(4, 6, 4, 5);

    IterationOutcome out = strat.run_iteration(samples[0].x, samples[0].y, 0);
    REQUIRE(out.kind == IterationOutcome::Kind::Corrected);
    REQUIRE(out.corrections.size() == 1);
    REQUIRE(out.corrections[0].layer == 1);
    REQUIRE(out.corrections[0].stage == StepKind::O1);
    REQUIRE(out.corrections[0].locations == std::vector<int>{1});

    StrategyConfig clean_cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    CodenetStrategy reference(clean_cfg);
    reference.run_iteration(samples[0].x, samples[0].y, 0);
    REQUIRE(rel_weight_diff(strat.assembled_weights(), reference.assembled_weights()) <= 1e-9);
    // The flagged row's stored blocks were rebuilt from healthy peers.
    for (int j = 0; j < 2; ++j)
        REQUIRE((strat.block(0, 1, j) - reference.block(0, 1, j)).cwiseAbs().maxCoeff() <=
                1e-9);
}

TEST_CASE("t+1 corrupted rows force a rollback signal") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({0, 1, StepKind::O1, 0, 0, 0});
    cfg.faults.schedule.push_back({0, 1, StepKind::O1, 1, 1, 0});
    CodenetStrategy strat(cfg);
    auto samples = make_samples(2, 6, 4, 5);
    IterationOutcome out = strat.run_iteration(samples[0].x, samples[0].y, 0);
    REQUIRE(out.kind == IterationOutcome::Kind::RolledBack);
    REQUIRE(out.cause == RollbackCause::TooManyErrors);
}

TEST_CASE("one O2 fault is corrected during backprop") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({0, 2, StepKind::O2, 0, 1, 0});
    CodenetStrategy strat(cfg);
    auto samples = make_samples(2, 6, 4, 9);
    IterationOutcome out = strat.run_iteration(samples[0].x, samples[0].y, 0);
    REQUIRE(out.kind == IterationOutcome::Kind::Corrected);
    REQUIRE(out.corrections.size() == 1);
    REQUIRE(out.corrections[0].layer == 2);
    REQUIRE(out.corrections[0].stage == StepKind::O2);
    REQUIRE(out.corrections[0].locations == std::vector<int>{1});

    DnnState oracle = oracle_run(cfg, samples, 1);
    REQUIRE(rel_weight_diff(strat.assembled_weights(), oracle) <= 1e-9);
}

TEST_CASE("delta encoding uses the row code like the toy example") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {4, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg, MdsCode::with_parity(2, paper_row_parity()),
                          MdsCode::with_parity(2, paper_col_parity()));
    auto samples = make_samples(1, 4, 4, 11);
    strat.run_iteration(samples[0].x, samples[0].y, 0);
    const auto& deltas = strat.cached_delta_parts(1);
    REQUIRE((deltas[2] - (deltas[0] + deltas[1])).cwiseAbs().maxCoeff() <= 1e-15);
    REQUIRE((deltas[3] - (deltas[0] - deltas[1])).cwiseAbs().maxCoeff() <= 1e-15);
    const auto& xs = strat.cached_x_parts(0);
    REQUIRE((xs[2] - (xs[0] + xs[1])).cwiseAbs().maxCoeff() <= 1e-15);
    REQUIRE((xs[3] - (xs[0] + 2 * xs[1])).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("coded update identity holds blockwise") {
    // W~_{0,3} updated with x~_3 equals W_{0,0} + 2 W_{0,1} after their own
    // updates, per the column-code combination.
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {4, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg, MdsCode::with_parity(2, paper_row_parity()),
                          MdsCode::with_parity(2, paper_col_parity()));
    auto samples = make_samples(1, 4, 4, 13);
    strat.run_iteration(samples[0].x, samples[0].y, 0);
    Eigen::MatrixXd combo = strat.block(0, 0, 0) + 2 * strat.block(0, 0, 1);
    REQUIRE((strat.block(0, 0, 3) - combo).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero gradient leaves every block unchanged") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {4, 3}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(1, 4, 3, 17);
    // Use the current prediction as the label: delta^L is exactly zero.
    DnnState oracle = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
    Eigen::VectorXd label = oracle_feedforward(oracle, samples[0].x).output;
    Eigen::MatrixXd before = strat.block(0, 2, 1);
    IterationOutcome out = strat.run_iteration(samples[0].x, label, 0);
    REQUIRE(out.kind == IterationOutcome::Kind::Clean);
    REQUIRE((strat.block(0, 2, 1).array() == before.array()).all());
}

TEST_CASE("parity blocks stay consistent across fault-free training") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(16, 6, 4, 19);
    for (long k = 0; k < 100; ++k)
        strat.run_iteration(samples[k % samples.size()].x, samples[k % samples.size()].y, k);
    REQUIRE(parity_drift(strat) <= 1e-10);
}

TEST_CASE("oracle equivalence holds per iteration for every strategy, with padding") {
    // 5 and 3 do not divide by the 2x2 grid, so padded rows and columns are
    // in play the whole way.
    std::vector<int> dims{5, 3, 4};
    auto samples = make_samples(12, 5, 4, 23);
    DnnState oracle = make_dnn(dims, Activation::Sigmoid, 0.1, 7);

    StrategyConfig cdn = base_config(StrategyKind::CodeNet, dims, 2, 2, 1);
    StrategyConfig rep = base_config(StrategyKind::Replication, dims, 2, 2, 0);
    StrategyConfig unc = base_config(StrategyKind::Uncoded, dims, 2, 2, 0);
    CodenetStrategy s_cdn(cdn);
    ReplicationStrategy s_rep(rep);
    UncodedStrategy s_unc(unc);

    for (long k = 0; k < 30; ++k) {
        const Sample& s = samples[k % samples.size()];
        ForwardTrace trace = oracle_feedforward(oracle, s.x);
        auto deltas = oracle_backprop(oracle, trace, s.y);
        oracle_update(oracle, trace, deltas);
        s_cdn.run_iteration(s.x, s.y, k);
        s_rep.run_iteration(s.x, s.y, k);
        s_unc.run_iteration(s.x, s.y, k);
        REQUIRE(max_weight_diff(s_cdn.assembled_weights(), oracle) <= 1e-12);
        REQUIRE(max_weight_diff(s_rep.assembled_weights(), oracle) <= 1e-12);
        REQUIRE(max_weight_diff(s_unc.assembled_weights(), oracle) <= 1e-12);
    }
}

TEST_CASE("replication detects any single fault and rolls back") {
    StrategyConfig cfg = base_config(StrategyKind::Replication, {6, 4}, 2, 2, 0);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({5, 1, StepKind::O1, 0, 1, 1});
    ReplicationStrategy strat(cfg);
    auto samples = make_samples(10, 6, 4, 29);
    RunParams params;
    params.iterations = 10;
    params.checkpoint_period = 1;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.rolled_back == 1);
    REQUIRE(sum.attempts == 11);
    REQUIRE(sum.reports[5].outcome.cause == RollbackCause::ReplicaMismatch);
    DnnState oracle = oracle_run(cfg, samples, 10);
    REQUIRE(max_weight_diff(strat.assembled_weights(), oracle) <= 1e-12);
}

TEST_CASE("identical faults in both replicas slip through undetected") {
    // The documented replication blind spot: grid = -1 plants the same noise
    // in both copies, the comparison passes, and the corruption persists.
    StrategyConfig cfg = base_config(StrategyKind::Replication, {6, 4}, 2, 2, 0);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({2, 1, StepKind::O3, 0, 0, -1});
    ReplicationStrategy strat(cfg);
    auto samples = make_samples(6, 6, 4, 31);
    RunParams params;
    params.iterations = 6;
    params.checkpoint_period = 6;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.rolled_back == 0);
    DnnState oracle = oracle_run(cfg, samples, 6);
    REQUIRE(max_weight_diff(strat.assembled_weights(), oracle) > 1e-6);
}

TEST_CASE("replication refuses to checkpoint diverged replicas") {
    // An update-stage fault in one replica right before a checkpoint boundary
    // must not be persisted; the run falls back to the previous checkpoint
    // and replays cleanly.
    StrategyConfig cfg = base_config(StrategyKind::Replication, {6, 4}, 2, 2, 0);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({1, 1, StepKind::O3, 0, 0, 0});
    ReplicationStrategy strat(cfg);
    auto samples = make_samples(4, 6, 4, 37);
    RunParams params;
    params.iterations = 4;
    params.checkpoint_period = 2;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.rolled_back == 1);
    REQUIRE(sum.completed == 4);
    DnnState oracle = oracle_run(cfg, samples, 4);
    REQUIRE(max_weight_diff(strat.assembled_weights(), oracle) <= 1e-12);
}

TEST_CASE("uncoded ignores faults and the corruption persists") {
    StrategyConfig cfg = base_config(StrategyKind::Uncoded, {6, 4}, 2, 2, 0);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({2, 1, StepKind::O3, 1, 0, 0});
    UncodedStrategy strat(cfg);
    auto samples = make_samples(8, 6, 4, 41);
    RunParams params;
    params.iterations = 8;
    params.checkpoint_period = 8;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.clean == 8);
    REQUIRE(sum.rolled_back == 0);
    DnnState oracle = oracle_run(cfg, samples, 8);
    REQUIRE(max_weight_diff(strat.assembled_weights(), oracle) > 1e-6);
}

TEST_CASE("clean run bookkeeping matches the closed-form coarse clock") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(10, 6, 4, 43);
    RunParams params;
    params.iterations = 10;
    params.checkpoint_period = 4;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.clean == 10);
    REQUIRE(sum.corrected == 0);
    REQUIRE(sum.rolled_back == 0);
    // ceil(10/4) = 3 checkpoints.
    REQUIRE(sum.coarse_time == Catch::Approx(3 * cfg.tau_cpt + 10 * cfg.tau_f));
}

TEST_CASE("a single corrected iteration charges tau_b on the coarse clock") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({5, 1, StepKind::O1, 1, 0, 0});
    CodenetStrategy strat(cfg);
    auto samples = make_samples(10, 6, 4, 47);
    RunParams params;
    params.iterations = 10;
    params.checkpoint_period = 4;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.clean == 9);
    REQUIRE(sum.corrected == 1);
    REQUIRE(sum.rolled_back == 0);
    REQUIRE(sum.coarse_time ==
            Catch::Approx(3 * cfg.tau_cpt + 9 * cfg.tau_f + cfg.tau_b));
}

TEST_CASE("rollback replays are bit-identical to a never-faulted run") {
    // Two O1 faults exceed t = 1 at iteration 3, forcing a rollback to the
    // iteration-0 checkpoint. Scheduled faults do not re-fire on the replay,
    // so the final state must equal the clean run bit for bit.
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({3, 1, StepKind::O1, 0, 0, 0});
    cfg.faults.schedule.push_back({3, 1, StepKind::O1, 1, 1, 0});
    CodenetStrategy faulted(cfg);
    auto samples = make_samples(6, 6, 4, 53);
    RunParams params;
    params.iterations = 6;
    params.checkpoint_period = 10;
    params.eval_every = 0;
    RunSummary sum = run_training(faulted, samples, {}, params);
    REQUIRE(sum.rolled_back == 1);
    REQUIRE(sum.reports[3].outcome.cause == RollbackCause::TooManyErrors);

    StrategyConfig clean_cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    CodenetStrategy clean(clean_cfg);
    RunSummary clean_sum = run_training(clean, samples, {}, params);
    REQUIRE(clean_sum.rolled_back == 0);

    DnnState a = faulted.assembled_weights();
    DnnState b = clean.assembled_weights();
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        REQUIRE((a.weights[l].array() == b.weights[l].array()).all());
}

TEST_CASE("correction soundness under a bounded adversarial schedule") {
    // O1, O2 and O3 faults at distinct layers and iterations, all within
    // tolerance: everything is corrected and the trajectory stays glued to
    // the oracle.
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Adversarial;
    cfg.faults.schedule.push_back({2, 1, StepKind::O1, 2, 1, 0});
    cfg.faults.schedule.push_back({4, 2, StepKind::O2, 1, 3, 0});
    cfg.faults.schedule.push_back({6, 1, StepKind::O3, 0, 1, 0});
    CodenetStrategy strat(cfg);
    auto samples = make_samples(10, 6, 4, 59);
    RunParams params;
    params.iterations = 10;
    params.checkpoint_period = 100;
    params.eval_every = 0;
    RunSummary sum = run_training(strat, samples, {}, params);
    REQUIRE(sum.rolled_back == 0);
    REQUIRE(sum.corrected == 3);
    DnnState oracle = oracle_run(cfg, samples, 10);
    REQUIRE(rel_weight_diff(strat.assembled_weights(), oracle) <= 1e-9);
}

TEST_CASE("update-stage faults surface at their layer in the next iteration") {
    std::mt19937_64 eng(61);
    std::vector<int> dims{6, 5, 4};
    auto samples = make_samples(12, 6, 4, 67);
    for (int trial = 0; trial < 20; ++trial) {
        GridLayout grid = GridLayout::symmetric(2, 2, 1);
        long iter = long(eng() % 6);
        int layer = 1 + int(eng() % 2);
        int i, j;
        do {
            i = int(eng() % std::uint64_t(grid.grid_rows()));
            j = int(eng() % std::uint64_t(grid.grid_cols()));
        } while (grid.in_corner(i, j));

        StrategyConfig cfg = base_config(StrategyKind::CodeNet, dims, 2, 2, 1, 100 + trial);
        cfg.faults.model = FaultSpec::Model::Adversarial;
        cfg.faults.schedule.push_back({iter, layer, StepKind::O3, i, j, 0});
        CodenetStrategy strat(cfg);
        RunParams params;
        params.iterations = 8;
        params.checkpoint_period = 100;
        params.eval_every = 0;
        RunSummary sum = run_training(strat, samples, {}, params);

        REQUIRE(sum.rolled_back == 0);
        REQUIRE(sum.corrected == 1);
        // Flagged exactly at the next iteration, at the same layer, in the
        // feedforward for stored columns j < n and in the backprop otherwise.
        const IterationReport& rep = sum.reports[iter + 1];
        REQUIRE(rep.outcome.kind == IterationOutcome::Kind::Corrected);
        REQUIRE(rep.outcome.corrections.size() == 1);
        const CorrectionEvent& ev = rep.outcome.corrections[0];
        REQUIRE(ev.layer == layer);
        if (j < grid.n) {
            REQUIRE(ev.stage == StepKind::O1);
            REQUIRE(ev.locations == std::vector<int>{i});
        } else {
            REQUIRE(ev.stage == StepKind::O2);
            REQUIRE(ev.locations == std::vector<int>{j});
        }
        for (long k = 0; k < long(sum.reports.size()); ++k)
            if (k != iter + 1)
                REQUIRE(sum.reports[k].outcome.kind == IterationOutcome::Kind::Clean);
    }
}

TEST_CASE("transition faults under Error Model 2 roll back via disagreement") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    cfg.faults.model = FaultSpec::Model::Probabilistic;
    cfg.faults.p = 1.0;  // every site fires; redundant copies must disagree
    cfg.faults.include_transition = true;
    CodenetStrategy strat(cfg);
    auto samples = make_samples(1, 6, 4, 71);
    IterationOutcome out = strat.run_iteration(samples[0].x, samples[0].y, 0);
    REQUIRE(out.kind == IterationOutcome::Kind::RolledBack);
    // O1 faults everywhere already exceed tolerance, but whichever path
    // rejects first must be a rollback, never silent corruption.
}

TEST_CASE("checkpoint bytes round trip bit-exactly and reject corruption") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 5, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(3, 6, 4, 73);
    for (long k = 0; k < 3; ++k) strat.run_iteration(samples[k].x, samples[k].y, k);

    Checkpoint ckpt = strat.make_checkpoint(3);
    std::vector<std::uint8_t> bytes = serialize(ckpt);

    auto blocks_per_layer = [&](int, const Checkpoint& c) {
        GridLayout g = GridLayout::symmetric(c.layers[0].m, c.layers[0].n, c.layers[0].t);
        return g.total_nodes();
    };
    auto block_shape = [&](int l, int, const Checkpoint& c) {
        const auto& meta = c.layers[l];
        detail::LayerGeom geom(int(meta.n_l), int(meta.n_lm1), meta.m, meta.n);
        return std::pair<int, int>{geom.br, geom.bc};
    };
    Checkpoint back = deserialize(bytes, blocks_per_layer, block_shape);
    REQUIRE(back.iteration == 3);
    REQUIRE(back.strategy == StrategyKind::CodeNet);
    REQUIRE(back.layers.size() == 2);
    for (std::size_t l = 0; l < ckpt.blocks.size(); ++l)
        for (std::size_t b = 0; b < ckpt.blocks[l].size(); ++b)
            REQUIRE((back.blocks[l][b].array() == ckpt.blocks[l][b].array()).all());

    std::vector<std::uint8_t> bad = bytes;
    bad[bytes.size() / 2] ^= 0xFF;
    REQUIRE_THROWS_WITH(deserialize(bad, blocks_per_layer, block_shape),
                        Catch::Matchers::ContainsSubstring("crc"));
    std::vector<std::uint8_t> wrong_magic = bytes;
    wrong_magic[0] = 'X';
    REQUIRE_THROWS_WITH(deserialize(wrong_magic, blocks_per_layer, block_shape),
                        Catch::Matchers::ContainsSubstring("magic"));
}

TEST_CASE("restore_state matches make_checkpoint exactly") {
    StrategyConfig cfg = base_config(StrategyKind::CodeNet, {6, 4}, 2, 2, 1);
    CodenetStrategy strat(cfg);
    auto samples = make_samples(4, 6, 4, 79);
    Checkpoint ckpt = strat.make_checkpoint(0);
    for (long k = 0; k < 4; ++k) strat.run_iteration(samples[k].x, samples[k].y, k);
    DnnState after = strat.assembled_weights();
    strat.restore_state(ckpt);
    DnnState restored = strat.assembled_weights();
    DnnState initial = make_dnn(cfg.dims, cfg.activation, cfg.eta, cfg.seed);
    for (std::size_t l = 0; l < restored.weights.size(); ++l) {
        REQUIRE((restored.weights[l].array() == initial.weights[l].array()).all());
        REQUIRE_FALSE((after.weights[l].array() == initial.weights[l].array()).all());
    }
}
