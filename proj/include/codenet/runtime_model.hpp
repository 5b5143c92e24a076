#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace codenet {

enum class ModelStrategy { CodeNet, Replication };

// Per-iteration outcome probabilities and stage times for the checkpoint
// Markov chain: forward with tau_f on zero errors (p0), forward with tau_b on
// correctable errors (p1, CodeNet only), reset to the last checkpoint with
// tau_b otherwise.
struct RuntimeModelParams {
    double p0 = 1.0;
    double p1 = 0.0;
    double p2 = 0.0;
    double tau_f = 1.0;
    double tau_b = 1.0;
    double tau_cpt = 0.0;
    long checkpoint_period = 1;  // I0
    long iterations = 1;         // M

    void validate() const {
        if (p0 < 0 || p1 < 0 || p2 < 0 || p0 > 1 || p1 > 1 || p2 > 1)
            throw std::invalid_argument("probabilities must lie in [0,1]");
        if (std::abs(p0 + p1 + p2 - 1.0) > 1e-12)
            throw std::invalid_argument("p0+p1+p2 must sum to 1");
        if (!(tau_f > 0) || tau_b < tau_f)
            throw std::invalid_argument("need tau_b >= tau_f > 0");
        if (checkpoint_period < 1 || iterations < 1)
            throw std::invalid_argument("I0 and M must be >= 1");
    }
};

// Expected time to climb from a checkpoint to state I0. Solving the chain's
// first-step recursion E[T_{k+1}] = (E[T_k] + c) / q with E[T_1] = c/q, where
// c = tau_f p0 + tau_b (1 - p0) and q is the per-step advance probability,
// gives E[T_k] = (c/q) ((1/q)^k - 1) / ((1/q) - 1), with the q -> 1 limit
// k c.
inline double expected_period_time(double p0, double q, double tau_f, double tau_b, long i0) {
    if (q <= 0.0) throw std::invalid_argument("expected_period_time: advance probability is 0");
    const double c = tau_f * p0 + tau_b * (1.0 - p0);
    if (q >= 1.0) return double(i0) * c;
    const double x = 1.0 / q;
    return (c / q) * (std::pow(x, double(i0)) - 1.0) / (x - 1.0);
}

inline double expected_time(const RuntimeModelParams& params, ModelStrategy strategy) {
    params.validate();
    const double q =
        strategy == ModelStrategy::CodeNet ? params.p0 + params.p1 : params.p0;
    const double periods = double(params.iterations) / double(params.checkpoint_period);
    return periods * params.tau_cpt +
           periods * expected_period_time(params.p0, q, params.tau_f, params.tau_b,
                                          params.checkpoint_period);
}

// Exhaustive scan over I0 in 1..M (M/I0 as a real). A later period that ties
// the best time wins, so a cost-free checkpoint degenerates to I0 = M rather
// than checkpointing every iteration.
struct OptimalPeriod {
    long i0 = 1;
    double time = 0.0;
};

inline OptimalPeriod optimize_checkpoint_period(RuntimeModelParams params,
                                                ModelStrategy strategy) {
    OptimalPeriod best;
    bool first = true;
    for (long i0 = 1; i0 <= params.iterations; ++i0) {
        params.checkpoint_period = i0;
        double t = expected_time(params, strategy);
        if (first || t <= best.time) {
            best = {i0, t};
            first = false;
        }
    }
    return best;
}

// Monte-Carlo cross-check of the chain: simulate climbs from 0 to I0 and
// scale to M iterations plus checkpoint charges.
struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline McEstimate mc_expected_time(const RuntimeModelParams& params, ModelStrategy strategy,
                                   long trials, std::uint64_t seed = 12345) {
    params.validate();
    if (trials < 1) throw std::invalid_argument("mc_expected_time: trials must be >= 1");
    const double q_fwd_corrected =
        strategy == ModelStrategy::CodeNet ? params.p1 : 0.0;
    const double periods = double(params.iterations) / double(params.checkpoint_period);
    double sum = 0.0, sumsq = 0.0;
    for (long trial = 0; trial < trials; ++trial) {
        std::mt19937_64 eng(seed + std::uint64_t(trial) * 0x9E3779B97F4A7C15ull);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double t = 0.0;
        long state = 0;
        while (state < params.checkpoint_period) {
            double draw = u(eng);
            if (draw < params.p0) {
                t += params.tau_f;
                ++state;
            } else if (draw < params.p0 + q_fwd_corrected) {
                t += params.tau_b;
                ++state;
            } else {
                t += params.tau_b;
                state = 0;
            }
        }
        double total = periods * params.tau_cpt + periods * t;
        sum += total;
        sumsq += total * total;
    }
    McEstimate est;
    est.mean = sum / double(trials);
    double var = (sumsq - sum * sum / double(trials)) / double(trials > 1 ? trials - 1 : 1);
    est.stderr_ = std::sqrt(var / double(trials));
    return est;
}

// ---------------------------------------------------------------------------
// Complexity ratios

struct ComplexityParams {
    double p = 0.0;      // base node count P
    double p_hat = 0.0;  // total CodeNet node count
    double t = 0.0;
    double n_l = 0.0;
    double n_lm1 = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 1.0;

    void validate() const {
        if (p <= 0 || p_hat <= 0 || t < 0 || n_l <= 0 || n_lm1 <= 0)
            throw std::invalid_argument("ComplexityParams: positive sizes required");
    }
};

struct ComplexityRatios {
    double comm = 0.0;
    double comp = 0.0;
};

// Single-layer error-free cost ratio bounds for m = n = sqrt(P).
inline ComplexityRatios complexity_ratios(const ComplexityParams& cp) {
    cp.validate();
    const double sqrt_p = std::sqrt(cp.p);
    const double dims = (cp.n_l + cp.n_lm1) / sqrt_p;
    const double comm_num = 6.0 * cp.alpha * std::log2(cp.p_hat) +
                            cp.beta * (6.0 * cp.t + 3.0) * dims + 2.0 * cp.beta * cp.p_hat * cp.t;
    const double comm_den = 2.0 * cp.alpha * std::log2(cp.p) + 2.0 * cp.beta * dims;
    const double work = 6.0 * cp.n_l * cp.n_lm1 / cp.p;
    const double comp_num = work + (1.0 + 4.0 * cp.t) * dims + 2.0 * cp.p_hat * cp.t;
    const double comp_den = work + dims;
    return {comm_num / comm_den, comp_num / comp_den};
}

// ---------------------------------------------------------------------------
// Checkpoint-period tradeoff curves (Poisson error regime)

struct TradeoffRow {
    double lambda = 0.0;
    long i0_rep = 1;
    long i0_codenet = 1;
    double et_rep = 0.0;
    double et_codenet = 0.0;
    double ratio = 0.0;
};

// Poisson(lambda) errors per iteration with single-error mass correctable:
// p0 = e^-lambda, p1 = lambda e^-lambda. Each strategy picks its own best I0.
inline TradeoffRow tradeoff_at(double lambda, double tau_f, double tau_b, double tau_cpt,
                               long iterations) {
    RuntimeModelParams params;
    params.p0 = std::exp(-lambda);
    params.p1 = lambda * std::exp(-lambda);
    params.p2 = 1.0 - params.p0 - params.p1;
    if (params.p2 < 0) params.p2 = 0;  // tiny lambda rounding
    params.tau_f = tau_f;
    params.tau_b = tau_b;
    params.tau_cpt = tau_cpt;
    params.iterations = iterations;

    TradeoffRow row;
    row.lambda = lambda;
    OptimalPeriod rep = optimize_checkpoint_period(params, ModelStrategy::Replication);
    OptimalPeriod cdn = optimize_checkpoint_period(params, ModelStrategy::CodeNet);
    row.i0_rep = rep.i0;
    row.i0_codenet = cdn.i0;
    row.et_rep = rep.time;
    row.et_codenet = cdn.time;
    row.ratio = rep.time / cdn.time;
    return row;
}

inline std::vector<TradeoffRow> tradeoff_curve(const std::vector<double>& lambdas, double tau_f,
                                               double tau_b, double tau_cpt, long iterations) {
    std::vector<TradeoffRow> rows;
    rows.reserve(lambdas.size());
    for (double lambda : lambdas)
        rows.push_back(tradeoff_at(lambda, tau_f, tau_b, tau_cpt, iterations));
    return rows;
}

inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void emit_tradeoff_csv(std::ostream& out, const std::vector<TradeoffRow>& rows) {
    out << "lambda,i0_rep,i0_codenet,et_rep,et_codenet,ratio\n";
    for (const auto& row : rows)
        out << format_g17(row.lambda) << ',' << row.i0_rep << ',' << row.i0_codenet << ','
            << format_g17(row.et_rep) << ',' << format_g17(row.et_codenet) << ','
            << format_g17(row.ratio) << '\n';
}

inline void emit_tradeoff_csv(const std::string& path, const std::vector<TradeoffRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit_tradeoff_csv: cannot open " + path);
    emit_tradeoff_csv(out, rows);
    if (!out) throw std::runtime_error("emit_tradeoff_csv: write failed for " + path);
}

}  // namespace codenet
