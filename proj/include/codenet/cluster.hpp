#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace codenet {

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ v); }

}  // namespace rng

// Per-element communication and per-flop computation charges, Appendix-E
// style: Reduce comm = a log2 P + b N, All-Reduce comm = a log2 P +
// 2b ((P-1)/P) N, Broadcast = a log2 P + b N, Gather/All-Gather = a log2 P +
// 2b (P-1) N. Reduce and All-Reduce also cost g ((P-1)/P) N of computation.
// Group logs are real-valued and charged as-is.
struct CostLedger {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    double comm_time = 0.0;
    double comp_time = 0.0;
    double checkpoint_time = 0.0;

    long n_reduce = 0;
    long n_all_reduce = 0;
    long n_broadcast = 0;
    long n_gather = 0;
    long n_all_gather = 0;

    static double log2_group(int group) { return group > 1 ? std::log2(double(group)) : 0.0; }

    void charge_reduce(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + beta * n;
        comp_time += gamma * (double(group - 1) / group) * n;
        ++n_reduce;
    }
    void charge_all_reduce(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + 2.0 * beta * (double(group - 1) / group) * n;
        comp_time += gamma * (double(group - 1) / group) * n;
        ++n_all_reduce;
    }
    void charge_broadcast(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + beta * n;
        ++n_broadcast;
    }
    void charge_gather(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + 2.0 * beta * double(group - 1) * n;
        ++n_gather;
    }
    void charge_all_gather(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + 2.0 * beta * double(group - 1) * n;
        ++n_all_gather;
    }
    void charge_compute(double flops) {
        if (flops < 0) throw std::invalid_argument("charge_compute: negative flops");
        comp_time += gamma * flops;
    }
    // Error-detection verification exchange (Error Model 2): the active nodes
    // compare their 2t check values. Charged as a lump sum.
    void charge_detection_verification(int total_nodes, int t) {
        comm_time += alpha * log2_group(total_nodes) + 2.0 * beta * double(total_nodes) * t;
        comp_time += gamma * double(total_nodes) * t;
    }
    // Decoding verification exchange (Error Model 2): nodes compare their
    // flagged-node lists.
    void charge_decode_verification(int total_nodes) {
        comm_time += alpha * log2_group(total_nodes) +
                     beta * double(total_nodes) * double(total_nodes);
    }
    // Point-to-point style transfer of n elements within a group, used for
    // regeneration traffic.
    void charge_transfer(int group, double n) {
        require_group(group);
        comm_time += alpha * log2_group(group) + beta * n;
    }
    void charge_checkpoint(double tau_cpt) { checkpoint_time += tau_cpt; }

    double total() const { return comm_time + comp_time + checkpoint_time; }

  private:
    static void require_group(int group) {
        if (group < 1) throw std::invalid_argument("collective group must be nonempty");
    }
};

// Coarse Markov-model clock: tau_f per clean iteration, tau_b per corrected
// or rolled-back iteration, tau_cpt per checkpoint.
struct CoarseClock {
    double tau_f = 1.0;
    double tau_b = 1.0;
    double tau_cpt = 0.0;
    double time = 0.0;

    void error_free() { time += tau_f; }
    void corrected() { time += tau_b; }
    void rollback() { time += tau_b; }
    void checkpoint() { time += tau_cpt; }
};

// Node layout: an m x n base grid, 2(t1+t3) redundant rows of n nodes and
// 2(t2+t3) redundant columns of m nodes; the bottom-right corner of the
// extended grid holds no nodes. Total node count P_hat = mn + 2n(t1+t3) +
// 2m(t2+t3).
struct GridLayout {
    int m = 1;
    int n = 1;
    int t1 = 0;
    int t2 = 0;
    int t3 = 0;

    static GridLayout symmetric(int m, int n, int t) {
        if (m < 1 || n < 1 || t < 0) throw std::invalid_argument("GridLayout: bad dims");
        return GridLayout{m, n, t, t, 0};
    }

    int row_tolerance() const { return t1 + t3; }  // correctable errors after O1
    int col_tolerance() const { return t2 + t3; }  // correctable errors after O2
    int base_nodes() const { return m * n; }
    int total_nodes() const {
        return m * n + 2 * n * row_tolerance() + 2 * m * col_tolerance();
    }
    int grid_rows() const { return m + 2 * row_tolerance(); }
    int grid_cols() const { return n + 2 * col_tolerance(); }
    bool in_corner(int i, int j) const { return i >= m && j >= n; }
    bool has_node(int i, int j) const {
        return i >= 0 && j >= 0 && i < grid_rows() && j < grid_cols() && !in_corner(i, j);
    }
    bool ff_active(int i, int j) const { return i < grid_rows() && j < n; }
    bool bp_active(int i, int j) const { return i < m && j < grid_cols(); }
};

// Sums contributions in fixed index order, so collective results do not
// depend on how the group happens to be enumerated.
inline Eigen::VectorXd sum_in_order(const std::vector<Eigen::VectorXd>& contribs) {
    if (contribs.empty()) throw std::invalid_argument("sum_in_order: empty group");
    Eigen::VectorXd acc = contribs[0];
    for (std::size_t i = 1; i < contribs.size(); ++i) {
        if (contribs[i].size() != acc.size())
            throw std::invalid_argument("sum_in_order: length mismatch");
        acc += contribs[i];
    }
    return acc;
}

// Single-group collectives: correct semantics plus one ledger charge.
// Strategies that run many identical groups in parallel perform the sums
// themselves and charge the ledger once per parallel batch, which is what the
// synchronous-machine time model calls for.
inline Eigen::VectorXd reduce(CostLedger& ledger, const std::vector<Eigen::VectorXd>& contribs) {
    Eigen::VectorXd out = sum_in_order(contribs);
    ledger.charge_reduce(static_cast<int>(contribs.size()), double(out.size()));
    return out;
}

inline Eigen::VectorXd all_reduce(CostLedger& ledger,
                                  const std::vector<Eigen::VectorXd>& contribs) {
    Eigen::VectorXd out = sum_in_order(contribs);
    ledger.charge_all_reduce(static_cast<int>(contribs.size()), double(out.size()));
    return out;
}

inline Eigen::VectorXd broadcast(CostLedger& ledger, int group, const Eigen::VectorXd& v) {
    ledger.charge_broadcast(group, double(v.size()));
    return v;
}

inline std::vector<Eigen::VectorXd> all_gather(CostLedger& ledger,
                                               const std::vector<Eigen::VectorXd>& contribs) {
    if (contribs.empty()) throw std::invalid_argument("all_gather: empty group");
    ledger.charge_all_gather(static_cast<int>(contribs.size()), double(contribs[0].size()));
    return contribs;
}

// ---------------------------------------------------------------------------
// Fault injection

enum class StepKind : std::uint8_t { O1 = 0, O2 = 1, O3 = 2, Transition = 3 };

enum class NoiseKind { DenseGaussian, SparseUniform };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::DenseGaussian;
    double sigma = 1.0;     // DenseGaussian
    double density = 0.005;  // SparseUniform
    double lo = -5.0;
    double hi = 5.0;
};

struct ScheduledFault {
    long iteration = 0;
    int layer = 0;  // 1-based, matching the training loop
    StepKind step = StepKind::O1;
    int row = 0;
    int col = 0;
    int grid = 0;  // replica index; -1 injects identical noise into every replica
};

struct FaultSpec {
    enum class Model { None, Adversarial, Probabilistic };
    Model model = Model::None;
    // Model 1: explicit schedule. Scheduled faults are events in real time:
    // they fire on the first execution of their iteration only, never on a
    // post-rollback replay.
    std::vector<ScheduledFault> schedule;
    // Model 2: per-node per-operation error probability.
    double p = 0.0;
    bool include_transition = false;  // also draw at the delta^L generation step
    NoiseSpec noise;
};

struct FaultContext {
    long iteration = 0;
    int layer = 0;
    StepKind step = StepKind::O1;
    int row = 0;
    int col = 0;
    int grid = 0;
};

// Deterministic injector. Each (epoch, iteration, layer, step, grid, row,
// col) context owns an independent RNG stream, so corrupting one site never
// perturbs the draws at any other site. The epoch advances on every rollback,
// which is what gives replays fresh fault draws; it is the RNG cursor that
// checkpoints persist.
class FaultInjector {
  public:
    FaultInjector() = default;
    FaultInjector(FaultSpec spec, std::uint64_t root_seed)
        : spec_(std::move(spec)), root_seed_(root_seed) {}

    const FaultSpec& spec() const { return spec_; }
    FaultSpec& spec() { return spec_; }

    std::uint64_t epoch() const { return epoch_; }
    void set_epoch(std::uint64_t e) { epoch_ = e; }
    void advance_epoch() { ++epoch_; }

    // Applies noise to the payload when the context is scheduled (Model 1) or
    // drawn (Model 2). Returns true when the payload was modified.
    template <typename Derived>
    bool maybe_corrupt(const FaultContext& ctx, Eigen::MatrixBase<Derived>& payload) {
        switch (spec_.model) {
            case FaultSpec::Model::None:
                return false;
            case FaultSpec::Model::Adversarial: {
                if (epoch_ != 0) return false;
                const ScheduledFault* hit = nullptr;
                for (const auto& f : spec_.schedule) {
                    if (f.iteration == ctx.iteration && f.layer == ctx.layer &&
                        f.step == ctx.step && f.row == ctx.row && f.col == ctx.col &&
                        (f.grid == ctx.grid || f.grid == -1)) {
                        hit = &f;
                        break;
                    }
                }
                if (!hit) return false;
                FaultContext keyed = ctx;
                if (hit->grid == -1) keyed.grid = -1;  // same noise in every replica
                std::mt19937_64 eng(context_seed(keyed));
                add_noise(eng, payload);
                return true;
            }
            case FaultSpec::Model::Probabilistic: {
                if (ctx.step == StepKind::Transition && !spec_.include_transition) return false;
                std::mt19937_64 eng(context_seed(ctx));
                std::uniform_real_distribution<double> u(0.0, 1.0);
                if (u(eng) >= spec_.p) return false;
                add_noise(eng, payload);
                return true;
            }
        }
        return false;
    }

  private:
    std::uint64_t context_seed(const FaultContext& ctx) const {
        std::uint64_t h = rng::splitmix64(root_seed_);
        h = rng::mix(h, epoch_);
        h = rng::mix(h, static_cast<std::uint64_t>(ctx.iteration));
        h = rng::mix(h, static_cast<std::uint64_t>(ctx.layer));
        h = rng::mix(h, static_cast<std::uint64_t>(ctx.step));
        h = rng::mix(h, (std::uint64_t(std::uint32_t(ctx.grid)) << 32) |
                            (std::uint64_t(std::uint16_t(ctx.row)) << 16) |
                            std::uint64_t(std::uint16_t(ctx.col)));
        return h;
    }

    template <typename Derived>
    void add_noise(std::mt19937_64& eng, Eigen::MatrixBase<Derived>& payload) const {
        if (spec_.noise.kind == NoiseKind::DenseGaussian) {
            std::normal_distribution<double> g(0.0, spec_.noise.sigma);
            for (Eigen::Index j = 0; j < payload.cols(); ++j)
                for (Eigen::Index i = 0; i < payload.rows(); ++i) payload(i, j) += g(eng);
        } else {
            std::uniform_real_distribution<double> pick(0.0, 1.0);
            std::uniform_real_distribution<double> val(spec_.noise.lo, spec_.noise.hi);
            for (Eigen::Index j = 0; j < payload.cols(); ++j)
                for (Eigen::Index i = 0; i < payload.rows(); ++i)
                    if (pick(eng) < spec_.noise.density) payload(i, j) += val(eng);
        }
    }

    FaultSpec spec_;
    std::uint64_t root_seed_ = 0;
    std::uint64_t epoch_ = 0;
};

}  // namespace codenet
