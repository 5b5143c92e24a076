#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace codenet {

enum class Activation { Sigmoid, Identity };

// g is chosen so that g(f(u)) = f'(u): the backward pass only ever sees the
// forward output, never the pre-activation.
inline Eigen::VectorXd activation_f(Activation act, const Eigen::VectorXd& u) {
    if (act == Activation::Identity) return u;
    return u.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline Eigen::VectorXd activation_g(Activation act, const Eigen::VectorXd& y) {
    if (act == Activation::Identity) return Eigen::VectorXd::Ones(y.size());
    return y.unaryExpr([](double v) { return v * (1.0 - v); });
}

struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::Sigmoid;
};

struct DnnState {
    std::vector<LayerSpec> layers;
    std::vector<Eigen::MatrixXd> weights;  // weights[l]: out_dim x in_dim
    double learning_rate = 0.1;
    long iteration = 0;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int input_dim() const { return layers.front().in_dim; }
    int output_dim() const { return layers.back().out_dim; }
};

struct ForwardTrace {
    std::vector<Eigen::VectorXd> inputs;   // x^1..x^L (x^1 is the data vector)
    std::vector<Eigen::VectorXd> preacts;  // s^1..s^L
    Eigen::VectorXd output;                // y_hat = f(s^L)
};

// dims = {N_0, N_1, ..., N_L}. Weights start uniform in +-1/sqrt(fan_in),
// filled row-major from a seeded engine so trajectories are reproducible.
inline DnnState make_dnn(const std::vector<int>& dims, Activation act, double learning_rate,
                         std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("make_dnn: need at least one layer");
    DnnState state;
    state.learning_rate = learning_rate;
    std::mt19937_64 eng(seed);
    for (std::size_t l = 1; l < dims.size(); ++l) {
        LayerSpec spec{dims[l - 1], dims[l], act};
        if (spec.in_dim < 1 || spec.out_dim < 1)
            throw std::invalid_argument("make_dnn: dims must be >= 1");
        double bound = 1.0 / std::sqrt(double(spec.in_dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd w(spec.out_dim, spec.in_dim);
        for (int i = 0; i < spec.out_dim; ++i)
            for (int j = 0; j < spec.in_dim; ++j) w(i, j) = dist(eng);
        state.layers.push_back(spec);
        state.weights.push_back(std::move(w));
    }
    return state;
}

// s^l = W^l x^l, x^{l+1} = f(s^l), for l = 1..L.
inline ForwardTrace oracle_feedforward(const DnnState& state, const Eigen::VectorXd& data) {
    if (data.size() != state.input_dim())
        throw std::invalid_argument("oracle_feedforward: data dim mismatch");
    ForwardTrace trace;
    Eigen::VectorXd x = data;
    for (int l = 0; l < state.num_layers(); ++l) {
        trace.inputs.push_back(x);
        Eigen::VectorXd s = state.weights[l] * x;
        trace.preacts.push_back(s);
        x = activation_f(state.layers[l].activation, s);
    }
    trace.output = x;
    return trace;
}

// delta^L = 2 (y - y_hat) .* f'(s^L), i.e. delta = -d(eps^2)/ds for the
// squared error. Recursion: c^l = (W^l)^T delta^l, delta^{l-1} = c^l .* g(x^l).
inline std::vector<Eigen::VectorXd> oracle_backprop(const DnnState& state,
                                                    const ForwardTrace& trace,
                                                    const Eigen::VectorXd& label) {
    if (label.size() != state.output_dim())
        throw std::invalid_argument("oracle_backprop: label dim mismatch");
    const int L = state.num_layers();
    std::vector<Eigen::VectorXd> deltas(L);
    Eigen::VectorXd fprime = activation_g(state.layers[L - 1].activation, trace.output);
    deltas[L - 1] = 2.0 * (label - trace.output).cwiseProduct(fprime);
    for (int l = L - 1; l >= 1; --l) {
        Eigen::VectorXd c = state.weights[l].transpose() * deltas[l];
        deltas[l - 1] = c.cwiseProduct(activation_g(state.layers[l - 1].activation,
                                                    /* x^l = f(s^{l-1}) */ trace.inputs[l]));
    }
    return deltas;
}

// W^l += eta * delta^l (x^l)^T for every layer; bumps the iteration counter.
inline void oracle_update(DnnState& state, const ForwardTrace& trace,
                          const std::vector<Eigen::VectorXd>& deltas) {
    for (int l = 0; l < state.num_layers(); ++l)
        state.weights[l] += state.learning_rate * deltas[l] * trace.inputs[l].transpose();
    ++state.iteration;
}

inline double squared_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& label) {
    return (estimate - label).squaredNorm();
}

}  // namespace codenet
