#pragma once

#include "codenet/cluster.hpp"
#include "codenet/dnn.hpp"
#include "codenet/strategies.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace codenet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parsed experiment description. raw_values preserves every key as written so
// runs can echo their provenance into the report.
struct ExperimentConfig {
    StrategyKind strategy = StrategyKind::Uncoded;
    std::vector<int> layers;
    int m = 1;
    int n = 1;
    int t = 0;
    Activation activation = Activation::Sigmoid;
    double learning_rate = 0.1;
    long iterations = 1;
    long checkpoint_period = 100;
    long eval_every = 100;
    std::uint64_t seed = 1;
    double tau_f = 1.0;
    double tau_b = 1.0;
    double tau_cpt = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    FaultSpec faults;
    std::string train_images, train_labels, test_images, test_labels;
    long synthetic_train = 2000;
    long synthetic_test = 1000;
    std::string output_dir = "out";
    std::vector<std::pair<std::string, std::string>> raw_values;

    StrategyConfig strategy_config() const {
        StrategyConfig cfg;
        cfg.kind = strategy;
        cfg.dims = layers;
        cfg.activation = activation;
        cfg.m = m;
        cfg.n = n;
        cfg.t = t;
        cfg.eta = learning_rate;
        cfg.seed = seed;
        cfg.faults = faults;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.gamma = gamma;
        cfg.tau_f = tau_f;
        cfg.tau_b = tau_b;
        cfg.tau_cpt = tau_cpt;
        return cfg;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v, int line) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line) + ": bad number for '" + key + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v, int line) {
    try {
        std::size_t used = 0;
        long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line) + ": bad integer for '" + key + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("line " + std::to_string(line) + ": bad boolean for '" + key + "'");
}

// Adversarial schedule entry: "iter=5 layer=1 step=O1 row=1 col=0 [grid=0]".
inline ScheduledFault parse_inject(const std::string& v, int line) {
    ScheduledFault f;
    std::istringstream ss(v);
    std::string token;
    while (ss >> token) {
        std::size_t eq = token.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line) + ": bad inject token '" + token + "'");
        std::string key = token.substr(0, eq), val = token.substr(eq + 1);
        if (key == "iter") f.iteration = parse_long("inject.iter", val, line);
        else if (key == "layer") f.layer = int(parse_long("inject.layer", val, line));
        else if (key == "row") f.row = int(parse_long("inject.row", val, line));
        else if (key == "col") f.col = int(parse_long("inject.col", val, line));
        else if (key == "grid") f.grid = int(parse_long("inject.grid", val, line));
        else if (key == "step") {
            if (val == "O1") f.step = StepKind::O1;
            else if (val == "O2") f.step = StepKind::O2;
            else if (val == "O3") f.step = StepKind::O3;
            else throw ConfigError("line " + std::to_string(line) + ": bad inject step '" + val + "'");
        } else {
            throw ConfigError("line " + std::to_string(line) + ": unknown inject field '" + key + "'");
        }
    }
    return f;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    bool t_seen = false;

    while (std::getline(in, line)) {
        ++lineno;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = s.substr(1, s.size() - 2);
            if (section != "experiment" && section != "network" && section != "faults" &&
                section != "outputs")
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        cfg.raw_values.emplace_back(section + "." + key, value);

        if (section == "experiment") {
            if (key == "strategy") {
                if (value == "codenet") cfg.strategy = StrategyKind::CodeNet;
                else if (value == "replication") cfg.strategy = StrategyKind::Replication;
                else if (value == "uncoded") cfg.strategy = StrategyKind::Uncoded;
                else throw ConfigError("line " + std::to_string(lineno) + ": unknown strategy '" + value + "'");
            } else if (key == "iterations") cfg.iterations = detail::parse_long(key, value, lineno);
            else if (key == "checkpoint_period") cfg.checkpoint_period = detail::parse_long(key, value, lineno);
            else if (key == "learning_rate") cfg.learning_rate = detail::parse_double(key, value, lineno);
            else if (key == "eval_every") cfg.eval_every = detail::parse_long(key, value, lineno);
            else if (key == "seed") cfg.seed = std::uint64_t(detail::parse_long(key, value, lineno));
            else if (key == "tau_f") cfg.tau_f = detail::parse_double(key, value, lineno);
            else if (key == "tau_b") cfg.tau_b = detail::parse_double(key, value, lineno);
            else if (key == "tau_cpt") cfg.tau_cpt = detail::parse_double(key, value, lineno);
            else if (key == "alpha") cfg.alpha = detail::parse_double(key, value, lineno);
            else if (key == "beta") cfg.beta = detail::parse_double(key, value, lineno);
            else if (key == "gamma") cfg.gamma = detail::parse_double(key, value, lineno);
            else if (key == "train_images") cfg.train_images = value;
            else if (key == "train_labels") cfg.train_labels = value;
            else if (key == "test_images") cfg.test_images = value;
            else if (key == "test_labels") cfg.test_labels = value;
            else if (key == "synthetic_train") cfg.synthetic_train = detail::parse_long(key, value, lineno);
            else if (key == "synthetic_test") cfg.synthetic_test = detail::parse_long(key, value, lineno);
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [experiment]");
        } else if (section == "network") {
            if (key == "layers") {
                cfg.layers.clear();
                std::istringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    cfg.layers.push_back(int(detail::parse_long("layers", detail::trim(tok), lineno)));
            } else if (key == "m") cfg.m = int(detail::parse_long(key, value, lineno));
            else if (key == "n") cfg.n = int(detail::parse_long(key, value, lineno));
            else if (key == "t") { cfg.t = int(detail::parse_long(key, value, lineno)); t_seen = true; }
            else if (key == "activation") {
                if (value == "sigmoid") cfg.activation = Activation::Sigmoid;
                else if (value == "identity") cfg.activation = Activation::Identity;
                else throw ConfigError("line " + std::to_string(lineno) + ": unknown activation '" + value + "'");
            } else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [network]");
        } else if (section == "faults") {
            if (key == "model") {
                if (value == "none") cfg.faults.model = FaultSpec::Model::None;
                else if (value == "adversarial") cfg.faults.model = FaultSpec::Model::Adversarial;
                else if (value == "probabilistic") cfg.faults.model = FaultSpec::Model::Probabilistic;
                else throw ConfigError("line " + std::to_string(lineno) + ": unknown fault model '" + value + "'");
            } else if (key == "p") cfg.faults.p = detail::parse_double(key, value, lineno);
            else if (key == "noise") {
                if (value == "dense_gaussian") cfg.faults.noise.kind = NoiseKind::DenseGaussian;
                else if (value == "sparse_uniform") cfg.faults.noise.kind = NoiseKind::SparseUniform;
                else throw ConfigError("line " + std::to_string(lineno) + ": unknown noise kind '" + value + "'");
            } else if (key == "sigma") cfg.faults.noise.sigma = detail::parse_double(key, value, lineno);
            else if (key == "density") cfg.faults.noise.density = detail::parse_double(key, value, lineno);
            else if (key == "lo") cfg.faults.noise.lo = detail::parse_double(key, value, lineno);
            else if (key == "hi") cfg.faults.noise.hi = detail::parse_double(key, value, lineno);
            else if (key == "include_transition") cfg.faults.include_transition = detail::parse_bool(key, value, lineno);
            else if (key == "inject") cfg.faults.schedule.push_back(detail::parse_inject(value, lineno));
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [faults]");
        } else {  // outputs
            if (key == "dir") cfg.output_dir = value;
            else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [outputs]");
        }
    }

    // Validation.
    if (cfg.layers.size() < 2) throw ConfigError("validation: 'layers' needs at least two dims");
    for (int d : cfg.layers)
        if (d < 1) throw ConfigError("validation: layer dims must be >= 1");
    if (cfg.m < 1 || cfg.n < 1) throw ConfigError("validation: m and n must be >= 1");
    if (cfg.t < 0) throw ConfigError("validation: t must be >= 0");
    if (t_seen && cfg.t > 0 && cfg.strategy != StrategyKind::CodeNet)
        throw ConfigError("validation: t requires codenet");
    if (cfg.iterations < 1) throw ConfigError("validation: iterations must be >= 1");
    if (cfg.checkpoint_period < 1) throw ConfigError("validation: checkpoint_period must be >= 1");
    if (cfg.learning_rate <= 0) throw ConfigError("validation: learning_rate must be > 0");
    if (cfg.faults.model == FaultSpec::Model::Probabilistic &&
        (cfg.faults.p < 0 || cfg.faults.p > 1))
        throw ConfigError("validation: p must lie in [0,1]");
    bool any_mnist = !cfg.train_images.empty() || !cfg.train_labels.empty();
    bool all_mnist = !cfg.train_images.empty() && !cfg.train_labels.empty();
    if (any_mnist && !all_mnist)
        throw ConfigError("validation: train_images and train_labels must be given together");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse_config(in);
}

}  // namespace codenet
