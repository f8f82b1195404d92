#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "autosde/autosde.hpp"
#include "autosde/io.hpp"
#include "autosde/neural.hpp"
#include "autosde/systems.hpp"

namespace autosde {

using nlohmann::json;

namespace detail {

/// Unknown keys are configuration errors so typos cannot silently change a run.
inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw format_error("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw format_error("config: unknown key '" + where + "." + key + "'");
}

template <typename T>
T get_req(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) throw format_error("config: missing key '" + where + "." + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw format_error("config: bad value for '" + where + "." + key + "'");
    }
}

template <typename T>
T get_opt(const json& j, const std::string& where, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw format_error("config: bad value for '" + where + "." + key + "'");
    }
}

}  // namespace detail

/// Simulation settings for one ensemble (also reused by the identification
/// data block, which may sample its own short-horizon fine-step dataset).
struct SimBlock {
    double dt = 0.0;
    long n_steps = 0;
    long n_traj = 0;
    std::vector<std::pair<double, double>> init;
    std::uint64_t seed = 0;
    int substeps = 1;
    long coarse_stride = 1;

    static SimBlock parse(const json& j, const std::string& where) {
        detail::check_keys(j, where, {"dt", "n_steps", "n_traj", "init", "seed", "substeps", "coarse_stride"});
        SimBlock b;
        b.dt = detail::get_req<double>(j, where, "dt");
        b.n_steps = detail::get_req<long>(j, where, "n_steps");
        b.n_traj = detail::get_req<long>(j, where, "n_traj");
        const auto init = detail::get_req<std::vector<std::vector<double>>>(j, where, "init");
        for (const auto& range : init) {
            if (range.size() != 2) throw format_error("config: " + where + ".init entries must be [lo, hi]");
            b.init.emplace_back(range[0], range[1]);
        }
        b.seed = detail::get_req<std::uint64_t>(j, where, "seed");
        b.substeps = detail::get_opt<int>(j, where, "substeps", 1);
        b.coarse_stride = detail::get_opt<long>(j, where, "coarse_stride", 1);
        require(b.dt > 0 && b.n_steps >= 1 && b.n_traj >= 1 && b.substeps >= 1 && b.coarse_stride >= 1,
                "config: " + where + " values out of range");
        return b;
    }

    InitSampler sampler() const { return InitSampler{init}; }
};

struct IdentBlock {
    int degree = 2;
    BasisKind kind = BasisKind::monomial;
    double threshold = 0.05;
    int max_sweeps = 10;
    std::optional<SimBlock> data;  // when absent, identify reads the simulate-stage ensemble

    static IdentBlock parse(const json& j) {
        detail::check_keys(j, "identification", {"degree", "kind", "threshold", "max_sweeps", "data"});
        IdentBlock b;
        b.degree = detail::get_opt<int>(j, "identification", "degree", 2);
        b.kind = basis_kind_from_string(detail::get_opt<std::string>(j, "identification", "kind", "monomial"));
        b.threshold = detail::get_opt<double>(j, "identification", "threshold", 0.05);
        b.max_sweeps = detail::get_opt<int>(j, "identification", "max_sweeps", 10);
        if (j.contains("data")) b.data = SimBlock::parse(j.at("data"), "identification.data");
        return b;
    }
};

struct TrainBlock {
    TrainConfig train;
    int latent_dim = 0;  // 0 = slow_dim + 1
    int enc_w1 = 32;
    int enc_w2 = 16;
    int lstm_hidden = 32;

    static TrainBlock parse(const json& j) {
        detail::check_keys(j, "training",
                           {"l", "epochs", "epochs_initial", "batch_size", "lr", "tau_dist", "max_generations",
                            "seed", "latent_dim", "enc_w1", "enc_w2", "lstm_hidden", "train_subset",
                            "distance_subsample", "extension_substeps", "convergence_lag", "normalize"});
        TrainBlock b;
        b.train.l = detail::get_opt<int>(j, "training", "l", 2);
        b.train.epochs = detail::get_opt<int>(j, "training", "epochs", 30);
        b.train.epochs_initial = detail::get_opt<int>(j, "training", "epochs_initial", -1);
        b.train.batch_size = detail::get_opt<int>(j, "training", "batch_size", 128);
        b.train.lr = detail::get_opt<double>(j, "training", "lr", 1e-3);
        b.train.tau_dist = detail::get_opt<double>(j, "training", "tau_dist", 0.05);
        b.train.max_generations = detail::get_opt<long>(j, "training", "max_generations", 30);
        b.train.seed = detail::get_opt<std::uint64_t>(j, "training", "seed", 0);
        b.train.train_subset = detail::get_opt<long>(j, "training", "train_subset", 0);
        b.train.distance_subsample = detail::get_opt<long>(j, "training", "distance_subsample", 5000);
        b.train.extension_substeps = detail::get_opt<int>(j, "training", "extension_substeps", 0);
        b.train.convergence_lag = detail::get_opt<long>(j, "training", "convergence_lag", 1);
        b.train.normalize = detail::get_opt<bool>(j, "training", "normalize", true);
        b.latent_dim = detail::get_opt<int>(j, "training", "latent_dim", 0);
        b.enc_w1 = detail::get_opt<int>(j, "training", "enc_w1", 32);
        b.enc_w2 = detail::get_opt<int>(j, "training", "enc_w2", 16);
        b.lstm_hidden = detail::get_opt<int>(j, "training", "lstm_hidden", 32);
        return b;
    }
};

struct ManifoldBlock {
    int degree = 2;
    double threshold = 0.01;

    static ManifoldBlock parse(const json& j) {
        detail::check_keys(j, "manifold", {"degree", "threshold"});
        ManifoldBlock b;
        b.degree = detail::get_opt<int>(j, "manifold", "degree", 2);
        b.threshold = detail::get_opt<double>(j, "manifold", "threshold", 0.01);
        return b;
    }
};

struct EvalBlock {
    std::vector<long> time_indices{10, 100, 1000};
    long n_samples = 1000;
    double dt = 0.001;
    int substeps = 1;
    std::uint64_t seed = 0;
    std::vector<double> start_slow;            // starting slow state; fast starts on the manifold
    std::vector<std::vector<double>> sigma_sweep;  // one sigma vector (slow block) per sweep entry
    long sweep_time_index = 100;
    long track_steps = 1000;

    static EvalBlock parse(const json& j) {
        detail::check_keys(j, "evaluation",
                           {"time_indices", "n_samples", "dt", "substeps", "seed", "start_slow", "sigma_sweep",
                            "sweep_time_index", "track_steps"});
        EvalBlock b;
        b.time_indices = detail::get_opt<std::vector<long>>(j, "evaluation", "time_indices", {10, 100, 1000});
        b.n_samples = detail::get_opt<long>(j, "evaluation", "n_samples", 1000);
        b.dt = detail::get_opt<double>(j, "evaluation", "dt", 0.001);
        b.substeps = detail::get_opt<int>(j, "evaluation", "substeps", 1);
        b.seed = detail::get_opt<std::uint64_t>(j, "evaluation", "seed", 0);
        b.start_slow = detail::get_req<std::vector<double>>(j, "evaluation", "start_slow");
        b.sigma_sweep = detail::get_opt<std::vector<std::vector<double>>>(j, "evaluation", "sigma_sweep", {});
        b.sweep_time_index = detail::get_opt<long>(j, "evaluation", "sweep_time_index", 100);
        b.track_steps = detail::get_opt<long>(j, "evaluation", "track_steps", 1000);
        return b;
    }
};

/// Full experiment recipe: a built-in or inline-polynomial system plus one
/// block per pipeline stage.
struct ExperimentConfig {
    std::string system_name;  // "example1", "example2" or "inline"
    int slow_dim = 0;
    int fast_dim = 0;
    double epsilon = 0.0;
    VectorXd sigma_slow, sigma_fast;
    // inline polynomial drifts (graded-lex monomial coefficients over the full state)
    int system_degree = 2;
    MatrixXd drift_slow_coeffs, drift_fast_coeffs;

    SimBlock simulation;
    IdentBlock identification;
    TrainBlock training;
    ManifoldBlock manifold;
    EvalBlock evaluation;

    std::string config_hash;

    SlowFastSystem make_system() const { return make_system_with_sigma(sigma_slow, sigma_fast); }

    SlowFastSystem make_system_with_sigma(const VectorXd& s_slow, const VectorXd& s_fast) const {
        if (system_name == "example1") return make_example1(s_slow[0], s_fast[0], epsilon);
        if (system_name == "example2") return make_example2(s_slow[0], s_slow[1], s_fast[0], epsilon);
        auto dict = std::make_shared<BasisDictionary>(slow_dim + fast_dim, system_degree, BasisKind::monomial);
        PolynomialDrift slow{dict, drift_slow_coeffs};
        PolynomialDrift fast{dict, drift_fast_coeffs};
        return make_polynomial_system(slow_dim, fast_dim, epsilon, slow, fast, s_slow, s_fast);
    }

    NetConfig net_config() const {
        NetConfig net;
        net.data_dim = slow_dim + fast_dim;
        net.latent_dim = training.latent_dim > 0 ? training.latent_dim : slow_dim + 1;
        net.enc_w1 = training.enc_w1;
        net.enc_w2 = training.enc_w2;
        net.lstm_hidden = training.lstm_hidden;
        return net;
    }

    std::vector<std::string> var_names() const {
        std::vector<std::string> names;
        if (slow_dim == 1)
            names.push_back("x");
        else
            for (int i = 1; i <= slow_dim; ++i) names.push_back("x" + std::to_string(i));
        if (fast_dim == 1)
            names.push_back("y");
        else
            for (int i = 1; i <= fast_dim; ++i) names.push_back("y" + std::to_string(i));
        return names;
    }

    std::vector<int> slow_dims() const {
        std::vector<int> dims;
        for (int i = 0; i < slow_dim; ++i) dims.push_back(i);
        return dims;
    }
};

namespace detail {

inline std::uint64_t fnv1a_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw format_error(std::string("config: malformed JSON: ") + e.what());
    }
    detail::check_keys(j, "<root>", {"system", "simulation", "identification", "training", "manifold", "evaluation"});

    ExperimentConfig cfg;
    const json& sys = j.at("system");
    if (sys.contains("name")) {
        detail::check_keys(sys, "system", {"name", "epsilon", "sigma_slow", "sigma_fast"});
        cfg.system_name = detail::get_req<std::string>(sys, "system", "name");
        if (cfg.system_name == "example1") {
            cfg.slow_dim = 1;
            cfg.fast_dim = 1;
            cfg.epsilon = detail::get_opt<double>(sys, "system", "epsilon", 0.01);
            cfg.sigma_slow = io::vector_from_json(sys.value("sigma_slow", json::array({1.0})), "sigma_slow");
            cfg.sigma_fast = io::vector_from_json(sys.value("sigma_fast", json::array({0.1})), "sigma_fast");
        } else if (cfg.system_name == "example2") {
            cfg.slow_dim = 2;
            cfg.fast_dim = 1;
            cfg.epsilon = detail::get_opt<double>(sys, "system", "epsilon", 0.001);
            cfg.sigma_slow = io::vector_from_json(sys.value("sigma_slow", json::array({1.0, 2.0})), "sigma_slow");
            cfg.sigma_fast = io::vector_from_json(sys.value("sigma_fast", json::array({0.1})), "sigma_fast");
        } else {
            throw format_error("config: unknown built-in system '" + cfg.system_name + "'");
        }
    } else {
        detail::check_keys(sys, "system",
                           {"slow_dim", "fast_dim", "epsilon", "degree", "drift_slow", "drift_fast", "sigma_slow",
                            "sigma_fast"});
        cfg.system_name = "inline";
        cfg.slow_dim = detail::get_req<int>(sys, "system", "slow_dim");
        cfg.fast_dim = detail::get_req<int>(sys, "system", "fast_dim");
        cfg.epsilon = detail::get_req<double>(sys, "system", "epsilon");
        cfg.system_degree = detail::get_opt<int>(sys, "system", "degree", 2);
        const BasisDictionary dict(cfg.slow_dim + cfg.fast_dim, cfg.system_degree, BasisKind::monomial);
        auto parse_drift = [&](const char* key, int n_out) {
            const MatrixXd m = io::matrix_from_json(sys.at(key), key).transpose();
            if (m.rows() != dict.n_terms() || m.cols() != n_out)
                throw format_error(std::string("config: ") + key + " must be " + std::to_string(n_out) + " rows of " +
                                   std::to_string(dict.n_terms()) + " graded-lex monomial coefficients");
            return m;
        };
        cfg.drift_slow_coeffs = parse_drift("drift_slow", cfg.slow_dim);
        cfg.drift_fast_coeffs = parse_drift("drift_fast", cfg.fast_dim);
        cfg.sigma_slow = io::vector_from_json(sys.at("sigma_slow"), "sigma_slow");
        cfg.sigma_fast = io::vector_from_json(sys.at("sigma_fast"), "sigma_fast");
    }
    require(cfg.sigma_slow.size() == cfg.slow_dim, "config: sigma_slow length must equal slow_dim");
    require(cfg.sigma_fast.size() == cfg.fast_dim, "config: sigma_fast length must equal fast_dim");

    cfg.simulation = SimBlock::parse(j.at("simulation"), "simulation");
    require(static_cast<int>(cfg.simulation.init.size()) == cfg.slow_dim + cfg.fast_dim,
            "config: simulation.init must give one [lo,hi] range per state coordinate");
    cfg.identification = IdentBlock::parse(j.value("identification", json::object()));
    cfg.training = TrainBlock::parse(j.value("training", json::object()));
    cfg.manifold = ManifoldBlock::parse(j.value("manifold", json::object()));
    cfg.evaluation = EvalBlock::parse(j.at("evaluation"));
    require(static_cast<int>(cfg.evaluation.start_slow.size()) == cfg.slow_dim,
            "config: evaluation.start_slow must have slow_dim entries");
    for (const auto& s : cfg.evaluation.sigma_sweep)
        require(static_cast<int>(s.size()) == cfg.slow_dim,
                "config: each sigma_sweep entry must have slow_dim entries");

    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a_hash(text)));
    cfg.config_hash = hash;
    return cfg;
}

inline ExperimentConfig load_config(const io::fs::path& path) {
    std::ifstream in = io::open_in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

}  // namespace autosde
