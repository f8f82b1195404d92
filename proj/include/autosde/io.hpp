#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autosde/evaluate.hpp"
#include "autosde/kramers_moyal.hpp"
#include "autosde/manifold.hpp"
#include "autosde/neural.hpp"
#include "autosde/sde.hpp"

namespace autosde::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kCheckpointSchemaVersion = 1;

// ---------------------------------------------------------------------------
// low-level helpers
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw format_error("cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path.string() + " for reading");
    return in;
}

inline json load_json(const fs::path& path) {
    std::ifstream in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw format_error("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

inline void save_json(const fs::path& path, const json& j) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

inline json matrix_to_json(const Eigen::Ref<const MatrixXd>& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline MatrixXd matrix_from_json(const json& rows, const std::string& what) {
    if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw format_error(what + ": expected a non-empty array of arrays");
    MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw format_error(what + ": ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::Ref<const VectorXd>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline VectorXd vector_from_json(const json& arr, const std::string& what) {
    if (!arr.is_array()) throw format_error(what + ": expected an array");
    VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
}

// ---------------------------------------------------------------------------
// trajectory / ensemble / snapshot CSV
// ---------------------------------------------------------------------------

inline void save_trajectory_csv(const fs::path& path, const Trajectory& traj) {
    std::ofstream out = open_out(path);
    out << "t";
    for (int c = 1; c <= traj.dim(); ++c) out << ",z" << c;
    out << "\n";
    for (long k = 0; k < traj.states.rows(); ++k) {
        out << format_double(traj.t0 + traj.dt * static_cast<double>(k));
        for (Eigen::Index c = 0; c < traj.states.cols(); ++c) out << "," << format_double(traj.states(k, c));
        out << "\n";
    }
}

namespace detail {

inline std::vector<double> parse_csv_row(const std::string& line, const std::string& where) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t next = line.find(',', pos);
        const std::string cell = line.substr(pos, next == std::string::npos ? next : next - pos);
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str()) throw format_error(where + ": bad numeric cell '" + cell + "'");
        out.push_back(v);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

}  // namespace detail

inline Trajectory load_trajectory_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,", 0) != 0)
        throw format_error(path.string() + ": missing trajectory CSV header");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(detail::parse_csv_row(line, path.string()));
    }
    if (rows.size() < 1) throw format_error(path.string() + ": empty trajectory");

    Trajectory traj;
    const std::size_t cols = rows[0].size() - 1;
    traj.t0 = rows[0][0];
    traj.dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 0.0;
    traj.states.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols + 1) throw format_error(path.string() + ": ragged CSV row");
        for (std::size_t c = 0; c < cols; ++c) traj.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c + 1];
    }
    return traj;
}

struct EnsembleMeta {
    int slow_dim = 0;
    int fast_dim = 0;
    double epsilon = 0.0;
    std::string config_hash;
};

/// Ensemble directory: manifest.json plus one trajectory CSV per member.
inline void save_ensemble(const fs::path& dir, const Ensemble& ensemble, const EnsembleMeta& meta) {
    fs::create_directories(dir);
    json manifest = {{"n", meta.slow_dim},
                     {"n_fast", meta.fast_dim},
                     {"epsilon", meta.epsilon},
                     {"dt", ensemble.dt()},
                     {"seed", ensemble.seed},
                     {"n_traj", ensemble.size()},
                     {"n_steps", ensemble.n_steps()},
                     {"t0", ensemble.trajectories.front().t0},
                     {"config_hash", meta.config_hash}};
    save_json(dir / "manifest.json", manifest);
    for (long i = 0; i < ensemble.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%06ld.csv", i);
        save_trajectory_csv(dir / name, ensemble.trajectories[static_cast<std::size_t>(i)]);
    }
}

inline std::pair<Ensemble, EnsembleMeta> load_ensemble(const fs::path& dir) {
    const json manifest = load_json(dir / "manifest.json");
    EnsembleMeta meta;
    meta.slow_dim = manifest.at("n").get<int>();
    meta.fast_dim = manifest.at("n_fast").get<int>();
    meta.epsilon = manifest.at("epsilon").get<double>();
    meta.config_hash = manifest.value("config_hash", "");

    Ensemble ens;
    ens.seed = manifest.at("seed").get<std::uint64_t>();
    const long n_traj = manifest.at("n_traj").get<long>();
    ens.trajectories.reserve(static_cast<std::size_t>(n_traj));
    for (long i = 0; i < n_traj; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%06ld.csv", i);
        ens.trajectories.push_back(load_trajectory_csv(dir / name));
    }
    return {std::move(ens), std::move(meta)};
}

inline void save_snapshot_csv(const fs::path& path, const Snapshot& snap) {
    std::ofstream out = open_out(path);
    for (int c = 1; c <= snap.points.cols(); ++c) out << (c > 1 ? "," : "") << "z" << c;
    out << "\n";
    for (long r = 0; r < snap.points.rows(); ++r) {
        for (Eigen::Index c = 0; c < snap.points.cols(); ++c)
            out << (c > 0 ? "," : "") << format_double(snap.points(r, c));
        out << "\n";
    }
}

inline Snapshot load_snapshot_csv(const fs::path& path, long time_index = 0) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("z1", 0) != 0)
        throw format_error(path.string() + ": missing snapshot CSV header");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(detail::parse_csv_row(line, path.string()));
    }
    if (rows.empty()) throw format_error(path.string() + ": empty snapshot");
    Snapshot snap;
    snap.time_index = time_index;
    snap.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            snap.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return snap;
}

// ---------------------------------------------------------------------------
// dictionaries and estimated SDEs
// ---------------------------------------------------------------------------

inline json dict_to_json(const BasisDictionary& dict) {
    json terms = json::array();
    for (const auto& alpha : dict.terms()) terms.push_back(alpha);
    return {{"kind", to_string(dict.kind())}, {"dim", dict.dim()}, {"degree", dict.degree()}, {"terms", terms}};
}

inline std::shared_ptr<BasisDictionary> dict_from_json(const json& j) {
    auto dict = std::make_shared<BasisDictionary>(j.at("dim").get<int>(), j.at("degree").get<int>(),
                                                  basis_kind_from_string(j.at("kind").get<std::string>()));
    // terms are derivable; verify they match so artifacts can't silently drift
    if (j.contains("terms")) {
        const auto terms = j.at("terms").get<std::vector<std::vector<int>>>();
        if (terms != dict->terms()) throw format_error("estimated-sde dictionary terms do not match builder order");
    }
    return dict;
}

inline void save_estimated_sde(const fs::path& path, const EstimatedSde& esde, const std::string& config_hash,
                               std::uint64_t seed) {
    json j = {{"dict", dict_to_json(*esde.dict)},
              {"theta_drift", matrix_to_json(esde.theta_drift)},
              {"theta_diff2", matrix_to_json(esde.theta_diff2)},
              {"identified_dims", esde.identified_dims},
              {"threshold", esde.threshold},
              {"fit_diagnostics",
               {{"L_drift", esde.diagnostics.loss_drift},
                {"L_diffusion", esde.diagnostics.loss_diffusion},
                {"n_pairs", esde.diagnostics.n_pairs}}},
              {"config_hash", config_hash},
              {"seed", seed}};
    save_json(path, j);
}

inline EstimatedSde load_estimated_sde(const fs::path& path) {
    const json j = load_json(path);
    EstimatedSde esde;
    esde.dict = dict_from_json(j.at("dict"));
    esde.theta_drift = matrix_from_json(j.at("theta_drift"), "theta_drift");
    esde.theta_diff2 = matrix_from_json(j.at("theta_diff2"), "theta_diff2");
    esde.identified_dims = j.at("identified_dims").get<std::vector<int>>();
    esde.threshold = j.at("threshold").get<double>();
    esde.diagnostics.loss_drift = j.at("fit_diagnostics").at("L_drift").get<double>();
    esde.diagnostics.loss_diffusion = j.at("fit_diagnostics").at("L_diffusion").get<double>();
    esde.diagnostics.n_pairs = j.at("fit_diagnostics").at("n_pairs").get<long>();
    return esde;
}

/// Coefficient-table CSV for the identified drift/diffusion: one row per basis
/// term. The diffusion column is reported on the sigma scale whenever only
/// the constant term survived (the constant row then holds sqrt(theta2_0));
/// otherwise the raw sigma^2 coefficients are emitted under diffusion2_*.
inline void save_sde_table_csv(const fs::path& path, const EstimatedSde& esde,
                               const std::vector<std::string>& var_names) {
    std::ofstream out = open_out(path);
    const int n_id = static_cast<int>(esde.identified_dims.size());

    std::vector<bool> const_only(static_cast<std::size_t>(n_id), true);
    for (int j = 0; j < n_id; ++j)
        for (int t = 1; t < esde.dict->n_terms(); ++t)
            if (esde.theta_diff2(t, j) != 0.0) const_only[static_cast<std::size_t>(j)] = false;

    out << "basis";
    for (int j = 0; j < n_id; ++j) {
        const std::string var = var_names[static_cast<std::size_t>(esde.identified_dims[static_cast<std::size_t>(j)])];
        out << ",drift_" << var;
        out << (const_only[static_cast<std::size_t>(j)] ? ",diffusion_" : ",diffusion2_") << var;
    }
    out << "\n";
    for (int t = 0; t < esde.dict->n_terms(); ++t) {
        out << esde.dict->term_label(t, var_names);
        for (int j = 0; j < n_id; ++j) {
            out << "," << format_double(esde.theta_drift(t, j)) << ",";
            if (const_only[static_cast<std::size_t>(j)])
                out << format_double(t == 0 ? std::sqrt(std::max(esde.theta_diff2(0, j), 0.0)) : 0.0);
            else
                out << format_double(esde.theta_diff2(t, j));
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// model checkpoints
// ---------------------------------------------------------------------------

inline void save_model(const fs::path& path, const AutoSdeModel& model, const json& training_meta = json::object()) {
    const NetConfig& cfg = model.config();
    json layout = json::array();
    for (const ParamSegment& s : model.layout())
        layout.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"offset", s.offset}});
    json j = {{"schema_version", kCheckpointSchemaVersion},
              {"architecture",
               {{"data_dim", cfg.data_dim},
                {"latent_dim", cfg.latent_dim},
                {"enc_w1", cfg.enc_w1},
                {"enc_w2", cfg.enc_w2},
                {"lstm_hidden", cfg.lstm_hidden},
                {"activation", "tanh"}}},
              {"layout", layout},
              {"parameters", vector_to_json(model.params())},
              {"init_seed", model.init_seed()},
              {"training", training_meta}};
    save_json(path, j);
}

inline AutoSdeModel load_model(const fs::path& path) {
    const json j = load_json(path);
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion)
        throw format_error("model checkpoint schema version mismatch: expected " +
                           std::to_string(kCheckpointSchemaVersion) + ", found " + std::to_string(version));
    const json& a = j.at("architecture");
    NetConfig cfg{a.at("data_dim").get<int>(), a.at("latent_dim").get<int>(), a.at("enc_w1").get<int>(),
                  a.at("enc_w2").get<int>(), a.at("lstm_hidden").get<int>()};
    AutoSdeModel model(cfg, j.at("init_seed").get<std::uint64_t>());
    const VectorXd params = vector_from_json(j.at("parameters"), "parameters");
    if (params.size() != model.n_params())
        throw format_error("model checkpoint parameter count mismatch: expected " +
                           std::to_string(model.n_params()) + ", found " + std::to_string(params.size()));
    model.params() = params;
    return model;
}

// ---------------------------------------------------------------------------
// manifold and reduced-system artifacts
// ---------------------------------------------------------------------------

inline void save_manifold(const fs::path& path, const ManifoldFit& fit, const json& provenance,
                          const std::string& config_hash) {
    json j = {{"slow_dims", fit.slow_dims},
              {"fast_dims", fit.fast_dims},
              {"dict", dict_to_json(*fit.dict)},
              {"coeffs", matrix_to_json(fit.coeffs)},
              {"residual_rms", fit.residual_rms},
              {"provenance", provenance},
              {"config_hash", config_hash}};
    save_json(path, j);
}

inline ManifoldFit load_manifold(const fs::path& path) {
    const json j = load_json(path);
    ManifoldFit fit;
    fit.slow_dims = j.at("slow_dims").get<std::vector<int>>();
    fit.fast_dims = j.at("fast_dims").get<std::vector<int>>();
    fit.dict = dict_from_json(j.at("dict"));
    fit.coeffs = matrix_from_json(j.at("coeffs"), "manifold coeffs");
    fit.residual_rms = j.at("residual_rms").get<double>();
    return fit;
}

// ---------------------------------------------------------------------------
// evaluation artifacts
// ---------------------------------------------------------------------------

inline json histogram_to_json(const Histogram& h) {
    return {{"edges", vector_to_json(h.edges)}, {"counts", h.counts}, {"n_total", h.n_total}};
}

inline json comparison_to_json(const DistributionComparison& c) {
    json hists_r = json::array(), hists_o = json::array();
    for (const Histogram& h : c.hist_reduced) hists_r.push_back(histogram_to_json(h));
    for (const Histogram& h : c.hist_original) hists_o.push_back(histogram_to_json(h));
    return {{"time_index", c.time_index},
            {"ks", vector_to_json(c.ks)},
            {"energy_distance", c.energy_distance},
            {"mean_reduced", vector_to_json(c.mean_reduced)},
            {"std_reduced", vector_to_json(c.std_reduced)},
            {"mean_original", vector_to_json(c.mean_original)},
            {"std_original", vector_to_json(c.std_original)},
            {"hist_reduced", hists_r},
            {"hist_original", hists_o}};
}

/// Plot-ready histogram CSV: one row per bin and coordinate side by side.
inline void save_distribution_fig_csv(const fs::path& path, const DistributionComparison& c) {
    std::ofstream out = open_out(path);
    out << "coordinate,bin_lo,bin_hi,count_reduced,count_original\n";
    for (std::size_t j = 0; j < c.hist_reduced.size(); ++j) {
        const Histogram& hr = c.hist_reduced[j];
        const Histogram& ho = c.hist_original[j];
        for (std::size_t b = 0; b < hr.counts.size(); ++b)
            out << "x" << (j + 1) << "," << format_double(hr.edges[static_cast<Eigen::Index>(b)]) << ","
                << format_double(hr.edges[static_cast<Eigen::Index>(b) + 1]) << "," << hr.counts[b] << ","
                << ho.counts[b] << "\n";
    }
}

inline void save_track_fig_csv(const fs::path& path, const TrackResult& track, double dt) {
    std::ofstream out = open_out(path);
    out << "t";
    for (int c = 1; c <= track.reduced_path.cols(); ++c) out << ",reduced_x" << c;
    for (int c = 1; c <= track.original_path.cols(); ++c) out << ",original_x" << c;
    out << ",error\n";
    for (long k = 0; k < track.reduced_path.rows(); ++k) {
        out << format_double(dt * static_cast<double>(k));
        for (Eigen::Index c = 0; c < track.reduced_path.cols(); ++c) out << "," << format_double(track.reduced_path(k, c));
        for (Eigen::Index c = 0; c < track.original_path.cols(); ++c)
            out << "," << format_double(track.original_path(k, c));
        out << "," << format_double(track.per_step_error[k]) << "\n";
    }
}

inline void save_sweep_fig_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out = open_out(path);
    out << "sigma,coordinate,std_reduced,std_original\n";
    for (const SweepRow& row : rows)
        for (Eigen::Index c = 0; c < row.std_reduced.size(); ++c)
            out << format_double(row.sigma_slow[std::min<Eigen::Index>(c, row.sigma_slow.size() - 1)]) << ",x"
                << (c + 1) << "," << format_double(row.std_reduced[c]) << "," << format_double(row.std_original[c])
                << "\n";
}

}  // namespace autosde::io
