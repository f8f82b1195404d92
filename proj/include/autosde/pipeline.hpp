#pragma once

#include <string>
#include <vector>

#include "autosde/config.hpp"
#include "autosde/evaluate.hpp"
#include "autosde/io.hpp"

namespace autosde::pipeline {

using io::fs::path;
using nlohmann::json;

/// Artifact locations inside one experiment output directory.
struct Paths {
    path out;
    path ensemble_dir() const { return out / "ensemble"; }
    path esde_file() const { return out / "esde.json"; }
    path sde_table() const { return out / "sde_table.csv"; }
    path model_file() const { return out / "model.json"; }
    path run_manifest() const { return out / "run_manifest.json"; }
    path snapshot_dir() const { return out / "snapshots"; }
    path converged_snapshot() const { return out / "converged_snapshot.csv"; }
    path manifold_file() const { return out / "manifold.json"; }
    path reduced_file() const { return out / "reduced.json"; }
    path report_file() const { return out / "comparison_report.json"; }
};

// ---------------------------------------------------------------------------
// in-memory stage cores (shared by the CLI stages and the acceptance suite)
// ---------------------------------------------------------------------------

inline Ensemble simulate_core(const ExperimentConfig& cfg) {
    const SlowFastSystem system = cfg.make_system();
    Ensemble ens = simulate_ensemble(system, cfg.simulation.sampler(), cfg.simulation.n_traj, cfg.simulation.dt,
                                     cfg.simulation.n_steps, cfg.simulation.seed, cfg.simulation.substeps);
    if (cfg.simulation.coarse_stride > 1) ens = coarse_grain(ens, cfg.simulation.coarse_stride);
    return ens;
}

/// Identification ensemble: the dedicated short-horizon dataset when the
/// identification block carries one, otherwise the simulate-stage ensemble.
inline Ensemble identification_ensemble(const ExperimentConfig& cfg, const Ensemble* simulated) {
    if (cfg.identification.data) {
        const SimBlock& d = *cfg.identification.data;
        const SlowFastSystem system = cfg.make_system();
        InitSampler init = d.init.empty() ? cfg.simulation.sampler() : d.sampler();
        Ensemble ens = simulate_ensemble(system, init, d.n_traj, d.dt, d.n_steps, d.seed, d.substeps);
        if (d.coarse_stride > 1) ens = coarse_grain(ens, d.coarse_stride);
        return ens;
    }
    require(simulated != nullptr, "identify: no simulate-stage ensemble available");
    return *simulated;
}

inline EstimatedSde identify_core(const ExperimentConfig& cfg, const Ensemble& data) {
    auto dict = std::make_shared<BasisDictionary>(cfg.slow_dim + cfg.fast_dim, cfg.identification.degree,
                                                  cfg.identification.kind);
    const KmTargets targets = build_km_targets(data, dict, cfg.slow_dims());
    EstimatedSde esde = fit_sde(targets, dict, cfg.slow_dims(), cfg.identification.threshold,
                                cfg.identification.max_sweeps);
    if (cfg.identification.kind == BasisKind::hermite) {
        // report in the monomial basis (the coefficient-table convention)
        auto mono = std::make_shared<BasisDictionary>(dict->dim(), dict->degree(), BasisKind::monomial);
        MatrixXd drift(mono->n_terms(), esde.theta_drift.cols());
        MatrixXd diff2(mono->n_terms(), esde.theta_diff2.cols());
        for (Eigen::Index c = 0; c < esde.theta_drift.cols(); ++c) {
            drift.col(c) = convert_coefficients(*dict, *mono, esde.theta_drift.col(c));
            diff2.col(c) = convert_coefficients(*dict, *mono, esde.theta_diff2.col(c));
        }
        esde.dict = mono;
        esde.theta_drift = drift;
        esde.theta_diff2 = diff2;
    }
    return esde;
}

struct TrainOutput {
    AutoSdeModel model;
    Algorithm1Result result;
};

inline TrainOutput train_core(const ExperimentConfig& cfg, const Ensemble& ensemble, const EstimatedSde& esde) {
    const SlowFastSystem system = cfg.make_system();
    AutoSdeModel model(cfg.net_config(), cfg.training.train.seed);
    Algorithm1Result result = run_algorithm1(model, ensemble, esde, system, cfg.training.train);
    return {std::move(model), std::move(result)};
}

inline ManifoldFit reduce_core(const ExperimentConfig& cfg, const Snapshot& converged) {
    return fit_manifold(converged, cfg.slow_dims(), cfg.manifold.degree, cfg.manifold.threshold);
}

/// Identified noise amplitude of the slow block: sigma per coordinate from
/// the constant term of the fitted sigma^2.
inline VectorXd identified_sigma(const EstimatedSde& esde) {
    VectorXd sigma(esde.theta_diff2.cols());
    for (Eigen::Index c = 0; c < sigma.size(); ++c)
        sigma[c] = std::sqrt(std::max(esde.theta_diff2(BasisDictionary::constant_index(), c), 0.0));
    return sigma;
}

struct EvalOutput {
    ComparisonReport report;
    std::vector<SweepRow> sweep;
};

inline EvalOutput evaluate_core(const ExperimentConfig& cfg, const EstimatedSde& esde, const ManifoldFit& manifold) {
    const EvalBlock& ev = cfg.evaluation;
    const SlowFastSystem original = cfg.make_system();
    VectorXd x0(cfg.slow_dim);
    for (int i = 0; i < cfg.slow_dim; ++i) x0[i] = ev.start_slow[static_cast<std::size_t>(i)];
    const VectorXd y0 = manifold.evaluate(x0);
    VectorXd z0(cfg.slow_dim + cfg.fast_dim);
    z0 << x0, y0;

    EvalOutput out;
    const ReducedSystem reduced = build_reduced(esde, manifold, identified_sigma(esde));

    // distribution agreement at the requested time indices
    long horizon = 1;
    for (long idx : ev.time_indices) horizon = std::max(horizon, idx);
    const Ensemble red_ens =
        simulate_ensemble(reduced.as_system(), InitSampler::fixed(x0), ev.n_samples, ev.dt, horizon, ev.seed);
    const Ensemble orig_ens = simulate_ensemble(original, InitSampler::fixed(z0), ev.n_samples, ev.dt, horizon,
                                                ev.seed + 1, ev.substeps);
    out.report.at_times = compare_distributions(red_ens, orig_ens, cfg.slow_dims(), ev.time_indices);

    // single-path tracking under common random numbers
    out.report.track = track_trajectory(reduced, original, x0, y0, ev.dt, ev.track_steps, ev.seed + 2, ev.substeps);

    // noise sweep: rebuild both systems at each sigma level
    for (std::size_t s = 0; s < ev.sigma_sweep.size(); ++s) {
        VectorXd sig(cfg.slow_dim);
        for (int i = 0; i < cfg.slow_dim; ++i) sig[i] = ev.sigma_sweep[s][static_cast<std::size_t>(i)];
        const SlowFastSystem orig_s = cfg.make_system_with_sigma(sig, cfg.sigma_fast);
        const ReducedSystem red_s = build_reduced(esde, manifold, sig);
        out.sweep.push_back(sweep_row(red_s, orig_s, x0, y0, ev.dt, ev.sweep_time_index, ev.n_samples,
                                      ev.seed + 10 + s, ev.substeps));
    }
    return out;
}

// ---------------------------------------------------------------------------
// persistent stages
// ---------------------------------------------------------------------------

inline void stage_simulate(const ExperimentConfig& cfg, const Paths& paths) {
    const Ensemble ens = simulate_core(cfg);
    io::save_ensemble(paths.ensemble_dir(), ens, {cfg.slow_dim, cfg.fast_dim, cfg.epsilon, cfg.config_hash});
}

inline void stage_identify(const ExperimentConfig& cfg, const Paths& paths) {
    Ensemble simulated;
    const Ensemble* sim_ptr = nullptr;
    if (!cfg.identification.data) {
        simulated = io::load_ensemble(paths.ensemble_dir()).first;
        sim_ptr = &simulated;
    }
    const Ensemble data = identification_ensemble(cfg, sim_ptr);
    const EstimatedSde esde = identify_core(cfg, data);
    const std::uint64_t seed = cfg.identification.data ? cfg.identification.data->seed : cfg.simulation.seed;
    io::save_estimated_sde(paths.esde_file(), esde, cfg.config_hash, seed);
    io::save_sde_table_csv(paths.sde_table(), esde, cfg.var_names());
}

inline void stage_train(const ExperimentConfig& cfg, const Paths& paths) {
    const Ensemble ensemble = io::load_ensemble(paths.ensemble_dir()).first;
    const EstimatedSde esde = io::load_estimated_sde(paths.esde_file());
    TrainOutput out = train_core(cfg, ensemble, esde);

    json snapshot_files = json::array();
    for (std::size_t g = 0; g < out.result.snapshots.size(); ++g) {
        char name[32];
        std::snprintf(name, sizeof name, "gen_%03zu.csv", g);
        io::save_snapshot_csv(paths.snapshot_dir() / name, out.result.snapshots[g]);
        snapshot_files.push_back({{"generation", g},
                                  {"time_index", out.result.snapshots[g].time_index},
                                  {"file", std::string("snapshots/") + name}});
    }
    io::save_snapshot_csv(paths.converged_snapshot(), out.result.snapshots.back());

    json losses = json::array();
    for (const auto& trace : out.result.losses) losses.push_back(trace);
    const json manifest = {
        {"config_hash", cfg.config_hash},
        {"seed", cfg.training.train.seed},
        {"config",
         {{"m", ensemble.n_steps() + 1},
          {"l", cfg.training.train.l},
          {"epochs", cfg.training.train.epochs},
          {"epochs_initial", cfg.training.train.epochs_initial},
          {"batch_size", cfg.training.train.batch_size},
          {"lr", cfg.training.train.lr},
          {"tau_dist", cfg.training.train.tau_dist},
          {"max_generations", cfg.training.train.max_generations},
          {"train_subset", cfg.training.train.train_subset},
          {"distance_subsample", cfg.training.train.distance_subsample}}},
        {"losses", losses},
        {"distances", out.result.distances},
        {"generations_run", out.result.generations_run},
        {"status", out.result.status == ConvergenceStatus::converged ? "converged" : "max_generations_reached"},
        {"snapshots", snapshot_files}};
    io::save_json(paths.run_manifest(), manifest);
    io::save_model(paths.model_file(), out.model,
                   {{"generations", out.result.generations_run},
                    {"status", out.result.status == ConvergenceStatus::converged ? "converged" : "max_generations_reached"},
                    {"config_hash", cfg.config_hash},
                    {"seed", cfg.training.train.seed}});
}

inline void stage_reduce(const ExperimentConfig& cfg, const Paths& paths) {
    const json manifest = io::load_json(paths.run_manifest());
    const long time_index = manifest.at("snapshots").back().at("time_index").get<long>();
    const Snapshot converged = io::load_snapshot_csv(paths.converged_snapshot(), time_index);
    const ManifoldFit fit = reduce_core(cfg, converged);
    io::save_manifold(paths.manifold_file(), fit,
                      {{"snapshot", "converged_snapshot.csv"}, {"time_index", time_index}}, cfg.config_hash);

    const EstimatedSde esde = io::load_estimated_sde(paths.esde_file());
    const json reduced = {{"drift_source", "estimated"},
                          {"esde_file", "esde.json"},
                          {"manifold_file", "manifold.json"},
                          {"sigma_slow", io::vector_to_json(identified_sigma(esde))},
                          {"slow_dim", cfg.slow_dim},
                          {"config_hash", cfg.config_hash}};
    io::save_json(paths.reduced_file(), reduced);
}

inline void stage_evaluate(const ExperimentConfig& cfg, const Paths& paths) {
    const EstimatedSde esde = io::load_estimated_sde(paths.esde_file());
    const ManifoldFit manifold = io::load_manifold(paths.manifold_file());
    const EvalOutput out = evaluate_core(cfg, esde, manifold);

    json at_times = json::array();
    for (const auto& cmp : out.report.at_times) {
        at_times.push_back(io::comparison_to_json(cmp));
        char name[40];
        std::snprintf(name, sizeof name, "fig_dist_nt%ld.csv", cmp.time_index);
        io::save_distribution_fig_csv(paths.out / name, cmp);
    }
    io::save_track_fig_csv(paths.out / "fig_track.csv", out.report.track, cfg.evaluation.dt);
    if (!out.sweep.empty()) io::save_sweep_fig_csv(paths.out / "fig_sweep.csv", out.sweep);

    json sweep = json::array();
    for (const auto& row : out.sweep)
        sweep.push_back({{"sigma", io::vector_to_json(row.sigma_slow)},
                         {"std_reduced", io::vector_to_json(row.std_reduced)},
                         {"std_original", io::vector_to_json(row.std_original)}});
    const json report = {{"config_hash", cfg.config_hash},
                         {"seed", cfg.evaluation.seed},
                         {"at_times", at_times},
                         {"track_rmse", out.report.track.rmse},
                         {"sweep", sweep}};
    io::save_json(paths.report_file(), report);
}

inline void run_stage(const std::string& name, const ExperimentConfig& cfg, const Paths& paths) {
    if (name == "simulate")
        stage_simulate(cfg, paths);
    else if (name == "identify")
        stage_identify(cfg, paths);
    else if (name == "train")
        stage_train(cfg, paths);
    else if (name == "reduce")
        stage_reduce(cfg, paths);
    else if (name == "evaluate")
        stage_evaluate(cfg, paths);
    else if (name == "full")
        for (const char* s : {"simulate", "identify", "train", "reduce", "evaluate"}) run_stage(s, cfg, paths);
    else
        throw std::invalid_argument("unknown stage '" + name + "'");
}

}  // namespace autosde::pipeline
