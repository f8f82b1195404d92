#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "autosde/config.hpp"
#include "autosde/io.hpp"
#include "autosde/pipeline.hpp"

using namespace autosde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("autosde_test_" + std::to_string(std::rand()) +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffff));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

/// Small example1-shaped recipe that runs end to end in a couple of seconds.
std::string tiny_config_text(std::uint64_t sim_seed = 18) {
    return R"({
  "system": {"name": "example1"},
  "simulation": {"dt": 0.001, "n_steps": 10, "n_traj": 60, "init": [[-5,5],[-6,6]], "seed": )" +
           std::to_string(sim_seed) + R"(},
  "identification": {"degree": 2, "kind": "monomial", "threshold": 0.3},
  "training": {"l": 2, "epochs": 5, "epochs_initial": 20, "batch_size": 32, "lr": 0.002,
               "tau_dist": 0.2, "max_generations": 3, "seed": 1, "latent_dim": 2,
               "enc_w1": 16, "enc_w2": 8, "lstm_hidden": 16},
  "manifold": {"degree": 2, "threshold": 0.01},
  "evaluation": {"time_indices": [5, 10], "n_samples": 80, "dt": 0.001, "seed": 33,
                 "start_slow": [1.0], "sigma_sweep": [[0.5],[1.0]], "sweep_time_index": 20,
                 "track_steps": 50}
})";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("trajectory and snapshot CSV round trips") {
    TempDir tmp;
    const SlowFastSystem sys = make_example1();
    RngStream stream(3);
    VectorXd z0(2);
    z0 << 1.0, 0.5;
    const Trajectory traj = simulate_trajectory(sys, z0, 0.001, 10, stream);
    io::save_trajectory_csv(tmp.path / "traj.csv", traj);
    const Trajectory back = io::load_trajectory_csv(tmp.path / "traj.csv");
    REQUIRE(back.states.rows() == traj.states.rows());
    REQUIRE((back.states - traj.states).cwiseAbs().maxCoeff() == 0.0);  // %.17g is bit-exact
    REQUIRE(back.dt == Approx(traj.dt).margin(1e-15));

    Snapshot snap;
    snap.time_index = 10;
    snap.points = traj.states;
    io::save_snapshot_csv(tmp.path / "snap.csv", snap);
    const Snapshot snap_back = io::load_snapshot_csv(tmp.path / "snap.csv", 10);
    REQUIRE((snap_back.points - snap.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ensemble directory round trip preserves every state bit") {
    TempDir tmp;
    const SlowFastSystem sys = make_example1();
    InitSampler init{{{-5.0, 5.0}, {-6.0, 6.0}}};
    const Ensemble ens = simulate_ensemble(sys, init, 12, 0.001, 10, 7);
    io::save_ensemble(tmp.path / "ens", ens, {1, 1, 0.01, "deadbeef"});

    const auto [back, meta] = io::load_ensemble(tmp.path / "ens");
    REQUIRE(back.size() == 12);
    REQUIRE(back.seed == 7);
    REQUIRE(meta.slow_dim == 1);
    REQUIRE(meta.epsilon == 0.01);
    REQUIRE(meta.config_hash == "deadbeef");
    for (long i = 0; i < 12; ++i)
        REQUIRE((back.trajectories[static_cast<std::size_t>(i)].states -
                 ens.trajectories[static_cast<std::size_t>(i)].states)
                    .cwiseAbs()
                    .maxCoeff() == 0.0);
}

TEST_CASE("estimated SDE JSON round trip") {
    TempDir tmp;
    auto dict = std::make_shared<BasisDictionary>(2, 2, BasisKind::monomial);
    EstimatedSde esde;
    esde.dict = dict;
    esde.theta_drift = MatrixXd::Zero(6, 1);
    esde.theta_drift(1, 0) = 0.9821;
    esde.theta_drift(4, 0) = -1.0078;
    esde.theta_diff2 = MatrixXd::Zero(6, 1);
    esde.theta_diff2(0, 0) = 1.0640;
    esde.identified_dims = {0};
    esde.threshold = 0.2;
    esde.diagnostics = {12.5, 2.25, 12000};

    io::save_estimated_sde(tmp.path / "esde.json", esde, "cafe", 18);
    const EstimatedSde back = io::load_estimated_sde(tmp.path / "esde.json");
    REQUIRE((back.theta_drift - esde.theta_drift).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((back.theta_diff2 - esde.theta_diff2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.identified_dims == esde.identified_dims);
    REQUIRE(back.threshold == 0.2);
    REQUIRE(back.diagnostics.n_pairs == 12000);
    REQUIRE(back.dict->kind() == BasisKind::monomial);

    // table mirrors the monomial layout with a sigma-scale diffusion column
    io::save_sde_table_csv(tmp.path / "table.csv", esde, {"x", "y"});
    const std::string table = slurp(tmp.path / "table.csv");
    REQUIRE(table.find("basis,drift_x,diffusion_x") == 0);
    REQUIRE(table.find("\n1,0,") != std::string::npos);
    REQUIRE(table.find("x*y,") != std::string::npos);
}

TEST_CASE("model checkpoint round trips bit-exactly and rejects bad files") {
    TempDir tmp;
    AutoSdeModel model(NetConfig{2, 2, 8, 6, 8}, 42);
    RngStream s(5);
    for (long i = 0; i < model.n_params(); ++i) model.params()[i] += 0.01 * s.next_normal();

    io::save_model(tmp.path / "model.json", model, {{"note", "fixture"}});
    AutoSdeModel back = io::load_model(tmp.path / "model.json");
    REQUIRE(back.params().size() == model.n_params());
    REQUIRE((back.params() - model.params()).cwiseAbs().maxCoeff() == 0.0);

    // identical forward outputs on a probe window
    MatrixXd window(5, 2);
    window << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8, 0.9, 1.0;
    const auto [out_a, tape_a] = forward(model, window);
    const auto [out_b, tape_b] = forward(back, window);
    REQUIRE((out_a - out_b).cwiseAbs().maxCoeff() == 0.0);

    // truncated file: parse error, no partial model
    {
        const std::string full = slurp(tmp.path / "model.json");
        std::ofstream trunc(tmp.path / "trunc.json");
        trunc << full.substr(0, full.size() / 2);
    }
    REQUIRE_THROWS_AS(io::load_model(tmp.path / "trunc.json"), format_error);

    // wrong schema version is named in the error
    {
        io::json j = io::load_json(tmp.path / "model.json");
        j["schema_version"] = 2;
        io::save_json(tmp.path / "v2.json", j);
    }
    try {
        io::load_model(tmp.path / "v2.json");
        FAIL("expected version error");
    } catch (const format_error& e) {
        REQUIRE(std::string(e.what()).find("expected 1") != std::string::npos);
        REQUIRE(std::string(e.what()).find("found 2") != std::string::npos);
    }
}

TEST_CASE("manifold JSON round trip") {
    TempDir tmp;
    ManifoldFit fit;
    fit.slow_dims = {0};
    fit.fast_dims = {1};
    fit.dict = std::make_shared<BasisDictionary>(1, 2, BasisKind::monomial);
    fit.coeffs.resize(3, 1);
    fit.coeffs << -0.0324, -0.0134, 0.2622;
    fit.residual_rms = 0.015;
    io::save_manifold(tmp.path / "manifold.json", fit, {{"snapshot", "s.csv"}}, "hash");
    const ManifoldFit back = io::load_manifold(tmp.path / "manifold.json");
    REQUIRE((back.coeffs - fit.coeffs).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.slow_dims == fit.slow_dims);
    REQUIRE(back.residual_rms == 0.015);
}

TEST_CASE("config parser enforces schema strictly") {
    REQUIRE_THROWS_AS(parse_config_text("{not json"), format_error);

    // unknown key anywhere is an error naming the key
    try {
        parse_config_text(R"({"system": {"name": "example1"}, "simulation": {"dt": 1, "n_steps": 1,
            "n_traj": 1, "init": [[0,1],[0,1]], "seed": 1, "typo_key": 3},
            "evaluation": {"start_slow": [1.0]}})");
        FAIL("expected unknown-key error");
    } catch (const format_error& e) {
        REQUIRE(std::string(e.what()).find("simulation.typo_key") != std::string::npos);
    }

    // missing required key is an error naming the key
    try {
        parse_config_text(R"({"system": {"name": "example1"},
            "simulation": {"dt": 1, "n_steps": 1, "n_traj": 1, "init": [[0,1],[0,1]], "seed": 1},
            "evaluation": {}})");
        FAIL("expected missing-key error");
    } catch (const format_error& e) {
        REQUIRE(std::string(e.what()).find("evaluation.start_slow") != std::string::npos);
    }

    // inline polynomial systems build and simulate
    const ExperimentConfig cfg = parse_config_text(R"({
        "system": {"slow_dim": 1, "fast_dim": 1, "epsilon": 0.5, "degree": 2,
                   "drift_slow": [[0, -1, 0, 0, 0, 0]],
                   "drift_fast": [[0, 0, -1, 0, 0, 0]],
                   "sigma_slow": [0.0], "sigma_fast": [0.0]},
        "simulation": {"dt": 0.01, "n_steps": 5, "n_traj": 2, "init": [[1,1],[2,2]], "seed": 3},
        "evaluation": {"start_slow": [1.0]}})");
    const SlowFastSystem sys = cfg.make_system();
    VectorXd x(1), y(1);
    x << 2.0;
    y << 3.0;
    REQUIRE(sys.f(x, y)[0] == -2.0);
    REQUIRE(sys.g(x, y)[0] == -3.0);

    // bundled configs parse
    REQUIRE_NOTHROW(load_config(std::string(AUTOSDE_CONFIG_DIR) + "/example1.cfg"));
    REQUIRE_NOTHROW(load_config(std::string(AUTOSDE_CONFIG_DIR) + "/example2.cfg"));
}

TEST_CASE("pipeline stages compose and full equals the staged run byte for byte") {
    TempDir tmp;
    const ExperimentConfig cfg = parse_config_text(tiny_config_text());

    pipeline::Paths staged{tmp.path / "staged"};
    for (const char* s : {"simulate", "identify", "train", "reduce", "evaluate"})
        pipeline::run_stage(s, cfg, staged);

    pipeline::Paths full{tmp.path / "full"};
    pipeline::run_stage("full", cfg, full);

    for (const char* f : {"esde.json", "sde_table.csv", "model.json", "run_manifest.json", "manifold.json",
                          "reduced.json", "comparison_report.json", "converged_snapshot.csv"}) {
        INFO(f);
        REQUIRE(slurp(staged.out / f) == slurp(full.out / f));
        REQUIRE(!slurp(full.out / f).empty());
    }

    // determinism: the same config reruns to identical artifacts
    pipeline::Paths again{tmp.path / "again"};
    pipeline::run_stage("full", cfg, again);
    REQUIRE(slurp(again.out / "comparison_report.json") == slurp(full.out / "comparison_report.json"));
    REQUIRE(slurp(again.out / "model.json") == slurp(full.out / "model.json"));

    // artifacts embed the config hash
    const io::json esde = io::load_json(full.out / "esde.json");
    REQUIRE(esde.at("config_hash").get<std::string>() == cfg.config_hash);

    // run manifest carries per-generation snapshots with time bookkeeping
    const io::json manifest = io::load_json(full.out / "run_manifest.json");
    REQUIRE(manifest.at("snapshots").size() >= 2);
    REQUIRE(manifest.at("snapshots")[0].at("time_index").get<long>() == 10);
    REQUIRE(manifest.at("snapshots")[1].at("time_index").get<long>() == 11);
    const io::json report = io::load_json(full.out / "comparison_report.json");
    REQUIRE(report.at("at_times").size() == 2);
}

TEST_CASE("unknown stage names are rejected") {
    const ExperimentConfig cfg = parse_config_text(tiny_config_text());
    pipeline::Paths paths{"/tmp/unused"};
    REQUIRE_THROWS_AS(pipeline::run_stage("compile", cfg, paths), std::invalid_argument);
}

TEST_CASE("hermite-basis identification reports the same monomial coefficients") {
    // both dictionary kinds minimize the same least squares; after conversion
    // the reported monomial tables must agree on noise-free data
    std::string base = tiny_config_text();
    ExperimentConfig mono = parse_config_text(base);
    mono.sigma_slow.setZero();
    mono.sigma_fast.setZero();
    ExperimentConfig herm = mono;
    herm.identification.kind = BasisKind::hermite;
    herm.identification.threshold = mono.identification.threshold = 0.05;

    const Ensemble ens = pipeline::simulate_core(mono);
    const EstimatedSde e_mono = pipeline::identify_core(mono, ens);
    const EstimatedSde e_herm = pipeline::identify_core(herm, ens);

    REQUIRE(e_herm.dict->kind() == BasisKind::monomial);  // reporting basis
    REQUIRE((e_herm.theta_drift - e_mono.theta_drift).cwiseAbs().maxCoeff() < 1e-6);
    // noise-free example1 drift: x - xy
    REQUIRE(e_mono.theta_drift(1, 0) == Approx(1.0).margin(0.01));
    REQUIRE(e_mono.theta_drift(4, 0) == Approx(-1.0).margin(0.01));
}

TEST_CASE("CLI exit codes: usage 2, stage failure 1, success 0") {
    TempDir tmp;
    const std::string cli = AUTOSDE_CLI_PATH;
    const std::string cfg_file = (tmp.path / "tiny.cfg").string();
    {
        std::ofstream out(cfg_file);
        out << tiny_config_text();
    }
    auto run = [](const std::string& cmd) {
        const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(rc);
    };

    REQUIRE(run(cli + " frobnicate --config " + cfg_file) == 2);             // unknown subcommand
    REQUIRE(run(cli + " simulate") == 2);                                    // missing --config
    REQUIRE(run(cli + " simulate --config /nonexistent.cfg") == 2);          // unreadable config
    // train before simulate: missing predecessor artifacts
    REQUIRE(run(cli + " train --config " + cfg_file + " --out " + (tmp.path / "o1").string()) == 1);
    REQUIRE(run(cli + " simulate --config " + cfg_file + " --out " + (tmp.path / "o2").string()) == 0);
    REQUIRE(run(cli + " --stage identify --config " + cfg_file + " --out " + (tmp.path / "o2").string()) == 0);
}
