// Acceptance suite: runs both benchmark recipes end to end and checks every
// headline number against its tolerance band. Prints one line per criterion
// and exits nonzero if any fails.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "autosde/pipeline.hpp"

using namespace autosde;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CriterionResult {
    int id;
    bool pass;
    std::string detail;
    double seconds;
};

std::vector<CriterionResult> g_results;

void report(int id, bool pass, const std::string& detail, double seconds) {
    g_results.push_back({id, pass, detail, seconds});
    std::printf("criterion %d: %s | %s [%.1fs]\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

bool within(double v, double center, double tol) { return std::abs(v - center) <= tol; }

// ---------------------------------------------------------------------------
// criterion 1: drift/diffusion identification on example 1 data, runtime < 1 minute
// ---------------------------------------------------------------------------
EstimatedSde criterion1(const ExperimentConfig& cfg, const Ensemble& ens) {
    const auto t0 = Clock::now();
    const EstimatedSde esde = pipeline::identify_core(cfg, pipeline::identification_ensemble(cfg, &ens));
    const double secs = seconds_since(t0);

    // terms: [1, x, y, x^2, xy, y^2]
    const double cx = esde.theta_drift(1, 0);
    const double cxy = esde.theta_drift(4, 0);
    const double sigma = std::sqrt(std::max(esde.theta_diff2(0, 0), 0.0));
    bool zeros = esde.theta_drift(0, 0) == 0.0 && esde.theta_drift(2, 0) == 0.0 && esde.theta_drift(3, 0) == 0.0 &&
                 esde.theta_drift(5, 0) == 0.0;
    for (int t = 1; t < 6; ++t) zeros = zeros && esde.theta_diff2(t, 0) == 0.0;

    const bool pass = within(cx, 1.0, 0.10) && within(cxy, -1.0, 0.10) && within(sigma, 1.0, 0.10) && zeros &&
                      secs < 60.0;
    report(1, pass,
           "drift x " + fmt(cx) + " (1+-0.10), xy " + fmt(cxy) + " (-1+-0.10), sigma " + fmt(sigma) +
               " (1+-0.10), other coefficients exactly zero: " + (zeros ? "yes" : "NO"),
           secs);
    return esde;
}

// ---------------------------------------------------------------------------
// criterion 2: drift/diffusion identification on example 2, runtime < 5 minutes
// ---------------------------------------------------------------------------
EstimatedSde criterion2(const ExperimentConfig& cfg) {
    const auto t0 = Clock::now();
    const EstimatedSde esde = pipeline::identify_core(cfg, pipeline::identification_ensemble(cfg, nullptr));
    const double secs = seconds_since(t0);

    // terms: [1, x1, x2, y, x1^2, x1x2, x1y, x2^2, x2y, y^2]
    const double c_x1 = esde.theta_drift(1, 0);
    const double c_y = esde.theta_drift(3, 0);
    const double c_x1x2 = esde.theta_drift(5, 0);
    const double c_x2 = esde.theta_drift(2, 1);
    const double c_x1sq = esde.theta_drift(4, 1);
    const double c_ysq = esde.theta_drift(9, 1);
    const double sig1 = std::sqrt(std::max(esde.theta_diff2(0, 0), 0.0));
    const double sig2 = std::sqrt(std::max(esde.theta_diff2(0, 1), 0.0));

    const bool pass = within(c_x1, 1.0, 0.15) && within(c_y, 1.0, 0.15) && within(c_x1x2, -0.5, 0.15) &&
                      within(c_x2, 1.0, 0.15) && within(c_x1sq, -1.0, 0.15) && within(c_ysq, 1.0, 0.15) &&
                      within(sig1, 1.0, 0.15) && within(sig2, 2.0, 0.15) && secs < 300.0;
    report(2, pass,
           "x1-drift {x1 " + fmt(c_x1) + ", y " + fmt(c_y) + ", x1x2 " + fmt(c_x1x2) + "} vs (1,1,-0.5)+-0.15; " +
               "x2-drift {x2 " + fmt(c_x2) + ", x1^2 " + fmt(c_x1sq) + ", y^2 " + fmt(c_ysq) +
               "} vs (1,-1,1)+-0.15; sigma (" + fmt(sig1) + "," + fmt(sig2) + ") vs (1,2)+-0.15",
           secs);
    return esde;
}

// ---------------------------------------------------------------------------
// criterion 3: manifold recovery over 3 training seeds, >= 2 passing per example
// ---------------------------------------------------------------------------
struct ManifoldRuns {
    std::vector<ManifoldFit> fits;  // one per seed, in seed order
    int n_pass = 0;
};

ManifoldRuns manifold_runs_ex1(const ExperimentConfig& cfg, const Ensemble& ens, const EstimatedSde& esde) {
    ManifoldRuns runs;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ExperimentConfig c = cfg;
        c.training.train.seed = seed;
        pipeline::TrainOutput out = pipeline::train_core(c, ens, esde);
        const ManifoldFit fit = pipeline::reduce_core(c, out.result.snapshots.back());
        const bool ok = fit.coeffs(2, 0) >= 0.20 && fit.coeffs(2, 0) <= 0.30 && std::abs(fit.coeffs(0, 0)) < 0.1 &&
                        std::abs(fit.coeffs(1, 0)) < 0.1;
        runs.n_pass += ok ? 1 : 0;
        runs.fits.push_back(fit);
    }
    return runs;
}

ManifoldRuns manifold_runs_ex2(const ExperimentConfig& cfg, const Ensemble& ens, const EstimatedSde& esde) {
    ManifoldRuns runs;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ExperimentConfig c = cfg;
        c.training.train.seed = seed;
        pipeline::TrainOutput out = pipeline::train_core(c, ens, esde);
        const ManifoldFit fit = pipeline::reduce_core(c, out.result.snapshots.back());
        const bool ok = fit.coeffs(4, 0) >= -0.15 && fit.coeffs(4, 0) <= -0.10;
        runs.n_pass += ok ? 1 : 0;
        runs.fits.push_back(fit);
    }
    return runs;
}

// ---------------------------------------------------------------------------
// criterion 6: fast property suite, < 30 s
// ---------------------------------------------------------------------------
bool criterion6() {
    const auto t0 = Clock::now();
    std::string fails;

    // gradient correctness across random draws
    {
        RngStream s(29);
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            AutoSdeModel model(NetConfig{2, 2, 6, 5, 7}, seed);
            MatrixXd window(8, 2), overlap(7, 2), sde(1, 2);
            for (auto* m : {&window, &overlap, &sde})
                for (long r = 0; r < m->rows(); ++r)
                    for (long c = 0; c < m->cols(); ++c) (*m)(r, c) = s.next_uniform(-1.5, 1.5);
            worst = std::max(worst, gradient_check(model, window, overlap, sde, 2, 1e-6, seed));
        }
        if (worst >= 1e-5) fails += " gradient-check(" + fmt(worst) + ");";
    }

    // ADAM zero-gradient fixed point
    {
        VectorXd params = VectorXd::Constant(4, 2.5);
        AdamState st(4);
        adam_step(params, VectorXd::Zero(4), st);
        if ((params.array() != 2.5).any()) fails += " adam-fixed-point;";
    }

    // loss additivity against an independent recomputation
    {
        AutoSdeModel model(NetConfig{2, 2, 8, 6, 8}, 3);
        RngStream s(7);
        MatrixXd window(9, 2), overlap(7, 2), sde(2, 2);
        for (auto* m : {&window, &overlap, &sde})
            for (long r = 0; r < m->rows(); ++r)
                for (long c = 0; c < m->cols(); ++c) (*m)(r, c) = s.next_uniform(-1.0, 1.0);
        const BatchLossResult r = loss_and_grad_batch(model, {&window}, {&overlap}, {&sde}, 3);
        const auto [out, tape] = forward(model, window);
        const double l_ae = (out.topRows(7) - overlap).squaredNorm() / (7.0 * 2.0);
        const double l_sde = (out.bottomRows(2) - sde).squaredNorm() / (2.0 * 2.0);
        if (std::abs(r.loss - (l_ae + l_sde)) > 1e-12 || r.loss != r.loss_overlap + r.loss_sde)
            fails += " loss-additivity;";
    }

    // OU integrator statistics within 4 standard errors
    {
        auto f = [](const VectorXd& x, const VectorXd&) { return VectorXd(-x); };
        auto g = [](const VectorXd&, const VectorXd&) { return VectorXd(0); };
        VectorXd s1(1), s2(0);
        s1 << 1.0;
        const SlowFastSystem ou(1, 0, 1.0, f, g, s1, s2);
        VectorXd z0(1);
        z0 << 1.0;
        const Ensemble ens = simulate_ensemble(ou, InitSampler::fixed(z0), 10000, 0.01, 100, 2024);
        const Snapshot snap = snapshot_at(ens, 100);
        const double mean = snap.points.col(0).mean();
        const double var = (snap.points.col(0).array() - mean).square().sum() / (snap.points.rows() - 1);
        const double var_exact = (1.0 - std::exp(-2.0)) / 2.0;
        const double mean_se = std::sqrt(var) / 100.0;
        const double var_se = var_exact * std::sqrt(2.0 / 10000.0);
        if (std::abs(mean - std::exp(-1.0)) > 4.0 * mean_se) fails += " ou-mean;";
        if (std::abs(var - var_exact) > 4.0 * var_se) fails += " ou-variance;";
    }

    // KS and energy-distance metric axioms
    {
        RngStream s(5);
        std::vector<double> a, b, c;
        MatrixXd ma(300, 2), mb(300, 2);
        for (int i = 0; i < 300; ++i) {
            a.push_back(s.next_uniform(0.0, 1.0));
            b.push_back(s.next_uniform(0.5, 1.5));
            c.push_back(s.next_uniform(2.0, 3.0));
            ma(i, 0) = s.next_normal();
            ma(i, 1) = s.next_normal();
            mb(i, 0) = s.next_normal() + 0.7;
            mb(i, 1) = s.next_normal();
        }
        const double d_ab = ks_statistic(a, b);
        if (ks_statistic(a, a) != 0.0 || ks_statistic(a, c) != 1.0 || d_ab < 0.0 || d_ab > 1.0 ||
            std::abs(d_ab - ks_statistic(b, a)) > 1e-15)
            fails += " ks-axioms;";
        const double e_ab = energy_distance(ma, mb);
        if (std::abs(energy_distance(ma, ma)) > 1e-12 || e_ab <= 0.0 ||
            std::abs(e_ab - energy_distance(mb, ma)) > 1e-12)
            fails += " energy-axioms;";
    }

    // POD optimality identity to 1e-8 relative
    {
        RngStream s(9);
        MatrixXd z(4, 60);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 60; ++c) z(r, c) = s.next_uniform(-1.0, 1.0);
        const auto [phi, sv] = pod_basis(z, 2);
        const double err = (z - phi * phi.transpose() * z).squaredNorm();
        const double discarded = sv[2] * sv[2] + sv[3] * sv[3];
        if (std::abs(err - discarded) > 1e-8 * discarded) fails += " pod-identity;";
    }

    // manifold fit exactness on noiseless polynomial data
    {
        Snapshot snap;
        snap.points.resize(150, 2);
        snap.points.col(0).setLinSpaced(150, -3.0, 3.0);
        snap.points.col(1) = snap.points.col(0).array().square() / 4.0;
        const ManifoldFit fit = fit_manifold(snap, {0}, 2);
        if (fit.residual_rms >= 1e-10 || std::abs(fit.coeffs(2, 0) - 0.25) > 1e-10) fails += " manifold-exact;";
    }

    // basis conversion round trip to 1e-10
    {
        RngStream s(11);
        const BasisDictionary herm(2, 3, BasisKind::hermite);
        const BasisDictionary mono(2, 3, BasisKind::monomial);
        VectorXd c(herm.n_terms());
        for (long i = 0; i < c.size(); ++i) c[i] = s.next_uniform(-2.0, 2.0);
        const VectorXd back = convert_coefficients(mono, herm, convert_coefficients(herm, mono, c));
        if ((back - c).cwiseAbs().maxCoeff() >= 1e-10) fails += " basis-roundtrip;";
    }

    // checkpoint round trip bit-exact
    {
        const auto dir = io::fs::temp_directory_path() / "autosde_acceptance_ckpt.json";
        AutoSdeModel model(NetConfig{3, 3, 8, 6, 8}, 77);
        io::save_model(dir, model);
        const AutoSdeModel back = io::load_model(dir);
        if ((back.params() - model.params()).cwiseAbs().maxCoeff() != 0.0) fails += " checkpoint-roundtrip;";
        io::fs::remove(dir);
    }

    const double secs = seconds_since(t0);
    const bool pass = fails.empty() && secs < 30.0;
    report(6, pass, fails.empty() ? "gradient/adam/loss/ou/metrics/pod/manifold/basis/checkpoint all hold" : fails,
           secs);
    return pass;
}

}  // namespace

int main() {
    std::printf("acceptance suite (example recipes from %s)\n", AUTOSDE_CONFIG_DIR);
    const ExperimentConfig cfg1 = load_config(std::string(AUTOSDE_CONFIG_DIR) + "/example1.cfg");
    const ExperimentConfig cfg2 = load_config(std::string(AUTOSDE_CONFIG_DIR) + "/example2.cfg");

    // shared ensembles (criterion 1 includes its own timing around identify)
    const Ensemble ens1 = pipeline::simulate_core(cfg1);
    const Ensemble ens2 = pipeline::simulate_core(cfg2);

    const EstimatedSde esde1 = criterion1(cfg1, ens1);
    const EstimatedSde esde2 = criterion2(cfg2);

    // criterion 3: manifold recovery, 3 training seeds per example, >= 2 passing
    auto t0 = Clock::now();
    const ManifoldRuns runs1 = manifold_runs_ex1(cfg1, ens1, esde1);
    const ManifoldRuns runs2 = manifold_runs_ex2(cfg2, ens2, esde2);
    {
        std::string detail = "example1 x^2 coeffs {";
        for (const auto& f : runs1.fits) detail += fmt(f.coeffs(2, 0)) + " ";
        detail += "} in [0.20,0.30] & |1,x| < 0.1: " + std::to_string(runs1.n_pass) + "/3; example2 x1x2 coeffs {";
        for (const auto& f : runs2.fits) detail += fmt(f.coeffs(4, 0)) + " ";
        detail += "} in [-0.15,-0.10]: " + std::to_string(runs2.n_pass) + "/3";
        report(3, runs1.n_pass >= 2 && runs2.n_pass >= 2, detail, seconds_since(t0));
    }

    // criteria 4 and 5 share one evaluation per example (seed-1 manifolds)
    t0 = Clock::now();
    const pipeline::EvalOutput ev1 = pipeline::evaluate_core(cfg1, esde1, runs1.fits.front());
    const pipeline::EvalOutput ev2 = pipeline::evaluate_core(cfg2, esde2, runs2.fits.front());
    {
        double worst = 0.0;
        std::string detail = "KS per coordinate at NT {10,100,1000}: example1 {";
        for (const auto& c : ev1.report.at_times) {
            worst = std::max(worst, c.ks.maxCoeff());
            detail += fmt(c.ks.maxCoeff()) + " ";
        }
        detail += "} example2 {";
        for (const auto& c : ev2.report.at_times) {
            worst = std::max(worst, c.ks.maxCoeff());
            detail += fmt(c.ks.maxCoeff()) + " ";
        }
        detail += "} all < 0.10";
        report(4, worst < 0.10 && ev1.report.at_times.size() == 3 && ev2.report.at_times.size() == 3, detail,
               seconds_since(t0));
    }
    {
        t0 = Clock::now();
        const double n = static_cast<double>(cfg1.evaluation.n_samples);
        auto monotone = [&](const std::vector<SweepRow>& sweep) {
            bool ok = sweep.size() >= 2;
            for (std::size_t i = 0; i + 1 < sweep.size(); ++i)
                for (Eigen::Index c = 0; c < sweep[i].std_reduced.size(); ++c) {
                    const double lo = sweep[i].std_reduced[c];
                    const double hi = sweep[i + 1].std_reduced[c];
                    // sample std SE ~ std/sqrt(2n); violations beyond 2 SE fail
                    const double se = std::sqrt((lo * lo + hi * hi) / (2.0 * n));
                    ok = ok && (hi - lo > -2.0 * se) && hi > lo - 1e-12;
                }
            return ok;
        };
        std::string detail = "reduced-ensemble std strictly increases across sigma: example1 {";
        for (const auto& row : ev1.sweep) detail += fmt(row.std_reduced[0]) + " ";
        detail += "} example2 x1 {";
        for (const auto& row : ev2.sweep) detail += fmt(row.std_reduced[0]) + " ";
        detail += "} x2 {";
        for (const auto& row : ev2.sweep) detail += fmt(row.std_reduced[1]) + " ";
        detail += "}";
        report(5, monotone(ev1.sweep) && monotone(ev2.sweep), detail, seconds_since(t0));
    }

    criterion6();

    int failures = 0;
    for (const auto& r : g_results) failures += r.pass ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(g_results.size()) - failures, g_results.size());
    return failures == 0 ? 0 : 1;
}
