#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parapost/pipeline.hpp"
#include "parapost/predictive.hpp"

using namespace parapost;

namespace {

CanonicalConfig small_cfg() {
    CanonicalConfig cfg;
    cfg.step_count = 30;
    cfg.t_end = 0.5;
    return cfg;
}

SyntheticDataset small_dataset() { return make_dataset_A(small_cfg(), 1.0, 42); }

PredictiveQuery small_query(const ObservationSet& obs) {
    PredictiveQuery q;
    q.history_horizon = 25;
    q.steps_ahead = 1;
    q.future_T_L = obs.boundary_left().segment(25, 1);
    q.future_T_R = obs.boundary_right().segment(25, 1);
    q.target_sensors = {0, 1, 2};
    return q;
}

} // namespace

TEST_CASE("query validation") {
    const SyntheticDataset ds = small_dataset();
    PredictiveQuery q = small_query(ds.obs);
    REQUIRE_NOTHROW(q.check(30));
    q.steps_ahead = 10; // 25 + 10 > 30
    REQUIRE_THROWS_AS(q.check(30), DomainError);
    q = small_query(ds.obs);
    q.target_sensors.clear();
    REQUIRE_THROWS_AS(q.check(30), DomainError);
    q = small_query(ds.obs);
    q.future_T_L[0] = std::nan("");
    REQUIRE_THROWS_AS(q.check(30), DomainError);
}

TEST_CASE("sample count floor") {
    const SyntheticDataset ds = small_dataset();
    const PredictiveQuery q = small_query(ds.obs);
    LaplacePosterior post;
    post.theta_hat = 1.0;
    post.variance = 1e-4;
    REQUIRE_THROWS_AS(predictive_density(q, small_cfg(), ds.obs, post, 5, 1),
                      SampleCountError);
}

TEST_CASE("tables normalize and are deterministic per seed") {
    const SyntheticDataset ds = small_dataset();
    const PredictiveQuery q = small_query(ds.obs);
    LaplacePosterior post;
    post.theta_hat = 1.0;
    post.variance = 25e-6;
    const auto tabs = predictive_density(q, small_cfg(), ds.obs, post, 200, 9);
    REQUIRE(tabs.size() == 3);
    for (const auto& t : tabs) {
        REQUIRE(t.mass() == Catch::Approx(1.0).margin(1e-6));
        REQUIRE(t.density.minCoeff() >= 0.0);
    }
    const auto again = predictive_density(q, small_cfg(), ds.obs, post, 200, 9);
    REQUIRE((tabs[1].density - again[1].density).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("point-mass posterior and small sigma collapse to a spike") {
    const SyntheticDataset ds = small_dataset();
    const PredictiveQuery q = small_query(ds.obs);
    CanonicalConfig cfg = small_cfg();
    cfg.sigma = 1e-3;
    LaplacePosterior post;
    post.theta_hat = 1.0;
    post.variance = 1e-18;
    const auto tabs = predictive_density(q, cfg, ds.obs, post, 20, 3);
    const BoundaryPrior pb = boundary_prior_from_data(ds.obs, cfg.grid(), cfg.sigma_p);
    const VectorXd exact = conditional_forecast(1.0, q, cfg, ds.obs, pb);
    for (std::size_t s = 0; s < tabs.size(); ++s) {
        const PredictiveSummary sum = predictive_summary(tabs[s]);
        REQUIRE(sum.mean == Catch::Approx(exact[q.target_sensors[s]]).margin(1e-4));
        REQUIRE(sum.sd == Catch::Approx(cfg.sigma).epsilon(0.02));
    }
}

TEST_CASE("predictive mean equals the posterior-averaged forecast") {
    const SyntheticDataset ds = small_dataset();
    const PredictiveQuery q = small_query(ds.obs);
    const CanonicalConfig cfg = small_cfg();
    LaplacePosterior post;
    post.theta_hat = 1.0;
    post.variance = 4e-4;
    const int m = 400;
    const auto tabs = predictive_density(q, cfg, ds.obs, post, m, 77);

    // independent direct average over the same posterior draws
    const BoundaryPrior pb = boundary_prior_from_data(ds.obs, cfg.grid(), cfg.sigma_p);
    Rng rng(77);
    VectorXd avg = VectorXd::Zero(3);
    for (int i = 0; i < m; ++i) {
        double th = post.theta_hat + post.sd() * rng.normal();
        while (th <= 0.0) th = post.theta_hat + post.sd() * rng.normal();
        const VectorXd u = conditional_forecast(th, q, cfg, ds.obs, pb);
        for (int s = 0; s < 3; ++s) avg[s] += u[q.target_sensors[s]];
    }
    avg /= m;
    for (int s = 0; s < 3; ++s) {
        const PredictiveSummary sum = predictive_summary(tabs[s]);
        REQUIRE(sum.mean == Catch::Approx(avg[s]).margin(1e-3));
        // observation noise floor on the predictive spread
        REQUIRE(sum.sd >= cfg.sigma - 1e-6);
    }
}

TEST_CASE("two chained single steps equal one two-step forecast") {
    const SyntheticDataset ds = small_dataset();
    const CanonicalConfig cfg = small_cfg();
    PredictiveQuery q2;
    q2.history_horizon = 20;
    q2.steps_ahead = 2;
    q2.future_T_L = ds.obs.boundary_left().segment(20, 2);
    q2.future_T_R = ds.obs.boundary_right().segment(20, 2);
    q2.target_sensors = {0, 1, 2, 3, 4};
    const BoundaryPrior pb = boundary_prior_from_data(ds.obs, cfg.grid(), cfg.sigma_p);
    const VectorXd two_step = conditional_forecast(0.9, q2, cfg, ds.obs, pb);

    // manual chain: advance the one-step forecast once more by hand
    const SpatialMesh mesh = cfg.mesh();
    const FemSystem sys = assemble(
        mesh, CoefficientField::constant_diffusion(0.9, mesh.element_count()),
        cfg.grid().dt(), false);
    PredictiveQuery q1 = q2;
    q1.steps_ahead = 1;
    q1.future_T_L = q2.future_T_L.head(1);
    q1.future_T_R = q2.future_T_R.head(1);
    const VectorXd one_step = conditional_forecast(0.9, q1, cfg, ds.obs, pb);
    StepBc bc;
    bc.t_l_old = q2.future_T_L[0];
    bc.t_r_old = q2.future_T_R[0];
    bc.t_l_new = q2.future_T_L[1];
    bc.t_r_new = q2.future_T_R[1];
    // step() advances the homogeneous unknowns: peel the lift off the full
    // one-step forecast, advance, and put the new lift back
    const VectorXd hom =
        one_step - bc.t_l_old * sys.psi_L - bc.t_r_old * sys.psi_R;
    const VectorXd chained = step(sys, hom, bc) + bc.t_l_new * sys.psi_L +
                             bc.t_r_new * sys.psi_R;
    REQUIRE((two_step - chained).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("summary moments on analytic tables") {
    PredictiveTable gauss;
    gauss.sensor = 1;
    gauss.grid = VectorXd::LinSpaced(4001, -5.0, 5.0);
    gauss.density.resize(4001);
    const double sd = 0.8;
    for (int i = 0; i < 4001; ++i) {
        const double z = gauss.grid[i] / sd;
        gauss.density[i] = std::exp(-0.5 * z * z) / (std::sqrt(2.0 * M_PI) * sd);
    }
    const PredictiveSummary s = predictive_summary(gauss);
    REQUIRE(s.mean == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(s.sd == Catch::Approx(sd).margin(1e-5));
    REQUIRE(s.q025 == Catch::Approx(-1.96 * sd).margin(2e-3));
    REQUIRE(s.q975 == Catch::Approx(1.96 * sd).margin(2e-3));

    // symmetric two-component mixture has zero mean
    PredictiveTable mix = gauss;
    for (int i = 0; i < 4001; ++i) {
        const double zl = (mix.grid[i] + 1.0) / 0.1;
        const double zr = (mix.grid[i] - 1.0) / 0.1;
        mix.density[i] = 0.5 * (std::exp(-0.5 * zl * zl) + std::exp(-0.5 * zr * zr)) /
                         (std::sqrt(2.0 * M_PI) * 0.1);
    }
    REQUIRE(predictive_summary(mix).mean == Catch::Approx(0.0).margin(1e-9));
}
