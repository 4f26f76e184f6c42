#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>

#include "parapost/field.hpp"
#include "parapost/likelihood.hpp"
#include "parapost/model.hpp"
#include "parapost/posterior.hpp"
#include "parapost/synth.hpp"

namespace parapost {

/// Canonical cooling-experiment configuration: unit slab, seven equispaced
/// thermocouples, sixty uniform steps on [0, 1].
struct CanonicalConfig {
    int sensor_count = 7;
    int step_count = 60;
    double t_end = 1.0;
    double sigma = 0.5;    // inference noise scale
    double sigma_p = 0.5;  // boundary prior scale
    double nu = 0.1;       // lognormal prior on theta
    double tau = 0.1;
    double sigma_d = 0.56; // generating noise
    double t0 = 100.0;
    double t_out = 20.0;
    double h_over_kappa = 1.0;

    SpatialMesh mesh() const { return SpatialMesh::uniform(0.0, 1.0, sensor_count - 1); }
    TimeGrid grid() const { return TimeGrid(t_end, step_count); }
    LognormalPrior theta_prior() const { return LognormalPrior{nu, tau}; }

    RobinProblem robin(double theta) const {
        RobinProblem p;
        p.theta_field = VectorXd::Constant(sensor_count - 1, theta);
        p.h_over_kappa = h_over_kappa;
        p.t_out = t_out;
        p.t0 = t0;
        return p;
    }
};

/// Least-squares cubic fit of a time series; used to smooth the noisy
/// boundary readings into prior means for the unknown boundary values.
inline VectorXd cubic_fit(const VectorXd& y, const TimeGrid& grid) {
    const int n = static_cast<int>(y.size());
    MatrixXd v(n, 4);
    for (int i = 0; i < n; ++i) {
        const double t = grid.time(i + 1);
        v(i, 0) = 1.0;
        v(i, 1) = t;
        v(i, 2) = t * t;
        v(i, 3) = t * t * t;
    }
    const VectorXd coef = v.colPivHouseholderQr().solve(y);
    return v * coef;
}

inline BoundaryPrior boundary_prior_from_data(const ObservationSet& obs,
                                              const TimeGrid& grid,
                                              double sigma_p) {
    BoundaryPrior prior;
    prior.mu_L = cubic_fit(obs.boundary_left(), grid);
    prior.mu_R = cubic_fit(obs.boundary_right(), grid);
    prior.sigma_p = sigma_p;
    return prior;
}

inline LikelihoodContext make_context(const CanonicalConfig& cfg,
                                      const ObservationSet& obs,
                                      const Selection& sel, bool lumped = false) {
    LikelihoodContext ctx;
    ctx.mesh = cfg.mesh();
    ctx.grid = cfg.grid();
    ctx.g = InitialCondition{VectorXd::Constant(cfg.sensor_count, cfg.t0)};
    ctx.obs = obs;
    ctx.obs.sigma = cfg.sigma;
    ctx.prior_b = boundary_prior_from_data(obs, ctx.grid, cfg.sigma_p);
    ctx.sel = sel;
    ctx.lumped = lumped;
    return ctx;
}

inline SyntheticDataset make_dataset_A(const CanonicalConfig& cfg, double theta,
                                       std::uint64_t seed) {
    DatasetSpec spec;
    spec.sensor_count = cfg.sensor_count;
    spec.step_count = cfg.step_count;
    spec.t_end = cfg.t_end;
    spec.sigma_d = cfg.sigma_d;
    spec.seed = seed;
    return make_dataset(cfg.robin(theta), spec);
}

inline SyntheticDataset make_dataset_B_canonical(const CanonicalConfig& cfg,
                                                 double mu, double eta, double ell,
                                                 std::uint64_t field_seed,
                                                 std::uint64_t noise_seed) {
    DatasetSpec spec;
    spec.sensor_count = cfg.sensor_count;
    spec.step_count = cfg.step_count;
    spec.t_end = cfg.t_end;
    spec.sigma_d = cfg.sigma_d;
    spec.seed = noise_seed;
    return make_dataset_B(mu, eta, ell, cfg.robin(1.0), spec, field_seed);
}

/// Scalar-theta inference on a canonical dataset: MAP plus Laplace fit
/// under the marginal (integrated boundary) likelihood.
struct ScalarFitResult {
    double theta_map = 0.0;
    double theta_sd = 0.0;
    LaplacePosterior laplace;
};

inline ScalarFitResult fit_scalar_marginal(const CanonicalConfig& cfg,
                                           const ObservationSet& obs,
                                           const Selection& sel) {
    LikelihoodContext ctx = make_context(cfg, obs, sel);
    const LognormalPrior prior = cfg.theta_prior();
    const LogDensity logpost = [&](double th) {
        return log_posterior(th, ctx, prior, PosteriorMode::marginal);
    };
    ScalarFitResult out;
    out.theta_map = map_estimate(logpost, 0.2, 5.0);
    out.laplace = laplace_fit(logpost, out.theta_map);
    out.theta_sd = out.laplace.sd();
    return out;
}

inline ScalarFitResult fit_scalar_known_bc(const CanonicalConfig& cfg,
                                           const ObservationSet& obs,
                                           const BoundarySeries& known_bc,
                                           const Selection& sel) {
    LikelihoodContext ctx = make_context(cfg, obs, sel);
    const LognormalPrior prior = cfg.theta_prior();
    const LogDensity logpost = [&](double th) {
        return log_posterior(th, ctx, prior, PosteriorMode::joint_known_bc,
                             &known_bc);
    };
    ScalarFitResult out;
    out.theta_map = map_estimate(logpost, 0.2, 5.0);
    out.laplace = laplace_fit(logpost, out.theta_map);
    out.theta_sd = out.laplace.sd();
    return out;
}

/// Field likelihood hook for the hierarchical fit: marginal likelihood as
/// a function of the per-element theta field.
inline std::function<double(const VectorXd&)> field_likelihood(
    const CanonicalConfig& cfg, const ObservationSet& obs, const Selection& sel) {
    auto ctx = std::make_shared<LikelihoodContext>(make_context(cfg, obs, sel));
    return [ctx](const VectorXd& theta_field) {
        CoefficientField coeffs = CoefficientField::diffusion(theta_field);
        return marginal_log_likelihood(coeffs, *ctx);
    };
}

} // namespace parapost
