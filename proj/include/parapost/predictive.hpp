#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "parapost/errors.hpp"
#include "parapost/fem.hpp"
#include "parapost/model.hpp"
#include "parapost/pipeline.hpp"
#include "parapost/posterior.hpp"
#include "parapost/rng.hpp"

namespace parapost {

struct PredictiveQuery {
    int history_horizon = 0;               // use observations t_1..t_n
    int steps_ahead = 1;                   // k >= 1
    VectorXd future_T_L;                   // boundary values for t_{n+1}..t_{n+k}
    VectorXd future_T_R;
    std::vector<int> target_sensors;       // interior rows, 0..I-2

    void check(int step_capacity) const {
        if (history_horizon < 1 || steps_ahead < 1 ||
            history_horizon + steps_ahead > step_capacity)
            throw DomainError("predictive query outside the grid capacity");
        if (future_T_L.size() != steps_ahead || future_T_R.size() != steps_ahead)
            throw DomainError("future boundary series must have k entries");
        if (!future_T_L.allFinite() || !future_T_R.allFinite())
            throw DomainError("future boundaries must be finite");
        if (target_sensors.empty()) throw DomainError("no target sensors");
    }
};

/// Interior state at t_{n+k} for one theta draw: forward solve over the
/// history with boundary values set to their precision-weighted posterior
/// means, then k extra steps with the supplied future boundaries.
inline VectorXd conditional_forecast(double theta, const PredictiveQuery& q,
                                     const CanonicalConfig& cfg,
                                     const ObservationSet& obs,
                                     const BoundaryPrior& prior_b) {
    const SpatialMesh mesh = cfg.mesh();
    const TimeGrid grid = cfg.grid();
    const CoefficientField coeffs =
        CoefficientField::constant_diffusion(theta, mesh.element_count());
    FemSystem sys = assemble(mesh, coeffs, grid.dt(), false);

    // posterior mean of the boundary series given its noisy readings
    const double w_data = 1.0 / (cfg.sigma * cfg.sigma);
    const double w_prior = 1.0 / (prior_b.sigma_p * prior_b.sigma_p);
    auto blend = [&](double y, double mu) {
        return (w_data * y + w_prior * mu) / (w_data + w_prior);
    };

    // homogeneous-boundary unknowns: the uniform initial state minus its
    // own lift is identically zero, and the lift is restored at the end
    VectorXd u = VectorXd::Zero(mesh.interior_count());
    double tl_old = cfg.t0, tr_old = cfg.t0;
    const VectorXd y_l = obs.boundary_left();
    const VectorXd y_r = obs.boundary_right();
    for (int m = 1; m <= q.history_horizon; ++m) {
        StepBc bc;
        bc.t_l_old = tl_old;
        bc.t_r_old = tr_old;
        bc.t_l_new = blend(y_l[m - 1], prior_b.mu_L[m - 1]);
        bc.t_r_new = blend(y_r[m - 1], prior_b.mu_R[m - 1]);
        u = step(sys, u, bc);
        tl_old = bc.t_l_new;
        tr_old = bc.t_r_new;
    }
    for (int j = 0; j < q.steps_ahead; ++j) {
        StepBc bc;
        bc.t_l_old = tl_old;
        bc.t_r_old = tr_old;
        bc.t_l_new = q.future_T_L[j];
        bc.t_r_new = q.future_T_R[j];
        u = step(sys, u, bc);
        tl_old = bc.t_l_new;
        tr_old = bc.t_r_new;
    }
    return u + tl_old * sys.psi_L + tr_old * sys.psi_R;
}

struct PredictiveTable {
    int sensor = 0;       // interior row
    VectorXd grid;        // temperature values
    VectorXd density;

    /// Composite Simpson on the (uniform, odd-sized) value grid; falls
    /// back to trapezoid otherwise. Trapezoid alone is not accurate enough
    /// for the 1e-6 normalization checks at the default table size.
    double mass() const {
        const int n = static_cast<int>(grid.size());
        if (n >= 3 && n % 2 == 1) {
            const double h = (grid[n - 1] - grid[0]) / (n - 1);
            double s = density[0] + density[n - 1];
            for (int i = 1; i + 1 < n; ++i) s += density[i] * (i % 2 == 1 ? 4.0 : 2.0);
            return s * h / 3.0;
        }
        double s = 0.0;
        for (int i = 0; i + 1 < n; ++i)
            s += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
        return s;
    }
};

/// Posterior predictive density at each target sensor: average of M
/// Gaussian conditionals N(forecast(theta_i), sigma^2) over Laplace
/// posterior draws of theta.
inline std::vector<PredictiveTable> predictive_density(
    const PredictiveQuery& q, const CanonicalConfig& cfg,
    const ObservationSet& obs, const LaplacePosterior& post, int m_samples,
    std::uint64_t seed, int table_points = 401) {
    if (m_samples < 10) throw SampleCountError("need at least 10 posterior draws");
    const TimeGrid grid = cfg.grid();
    q.check(grid.step_count);
    const BoundaryPrior prior_b = boundary_prior_from_data(obs, grid, cfg.sigma_p);

    MatrixXd means(static_cast<int>(q.target_sensors.size()), m_samples);
    Rng rng(seed);
    for (int i = 0; i < m_samples; ++i) {
        double theta = post.theta_hat + post.sd() * rng.normal();
        while (theta <= 0.0) theta = post.theta_hat + post.sd() * rng.normal();
        const VectorXd u = conditional_forecast(theta, q, cfg, obs, prior_b);
        for (std::size_t s = 0; s < q.target_sensors.size(); ++s)
            means(static_cast<int>(s), i) = u[q.target_sensors[s]];
    }

    std::vector<PredictiveTable> tables;
    const double sig = cfg.sigma;
    const double norm = 1.0 / (std::sqrt(2.0 * M_PI) * sig);
    for (std::size_t s = 0; s < q.target_sensors.size(); ++s) {
        const auto row = means.row(static_cast<int>(s));
        const double lo = row.minCoeff() - 6.0 * sig;
        const double hi = row.maxCoeff() + 6.0 * sig;
        PredictiveTable tab;
        tab.sensor = q.target_sensors[s];
        tab.grid = VectorXd::LinSpaced(table_points, lo, hi);
        tab.density = VectorXd::Zero(table_points);
        for (int i = 0; i < m_samples; ++i)
            for (int g = 0; g < table_points; ++g) {
                const double z = (tab.grid[g] - row[i]) / sig;
                tab.density[g] += norm * std::exp(-0.5 * z * z);
            }
        tab.density /= m_samples;
        tables.push_back(std::move(tab));
    }
    return tables;
}

struct PredictiveSummary {
    int sensor = 0;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
};

inline PredictiveSummary predictive_summary(const PredictiveTable& tab) {
    const double mass = tab.mass();
    if (!(std::abs(mass - 1.0) < 1e-6))
        throw NumericalError("predictive table is not normalized");
    PredictiveSummary out;
    out.sensor = tab.sensor;
    double m1 = 0.0, m2 = 0.0, cum = 0.0;
    bool got_lo = false, got_hi = false;
    for (int i = 0; i + 1 < tab.grid.size(); ++i) {
        const double dx = tab.grid[i + 1] - tab.grid[i];
        const double fa = tab.density[i], fb = tab.density[i + 1];
        const double xa = tab.grid[i], xb = tab.grid[i + 1];
        m1 += 0.5 * (fa * xa + fb * xb) * dx;
        m2 += 0.5 * (fa * xa * xa + fb * xb * xb) * dx;
        const double seg = 0.5 * (fa + fb) * dx;
        auto locate = [&](double target) {
            // linear interpolation of the cumulative within the segment
            const double frac = (target - cum) / seg;
            return xa + frac * dx;
        };
        if (!got_lo && cum + seg >= 0.025 * mass) {
            out.q025 = locate(0.025 * mass);
            got_lo = true;
        }
        if (!got_hi && cum + seg >= 0.975 * mass) {
            out.q975 = locate(0.975 * mass);
            got_hi = true;
        }
        cum += seg;
    }
    out.mean = m1 / mass;
    out.sd = std::sqrt(std::max(0.0, m2 / mass - out.mean * out.mean));
    return out;
}

} // namespace parapost
