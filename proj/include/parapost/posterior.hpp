#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "parapost/errors.hpp"
#include "parapost/likelihood.hpp"
#include "parapost/model.hpp"
#include "parapost/quad.hpp"
#include "parapost/rng.hpp"

namespace parapost {

struct LognormalPrior {
    double nu = 0.0;  // location of log theta
    double tau = 1.0; // scale of log theta

    double log_pdf(double theta) const {
        if (theta <= 0.0) return -std::numeric_limits<double>::infinity();
        const double z = (std::log(theta) - nu) / tau;
        return -std::log(theta) - std::log(tau) - 0.5 * std::log(2.0 * M_PI) -
               0.5 * z * z;
    }

    double mode() const { return std::exp(nu - tau * tau); }
};

enum class PosteriorMode { joint_known_bc, marginal };

/// Non-normalized log posterior of a scalar diffusivity theta. In
/// joint_known_bc mode the boundary series is pinned to the supplied
/// (true) values; in marginal mode the boundaries are integrated out.
inline double log_posterior(double theta, const LikelihoodContext& ctx,
                            const LognormalPrior& prior_theta, PosteriorMode mode,
                            const BoundarySeries* known_bc = nullptr) {
    if (theta <= 0.0) throw DomainError("theta must be > 0");
    const CoefficientField coeffs =
        CoefficientField::constant_diffusion(theta, ctx.mesh.element_count());
    double loglik;
    if (mode == PosteriorMode::joint_known_bc) {
        if (known_bc == nullptr)
            throw DomainError("joint_known_bc mode needs the boundary series");
        loglik = joint_log_likelihood(coeffs, ctx, *known_bc);
    } else {
        loglik = marginal_log_likelihood(coeffs, ctx);
    }
    return prior_theta.log_pdf(theta) + loglik;
}

using LogDensity = std::function<double(double)>;

/// Scalar MAP search: coarse grid scan for the peak, then golden-section
/// refinement to relative tolerance 1e-8 in theta.
inline double map_estimate(const LogDensity& logpost, double lo, double hi,
                           int scan_points = 64, double rel_tol = 1e-8) {
    if (!(hi > lo)) throw BracketError("empty bracket");
    int best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    std::vector<double> grid(scan_points), vals(scan_points);
    for (int i = 0; i < scan_points; ++i) {
        grid[i] = lo + (hi - lo) * i / (scan_points - 1);
        vals[i] = logpost(grid[i]);
        if (vals[i] > best_val) {
            best_val = vals[i];
            best = i;
        }
    }
    if (best == 0 || best == scan_points - 1)
        throw BracketError("no interior maximum in bracket");

    double a = grid[best - 1], b = grid[best + 1];
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = logpost(x1), f2 = logpost(x2);
    while (b - a > rel_tol * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = logpost(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = logpost(x1);
        }
    }
    return 0.5 * (a + b);
}

struct LaplacePosterior {
    double theta_hat = 0.0;
    double variance = 0.0;
    double log_norm_const = 0.0; // Laplace evidence estimate

    double sd() const { return std::sqrt(variance); }

    double log_pdf(double theta) const {
        const double z = (theta - theta_hat);
        return -0.5 * std::log(2.0 * M_PI * variance) - 0.5 * z * z / variance;
    }
    double pdf(double theta) const { return std::exp(log_pdf(theta)); }
};

/// Gaussian fit at the MAP: variance from the central-difference second
/// derivative with one Richardson refinement.
inline LaplacePosterior laplace_fit(const LogDensity& logpost, double theta_hat) {
    const double h = std::max(1e-5, 1e-4 * theta_hat);
    const double f0 = logpost(theta_hat);
    auto second = [&](double step) {
        return (logpost(theta_hat + step) - 2.0 * f0 + logpost(theta_hat - step)) /
               (step * step);
    };
    const double d_h = second(h);
    const double d_h2 = second(0.5 * h);
    const double curvature = (4.0 * d_h2 - d_h) / 3.0;
    if (!(curvature < 0.0))
        throw CurvatureError("log posterior is not concave at the MAP");
    LaplacePosterior lp;
    lp.theta_hat = theta_hat;
    lp.variance = -1.0 / curvature;
    lp.log_norm_const = f0 + 0.5 * std::log(2.0 * M_PI * lp.variance);
    return lp;
}

/// Tabulated normalized density on an explicit grid.
struct DensityTable {
    VectorXd grid;
    VectorXd density;

    double trapezoid(const VectorXd& values) const {
        double s = 0.0;
        for (int i = 0; i + 1 < grid.size(); ++i)
            s += 0.5 * (grid[i + 1] - grid[i]) * (values[i] + values[i + 1]);
        return s;
    }

    double mass() const { return trapezoid(density); }

    double mean() const { return trapezoid(density.cwiseProduct(grid)); }

    double variance() const {
        const double m = mean();
        return trapezoid(density.cwiseProduct((grid.array() - m).square().matrix()));
    }

    /// Central quantile by linear interpolation of the CDF.
    double quantile(double p) const {
        double cum = 0.0;
        for (int i = 0; i + 1 < grid.size(); ++i) {
            const double seg =
                0.5 * (grid[i + 1] - grid[i]) * (density[i] + density[i + 1]);
            if (cum + seg >= p) {
                const double frac = seg > 0.0 ? (p - cum) / seg : 0.0;
                return grid[i] + frac * (grid[i + 1] - grid[i]);
            }
            cum += seg;
        }
        return grid[grid.size() - 1];
    }
};

/// Trapezoid-normalized posterior on a grid; serves as the quadrature
/// oracle for the Laplace fit.
inline DensityTable grid_posterior(const LogDensity& logpost, const VectorXd& grid) {
    DensityTable table;
    table.grid = grid;
    VectorXd logv(grid.size());
    for (int i = 0; i < grid.size(); ++i) logv[i] = logpost(grid[i]);
    const double peak = logv.maxCoeff();
    table.density = (logv.array() - peak).exp().matrix();
    const double mass = table.mass();
    if (mass <= 0.0) throw GridError("zero posterior mass on grid");
    table.density /= mass;

    // reject grids that clip the posterior bulk
    const double edge = std::max(table.density[0], table.density[grid.size() - 1]);
    if (edge > 1e-3 * table.density.maxCoeff())
        throw GridError("posterior mass concentrated at grid edge");
    return table;
}

inline VectorXd sample_posterior(const LaplacePosterior& post, int count,
                                 std::uint64_t seed) {
    if (count < 1) throw DomainError("sample count must be >= 1");
    Rng rng(seed);
    VectorXd out(count);
    for (int i = 0; i < count; ++i) {
        double x;
        do {
            x = rng.normal(post.theta_hat, post.sd());
        } while (x <= 0.0);
        out[i] = x;
    }
    return out;
}

/// Total variation distance between a Laplace fit and a grid posterior,
/// evaluated on the table's grid.
inline double tv_distance(const LaplacePosterior& lp, const DensityTable& table) {
    VectorXd diff(table.grid.size());
    for (int i = 0; i < table.grid.size(); ++i)
        diff[i] = std::abs(lp.pdf(table.grid[i]) - table.density[i]);
    return 0.5 * table.trapezoid(diff);
}

} // namespace parapost
