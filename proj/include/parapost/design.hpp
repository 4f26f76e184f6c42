#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "parapost/errors.hpp"
#include "parapost/model.hpp"
#include "parapost/pipeline.hpp"
#include "parapost/posterior.hpp"
#include "parapost/quad.hpp"
#include "parapost/rng.hpp"

namespace parapost {

/// An experimental setup is a named restriction of the interior readings:
/// which thermocouples are kept, and which observation-time windows.
struct ExperimentalSetup {
    std::string name;
    std::vector<int> sensors;                    // interior rows, 0..I-2
    std::vector<std::pair<int, int>> windows;    // 1-based step ranges, inclusive
};

/// Observation n falls in the time window whose interval (t_{n-1}, t_n]
/// midpoint lies in it, so a third of [0,1] with N = 60 keeps 20 columns.
inline std::pair<int, int> window_from_times(double lo, double hi,
                                             const TimeGrid& grid) {
    int first = 0, last = -1;
    for (int n = 1; n <= grid.step_count; ++n) {
        const double mid = 0.5 * (grid.time(n - 1) + grid.time(n));
        if (mid >= lo && mid < hi) {
            if (first == 0) first = n;
            last = n;
        }
    }
    if (last < first) throw DomainError("empty time window");
    return {first, last};
}

/// es1: three equal time windows, all sensors. es2: five single inner
/// thermocouples, all times. es3: their product (15 setups).
inline std::vector<ExperimentalSetup> setups_es1(const TimeGrid& grid,
                                                 int interior_count) {
    std::vector<int> all(interior_count);
    for (int i = 0; i < interior_count; ++i) all[i] = i;
    std::vector<ExperimentalSetup> out;
    const char* names[3] = {"early", "middle", "late"};
    for (int w = 0; w < 3; ++w) {
        const double lo = grid.t_end * w / 3.0;
        const double hi = grid.t_end * (w + 1) / 3.0;
        out.push_back({names[w], all, {window_from_times(lo, hi, grid)}});
    }
    return out;
}

inline std::vector<ExperimentalSetup> setups_es2(const TimeGrid& grid,
                                                 int interior_count) {
    std::vector<ExperimentalSetup> out;
    for (int i = 0; i < interior_count; ++i)
        out.push_back({"TC" + std::to_string(i + 2),
                       {i},
                       {{1, grid.step_count}}});
    return out;
}

inline std::vector<ExperimentalSetup> setups_es3(const TimeGrid& grid,
                                                 int interior_count) {
    std::vector<ExperimentalSetup> out;
    for (const auto& s2 : setups_es2(grid, interior_count))
        for (const auto& s1 : setups_es1(grid, interior_count))
            out.push_back({s2.name + "-" + s1.name, s2.sensors, s1.windows});
    return out;
}

inline Selection restrict_observations(const ExperimentalSetup& setup,
                                       const TimeGrid& grid, int interior_count) {
    Selection sel;
    sel.rows = setup.sensors;
    sel.windows = setup.windows;
    for (int r : sel.rows)
        if (r < 0 || r >= interior_count) throw DomainError("sensor row out of range");
    for (auto [a, b] : sel.windows)
        if (a < 1 || b > grid.step_count || b < a)
            throw DomainError("time window out of range");
    return sel;
}

/// Boundary prior for a restricted setup: the retained boundary readings are
/// smoothed by a quadratic least-squares fit and evaluated over the whole
/// horizon. A quadratic (rather than the cubic used on complete records)
/// keeps the extrapolation outside short windows stable.
inline BoundaryPrior design_prior(const ObservationSet& obs, const TimeGrid& grid,
                                  const Selection& sel, double sigma_p) {
    auto fit = [&](const VectorXd& y) {
        std::vector<int> cols;
        for (const auto& [w0, w1] : sel.windows)
            for (int t = w0; t <= w1; ++t) cols.push_back(t);
        MatrixXd v(cols.size(), 3);
        VectorXd yy(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const double t = grid.time(cols[i]);
            v(i, 0) = 1.0;
            v(i, 1) = t;
            v(i, 2) = t * t;
            yy[i] = y[cols[i] - 1];
        }
        const VectorXd c = v.colPivHouseholderQr().solve(yy);
        VectorXd out(y.size());
        for (int i = 0; i < y.size(); ++i) {
            const double t = grid.time(i + 1);
            out[i] = c[0] + c[1] * t + c[2] * t * t;
        }
        return out;
    };
    BoundaryPrior prior;
    prior.mu_L = fit(obs.boundary_left());
    prior.mu_R = fit(obs.boundary_right());
    prior.sigma_p = sigma_p;
    return prior;
}

/// Marginal scalar fit of a restricted dataset using the design-module
/// boundary prior above.
inline ScalarFitResult fit_setup_marginal(const CanonicalConfig& cfg,
                                          const ObservationSet& obs,
                                          const Selection& sel) {
    LikelihoodContext ctx = make_context(cfg, obs, sel);
    ctx.prior_b = design_prior(ctx.obs, ctx.grid, sel, cfg.sigma_p);
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

/// Kullback-Leibler divergence from the Laplace posterior to the prior,
/// by adaptive quadrature over a posterior-centred range.
inline double information_divergence(const LaplacePosterior& post,
                                     const LognormalPrior& prior) {
    const double lo = std::max(1e-12, post.theta_hat - 10.0 * post.sd());
    const double hi = post.theta_hat + 10.0 * post.sd();
    auto f = [&](double th) {
        const double lp = post.log_pdf(th);
        if (lp < -700.0) return 0.0;
        return std::exp(lp) * (lp - prior.log_pdf(th));
    };
    return integrate(f, lo, hi, 1e-9);
}

struct EigResult {
    double eig = 0.0;
    double std_error = 0.0;
    int replications = 0;
    int dropped = 0;
};

/// Expected information gain of a setup: each replication synthesizes a
/// dataset under the same generating process used for dataset A, restricts
/// it to the setup, fits the marginal posterior, and averages the KL
/// divergence. Common random numbers (the seed stream) pair setups.
inline EigResult expected_information_gain(const ExperimentalSetup& setup,
                                           const CanonicalConfig& cfg,
                                           int replications,
                                           std::uint64_t master_seed) {
    if (replications < 2) throw DomainError("need at least two replications");
    const TimeGrid grid = cfg.grid();
    const Selection sel = restrict_observations(setup, grid, cfg.sensor_count - 2);
    const LognormalPrior prior = cfg.theta_prior();

    std::vector<double> gains;
    gains.reserve(replications);
    int dropped = 0;
    for (int r = 0; r < replications; ++r) {
        const std::uint64_t rep_seed = derive_seed(master_seed, r);
        try {
            const SyntheticDataset ds =
                make_dataset_A(cfg, 1.0, derive_seed(rep_seed, 1));
            const ScalarFitResult fit = fit_setup_marginal(cfg, ds.obs, sel);
            gains.push_back(information_divergence(fit.laplace, prior));
        } catch (const BracketError&) {
            ++dropped;
        } catch (const CurvatureError&) {
            ++dropped;
        } catch (const NumericalError&) {
            ++dropped;
        } catch (const SolveError&) {
            ++dropped;
        }
    }
    if (5 * dropped > replications)
        throw EigError("more than 20% of replications failed for setup " + setup.name);

    EigResult out;
    out.replications = static_cast<int>(gains.size());
    out.dropped = dropped;
    double mean = 0.0;
    for (double g : gains) mean += g;
    mean /= out.replications;
    double var = 0.0;
    for (double g : gains) var += (g - mean) * (g - mean);
    var /= (out.replications - 1);
    out.eig = mean;
    out.std_error = std::sqrt(var / out.replications);
    return out;
}

struct DesignRanking {
    std::vector<ExperimentalSetup> setups;
    std::vector<EigResult> results;
    int best = 0;
};

inline DesignRanking eig_grid(const std::vector<ExperimentalSetup>& setups,
                              const CanonicalConfig& cfg, int replications,
                              std::uint64_t master_seed) {
    DesignRanking rank;
    rank.setups = setups;
    double best_eig = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < setups.size(); ++k) {
        // same master seed for every setup: paired comparisons
        EigResult r = expected_information_gain(setups[k], cfg, replications,
                                                master_seed);
        if (r.eig > best_eig) {
            best_eig = r.eig;
            rank.best = static_cast<int>(k);
        }
        rank.results.push_back(r);
    }
    return rank;
}

} // namespace parapost
