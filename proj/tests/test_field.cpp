#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "parapost/field.hpp"
#include "parapost/quad.hpp"

using namespace parapost;

namespace {

SeCovariance midpoint_cov(double eta, double ell, int s) {
    SeCovariance cov{eta, ell, VectorXd::Zero(s)};
    for (int e = 0; e < s; ++e) cov.sites[e] = (e + 0.5) / s;
    return cov;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

TEST_CASE("covariance is stationary with diagonal eta squared") {
    const SeCovariance cov = midpoint_cov(0.3, 2.0, 6);
    const MatrixXd k = cov.matrix();
    for (int i = 0; i < 6; ++i) REQUIRE(k(i, i) == Catch::Approx(0.09).margin(1e-15));
    // equal site distances give equal covariances
    REQUIRE(k(0, 1) == Catch::Approx(k(3, 4)).margin(1e-15));
    REQUIRE(k(0, 2) == Catch::Approx(k(2, 4)).margin(1e-15));
    REQUIRE((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("factorization survives near-singular kernels") {
    // huge length scale: numerically rank one
    const SeCovariance cov = midpoint_cov(1.0, 1e6, 8);
    const MatrixXd l = unit_factor(cov);
    const MatrixXd recon = l * l.transpose();
    REQUIRE((recon - cov.unit_matrix()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("empirical covariance of the log field matches the kernel") {
    const SeCovariance cov = midpoint_cov(0.2, 1.0, 5);
    const MatrixXd k = cov.matrix();
    const double mu = 0.4;
    const int draws = 20000;
    MatrixXd logs(5, draws);
    for (int d = 0; d < draws; ++d)
        logs.col(d) = sample_field(cov, mu, derive_seed(99, d)).array().log();
    const VectorXd mean = logs.rowwise().mean();
    REQUIRE((mean.array() - mu).abs().maxCoeff() < 0.01);
    const MatrixXd centered = logs.colwise() - mean;
    const MatrixXd emp = centered * centered.transpose() / (draws - 1);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            REQUIRE(emp(i, j) == Catch::Approx(k(i, j)).epsilon(0.05).margin(5e-4));
}

TEST_CASE("marginal normality via kolmogorov-smirnov") {
    const SeCovariance cov = midpoint_cov(0.5, 1.0, 4);
    const int draws = 10000;
    std::vector<double> z(draws);
    for (int d = 0; d < draws; ++d) {
        const VectorXd th = sample_field(cov, 0.0, derive_seed(7, d));
        z[d] = std::log(th[2]) / 0.5; // standardized site marginal
    }
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double f = std_normal_cdf(z[i]);
        ks = std::max(ks, std::abs(f - (i + 1.0) / draws));
        ks = std::max(ks, std::abs(f - static_cast<double>(i) / draws));
    }
    REQUIRE(ks < 0.02);
}

TEST_CASE("degenerate limits of the field prior") {
    // eta -> 0: field identically exp(mu)
    const SeCovariance tiny = midpoint_cov(1e-14, 1.0, 6);
    const VectorXd th0 = sample_field(tiny, 0.3, 5);
    REQUIRE((th0.array() - std::exp(0.3)).abs().maxCoeff() < 1e-10);

    // ell -> infinity: perfectly correlated, all sites nearly equal
    const SeCovariance flat = midpoint_cov(0.5, 1e6, 6);
    for (int d = 0; d < 50; ++d) {
        const VectorXd th = sample_field(flat, 0.0, derive_seed(11, d));
        const VectorXd lg = th.array().log();
        REQUIRE(lg.maxCoeff() - lg.minCoeff() < 1e-2 * 0.5);
    }
}

TEST_CASE("whitened reparameterization matches direct sampling") {
    const SeCovariance cov = midpoint_cov(0.25, 2.0, 5);
    const MatrixXd l = unit_factor(cov);
    Rng rng(321);
    VectorXd z(5);
    for (int i = 0; i < 5; ++i) z[i] = rng.normal();
    const VectorXd via_white = whitened_reparam(0.1, 0.25, z, l);
    const VectorXd direct = sample_field(cov, 0.1, 321);
    REQUIRE((via_white - direct).cwiseAbs().maxCoeff() < 1e-14);

    REQUIRE((whitened_reparam(0.7, 0.0, z, l).array() - std::exp(0.7))
                .abs()
                .maxCoeff() < 1e-14);
    REQUIRE((whitened_reparam(0.7, 0.3, VectorXd::Zero(5), l).array() -
             std::exp(0.7))
                .abs()
                .maxCoeff() < 1e-14);
}

TEST_CASE("hyperprior densities are normalized") {
    HyperPrior hp;
    hp.mu_loc = 0.1;
    hp.mu_scale = 0.1;
    hp.eta_scale = 0.1;
    // the joint factors into a Gaussian in mu and a half-Cauchy in eta;
    // check each factor integrates to one
    auto mu_pdf = [&](double mu) {
        return std::exp(hp.log_pdf(mu, 1.0)) / std::exp(hp.log_pdf(hp.mu_loc, 1.0)) *
               1.0 / (std::sqrt(2.0 * M_PI) * hp.mu_scale);
    };
    const double m1 = integrate(mu_pdf, -1.5, 1.7, 1e-12);
    REQUIRE(m1 == Catch::Approx(1.0).margin(1e-8));

    auto eta_pdf = [&](double eta) {
        const double t = eta / hp.eta_scale;
        return 2.0 / (M_PI * hp.eta_scale * (1.0 + t * t));
    };
    const double m2 = integrate(eta_pdf, 1e-12, 1e4, 1e-10);
    REQUIRE(m2 == Catch::Approx(1.0).margin(1e-4)); // heavy tail truncated
    // and the implementation agrees with the analytic half-Cauchy density
    REQUIRE(std::exp(hp.log_pdf(hp.mu_loc, 0.05)) ==
            Catch::Approx(eta_pdf(0.05) / (std::sqrt(2.0 * M_PI) * hp.mu_scale))
                .epsilon(1e-12));
}

TEST_CASE("zero-data grid posterior is proportional to the hyperprior") {
    const HyperPrior hp;
    const VectorXd sites = VectorXd::LinSpaced(4, 0.1, 0.9);
    const VectorXd mu_grid = VectorXd::LinSpaced(5, -0.2, 0.2);
    const VectorXd eta_grid = VectorXd::LinSpaced(5, 0.01, 0.3);
    const auto loglik = [](const VectorXd&) { return -1.25; }; // constant
    const HyperPosteriorGrid grid = hyper_log_posterior_grid(
        loglik, sites, hp, mu_grid, eta_grid, HyperGridBudget{8, 8}, 17);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            REQUIRE(grid.log_density(i, j) - hp.log_pdf(mu_grid[i], eta_grid[j]) ==
                    Catch::Approx(-1.25).margin(1e-10));
    REQUIRE(grid.invalid_cells == 0);
}

TEST_CASE("grid posterior is deterministic per seed and marks the argmax") {
    const HyperPrior hp;
    const VectorXd sites = VectorXd::LinSpaced(4, 0.1, 0.9);
    const VectorXd mu_grid = VectorXd::LinSpaced(7, -0.3, 0.3);
    const VectorXd eta_grid = VectorXd::LinSpaced(7, 0.01, 0.4);
    // peaked synthetic likelihood pulling log theta toward 0.1
    const auto loglik = [](const VectorXd& th) {
        return -50.0 * (th.array().log() - 0.1).square().sum();
    };
    const auto g1 = hyper_log_posterior_grid(loglik, sites, hp, mu_grid, eta_grid,
                                             HyperGridBudget{8, 16}, 5);
    const auto g2 = hyper_log_posterior_grid(loglik, sites, hp, mu_grid, eta_grid,
                                             HyperGridBudget{8, 16}, 5);
    REQUIRE((g1.log_density - g2.log_density).cwiseAbs().maxCoeff() == 0.0);
    double best = -1e300;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) best = std::max(best, g1.log_density(i, j));
    REQUIRE(g1.log_density(g1.map_mu, g1.map_eta) == best);
}

TEST_CASE("laplace fit on an analytic gaussian table is exact") {
    HyperPosteriorGrid grid;
    grid.mu_grid = VectorXd::LinSpaced(21, -0.5, 0.5);
    grid.eta_grid = VectorXd::LinSpaced(21, 0.05, 0.45);
    Eigen::Matrix2d prec;
    prec << 120.0, 30.0, 30.0, 400.0;
    const Eigen::Vector2d center(0.0, 0.25);
    grid.log_density.resize(21, 21);
    double best = -1e300;
    for (int i = 0; i < 21; ++i)
        for (int j = 0; j < 21; ++j) {
            Eigen::Vector2d d(grid.mu_grid[i] - center[0],
                              grid.eta_grid[j] - center[1]);
            grid.log_density(i, j) = -0.5 * d.dot(prec * d);
            if (grid.log_density(i, j) > best) {
                best = grid.log_density(i, j);
                grid.map_mu = i;
                grid.map_eta = j;
            }
        }
    REQUIRE(grid.unique_interior_mode());
    const HyperLaplace lap = hyper_laplace(grid);
    REQUIRE(lap.mean[0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(lap.mean[1] == Catch::Approx(0.25).margin(1e-12));
    const Eigen::Matrix2d cov_ref = prec.inverse();
    REQUIRE((lap.covariance - cov_ref).cwiseAbs().maxCoeff() <
            1e-6 * cov_ref.cwiseAbs().maxCoeff());
}

TEST_CASE("laplace fit refuses boundary and indefinite maps") {
    HyperPosteriorGrid grid;
    grid.mu_grid = VectorXd::LinSpaced(5, -1.0, 1.0);
    grid.eta_grid = VectorXd::LinSpaced(5, 0.1, 0.5);
    grid.log_density = MatrixXd::Zero(5, 5);
    grid.map_mu = 0; // on the edge
    grid.map_eta = 2;
    REQUIRE_THROWS_AS(hyper_laplace(grid), CurvatureError);

    grid.map_mu = 2;
    // saddle: concave in mu, convex in eta -> indefinite curvature
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double x = grid.mu_grid[i], y = grid.eta_grid[j] - 0.3;
            grid.log_density(i, j) = -2.0 * x * x + 5.0 * y * y;
        }
    REQUIRE_THROWS_AS(hyper_laplace(grid), CurvatureError);
}

TEST_CASE("dataset B reduces to the constant pipeline when eta is zero") {
    RobinProblem base;
    base.theta_field = VectorXd::Constant(6, 1.0);
    DatasetSpec spec;
    spec.seed = 3;
    const SyntheticDataset b = make_dataset_B(0.0, 0.0, 5.0, base, spec, 21);
    const SyntheticDataset a = make_dataset(base, spec);
    REQUIRE((a.obs.Y - b.obs.Y).cwiseAbs().maxCoeff() == 0.0);
    // the drawn field is recorded, not re-drawn
    const SyntheticDataset c = make_dataset_B(0.0, 0.1, 5.0, base, spec, 21);
    RobinProblem redraw = base;
    redraw.theta_field = c.truth.theta_field;
    const SyntheticDataset d = make_dataset(redraw, spec);
    REQUIRE((c.obs.Y - d.obs.Y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("long correlation length keeps the drawn log field nearly flat") {
    RobinProblem base;
    base.theta_field = VectorXd::Constant(6, 1.0);
    int flat = 0;
    const int trials = 100;
    for (int d = 0; d < trials; ++d) {
        const SeCovariance cov = midpoint_cov(0.1, 5.0, 6);
        const VectorXd th = sample_field(cov, 0.0, derive_seed(1000, d));
        double tv = 0.0;
        for (int i = 0; i + 1 < 6; ++i)
            tv += std::abs(std::log(th[i + 1]) - std::log(th[i]));
        if (tv < 0.1) ++flat;
    }
    REQUIRE(flat == trials);
}

TEST_CASE("monte carlo budgets below the floor are rejected") {
    const HyperPrior hp;
    const VectorXd sites = VectorXd::LinSpaced(3, 0.2, 0.8);
    const VectorXd g = VectorXd::LinSpaced(3, 0.0, 0.2);
    const auto loglik = [](const VectorXd&) { return 0.0; };
    REQUIRE_THROWS_AS(hyper_log_posterior_grid(loglik, sites, hp, g, g,
                                               HyperGridBudget{4, 64}, 1),
                      DomainError);
    REQUIRE_THROWS_AS(hyper_log_posterior_grid(loglik, sites, hp, g, g,
                                               HyperGridBudget{8, 4}, 1),
                      DomainError);
}
