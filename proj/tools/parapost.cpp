// parapost: coefficient inference for 1D parabolic problems with unknown
// boundary values. Subcommands: generate | fit | design | predict | field-fit.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "parapost/design.hpp"
#include "parapost/field.hpp"
#include "parapost/io.hpp"
#include "parapost/pipeline.hpp"
#include "parapost/predictive.hpp"

namespace fs = std::filesystem;
using namespace parapost;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir = ".";
    std::string mode = "marginal";
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

RunConfig resolve(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    if (const char* env = std::getenv("PARAPOST_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("PARAPOST_SEED is not an unsigned integer");
        }
    }
    if (args.seed) cfg.seed = *args.seed; // --seed wins over env and file
    if (args.mode != "marginal" && args.mode != "known-bc")
        throw ConfigError("--mode must be marginal or known-bc");
    return cfg;
}

void echo(const RunConfig& cfg, const CommonArgs& args, const std::string& cmd) {
    json e = resolved_config(cfg);
    e["command"] = cmd;
    e["mode"] = args.mode;
    e["threads"] = args.threads;
    std::cout << "resolved config:\n" << e.dump(2) << "\n";
}

fs::path out_path(const CommonArgs& args, const std::string& name) {
    fs::create_directories(args.out_dir);
    return fs::path(args.out_dir) / name;
}

SyntheticDataset generate_dataset(const RunConfig& cfg) {
    if (cfg.generate.dataset == "A")
        return make_dataset_A(cfg.canonical, cfg.generate.theta,
                              derive_seed(cfg.seed, 1));
    return make_dataset_B_canonical(cfg.canonical, cfg.generate.field.mu,
                                    cfg.generate.field.eta, cfg.generate.field.ell,
                                    derive_seed(cfg.seed, 2),
                                    derive_seed(cfg.seed, 1));
}

ObservationSet load_data(const RunConfig& cfg, const CommonArgs& args) {
    ObservationFile file = read_observations_csv(args.data_path);
    if (file.obs.Y.rows() != cfg.canonical.sensor_count ||
        file.obs.Y.cols() != cfg.canonical.step_count)
        throw ConfigError("data shape does not match the configured problem");
    file.obs.sigma = cfg.canonical.sigma;
    file.obs.Y0 =
        VectorXd::Constant(cfg.canonical.sensor_count - 2, cfg.canonical.t0);
    return file.obs;
}

int cmd_generate(const CommonArgs& args) {
    const RunConfig cfg = resolve(args);
    echo(cfg, args, "generate");
    const SyntheticDataset ds = generate_dataset(cfg);
    write_observations_csv(out_path(args, "observations.csv").string(), ds.obs,
                           cfg.canonical.grid());
    json truth;
    truth["dataset"] = cfg.generate.dataset;
    truth["seed"] = cfg.seed;
    truth["sigma_d"] = cfg.canonical.sigma_d;
    truth["theta_field"] = std::vector<double>(
        ds.truth.theta_field.data(),
        ds.truth.theta_field.data() + ds.truth.theta_field.size());
    if (cfg.generate.dataset == "B") {
        truth["field"] = {{"mu", cfg.generate.field.mu},
                          {"eta", cfg.generate.field.eta},
                          {"ell", cfg.generate.field.ell}};
    }
    write_json(out_path(args, "truth.json").string(), truth);
    return kExitOk;
}

int cmd_fit(const CommonArgs& args) {
    const RunConfig cfg = resolve(args);
    echo(cfg, args, "fit");
    const ObservationSet obs = load_data(cfg, args);
    const Selection sel = Selection::full(cfg.canonical.sensor_count - 2,
                                          cfg.canonical.step_count);

    LikelihoodContext ctx = make_context(cfg.canonical, obs, sel);
    const LognormalPrior prior = cfg.canonical.theta_prior();
    const bool marginal = args.mode == "marginal";
    BoundarySeries known_bc;
    if (!marginal) {
        // known-boundary mode uses the boundary readings as exact values
        known_bc.T_L = obs.boundary_left();
        known_bc.T_R = obs.boundary_right();
        known_bc.T_L0 = cfg.canonical.t0;
        known_bc.T_R0 = cfg.canonical.t0;
    }
    const LogDensity logpost = [&](double th) {
        return marginal
                   ? log_posterior(th, ctx, prior, PosteriorMode::marginal)
                   : log_posterior(th, ctx, prior, PosteriorMode::joint_known_bc,
                                   &known_bc);
    };
    const LogDensity loglik = [&](double th) {
        return logpost(th) - prior.log_pdf(th);
    };

    const double theta_map = map_estimate(logpost, cfg.fit.theta_lo, cfg.fit.theta_hi);
    const LaplacePosterior lap = laplace_fit(logpost, theta_map);

    json report;
    report["mode"] = args.mode;
    report["theta_map"] = theta_map;
    report["laplace_mean"] = lap.theta_hat;
    report["laplace_sd"] = lap.sd();
    write_json(out_path(args, "fit_report.json").string(), report);

    std::ofstream curve(out_path(args, "posterior_curve.csv"));
    if (!curve) throw IoError("cannot write posterior_curve.csv");
    curve << "theta,log_likelihood,log_posterior\n";
    const VectorXd thetas = VectorXd::LinSpaced(cfg.fit.curve_points,
                                                cfg.fit.theta_lo, cfg.fit.theta_hi);
    for (int i = 0; i < thetas.size(); ++i)
        curve << format_sig(thetas[i]) << "," << format_sig(loglik(thetas[i]))
              << "," << format_sig(logpost(thetas[i])) << "\n";
    return kExitOk;
}

int cmd_design(const CommonArgs& args) {
    const RunConfig cfg = resolve(args);
    echo(cfg, args, "design");
    const TimeGrid grid = cfg.canonical.grid();
    const int interior = cfg.canonical.sensor_count - 2;
    std::vector<ExperimentalSetup> setups;
    if (cfg.design.family == "es1") setups = setups_es1(grid, interior);
    else if (cfg.design.family == "es2") setups = setups_es2(grid, interior);
    else setups = setups_es3(grid, interior);

    // D_KL column only when a realized dataset is provided
    std::optional<ObservationSet> obs;
    if (!args.data_path.empty()) obs = load_data(cfg, args);

    const DesignRanking rank =
        eig_grid(setups, cfg.canonical, cfg.design.replications,
                 derive_seed(cfg.seed, 3));

    std::ofstream f(out_path(args, "eig_table.csv"));
    if (!f) throw IoError("cannot write eig_table.csv");
    f << "setup,eig,std_error,replications,dropped,d_kl\n";
    const LognormalPrior prior = cfg.canonical.theta_prior();
    for (std::size_t k = 0; k < setups.size(); ++k) {
        const EigResult& r = rank.results[k];
        f << setups[k].name << "," << format_sig(r.eig) << ","
          << format_sig(r.std_error) << "," << r.replications << "," << r.dropped;
        if (obs) {
            const Selection sel = restrict_observations(setups[k], grid, interior);
            const ScalarFitResult fit = fit_setup_marginal(cfg.canonical, *obs, sel);
            f << "," << format_sig(information_divergence(fit.laplace, prior));
        } else {
            f << ",";
        }
        f << "\n";
    }
    std::cout << "best setup: " << setups[rank.best].name << "\n";
    return kExitOk;
}

int cmd_predict(const CommonArgs& args) {
    const RunConfig cfg = resolve(args);
    echo(cfg, args, "predict");
    const ObservationSet obs = load_data(cfg, args);
    const int interior = cfg.canonical.sensor_count - 2;
    const int n = cfg.predict.history_horizon;
    const int k = cfg.predict.steps_ahead;

    // fit theta from the history only
    ObservationSet hist = obs;
    hist.Y = obs.Y.leftCols(n).eval();
    CanonicalConfig hist_cfg = cfg.canonical;
    hist_cfg.t_end = cfg.canonical.grid().dt() * n;
    hist_cfg.step_count = n;
    const Selection sel = Selection::full(interior, n);
    const ScalarFitResult fit = fit_scalar_marginal(hist_cfg, hist, sel);

    PredictiveQuery q;
    q.history_horizon = n;
    q.steps_ahead = k;
    q.future_T_L = obs.boundary_left().segment(n, k);
    q.future_T_R = obs.boundary_right().segment(n, k);
    q.target_sensors = cfg.predict.sensors;

    const auto tables = predictive_density(q, cfg.canonical, obs, fit.laplace,
                                           2000, derive_seed(cfg.seed, 4));
    std::ofstream f(out_path(args, "predictive_density.csv"));
    if (!f) throw IoError("cannot write predictive_density.csv");
    f << "sensor,temperature,density\n";
    json summary = json::array();
    for (const auto& tab : tables) {
        for (int i = 0; i < tab.grid.size(); ++i)
            f << "TC" << tab.sensor + 2 << "," << format_sig(tab.grid[i]) << ","
              << format_sig(tab.density[i]) << "\n";
        const PredictiveSummary s = predictive_summary(tab);
        summary.push_back({{"sensor", "TC" + std::to_string(s.sensor + 2)},
                           {"mean", s.mean},
                           {"sd", s.sd},
                           {"q025", s.q025},
                           {"q975", s.q975}});
    }
    json report;
    report["theta_map"] = fit.theta_map;
    report["theta_sd"] = fit.theta_sd;
    report["sensors"] = summary;
    write_json(out_path(args, "predict_summary.json").string(), report);
    return kExitOk;
}

int cmd_field_fit(const CommonArgs& args) {
    const RunConfig cfg = resolve(args);
    echo(cfg, args, "field-fit");
    const ObservationSet obs = load_data(cfg, args);
    const Selection sel = Selection::full(cfg.canonical.sensor_count - 2,
                                          cfg.canonical.step_count);
    const auto loglik = field_likelihood(cfg.canonical, obs, sel);

    const int s = cfg.canonical.sensor_count - 1;
    VectorXd sites(s);
    for (int e = 0; e < s; ++e) sites[e] = (e + 0.5) / s;

    HyperGridBudget budget{cfg.field_fit.m_ell, cfg.field_fit.m_z};
    const HyperPosteriorGrid grid = hyper_log_posterior_grid(
        loglik, sites, cfg.hyper, cfg.field_fit.mu_grid.grid(),
        cfg.field_fit.eta_grid.grid(), budget, derive_seed(cfg.seed, 5));
    const int cells =
        static_cast<int>(grid.mu_grid.size() * grid.eta_grid.size());
    if (10 * grid.invalid_cells > cells)
        throw NumericalError("more than 10% of hyperposterior grid cells invalid (" +
                             std::to_string(grid.invalid_cells) + "/" +
                             std::to_string(cells) + ")");

    std::ofstream f(out_path(args, "hyperposterior_grid.csv"));
    if (!f) throw IoError("cannot write hyperposterior_grid.csv");
    f << "mu,eta,log_density\n";
    for (int i = 0; i < grid.mu_grid.size(); ++i)
        for (int j = 0; j < grid.eta_grid.size(); ++j)
            f << format_sig(grid.mu_grid[i]) << "," << format_sig(grid.eta_grid[j])
              << "," << format_sig(grid.log_density(i, j)) << "\n";

    json report;
    report["map_mu"] = grid.map_mu_value();
    report["map_eta"] = grid.map_eta_value();
    report["invalid_cells"] = grid.invalid_cells;
    try {
        const HyperLaplace lap = hyper_laplace(grid);
        report["laplace_mean"] = {lap.mean[0], lap.mean[1]};
        report["laplace_cov"] = {{lap.covariance(0, 0), lap.covariance(0, 1)},
                                 {lap.covariance(1, 0), lap.covariance(1, 1)}};
    } catch (const CurvatureError& e) {
        report["laplace_error"] = e.what();
    }
    write_json(out_path(args, "field_fit_report.json").string(), report);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"boundary-marginalized coefficient inference for 1D parabolic problems"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", args.config_path, "JSON configuration file");
        auto* d = sub->add_option("--data", args.data_path, "observation CSV");
        if (needs_data) d->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--mode", args.mode, "known-bc or marginal");
        sub->add_option("--threads", args.threads, "worker cap");
        sub->add_option("--seed", args.seed, "master seed override");
    };
    add_common(app.add_subcommand("generate", "synthesize a dataset"), false);
    add_common(app.add_subcommand("fit", "scalar coefficient posterior"), true);
    add_common(app.add_subcommand("design", "expected information gain table"), false);
    add_common(app.add_subcommand("predict", "k-step-ahead predictive density"), true);
    add_common(app.add_subcommand("field-fit", "field hyperparameter posterior"), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand("generate")) return cmd_generate(args);
        if (app.got_subcommand("fit")) return cmd_fit(args);
        if (app.got_subcommand("design")) return cmd_design(args);
        if (app.got_subcommand("predict")) return cmd_predict(args);
        if (app.got_subcommand("field-fit")) return cmd_field_fit(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
