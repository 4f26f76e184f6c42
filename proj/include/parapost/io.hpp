#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "parapost/errors.hpp"
#include "parapost/model.hpp"
#include "parapost/pipeline.hpp"

namespace parapost {

using json = nlohmann::json;

inline std::string format_sig(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Observation table: header t,TC1..TC(I+1), one row per observation time,
/// 10 significant digits.
inline void write_observations_csv(const std::string& path,
                                   const ObservationSet& obs,
                                   const TimeGrid& grid) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    const int sensors = static_cast<int>(obs.Y.rows());
    f << "t";
    for (int s = 1; s <= sensors; ++s) f << ",TC" << s;
    f << "\n";
    for (int n = 1; n <= grid.step_count; ++n) {
        f << format_sig(grid.time(n));
        for (int s = 0; s < sensors; ++s) f << "," << format_sig(obs.Y(s, n - 1));
        f << "\n";
    }
    if (!f) throw IoError("write failed for " + path);
}

struct ObservationFile {
    ObservationSet obs;
    VectorXd times;
};

inline ObservationFile read_observations_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty observation file " + path);
    int sensors = 0;
    {
        std::stringstream hs(line);
        std::string col;
        if (!std::getline(hs, col, ',') || col != "t")
            throw IoError(path + ": first column must be t");
        while (std::getline(hs, col, ',')) {
            if (col != "TC" + std::to_string(sensors + 1))
                throw IoError(path + ": unexpected column " + col);
            ++sensors;
        }
    }
    if (sensors < 3) throw IoError(path + ": need at least three sensors");

    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError(path + ":" + std::to_string(lineno) +
                              ": bad number '" + cell + "'");
            }
        }
        if (static_cast<int>(row.size()) != sensors + 1)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(sensors + 1) + " columns");
        times.push_back(row[0]);
        rows.push_back(std::vector<double>(row.begin() + 1, row.end()));
    }
    if (rows.empty()) throw IoError(path + ": no observation rows");

    ObservationFile out;
    const int n = static_cast<int>(rows.size());
    out.times.resize(n);
    out.obs.Y.resize(sensors, n);
    for (int i = 0; i < n; ++i) {
        out.times[i] = times[i];
        for (int s = 0; s < sensors; ++s) out.obs.Y(s, i) = rows[i][s];
    }
    return out;
}

// --- configuration ---------------------------------------------------------

struct FieldGenConfig {
    double mu = 0.0;
    double eta = 0.1;
    double ell = 5.0;
};

struct GridSpecConfig {
    double lo = 0.0;
    double hi = 1.0;
    int points = 41;

    VectorXd grid() const { return VectorXd::LinSpaced(points, lo, hi); }
};

struct FieldFitConfig {
    GridSpecConfig mu_grid{-1.0, 1.0, 41};
    GridSpecConfig eta_grid{0.005, 1.005, 41};
    int m_ell = 32;
    int m_z = 64;
};

struct PredictConfig {
    int history_horizon = 30;
    int steps_ahead = 1;
    std::vector<int> sensors{0, 1, 2}; // interior rows
};

struct FitConfig {
    double theta_lo = 0.2;
    double theta_hi = 5.0;
    int curve_points = 101;
};

struct DesignConfig {
    std::string family = "es1"; // es1 | es2 | es3
    int replications = 200;
};

struct GenerateConfig {
    std::string dataset = "A"; // A | B
    double theta = 1.0;
    FieldGenConfig field;      // dataset B draw
};

struct RunConfig {
    CanonicalConfig canonical;
    HyperPrior hyper;
    GenerateConfig generate;
    FitConfig fit;
    DesignConfig design;
    PredictConfig predict;
    FieldFitConfig field_fit;
    std::uint64_t seed = 0;
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void take(const json& j, const char* key, T& slot, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        slot = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline GridSpecConfig take_grid(const json& j, const char* key,
                                GridSpecConfig dflt, const std::string& where) {
    if (!j.contains(key)) return dflt;
    const json& g = j.at(key);
    const std::string here = where + "." + key;
    if (!g.is_object()) throw ConfigError(here + " must be an object");
    reject_unknown(g, {"lo", "hi", "points"}, here);
    take(g, "lo", dflt.lo, here);
    take(g, "hi", dflt.hi, here);
    take(g, "points", dflt.points, here);
    if (dflt.points < 3 || !(dflt.hi > dflt.lo))
        throw ConfigError(here + ": need points >= 3 and hi > lo");
    return dflt;
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
    using detail::reject_unknown;
    using detail::take;
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(j,
                   {"problem", "noise", "prior", "generate", "fit", "design",
                    "predict", "field_fit", "rng"},
                   "config");
    RunConfig c;

    if (j.contains("problem")) {
        const json& p = j.at("problem");
        reject_unknown(p, {"sensors", "steps", "t0", "t_out", "h_over_kappa"},
                       "problem");
        take(p, "sensors", c.canonical.sensor_count, "problem");
        take(p, "steps", c.canonical.step_count, "problem");
        take(p, "t0", c.canonical.t0, "problem");
        take(p, "t_out", c.canonical.t_out, "problem");
        take(p, "h_over_kappa", c.canonical.h_over_kappa, "problem");
        if (c.canonical.sensor_count < 3 || c.canonical.step_count < 1)
            throw ConfigError("problem: need sensors >= 3 and steps >= 1");
    }
    if (j.contains("noise")) {
        const json& p = j.at("noise");
        reject_unknown(p, {"sigma", "sigma_p", "sigma_d"}, "noise");
        take(p, "sigma", c.canonical.sigma, "noise");
        take(p, "sigma_p", c.canonical.sigma_p, "noise");
        take(p, "sigma_d", c.canonical.sigma_d, "noise");
        if (!(c.canonical.sigma > 0.0) || !(c.canonical.sigma_p > 0.0) ||
            !(c.canonical.sigma_d > 0.0))
            throw ConfigError("noise: scales must be positive");
    }
    if (j.contains("prior")) {
        const json& p = j.at("prior");
        reject_unknown(p, {"nu", "tau", "hyper"}, "prior");
        take(p, "nu", c.canonical.nu, "prior");
        take(p, "tau", c.canonical.tau, "prior");
        if (!(c.canonical.tau > 0.0)) throw ConfigError("prior: tau must be positive");
        if (p.contains("hyper")) {
            const json& h = p.at("hyper");
            reject_unknown(h, {"mu_loc", "mu_scale", "eta_scale", "ell_lo", "ell_hi"},
                           "prior.hyper");
            take(h, "mu_loc", c.hyper.mu_loc, "prior.hyper");
            take(h, "mu_scale", c.hyper.mu_scale, "prior.hyper");
            take(h, "eta_scale", c.hyper.eta_scale, "prior.hyper");
            take(h, "ell_lo", c.hyper.ell_lo, "prior.hyper");
            take(h, "ell_hi", c.hyper.ell_hi, "prior.hyper");
            if (!(c.hyper.mu_scale > 0.0) || !(c.hyper.eta_scale > 0.0) ||
                !(c.hyper.ell_hi > c.hyper.ell_lo) || !(c.hyper.ell_lo > 0.0))
                throw ConfigError("prior.hyper: invalid scales or ell range");
        }
    }
    if (j.contains("generate")) {
        const json& p = j.at("generate");
        reject_unknown(p, {"dataset", "theta", "field"}, "generate");
        take(p, "dataset", c.generate.dataset, "generate");
        take(p, "theta", c.generate.theta, "generate");
        if (c.generate.dataset != "A" && c.generate.dataset != "B")
            throw ConfigError("generate.dataset must be A or B");
        if (!(c.generate.theta > 0.0))
            throw ConfigError("generate.theta must be positive");
        if (p.contains("field")) {
            const json& fj = p.at("field");
            reject_unknown(fj, {"mu", "eta", "ell"}, "generate.field");
            take(fj, "mu", c.generate.field.mu, "generate.field");
            take(fj, "eta", c.generate.field.eta, "generate.field");
            take(fj, "ell", c.generate.field.ell, "generate.field");
            if (c.generate.field.eta < 0.0 || !(c.generate.field.ell > 0.0))
                throw ConfigError("generate.field: eta >= 0 and ell > 0 required");
        }
    }
    if (j.contains("fit")) {
        const json& p = j.at("fit");
        reject_unknown(p, {"theta_lo", "theta_hi", "curve_points"}, "fit");
        take(p, "theta_lo", c.fit.theta_lo, "fit");
        take(p, "theta_hi", c.fit.theta_hi, "fit");
        take(p, "curve_points", c.fit.curve_points, "fit");
        if (!(c.fit.theta_lo > 0.0) || !(c.fit.theta_hi > c.fit.theta_lo) ||
            c.fit.curve_points < 2)
            throw ConfigError("fit: need 0 < theta_lo < theta_hi, curve_points >= 2");
    }
    if (j.contains("design")) {
        const json& p = j.at("design");
        reject_unknown(p, {"family", "replications"}, "design");
        take(p, "family", c.design.family, "design");
        take(p, "replications", c.design.replications, "design");
        if (c.design.family != "es1" && c.design.family != "es2" &&
            c.design.family != "es3")
            throw ConfigError("design.family must be es1, es2 or es3");
        if (c.design.replications < 2)
            throw ConfigError("design.replications must be >= 2");
    }
    if (j.contains("predict")) {
        const json& p = j.at("predict");
        reject_unknown(p, {"history_horizon", "steps_ahead", "sensors"}, "predict");
        take(p, "history_horizon", c.predict.history_horizon, "predict");
        take(p, "steps_ahead", c.predict.steps_ahead, "predict");
        take(p, "sensors", c.predict.sensors, "predict");
        if (c.predict.sensors.empty())
            throw ConfigError("predict.sensors must not be empty");
    }
    if (j.contains("field_fit")) {
        const json& p = j.at("field_fit");
        reject_unknown(p, {"mu_grid", "eta_grid", "m_ell", "m_z"}, "field_fit");
        c.field_fit.mu_grid =
            detail::take_grid(p, "mu_grid", c.field_fit.mu_grid, "field_fit");
        c.field_fit.eta_grid =
            detail::take_grid(p, "eta_grid", c.field_fit.eta_grid, "field_fit");
        take(p, "m_ell", c.field_fit.m_ell, "field_fit");
        take(p, "m_z", c.field_fit.m_z, "field_fit");
    }
    if (j.contains("rng")) {
        const json& p = j.at("rng");
        reject_unknown(p, {"seed"}, "rng");
        take(p, "seed", c.seed, "rng");
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

/// Every command echoes a fully materialized configuration; diffing two
/// echoes answers "what differed between these runs".
inline json resolved_config(const RunConfig& c) {
    json j;
    j["problem"] = {{"sensors", c.canonical.sensor_count},
                    {"steps", c.canonical.step_count},
                    {"t0", c.canonical.t0},
                    {"t_out", c.canonical.t_out},
                    {"h_over_kappa", c.canonical.h_over_kappa}};
    j["noise"] = {{"sigma", c.canonical.sigma},
                  {"sigma_p", c.canonical.sigma_p},
                  {"sigma_d", c.canonical.sigma_d}};
    j["prior"] = {{"nu", c.canonical.nu},
                  {"tau", c.canonical.tau},
                  {"hyper",
                   {{"mu_loc", c.hyper.mu_loc},
                    {"mu_scale", c.hyper.mu_scale},
                    {"eta_scale", c.hyper.eta_scale},
                    {"ell_lo", c.hyper.ell_lo},
                    {"ell_hi", c.hyper.ell_hi}}}};
    j["generate"] = {{"dataset", c.generate.dataset},
                     {"theta", c.generate.theta},
                     {"field",
                      {{"mu", c.generate.field.mu},
                       {"eta", c.generate.field.eta},
                       {"ell", c.generate.field.ell}}}};
    j["fit"] = {{"theta_lo", c.fit.theta_lo},
                {"theta_hi", c.fit.theta_hi},
                {"curve_points", c.fit.curve_points}};
    j["design"] = {{"family", c.design.family},
                   {"replications", c.design.replications}};
    j["predict"] = {{"history_horizon", c.predict.history_horizon},
                    {"steps_ahead", c.predict.steps_ahead},
                    {"sensors", c.predict.sensors}};
    j["field_fit"] = {{"mu_grid",
                       {{"lo", c.field_fit.mu_grid.lo},
                        {"hi", c.field_fit.mu_grid.hi},
                        {"points", c.field_fit.mu_grid.points}}},
                      {"eta_grid",
                       {{"lo", c.field_fit.eta_grid.lo},
                        {"hi", c.field_fit.eta_grid.hi},
                        {"points", c.field_fit.eta_grid.points}}},
                      {"m_ell", c.field_fit.m_ell},
                      {"m_z", c.field_fit.m_z}};
    j["rng"] = {{"seed", c.seed}};
    return j;
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed for " + path);
}

} // namespace parapost
