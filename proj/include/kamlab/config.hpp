#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kamlab/io.hpp"
#include "kamlab/rng.hpp"
#include "kamlab/torus.hpp"
#include "kamlab/weak_kam.hpp"

namespace kamlab {

using json = nlohmann::json;

// One flat config file per experiment.  Unknown keys are rejected; every
// absent key falls back to the documented default, and the config hash is
// taken over the normalized (defaults-filled) form, so formatting changes
// never alter it.
struct ExperimentConfig {
    int grid_dim = 1;
    int grid_n = 256;
    std::map<std::string, double> pot_cos{{"1", 1.0}};   // frequency -> coefficient
    std::map<std::string, double> pot_sin;
    std::vector<double> form_p{0.0};
    std::vector<double> form_x0{0.0};

    double wk_h = 0.0;             // 0 means the default step rule
    double wk_v_max = 4.0;
    double wk_tol = 1e-9;
    int wk_max_iters = 60000;

    std::vector<double> betas{10.0, 20.0, 40.0, 80.0};
    double eig_tol = 1e-10;
    int eig_max_iters = 2000000;

    int wk_slices = 32;

    int mc_samples = 5000;
    int mc_steps = 64;
    std::uint64_t mc_seed = 12345;

    std::string transport_variant = "plain";
    double transport_tol = 5e-2;
    std::string transport_source = "mather";   // or "nu_beta"

    std::string out_dir = "out";
    std::vector<std::string> out_formats{"csv", "json"};

    // certificate tolerances checked by `verify`
    double tol_hj = 1e-2;
    double tol_ldp = 0.1;
    double tol_varadhan = 0.1;
    double tol_admissibility = 5e-2;
    double tol_gap = 5e-2;
    double tol_slackness = 5e-2;
    double tol_projection_dx = 2.0;   // multiple of dx
    double tol_collinearity = 1e-6;

    TorusGrid grid() const { return build_grid(grid_dim, grid_n); }

    Potential potential() const {
        Potential v;
        for (const auto& [key, coef] : pot_cos) v.add_cos(parse_freq(key), coef);
        for (const auto& [key, coef] : pot_sin) v.add_sin(parse_freq(key), coef);
        return v;
    }

    ClosedForm form() const {
        ClosedForm f;
        for (std::size_t j = 0; j < form_p.size() && j < 2; ++j) f.p[j] = form_p[j];
        for (std::size_t j = 0; j < form_x0.size() && j < 2; ++j) f.x0[j] = form_x0[j];
        return f;
    }

    double time_step(const TorusGrid& g) const {
        return wk_h > 0.0 ? wk_h : default_time_step(g, potential());
    }

    std::array<int, 2> parse_freq(const std::string& key) const {
        std::array<int, 2> k{0, 0};
        try {
            std::size_t comma = key.find(',');
            if (comma == std::string::npos) {
                k[0] = std::stoi(key);
            } else {
                k[0] = std::stoi(key.substr(0, comma));
                k[1] = std::stoi(key.substr(comma + 1));
            }
        } catch (const std::exception&) {
            throw ConfigError("bad frequency key '" + key + "'");
        }
        if (grid_dim == 1 && key.find(',') != std::string::npos)
            throw ConfigError("2D frequency key '" + key + "' in a 1D experiment");
        return k;
    }

    json to_json() const {
        json j;
        j["grid"] = {{"dim", grid_dim}, {"N", grid_n}};
        j["potential"] = {{"cos", pot_cos}, {"sin", pot_sin}};
        j["form"] = {{"P", form_p}, {"x0", form_x0}};
        j["weakkam"] = {{"h", wk_h}, {"v_max", wk_v_max}, {"tol", wk_tol},
                        {"max_iters", wk_max_iters}};
        j["eigen"] = {{"betas", betas}, {"tol", eig_tol}, {"max_iters", eig_max_iters}};
        j["wkernel"] = {{"slices", wk_slices}};
        j["mc"] = {{"samples", mc_samples}, {"steps", mc_steps}, {"seed", mc_seed}};
        j["transport"] = {{"variant", transport_variant}, {"tol", transport_tol},
                          {"source", transport_source}};
        j["output"] = {{"directory", out_dir}, {"formats", out_formats}};
        j["verify"] = {{"hj_residual", tol_hj},          {"ldp", tol_ldp},
                       {"varadhan", tol_varadhan},       {"admissibility", tol_admissibility},
                       {"gap", tol_gap},                 {"slackness", tol_slackness},
                       {"projection_dx", tol_projection_dx},
                       {"collinearity", tol_collinearity}};
        return j;
    }

    std::uint64_t hash() const {
        std::string s = to_json().dump();
        return fnv1a(s.data(), s.size());
    }
};

namespace detail {

inline void reject_unknown(const json& j, const std::string& where,
                           const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key " + where + "." + it.key());
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    using detail::reject_unknown;
    using detail::take;
    ExperimentConfig c;
    reject_unknown(j, "config",
                   {"grid", "potential", "form", "weakkam", "eigen", "wkernel", "mc",
                    "transport", "output", "verify"});
    if (j.contains("grid")) {
        reject_unknown(j["grid"], "grid", {"dim", "N"});
        take(j["grid"], "dim", c.grid_dim);
        take(j["grid"], "N", c.grid_n);
    }
    if (j.contains("potential")) {
        reject_unknown(j["potential"], "potential", {"cos", "sin"});
        if (j["potential"].contains("cos"))
            c.pot_cos = j["potential"]["cos"].get<std::map<std::string, double>>();
        else
            c.pot_cos.clear();
        if (j["potential"].contains("sin"))
            c.pot_sin = j["potential"]["sin"].get<std::map<std::string, double>>();
    }
    if (j.contains("form")) {
        reject_unknown(j["form"], "form", {"P", "x0"});
        take(j["form"], "P", c.form_p);
        take(j["form"], "x0", c.form_x0);
    }
    if (j.contains("weakkam")) {
        reject_unknown(j["weakkam"], "weakkam", {"h", "v_max", "tol", "max_iters"});
        take(j["weakkam"], "h", c.wk_h);
        take(j["weakkam"], "v_max", c.wk_v_max);
        take(j["weakkam"], "tol", c.wk_tol);
        take(j["weakkam"], "max_iters", c.wk_max_iters);
    }
    if (j.contains("eigen")) {
        reject_unknown(j["eigen"], "eigen", {"betas", "tol", "max_iters"});
        take(j["eigen"], "betas", c.betas);
        take(j["eigen"], "tol", c.eig_tol);
        take(j["eigen"], "max_iters", c.eig_max_iters);
    }
    if (j.contains("wkernel")) {
        reject_unknown(j["wkernel"], "wkernel", {"slices"});
        take(j["wkernel"], "slices", c.wk_slices);
    }
    if (j.contains("mc")) {
        reject_unknown(j["mc"], "mc", {"samples", "steps", "seed"});
        take(j["mc"], "samples", c.mc_samples);
        take(j["mc"], "steps", c.mc_steps);
        take(j["mc"], "seed", c.mc_seed);
    }
    if (j.contains("transport")) {
        reject_unknown(j["transport"], "transport", {"variant", "tol", "source"});
        take(j["transport"], "variant", c.transport_variant);
        take(j["transport"], "tol", c.transport_tol);
        take(j["transport"], "source", c.transport_source);
    }
    if (j.contains("output")) {
        reject_unknown(j["output"], "output", {"directory", "formats"});
        take(j["output"], "directory", c.out_dir);
        take(j["output"], "formats", c.out_formats);
    }
    if (j.contains("verify")) {
        reject_unknown(j["verify"], "verify",
                       {"hj_residual", "ldp", "varadhan", "admissibility", "gap",
                        "slackness", "projection_dx", "collinearity"});
        take(j["verify"], "hj_residual", c.tol_hj);
        take(j["verify"], "ldp", c.tol_ldp);
        take(j["verify"], "varadhan", c.tol_varadhan);
        take(j["verify"], "admissibility", c.tol_admissibility);
        take(j["verify"], "gap", c.tol_gap);
        take(j["verify"], "slackness", c.tol_slackness);
        take(j["verify"], "projection_dx", c.tol_projection_dx);
        take(j["verify"], "collinearity", c.tol_collinearity);
    }

    // fail fast on values no stage could accept
    if (c.grid_dim != 1 && c.grid_dim != 2)
        throw ConfigError("grid.dim must be 1 or 2");
    if (c.grid_n < 8) throw ConfigError("grid.N must be >= 8");
    if (c.transport_variant != "plain" && c.transport_variant != "tilde")
        throw ConfigError("transport.variant must be 'plain' or 'tilde'");
    if (c.transport_source != "mather" && c.transport_source != "nu_beta")
        throw ConfigError("transport.source must be 'mather' or 'nu_beta'");
    if (c.betas.empty()) throw ConfigError("eigen.betas must be nonempty");
    if (!std::is_sorted(c.betas.begin(), c.betas.end()))
        throw ConfigError("eigen.betas must be increasing");
    c.potential();   // frequency keys must parse for the configured dimension
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace kamlab
