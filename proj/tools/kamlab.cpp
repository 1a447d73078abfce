// kamlab: weak KAM / Mather / twisted Schroedinger laboratory on the torus.
//
// Subcommands mirror the pipeline stages; flags override config keys.
// Exit codes: 0 success, 1 certificate failure, 2 configuration error,
// 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "kamlab/pipeline.hpp"

using namespace kamlab;

namespace {

int exit_code_for(const RunManifest& m) {
    for (const auto& [name, rec] : m.stages) {
        if (rec.status != "failed") continue;
        std::cerr << "stage " << name << " failed: " << rec.error << "\n";
        if (rec.kind == "config") return 2;
        if (rec.kind == "numerical") return 3;
        return 3;
    }
    for (const auto& [name, v] : m.verdicts.items()) {
        if (!v.value("pass", true)) {
            std::cerr << "certificate " << name << " failed (value "
                      << v.value("value", 0.0) << ", tolerance "
                      << v.value("tolerance", 0.0) << ")\n";
            return 1;
        }
    }
    return 0;
}

std::set<std::string> parse_stages(const std::string& csv) {
    std::set<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        bool known = false;
        for (const auto& s : stage_order()) known = known || s == item;
        if (!known) throw ConfigError("unknown stage '" + item + "'");
        out.insert(item);
    }
    if (out.empty()) throw ConfigError("empty stage list");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kamlab: weak KAM solutions, Mather measures, twisted eigenpairs,\n"
                 "large-deviation checks and transport certificates on T^1/T^2"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    app.add_option("-c,--config", config_path, "experiment config (JSON)");
    app.add_option("-o,--output", out_dir,
                   "output directory (overrides config and KAMLAB_OUT)");

    auto* sc_weakkam = app.add_subcommand("weakkam", "forward/backward weak KAM pair and rate function");
    auto* sc_mather = app.add_subcommand("mather", "minimum mean cycle, projected Mather measures");
    auto* sc_eigen = app.add_subcommand("eigen", "twisted Perron eigenpairs and quantum measures");
    double eigen_beta = 0.0;
    sc_eigen->add_option("--beta", eigen_beta, "solve a single beta instead of the config list");
    auto* sc_sweep = app.add_subcommand("sweep", "semiclassical beta sweep with LDP/Varadhan checks");
    std::string sweep_betas;
    sc_sweep->add_option("--betas", sweep_betas, "comma-separated beta list (default from config)");
    auto* sc_wkernel = app.add_subcommand("wkernel", "unit-time action kernel W(y,x)");
    auto* sc_transport = app.add_subcommand("transport", "Kantorovich problem and duality certificates");
    std::string variant;
    sc_transport->add_option("--variant", variant, "plain | tilde");

    auto* sc_fkmc = app.add_subcommand("fk-mc", "Feynman-Kac Brownian-bridge kernel estimate");
    double fk_y = 0.0, fk_x = 0.25, fk_t = 1.0, fk_beta = 20.0;
    int fk_samples = 0, fk_steps = 0;
    std::uint64_t fk_seed = 0;
    bool fk_seed_set = false, fk_samples_set = false, fk_steps_set = false;
    sc_fkmc->add_option("--y", fk_y, "start coordinate in [0,1)");
    sc_fkmc->add_option("--x", fk_x, "end coordinate in [0,1)");
    sc_fkmc->add_option("--t", fk_t, "horizon");
    sc_fkmc->add_option("--beta", fk_beta, "inverse temperature");
    sc_fkmc->add_option("--samples", fk_samples)->each([&](const std::string&) { fk_samples_set = true; });
    sc_fkmc->add_option("--steps", fk_steps)->each([&](const std::string&) { fk_steps_set = true; });
    sc_fkmc->add_option("--seed", fk_seed)->each([&](const std::string&) { fk_seed_set = true; });

    auto* sc_run = app.add_subcommand("run", "run a set of stages and write the manifest");
    std::string stages_csv;
    sc_run->add_option("--stages", stages_csv, "comma-separated stage list (default: all)");

    auto* sc_verify = app.add_subcommand("verify", "check artifacts and certificates of a finished run");
    std::string manifest_path;
    sc_verify->add_option("--manifest", manifest_path, "manifest path (default <output>/manifest.json)");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (!variant.empty()) {
            if (variant != "plain" && variant != "tilde")
                throw ConfigError("--variant must be plain or tilde");
            cfg.transport_variant = variant;
        }
        if (eigen_beta > 0.0) cfg.betas = {eigen_beta};
        if (!sweep_betas.empty()) {
            cfg.betas.clear();
            std::stringstream ss(sweep_betas);
            std::string item;
            while (std::getline(ss, item, ',')) cfg.betas.push_back(std::stod(item));
            if (cfg.betas.empty() || !std::is_sorted(cfg.betas.begin(), cfg.betas.end()))
                throw ConfigError("--betas must be a nonempty increasing list");
        }

        if (sc_verify->parsed()) {
            std::string dir = !out_dir.empty() ? out_dir
                              : std::getenv("KAMLAB_OUT") ? std::getenv("KAMLAB_OUT")
                                                          : cfg.out_dir;
            std::string path = manifest_path.empty() ? dir + "/manifest.json" : manifest_path;
            VerifyResult vr = verify_manifest(path);
            if (vr.ok) {
                std::cout << "verify: all certificates passed\n";
                return 0;
            }
            for (const auto& f : vr.failures) std::cerr << "verify: " << f << "\n";
            bool missing = false;
            for (const auto& f : vr.failures)
                missing = missing || f.find("missing") != std::string::npos ||
                          f.find("unreadable") != std::string::npos;
            return missing ? 2 : 1;
        }

        if (sc_fkmc->parsed()) {
            TorusGrid grid = cfg.grid();
            auto nearest = [&](double coord) {
                double wrapped = coord - std::floor(coord);
                return grid.index_of(int(std::lround(wrapped * grid.n)));
            };
            McEstimate est = feynman_kac_mc(
                grid, cfg.potential(), cfg.form(), nearest(fk_y), nearest(fk_x), fk_t,
                fk_beta, fk_samples_set ? fk_samples : cfg.mc_samples,
                fk_steps_set ? fk_steps : cfg.mc_steps, fk_seed_set ? fk_seed : cfg.mc_seed);
            json j{{"y", grid.point(est.y)[0]},
                   {"x", grid.point(est.x)[0]},
                   {"t", est.t},
                   {"beta", est.beta},
                   {"estimate", est.estimate},
                   {"std_error", est.std_error},
                   {"samples", est.samples},
                   {"steps", est.steps},
                   {"seed", est.seed},
                   {"degenerate", est.degenerate},
                   {"lift_ambiguous", est.lift_ambiguous}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        std::set<std::string> stages;
        if (sc_run->parsed()) {
            stages = stages_csv.empty()
                         ? std::set<std::string>(stage_order().begin(), stage_order().end())
                         : parse_stages(stages_csv);
        } else if (sc_weakkam->parsed()) {
            stages = {"weakkam"};
        } else if (sc_mather->parsed()) {
            stages = {"mather"};
        } else if (sc_eigen->parsed()) {
            stages = {"eigen"};
        } else if (sc_sweep->parsed()) {
            stages = {"sweep"};
        } else if (sc_wkernel->parsed()) {
            stages = {"wkernel"};
        } else if (sc_transport->parsed()) {
            stages = {"transport"};
        }

        RunManifest manifest = run_pipeline(cfg, stages, out_dir);
        for (const auto& [name, rec] : manifest.stages)
            std::cout << name << ": " << rec.status << " (" << rec.wall_ms << " ms)\n";
        return exit_code_for(manifest);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
