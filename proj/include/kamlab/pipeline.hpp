#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kamlab/config.hpp"
#include "kamlab/mather.hpp"
#include "kamlab/semiclassical.hpp"

namespace kamlab {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order{"weakkam", "mather", "eigen",
                                                "sweep",   "wkernel", "transport"};
    return order;
}

// Shared intermediates, computed once per run regardless of which stages emit
// artifacts.  Everything is a pure function of the config.
struct PipelineState {
    ExperimentConfig cfg;
    TorusGrid grid;
    Potential pot;
    ClosedForm form;
    double h = 0.0;

    std::optional<WeakKamSolution> wk;
    std::optional<MatherResult> mather_minus, mather_plus;
    std::map<double, EigenPair> eigen;
    std::optional<KernelMatrix> wkernel;

    explicit PipelineState(const ExperimentConfig& c)
        : cfg(c), grid(c.grid()), pot(c.potential()), form(c.form()), h(c.time_step(grid)) {}

    const WeakKamSolution& weak_kam() {
        if (!wk) {
            auto cost = one_step_cost(grid, pot, form, -1, h, cfg.wk_v_max);
            wk = solve_weak_kam_pair(cost, cfg.wk_tol, cfg.wk_max_iters);
        }
        return *wk;
    }

    const MatherResult& mather(int sign) {
        auto& slot = sign < 0 ? mather_minus : mather_plus;
        if (!slot) {
            auto cost = one_step_cost(grid, pot, form, sign, h, cfg.wk_v_max);
            slot = min_mean_cycle(build_action_graph(cost));
        }
        return *slot;
    }

    const EigenPair& eigenpair(double beta) {
        auto it = eigen.find(beta);
        if (it == eigen.end()) {
            auto g = assemble_twisted_generator(grid, pot, form, beta, +1);
            it = eigen.emplace(beta, solve_eigenpair(g, cfg.eig_tol, cfg.eig_max_iters)).first;
        }
        return it->second;
    }

    const KernelMatrix& kernel() {
        if (!wkernel) wkernel = compute_w_kernel(grid, pot, form, cfg.wk_slices, cfg.wk_v_max);
        return *wkernel;
    }
};

struct StageRecord {
    std::string status = "skipped";   // ok | failed | skipped
    std::string kind;                 // on failure: config | numerical | other
    double wall_ms = 0.0;
    std::string error;
    std::vector<std::pair<std::string, std::uint64_t>> outputs;   // file, fnv64
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    json config;
    std::map<std::string, StageRecord> stages;
    json verdicts = json::object();

    json to_json() const {
        json j;
        j["config_hash"] = config_hash;
        j["config"] = config;
        j["stages"] = json::object();
        for (const auto& [name, rec] : stages) {
            json s{{"status", rec.status}, {"wall_ms", rec.wall_ms}};
            if (!rec.error.empty()) s["error"] = rec.error;
            if (!rec.kind.empty()) s["error_kind"] = rec.kind;
            s["outputs"] = json::array();
            for (const auto& [f, h] : rec.outputs)
                s["outputs"].push_back({{"file", f}, {"fnv64", h}});
            j["stages"][name] = s;
        }
        j["verdicts"] = verdicts;
        return j;
    }
};

namespace detail {

inline std::string beta_tag(double beta) {
    if (beta == std::floor(beta) && std::abs(beta) < 1e9)
        return std::to_string(long(beta));
    std::string s = fmt(beta);
    for (char& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

inline std::vector<int> interval_nodes(const TorusGrid& grid, double lo, double hi) {
    std::vector<int> nodes;
    for (int i = 0; i < grid.size(); ++i) {
        double x = grid.point(i)[0];
        if (x >= lo && x <= hi) nodes.push_back(i);
    }
    return nodes;
}

} // namespace detail

// Semiclassical beta sweep.  The pointwise convergence metrics (sup distances,
// HJ residual, collinearity) live on per-beta grids N = 4 beta; the LDP and
// Varadhan tables compare every nu_beta against the one rate function I on the
// common finest grid N = 4 beta_max, which satisfies N >= 4 beta for the whole
// sweep and keeps those errors pure beta-asymptotics.  The LDP certificate set
// is the interval [0.4, 0.6] in 1D, a super-level set of I otherwise.
inline std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg,
                                          double collinearity_t = 0.5) {
    if (cfg.grid_dim == 2 && 4.0 * cfg.betas.back() > 64.0)
        throw ConfigError("run_sweep: 2D sweeps need 4*beta_max <= 64 (desk scale)");
    std::vector<SweepRecord> records;
    for (double beta : cfg.betas) {
        ExperimentConfig sub = cfg;
        sub.grid_n = std::max(int(std::lround(4.0 * beta)), 8);
        PipelineState st(sub);
        const auto& wk = st.weak_kam();
        const auto& pair = st.eigenpair(beta);
        auto logs = normalized_log(pair);
        GridField v = eval_potential(st.pot, st.grid);

        SweepRecord rec;
        rec.beta = beta;
        rec.grid_n = sub.grid_n;
        rec.E_beta = pair.E_beta;
        rec.E_weak_kam = wk.E;
        rec.sup_dist_u = sup_dist(logs.u_beta, wk.u);
        rec.sup_dist_ustar = sup_dist(logs.u_star_beta, wk.u_star);
        rec.hj_residual =
            viscous_hj_residual(logs.u_beta, beta, v, st.form, pair.E_beta, st.grid);

        auto g = assemble_twisted_generator(st.grid, st.pot, st.form, beta, +1);
        rec.collinearity = eigen_kernel_collinearity(pair.psi_star, g, collinearity_t);
        records.push_back(std::move(rec));
    }

    // LDP and Varadhan on the common grid with the single rate function
    ExperimentConfig common = cfg;
    common.grid_n = std::max(int(std::lround(4.0 * cfg.betas.back())), 8);
    PipelineState stc(common);
    const auto& wk = stc.weak_kam();
    std::vector<std::vector<int>> sets;
    if (stc.grid.dim == 1) {
        sets.push_back(detail::interval_nodes(stc.grid, 0.4, 0.6));
    } else {
        double imax = field_max(wk.I);
        std::vector<int> super;
        for (int i = 0; i < stc.grid.size(); ++i)
            if (wk.I[i] >= 0.5 * imax) super.push_back(i);
        sets.push_back(super);
    }
    GridField f_test(stc.grid.size());
    for (int i = 0; i < stc.grid.size(); ++i)
        f_test[i] = 0.3 * std::cos(kTwoPi * stc.grid.point(i)[0]);
    for (std::size_t k = 0; k < cfg.betas.size(); ++k) {
        GridMeasure nu = quantum_measure(stc.eigenpair(cfg.betas[k]), stc.grid);
        std::vector<std::pair<double, GridMeasure>> one{{cfg.betas[k], nu}};
        LdpTable ldp = ldp_check(one, wk.I, sets);
        for (const auto& row : ldp.err) records[k].ldp_errors.push_back(row.front());
        records[k].varadhan_error = varadhan_check(one, f_test, wk.I).front();
    }
    return records;
}

struct TransportCertificate {
    std::string variant;
    double drift = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double admissibility_support = 0.0;
    double admissibility_all = 0.0;
    int slackness_violations = 0;
    double plan_variant_max_diff = 0.0;   // plain vs tilde optimal plans
    double value_shift_residual = 0.0;    // |(primal_t - primal_p) - int I dmu-|
    double projection_distance = 0.0;
    int pivots = 0;
    TransportProblem problem;
    TransportPlan plan;
};

inline TransportCertificate run_transport(PipelineState& st) {
    const auto& wk = st.weak_kam();
    const auto& w = st.kernel();
    GridMeasure mu_plus, mu_minus;
    if (st.cfg.transport_source == "mather") {
        mu_plus = st.mather(+1).measure;
        mu_minus = st.mather(-1).measure;
    } else {
        GridMeasure nu = quantum_measure(st.eigenpair(st.cfg.betas.back()), st.grid);
        mu_plus = truncate_support(nu, 1e-12, 100);
        mu_minus = mu_plus;
    }

    auto variant = st.cfg.transport_variant == "tilde" ? CostVariant::tilde : CostVariant::plain;
    TransportProblem plain = build_problem(mu_plus, mu_minus, w, wk.I, CostVariant::plain);
    TransportProblem tilde = build_problem(mu_plus, mu_minus, w, wk.I, CostVariant::tilde);
    TransportPlan plan_plain = solve_kantorovich(plain);
    TransportPlan plan_tilde = solve_kantorovich(tilde);

    const TransportProblem& p = variant == CostVariant::tilde ? tilde : plain;
    const TransportPlan& plan = variant == CostVariant::tilde ? plan_tilde : plan_plain;

    // dual pair: (u, u*) for the plain cost, (u, -u) for the tilde cost
    GridField f = wk.u, g = wk.u_star;
    if (variant == CostVariant::tilde)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -wk.u[i];

    TransportCertificate cert;
    cert.variant = st.cfg.transport_variant;
    cert.drift = p.drift;
    auto dr = duality_gap(plan, f, g, p);
    cert.primal = dr.primal;
    cert.dual = dr.dual;
    cert.gap = dr.gap;
    cert.admissibility_support = admissibility(f, g, p);
    cert.admissibility_all = admissibility_full(f, g, w, wk.I, variant, p.drift);
    cert.slackness_violations =
        int(slackness_check(plan, f, g, p, st.cfg.tol_slackness).size());
    cert.pivots = plan.pivots;

    auto dp = plan_plain.dense();
    auto dt = plan_tilde.dense();
    for (std::size_t i = 0; i < dp.size(); ++i)
        cert.plan_variant_max_diff =
            std::max(cert.plan_variant_max_diff, std::abs(dp[i] - dt[i]));
    double int_i = 0.0;
    for (std::size_t j = 0; j < tilde.sinks.size(); ++j)
        int_i += tilde.b[j] * wk.I[tilde.sinks[j]];
    cert.value_shift_residual =
        std::abs((plan_tilde.primal_value - plan_plain.primal_value) - int_i);
    cert.projection_distance = projection_distance(mu_plus, mu_minus, st.grid);
    cert.problem = p;
    cert.plan = plan;
    return cert;
}

// Executes the requested stages in dependency order, persists artifacts and
// verdicts, and writes the manifest atomically at the end.
inline RunManifest run_pipeline(const ExperimentConfig& cfg,
                                const std::set<std::string>& requested,
                                const std::string& out_override = "") {
    fs::path out_dir = out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
    if (const char* env = std::getenv("KAMLAB_OUT"); env && out_override.empty())
        out_dir = env;
    fs::create_directories(out_dir);

    RunManifest manifest;
    manifest.config = cfg.to_json();
    manifest.config_hash = cfg.hash();

    PipelineState st(cfg);
    bool upstream_failed = false;

    auto emit = [&](StageRecord& rec, const std::string& name, const std::string& body) {
        fs::path p = out_dir / name;
        write_file_atomic(p, body);
        rec.outputs.push_back({name, file_hash(p)});
    };

    for (const std::string& stage : stage_order()) {
        if (!requested.count(stage)) continue;
        StageRecord rec;
        if (upstream_failed) {
            rec.status = "skipped";
            rec.error = "upstream stage failed";
            manifest.stages[stage] = rec;
            continue;
        }
        auto t0 = std::chrono::steady_clock::now();
        try {
            if (stage == "weakkam") {
                const auto& wk = st.weak_kam();
                emit(rec, "weakkam.csv",
                     fields_csv(st.grid, {{"u", &wk.u}, {"u_star", &wk.u_star}, {"I", &wk.I}}));
                json j{{"E", wk.E},
                       {"residual", wk.residual},
                       {"iterations", wk.iterations},
                       {"h", st.h},
                       {"aubry_nodes", wk.aubry}};
                emit(rec, "weakkam.json", j.dump(2) + "\n");
            } else if (stage == "mather") {
                const auto& mm = st.mather(-1);
                const auto& mp = st.mather(+1);
                GridField wm(mm.measure.w.begin(), mm.measure.w.end());
                GridField wp(mp.measure.w.begin(), mp.measure.w.end());
                emit(rec, "mather_minus.csv", fields_csv(st.grid, {{"weight", &wm}}));
                emit(rec, "mather_plus.csv", fields_csv(st.grid, {{"weight", &wp}}));
                auto report = compare_critical_values(
                    WeakKamHalf{st.weak_kam().u, st.weak_kam().E, st.weak_kam().residual, 0,
                                st.grid.size(), st.h},
                    mm, cfg.transport_tol);
                json j{{"E_minus", mm.E_estimate},
                       {"E_plus", mp.E_estimate},
                       {"mean_cost_minus", mm.mean_cost},
                       {"cycle_minus", mm.cycle},
                       {"cycle_plus", mp.cycle},
                       {"ties_minus", mm.ties},
                       {"ties_plus", mp.ties},
                       {"delta_vs_weakkam", report.delta},
                       {"projection_distance",
                        projection_distance(mp.measure, mm.measure, st.grid)}};
                emit(rec, "mather.json", j.dump(2) + "\n");
                manifest.verdicts["projection_distance"] = {
                    {"value", j["projection_distance"]},
                    {"tolerance", cfg.tol_projection_dx * st.grid.dx},
                    {"pass", double(j["projection_distance"]) <=
                                 cfg.tol_projection_dx * st.grid.dx}};
            } else if (stage == "eigen") {
                for (double beta : cfg.betas) {
                    const auto& pair = st.eigenpair(beta);
                    GridMeasure nu = quantum_measure(pair, st.grid);
                    GridField nw(nu.w.begin(), nu.w.end());
                    std::string tag = detail::beta_tag(beta);
                    emit(rec, "eigen_b" + tag + ".csv",
                         fields_csv(st.grid, {{"psi", &pair.psi},
                                              {"psi_star", &pair.psi_star},
                                              {"nu", &nw}}));
                    json j{{"beta", beta},
                           {"E_beta", pair.E_beta},
                           {"lambda", pair.lambda},
                           {"residual_right", pair.residual_right},
                           {"residual_left", pair.residual_left},
                           {"iterations", pair.iterations},
                           {"spectral_gap_estimate", pair.gap_estimate}};
                    emit(rec, "eigen_b" + tag + ".json", j.dump(2) + "\n");
                }
            } else if (stage == "sweep") {
                auto records = run_sweep(cfg);
                std::ostringstream csv;
                csv << "beta,N,E_beta,E_weak_kam,sup_dist_u,sup_dist_ustar,"
                       "hj_residual,ldp_err,varadhan_err,collinearity\n";
                for (const auto& r : records) {
                    csv << fmt(r.beta) << ',' << r.grid_n << ',' << fmt(r.E_beta) << ','
                        << fmt(r.E_weak_kam) << ',' << fmt(r.sup_dist_u) << ','
                        << fmt(r.sup_dist_ustar) << ',' << fmt(r.hj_residual) << ','
                        << fmt(r.ldp_errors.front()) << ',' << fmt(r.varadhan_error) << ','
                        << fmt(r.collinearity) << '\n';
                }
                emit(rec, "sweep.csv", csv.str());

                const auto& first = records.front();
                const auto& last = records.back();
                json j;
                j["betas"] = json::array();
                for (const auto& r : records) j["betas"].push_back(r.beta);
                j["sup_dist_u_trend"] = {{"first", first.sup_dist_u},
                                         {"last", last.sup_dist_u},
                                         {"pass", last.sup_dist_u < first.sup_dist_u &&
                                                      last.sup_dist_u <= 0.1}};
                // HJ certificate on the config grid, at the largest beta whose
                // viscosity width the grid resolves (residual scales like
                // (beta dx)^2); the sweep grids keep beta dx = 1/4 by design
                // and cannot certify this identity
                double cert_beta = cfg.betas.front();
                for (double b : cfg.betas)
                    if (b * st.grid.dx <= 0.05) cert_beta = b;
                const auto& cert_pair = st.eigenpair(cert_beta);
                auto cert_logs = normalized_log(cert_pair);
                GridField vf = eval_potential(st.pot, st.grid);
                double hj_cert = viscous_hj_residual(cert_logs.u_beta, cert_beta, vf,
                                                     st.form, cert_pair.E_beta, st.grid);
                manifest.verdicts["hj_residual"] = {
                    {"value", hj_cert},
                    {"beta", cert_beta},
                    {"N", st.grid.n},
                    {"tolerance", cfg.tol_hj},
                    {"pass", hj_cert <= cfg.tol_hj}};
                manifest.verdicts["ldp"] = {
                    {"value", last.ldp_errors.front()},
                    {"tolerance", cfg.tol_ldp},
                    {"pass", last.ldp_errors.front() <= cfg.tol_ldp &&
                                 last.ldp_errors.front() < first.ldp_errors.front()}};
                manifest.verdicts["varadhan"] = {
                    {"value", last.varadhan_error},
                    {"tolerance", cfg.tol_varadhan},
                    {"pass", last.varadhan_error <= cfg.tol_varadhan &&
                                 last.varadhan_error < first.varadhan_error}};
                double worst_col = 0.0;
                for (const auto& r : records) worst_col = std::max(worst_col, r.collinearity);
                manifest.verdicts["collinearity"] = {
                    {"value", worst_col},
                    {"tolerance", cfg.tol_collinearity},
                    {"pass", worst_col <= cfg.tol_collinearity}};
                j["verdicts"] = manifest.verdicts;
                emit(rec, "sweep.json", j.dump(2) + "\n");
            } else if (stage == "wkernel") {
                const auto& w = st.kernel();
                emit(rec, "wkernel.csv", matrix_csv(st.grid, w.w, "W"));
                json j{{"slices", w.slices},
                       {"t", w.t},
                       {"lipschitz_bound", w.lipschitz_bound}};
                emit(rec, "wkernel.json", j.dump(2) + "\n");
            } else if (stage == "transport") {
                TransportCertificate cert = run_transport(st);
                const TransportProblem& p = cert.problem;
                const TransportPlan& plan = cert.plan;
                std::ostringstream csv;
                csv << "x,y,weight\n";
                for (const auto& e : plan.entries)
                    csv << fmt(st.grid.point(p.sources[e.i])[0]) << ','
                        << fmt(st.grid.point(p.sinks[e.j])[0]) << ',' << fmt(e.w) << '\n';
                emit(rec, "transport_plan.csv", csv.str());
                json j{{"variant", cert.variant},
                       {"drift", cert.drift},
                       {"primal", cert.primal},
                       {"dual", cert.dual},
                       {"gap", cert.gap},
                       {"max_violation_support", cert.admissibility_support},
                       {"max_violation_all", cert.admissibility_all},
                       {"slackness_violations", cert.slackness_violations},
                       {"plan_variant_max_diff", cert.plan_variant_max_diff},
                       {"value_shift_residual", cert.value_shift_residual},
                       {"projection_distance", cert.projection_distance},
                       {"pivots", cert.pivots}};
                emit(rec, "transport.json", j.dump(2) + "\n");
                manifest.verdicts["admissibility"] = {
                    {"value", cert.admissibility_all},
                    {"tolerance", cfg.tol_admissibility},
                    {"pass", cert.admissibility_all <= cfg.tol_admissibility}};
                manifest.verdicts["gap"] = {{"value", cert.gap},
                                            {"tolerance", cfg.tol_gap},
                                            {"pass", std::abs(cert.gap) <= cfg.tol_gap}};
                manifest.verdicts["slackness"] = {
                    {"value", cert.slackness_violations},
                    {"tolerance", cfg.tol_slackness},
                    {"pass", cert.slackness_violations == 0}};
            }
            rec.status = "ok";
        } catch (const ConfigError& e) {
            rec.status = "failed";
            rec.kind = "config";
            rec.error = e.what();
            upstream_failed = true;
        } catch (const NumericalError& e) {
            rec.status = "failed";
            rec.kind = "numerical";
            rec.error = e.what();
            upstream_failed = true;
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.kind = "other";
            rec.error = e.what();
            upstream_failed = true;
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        manifest.stages[stage] = rec;
    }

    write_file_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> failures;
};

// exit 0 iff every certificate in the manifest passed and every recorded
// artifact hashes to its manifest entry
inline VerifyResult verify_manifest(const std::string& manifest_path) {
    VerifyResult res;
    fs::path mpath(manifest_path);
    if (!fs::exists(mpath)) {
        res.ok = false;
        res.failures.push_back("manifest missing: " + manifest_path);
        return res;
    }
    json m;
    try {
        m = json::parse(read_file(mpath));
    } catch (const json::exception& e) {
        res.ok = false;
        res.failures.push_back(std::string("manifest unreadable: ") + e.what());
        return res;
    }
    fs::path dir = mpath.parent_path();
    const json stages = m.value("stages", json::object());
    const json verdicts = m.value("verdicts", json::object());
    for (const auto& [stage, rec] : stages.items()) {
        if (rec.value("status", "") == "failed") {
            res.ok = false;
            res.failures.push_back("stage " + stage + " failed: " + rec.value("error", ""));
        }
        const json outputs = rec.value("outputs", json::array());
        for (const auto& out : outputs) {
            fs::path f = dir / out.value("file", "");
            if (!fs::exists(f)) {
                res.ok = false;
                res.failures.push_back("missing artifact " + f.string());
            } else if (file_hash(f) != out.value("fnv64", std::uint64_t(0))) {
                res.ok = false;
                res.failures.push_back("integrity: " + f.string() + " hash mismatch");
            }
        }
    }
    for (const auto& [name, v] : verdicts.items()) {
        if (!v.value("pass", false)) {
            res.ok = false;
            res.failures.push_back("certificate " + name + " failed");
        }
    }
    return res;
}

} // namespace kamlab
