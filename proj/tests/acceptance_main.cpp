// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Desk scale: 1D torus, N <= 1024, beta <= 80.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kamlab/mather.hpp"
#include "kamlab/pipeline.hpp"
#include "kamlab/semiclassical.hpp"

using namespace kamlab;

namespace {

int failures = 0;

void check(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++failures;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

Potential cos_potential(double amp = 1.0) {
    Potential v;
    v.add_cos({1, 0}, amp);
    return v;
}

// exhaustive min mean over simple cycles (anchored DFS); oracle for Karp
double brute_force_min_mean(const ActionGraph& g) {
    const int n = g.n;
    std::vector<std::vector<std::pair<int, double>>> out(n);
    for (int x = 0; x < n; ++x)
        for (const auto& [y, w] : g.in_edges[x]) out[y].push_back({x, w});
    double best = kNoEdge;
    std::vector<char> on_path(n, 0);
    std::vector<double> cost_stack;
    std::function<void(int, int)> dfs = [&](int anchor, int node) {
        for (const auto& [to, w] : out[node]) {
            if (to < anchor) continue;
            if (to == anchor) {
                double total = w;
                for (double c : cost_stack) total += c;
                best = std::min(best, total / double(cost_stack.size() + 1));
                continue;
            }
            if (on_path[to]) continue;
            on_path[to] = 1;
            cost_stack.push_back(w);
            dfs(anchor, to);
            cost_stack.pop_back();
            on_path[to] = 0;
        }
    };
    for (int s = 0; s < n; ++s) {
        std::fill(on_path.begin(), on_path.end(), 0);
        on_path[s] = 1;
        dfs(s, s);
    }
    return best;
}

// exhaustive transportation vertices (bases solved by leaf stripping)
double brute_force_transport(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<double>& cost) {
    const int m = int(a.size()), n = int(b.size());
    const int cells = m * n, k = m + n - 1;
    double best = kNoEdge;
    for (unsigned mask = 0; mask < (1u << cells); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        std::vector<double> flow(cells, 0.0), ra = a, rb = b;
        std::vector<char> solved(cells, 0);
        int remaining = k;
        bool progress = true;
        while (remaining > 0 && progress) {
            progress = false;
            for (int i = 0; i < m; ++i) {
                int cnt = 0, cell = -1;
                for (int j = 0; j < n; ++j)
                    if ((mask >> (i * n + j) & 1) && !solved[i * n + j]) {
                        ++cnt;
                        cell = i * n + j;
                    }
                if (cnt == 1) {
                    flow[cell] = ra[i];
                    ra[i] = 0.0;
                    rb[cell % n] -= flow[cell];
                    solved[cell] = 1;
                    --remaining;
                    progress = true;
                }
            }
            for (int j = 0; j < n; ++j) {
                int cnt = 0, cell = -1;
                for (int i = 0; i < m; ++i)
                    if ((mask >> (i * n + j) & 1) && !solved[i * n + j]) {
                        ++cnt;
                        cell = i * n + j;
                    }
                if (cnt == 1) {
                    flow[cell] = rb[j];
                    rb[j] = 0.0;
                    ra[cell / n] -= flow[cell];
                    solved[cell] = 1;
                    --remaining;
                    progress = true;
                }
            }
        }
        if (remaining > 0) continue;
        bool feasible = true;
        for (double r : ra) feasible = feasible && std::abs(r) <= 1e-9;
        for (double r : rb) feasible = feasible && std::abs(r) <= 1e-9;
        for (double f : flow) feasible = feasible && f >= -1e-9;
        if (!feasible) continue;
        double value = 0.0;
        for (int c = 0; c < cells; ++c) value += flow[c] * cost[c];
        best = std::min(best, value);
    }
    return best;
}

void criterion_1_flat_sanity() {
    TorusGrid g = build_grid(1, 128);
    Potential zero;
    ClosedForm form;
    OneStepCost cost = one_step_cost(g, zero, form, -1, 0.05, 4.0);
    WeakKamSolution wk = solve_weak_kam_pair(cost, 1e-12, 20000);
    MatherResult mm = min_mean_cycle(build_action_graph(cost));
    bool ok = std::abs(wk.E) <= 1e-10 && std::abs(mm.E_estimate) <= 1e-10;
    double sup = 0.0;
    for (int i = 0; i < g.size(); ++i)
        sup = std::max({sup, std::abs(wk.u[i]), std::abs(wk.u_star[i]), std::abs(wk.I[i])});
    ok = ok && sup <= 1e-10;

    double e_beta_worst = 0.0;
    for (double beta : {10.0, 80.0}) {
        auto gen = assemble_twisted_generator(g, zero, form, beta, +1);
        EigenPair pair = solve_eigenpair(gen, 1e-12);
        e_beta_worst = std::max(e_beta_worst, std::abs(pair.E_beta));
    }
    ok = ok && e_beta_worst <= 1e-10;

    KernelMatrix w = compute_w_kernel(g, zero, form, 32, 4.0);
    double kernel_err = 0.0;
    for (int y = 0; y < g.size(); ++y)
        for (int x = 0; x < g.size(); ++x) {
            double d = torus_distance(g, y, x);
            kernel_err = std::max(kernel_err, std::abs(w.at(y, x) + 0.5 * d * d));
        }
    ok = ok && kernel_err <= 2.0 * g.dx;
    check("criterion 1: flat sanity", ok,
          "E=" + num(wk.E) + " E_mather=" + num(mm.E_estimate) + " sup|u,u*,I|=" + num(sup) +
              " max|E_beta|=" + num(e_beta_worst) + " kernel_err=" + num(kernel_err) +
              " (<= " + num(2.0 * g.dx) + ")");
}

void criterion_2_critical_value() {
    TorusGrid g = build_grid(1, 256);
    ClosedForm form;
    OneStepCost cost = one_step_cost(g, cos_potential(), form, -1, 0.05, 4.0);
    WeakKamHalf wk = solve_weak_kam(cost, 1e-9, 60000);
    MatherResult mm = min_mean_cycle(build_action_graph(cost));
    bool ok = std::abs(wk.E - mm.E_estimate) <= 5e-2 && std::abs(wk.E + 1.0) <= 5e-2 &&
              std::abs(mm.E_estimate + 1.0) <= 5e-2;

    // Karp vs exhaustive enumeration at N = 12, exact
    TorusGrid g12 = build_grid(1, 12);
    OneStepCost cost12 = one_step_cost(g12, cos_potential(), form, -1, 0.2, 2.0);
    ActionGraph graph12 = build_action_graph(cost12);
    MatherResult k12 = min_mean_cycle(graph12);
    double brute = brute_force_min_mean(graph12);
    ok = ok && std::abs(k12.mean_cost - brute) <= 1e-12;
    check("criterion 2: critical-value consistency", ok,
          "E_weakkam=" + num(wk.E) + " E_mather=" + num(mm.E_estimate) +
              " |karp-brute|=" + num(std::abs(k12.mean_cost - brute)));
}

void criterion_3_twist() {
    Potential zero;
    ClosedForm form;
    form.p = {2.0, 0.0};
    double beta = 20.0;

    TorusGrid g = build_grid(1, 128);
    auto gen = assemble_twisted_generator(g, zero, form, beta, +1);
    EigenPair pair = solve_eigenpair(gen, 1e-13);
    double spread =
        (field_max(pair.psi) - field_min(pair.psi)) / field_max(pair.psi);
    double closed_form =
        -(std::cosh(beta * 2.0 * g.dx) - 1.0) / (beta * beta * g.dx * g.dx);
    bool ok = spread <= 1e-12 && std::abs(pair.E_beta - closed_form) <= 1e-12;

    TorusGrid g512 = build_grid(1, 512);
    auto gen512 = assemble_twisted_generator(g512, zero, form, beta, +1);
    EigenPair pair512 = solve_eigenpair(gen512, 1e-13);
    ok = ok && std::abs(pair512.E_beta + 2.0) <= 5e-2;
    check("criterion 3: twist correctness", ok,
          "psi spread=" + num(spread) + " |E_beta-closed form|=" +
              num(std::abs(pair.E_beta - closed_form)) + " E_beta(N=512)=" +
              num(pair512.E_beta));
}

void criterion_4_viscous_hj() {
    ClosedForm form;
    double beta = 20.0;
    double residuals[2];
    int idx = 0;
    for (int n : {512, 1024}) {
        TorusGrid g = build_grid(1, n);
        auto gen = assemble_twisted_generator(g, cos_potential(), form, beta, +1);
        EigenPair pair = solve_eigenpair(gen, 1e-11);
        auto logs = normalized_log(pair);
        GridField v = eval_potential(cos_potential(), g);
        residuals[idx++] = viscous_hj_residual(logs.u_beta, beta, v, form, pair.E_beta, g);
    }
    bool ok = residuals[0] <= 1e-2 && residuals[1] < residuals[0];
    check("criterion 4: viscous HJ residual", ok,
          "residual(512)=" + num(residuals[0]) + " residual(1024)=" + num(residuals[1]));
}

std::vector<SweepRecord> sweep_records;

void criterion_5_semiclassical_trend() {
    ExperimentConfig cfg;
    cfg.wk_h = 0.05;
    sweep_records = run_sweep(cfg);
    const auto& first = sweep_records.front();
    const auto& last = sweep_records.back();
    bool ok = last.sup_dist_u < first.sup_dist_u && last.sup_dist_u <= 0.1;
    check("criterion 5: semiclassical convergence trend", ok,
          "sup|u_b-u|: beta=10: " + num(first.sup_dist_u) + " beta=80: " +
              num(last.sup_dist_u));
}

void criterion_6_ldp() {
    bool decreasing = true;
    std::string seq;
    for (std::size_t i = 0; i < sweep_records.size(); ++i) {
        double e = sweep_records[i].ldp_errors.front();
        seq += num(e) + (i + 1 < sweep_records.size() ? " " : "");
        if (i > 0) decreasing = decreasing && e < sweep_records[i - 1].ldp_errors.front();
    }
    double final_err = sweep_records.back().ldp_errors.front();
    check("criterion 6: LDP on A=[0.4,0.6]", decreasing && final_err <= 0.1,
          "err over sweep: " + seq);
}

void criterion_7_varadhan() {
    bool decreasing = true;
    std::string seq;
    for (std::size_t i = 0; i < sweep_records.size(); ++i) {
        double e = sweep_records[i].varadhan_error;
        seq += num(e) + (i + 1 < sweep_records.size() ? " " : "");
        if (i > 0) decreasing = decreasing && e < sweep_records[i - 1].varadhan_error;
    }
    check("criterion 7: Varadhan integral lemma", decreasing &&
              sweep_records.back().varadhan_error <= 0.1,
          "err over sweep: " + seq);
}

void criterion_8_kernel_representation() {
    TorusGrid g = build_grid(1, 256);
    ClosedForm form;
    Potential v = cos_potential();
    OneStepCost cost = one_step_cost(g, v, form, -1, 0.05, 4.0);
    WeakKamSolution wk = solve_weak_kam_pair(cost, 1e-9);
    KernelMatrix w = compute_w_kernel(g, v, form, 32, 4.0);
    double err = kernel_representation_check(wk.u, wk.u_star, w);
    check("criterion 8: kernel representation of u", err <= 5e-2, "sup err=" + num(err));
}

void criterion_9_feynman_kac() {
    TorusGrid g = build_grid(1, 128);
    Potential zero, v = cos_potential();
    ClosedForm form;

    bool flat_exact = true;
    for (std::uint64_t seed : {1ULL, 77ULL, 424242ULL}) {
        McEstimate e = feynman_kac_mc(g, zero, form, 3, 40, 1.0, 20.0, 200, 16, seed);
        flat_exact = flat_exact && e.estimate == 0.0;
    }

    int y = 16, x = 64;
    KernelMatrix w = compute_w_kernel(g, v, form, 64, 4.0);
    McEstimate mc = feynman_kac_mc(g, v, form, y, x, 1.0, 20.0, 5000, 64, 2026);
    McEstimate mc2 = feynman_kac_mc(g, v, form, y, x, 1.0, 20.0, 5000, 64, 2026);
    bool reproducible = mc.estimate == mc2.estimate && mc.std_error == mc2.std_error;
    double d = torus_distance(g, y, x);
    double err = std::abs(mc.estimate - (w.at(y, x) + 0.5 * d * d));
    bool ok = flat_exact && reproducible && err <= 3.0 * mc.std_error + 0.05;
    check("criterion 9: Feynman-Kac MC vs DP kernel", ok,
          "flat exact=" + std::string(flat_exact ? "yes" : "no") + " err=" + num(err) +
              " bound=" + num(3.0 * mc.std_error + 0.05) +
              " reproducible=" + (reproducible ? "yes" : "no"));
}

void criterion_10_collinearity() {
    double worst = 0.0;
    for (const auto& r : sweep_records) worst = std::max(worst, r.collinearity);

    // negative control at beta = 20 on its sweep grid
    double beta = 20.0;
    TorusGrid g = build_grid(1, 80);
    ClosedForm form;
    auto gen = assemble_twisted_generator(g, cos_potential(), form, beta, +1);
    EigenPair pair = solve_eigenpair(gen, 1e-11);
    GridField noisy = pair.psi_star;
    CounterRng rng(31337, 0);
    for (double& p : noisy) p *= std::exp(0.01 * beta * rng.uniform(-1.0, 1.0));
    double perturbed = eigen_kernel_collinearity(noisy, gen, 0.5);
    bool ok = worst <= 1e-6 && perturbed >= 1e-3;
    check("criterion 10: eigen-kernel collinearity", ok,
          "max converged=" + num(worst) + " perturbed=" + num(perturbed));
}

void criterion_11_12_transport() {
    // atomic regime: V = cos, P = 0
    {
        TorusGrid g = build_grid(1, 256);
        ClosedForm form;
        Potential v = cos_potential();
        OneStepCost cm = one_step_cost(g, v, form, -1, 0.05, 4.0);
        OneStepCost cp = one_step_cost(g, v, form, +1, 0.05, 4.0);
        WeakKamSolution wk = solve_weak_kam_pair(cm, 1e-9);
        MatherResult mp = min_mean_cycle(build_action_graph(cp));
        MatherResult mm = min_mean_cycle(build_action_graph(cm));
        KernelMatrix w = compute_w_kernel(g, v, form, 32, 4.0);
        TransportProblem p = build_problem(mp.measure, mm.measure, w, wk.I, CostVariant::plain);
        TransportPlan plan = solve_kantorovich(p);
        auto rep = duality_gap(plan, wk.u, wk.u_star, p);
        check("criterion 11a: duality gap, atomic case", std::abs(rep.gap) <= 1e-6,
              "gap=" + num(rep.gap));
        double w1 = projection_distance(mp.measure, mm.measure, g);
        check("criterion 12a: projection equality, atomic case", w1 <= 2.0 * g.dx,
              "W1=" + num(w1) + " 2dx=" + num(2.0 * g.dx));
    }
    // rotation regime: V = 0.1 cos, P = 2
    {
        TorusGrid g = build_grid(1, 256);
        ClosedForm form;
        form.p = {2.0, 0.0};
        Potential v = cos_potential(0.1);
        OneStepCost cm = one_step_cost(g, v, form, -1, 0.05, 4.0);
        OneStepCost cp = one_step_cost(g, v, form, +1, 0.05, 4.0);
        WeakKamSolution wk = solve_weak_kam_pair(cm, 1e-9);
        MatherResult mp = min_mean_cycle(build_action_graph(cp));
        MatherResult mm = min_mean_cycle(build_action_graph(cm));
        KernelMatrix w = compute_w_kernel(g, v, form, 32, 4.0);

        TransportProblem plain = build_problem(mp.measure, mm.measure, w, wk.I, CostVariant::plain);
        TransportProblem tilde = build_problem(mp.measure, mm.measure, w, wk.I, CostVariant::tilde);
        TransportPlan plan_p = solve_kantorovich(plain);
        TransportPlan plan_t = solve_kantorovich(tilde);

        double adm = admissibility_full(wk.u, wk.u_star, w, wk.I, CostVariant::plain, plain.drift);
        auto rep = duality_gap(plan_p, wk.u, wk.u_star, plain);
        auto viol = slackness_check(plan_p, wk.u, wk.u_star, plain, 5e-2);

        auto dp = plan_p.dense();
        auto dt = plan_t.dense();
        double plan_diff = 0.0;
        for (std::size_t i = 0; i < dp.size(); ++i)
            plan_diff = std::max(plan_diff, std::abs(dp[i] - dt[i]));
        double int_i = 0.0;
        for (std::size_t j = 0; j < tilde.sinks.size(); ++j)
            int_i += tilde.b[j] * wk.I[tilde.sinks[j]];
        double shift_res = std::abs((plan_t.primal_value - plan_p.primal_value) - int_i);

        bool ok = adm <= 5e-2 && std::abs(rep.gap) <= 5e-2 && viol.empty() &&
                  plan_diff <= 1e-10 && shift_res <= 1e-8;
        check("criterion 11b: transport duality, rotation regime", ok,
              "admissibility=" + num(adm) + " gap=" + num(rep.gap) + " slackness=" +
                  std::to_string(viol.size()) + " plan_diff=" + num(plan_diff) +
                  " shift_res=" + num(shift_res));
        double w1 = projection_distance(mp.measure, mm.measure, g);
        check("criterion 12b: projection equality, rotation regime", w1 <= 2.0 * g.dx,
              "W1=" + num(w1) + " 2dx=" + num(2.0 * g.dx));
    }
}

void criterion_13_oracles() {
    // Karp vs exhaustive on graphs up to 12 nodes
    bool karp_ok = true;
    ClosedForm form;
    form.p = {0.8, 0.0};
    Potential v = cos_potential(0.5);
    v.add_sin({1, 0}, 0.2);
    for (int n : {8, 10, 12}) {
        TorusGrid g = build_grid(1, n);
        OneStepCost cost = one_step_cost(g, v, form, -1, 0.2, 2.0);
        ActionGraph graph = build_action_graph(cost);
        MatherResult r = min_mean_cycle(graph);
        karp_ok = karp_ok && std::abs(r.mean_cost - brute_force_min_mean(graph)) <= 1e-12;
    }

    // network simplex vs exhaustive vertices up to 4x4
    bool simplex_ok = true;
    CounterRng rng(5050, 0);
    for (int trial = 0; trial < 25; ++trial) {
        int m = 2 + int(rng.next_u64() % 3), n = 2 + int(rng.next_u64() % 3);
        if (m * n > 16) n = 16 / m;
        std::vector<double> a(m), b(n), cost(m * n);
        double sa = 0.0, sb = 0.0;
        for (double& q : a) {
            q = 0.05 + rng.uniform01();
            sa += q;
        }
        for (double& q : b) {
            q = 0.05 + rng.uniform01();
            sb += q;
        }
        for (double& q : a) q /= sa;
        for (double& q : b) q /= sb;
        for (double& c : cost) c = rng.uniform(-2.0, 2.0);
        TransportPlan plan = solve_transportation(a, b, cost);
        simplex_ok =
            simplex_ok && std::abs(plan.primal_value - brute_force_transport(a, b, cost)) <= 1e-10;
    }

    // min-plus squaring vs per-pair slice fold at N = 16, m = 8
    bool squaring_ok = true;
    {
        TorusGrid g = build_grid(1, 16);
        ClosedForm p;
        p.p = {0.6, 0.0};
        Potential vv = cos_potential(0.5);
        KernelMatrix w = compute_w_kernel(g, vv, p, 8, 4.0);
        const int n = g.size();
        OneStepCost slice = one_step_cost(g, vv, p, +1, 1.0 / 8, 4.0);
        std::vector<double> acc(n * n), step(n * n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) acc[y * n + x] = step[y * n + x] = slice(y, x);
        for (int r = 1; r < 8; ++r) {
            std::vector<double> next(n * n, kNoEdge);
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z)
                    for (int x = 0; x < n; ++x)
                        next[y * n + x] =
                            std::min(next[y * n + x], acc[y * n + z] + step[z * n + x]);
            acc = next;
        }
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                squaring_ok = squaring_ok && std::abs(w.at(y, x) + acc[y * n + x]) <= 1e-10;
    }
    check("criterion 13: oracle suites", karp_ok && simplex_ok && squaring_ok,
          std::string("karp=") + (karp_ok ? "exact" : "off") + " simplex=" +
              (simplex_ok ? "exact" : "off") + " squaring=" + (squaring_ok ? "exact" : "off"));
}

} // namespace

int main() {
    criterion_1_flat_sanity();
    criterion_2_critical_value();
    criterion_3_twist();
    criterion_4_viscous_hj();
    criterion_5_semiclassical_trend();
    criterion_6_ldp();
    criterion_7_varadhan();
    criterion_8_kernel_representation();
    criterion_9_feynman_kac();
    criterion_10_collinearity();
    criterion_11_12_transport();
    criterion_13_oracles();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
