#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "kamlab/transport.hpp"
#include "kamlab/weak_kam.hpp"

namespace kamlab {

// Directed graph of admissible one-step moves, edge weight = c_h(y,x).
struct ActionGraph {
    int n = 0;
    double h = 0.0;
    int grid_size = 0;
    // incoming edges per target node, sorted by source index
    std::vector<std::vector<std::pair<int, double>>> in_edges;
    long edge_count = 0;
};

inline ActionGraph build_action_graph(const OneStepCost& cost) {
    const int n = cost.grid.size();
    ActionGraph g;
    g.n = n;
    g.h = cost.h;
    g.grid_size = n;
    g.in_edges.resize(n);
    for (int x = 0; x < n; ++x) {
        for (int cls : cost.offsets) {
            auto d = cost.grid.coords_of(cls);
            auto cx = cost.grid.coords_of(x);
            int y = cost.grid.index_of(cx[0] - d[0], cx[1] - d[1]);
            g.in_edges[x].push_back({y, cost(y, x)});
        }
        std::sort(g.in_edges[x].begin(), g.in_edges[x].end());
        g.edge_count += long(g.in_edges[x].size());
        if (!cost.admissible(x, x))
            throw ConfigError("build_action_graph: self-loop inadmissible");
    }
    return g;
}

struct MatherResult {
    double mean_cost = 0.0;        // per edge, units of action
    std::vector<int> cycle;        // simple cycle, forward order
    GridMeasure measure;           // occupation measure, uniform over cycle nodes
    double E_estimate = 0.0;       // mean_cost / h
    int grid_size = 0;
    double h = 0.0;
    int ties = 0;                  // distinct walk segments achieving the optimum
};

// Karp's minimum mean cycle: dynamic program over path lengths 0..n with a
// uniform zero source row, then mu* = min_v max_k (D[n][v]-D[k][v])/(n-k).
// The cycle is read off the walk attaining the optimum; ties resolve to the
// lexicographically first predecessor and vertex.
inline MatherResult min_mean_cycle(const ActionGraph& g) {
    const int n = g.n;
    if (n > 4096)
        throw ConfigError("min_mean_cycle: graph beyond desk scale (> 4096 nodes)");

    std::vector<std::vector<double>> d(n + 1, std::vector<double>(n, kNoEdge));
    std::vector<std::vector<int>> parent(n + 1, std::vector<int>(n, -1));
    for (int v = 0; v < n; ++v) d[0][v] = 0.0;
    for (int k = 1; k <= n; ++k) {
        for (int x = 0; x < n; ++x) {
            double best = kNoEdge;
            int arg = -1;
            for (const auto& [y, w] : g.in_edges[x]) {
                if (d[k - 1][y] == kNoEdge) continue;
                double cand = d[k - 1][y] + w;
                if (cand < best) {
                    best = cand;
                    arg = y;
                }
            }
            d[k][x] = best;
            parent[k][x] = arg;
        }
    }

    double mu = kNoEdge;
    int v_star = -1;
    for (int v = 0; v < n; ++v) {
        if (d[n][v] == kNoEdge) continue;
        double worst = -kNoEdge;
        for (int k = 0; k < n; ++k) {
            if (d[k][v] == kNoEdge) continue;
            worst = std::max(worst, (d[n][v] - d[k][v]) / double(n - k));
        }
        if (worst < mu) {
            mu = worst;
            v_star = v;
        }
    }
    if (v_star < 0) throw NumericalError("min_mean_cycle: graph not strongly connected");

    // walk of n edges ending at v_star; prefix sums telescope to D values
    auto extract = [&](int v_end, MatherResult& out) {
        std::vector<int> walk(n + 1);
        walk[n] = v_end;
        for (int k = n; k >= 1; --k) walk[k - 1] = parent[k][walk[k]];
        std::vector<double> pre(n + 1);
        for (int k = 0; k <= n; ++k) pre[k] = d[k][walk[k]];

        double best_mean = 0.0;
        int bi = -1, bj = -1, ties = 0;
        for (int i = 0; i <= n; ++i) {
            for (int j = i + 1; j <= n; ++j) {
                if (walk[i] != walk[j]) continue;
                double mean = (pre[j] - pre[i]) / double(j - i);
                if (bi < 0) {
                    best_mean = mean;
                    bi = i;
                    bj = j;
                    ties = 1;
                    continue;
                }
                double tol = 1e-12 * (1.0 + std::abs(best_mean));
                if (mean < best_mean - tol) {
                    best_mean = mean;
                    bi = i;
                    bj = j;
                    ties = 1;
                } else if (std::abs(mean - best_mean) <= tol) {
                    ++ties;
                    if (j - i < bj - bi) {
                        bi = i;
                        bj = j;
                    }
                }
            }
        }
        if (bi < 0) return false;
        out.mean_cost = best_mean;
        out.cycle.assign(walk.begin() + bi, walk.begin() + bj);
        out.ties = ties;
        return true;
    };

    MatherResult r;
    if (!extract(v_star, r) || r.mean_cost > mu + 1e-9 * (1.0 + std::abs(mu))) {
        // ties can hide the optimal cycle in v_star's walk; scan the others
        for (int v = 0; v < n && (r.cycle.empty() ||
                                  r.mean_cost > mu + 1e-9 * (1.0 + std::abs(mu)));
             ++v) {
            MatherResult cand;
            if (extract(v, cand) && (r.cycle.empty() || cand.mean_cost < r.mean_cost))
                r = cand;
        }
    }
    r.h = g.h;
    r.grid_size = g.grid_size;
    r.E_estimate = r.mean_cost / g.h;
    r.measure.w.assign(n, 0.0);
    for (int v : r.cycle) r.measure.w[v] += 1.0 / double(r.cycle.size());
    return r;
}

struct CriticalValueReport {
    bool comparable = false;
    double weak_kam_E = 0.0;
    double mather_E = 0.0;
    double delta = 0.0;
    bool pass = false;
};

inline CriticalValueReport compare_critical_values(const WeakKamHalf& wk,
                                                   const MatherResult& mr, double tol) {
    CriticalValueReport rep;
    rep.weak_kam_E = wk.E;
    rep.mather_E = mr.E_estimate;
    rep.comparable = (wk.grid_size == mr.grid_size) && (wk.h == mr.h);
    rep.delta = std::abs(wk.E - mr.E_estimate);
    rep.pass = rep.comparable && rep.delta <= tol;
    return rep;
}

// 1-Wasserstein distance on the torus between two grid measures.
// 1D: cyclic CDF matching (median shift); 2D: transportation LP with
// torus-distance cost on the supports.
inline double projection_distance(const GridMeasure& a, const GridMeasure& b,
                                  const TorusGrid& grid) {
    if (a.w.size() != b.w.size() || int(a.w.size()) != grid.size())
        throw ConfigError("projection_distance: measures on different grids");
    if (grid.dim == 1) {
        const int n = grid.n;
        std::vector<double> cdf(n);
        double run = 0.0;
        for (int i = 0; i < n; ++i) {
            run += a.w[i] - b.w[i];
            cdf[i] = run;
        }
        std::vector<double> sorted = cdf;
        std::sort(sorted.begin(), sorted.end());
        double med = sorted[n / 2];
        double dist = 0.0;
        for (double c : cdf) dist += std::abs(c - med);
        return dist * grid.dx;
    }
    std::vector<int> sa, sb;
    std::vector<double> wa, wb;
    for (int i = 0; i < grid.size(); ++i) {
        if (a.w[i] > 0.0) {
            sa.push_back(i);
            wa.push_back(a.w[i]);
        }
        if (b.w[i] > 0.0) {
            sb.push_back(i);
            wb.push_back(b.w[i]);
        }
    }
    std::vector<double> cost(sa.size() * sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
        for (std::size_t j = 0; j < sb.size(); ++j)
            cost[i * sb.size() + j] = torus_distance(grid, sa[i], sb[j]);
    TransportPlan plan = solve_transportation(wa, wb, cost);
    return plan.primal_value;
}

} // namespace kamlab
