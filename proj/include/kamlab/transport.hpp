#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kamlab/action_kernel.hpp"
#include "kamlab/torus.hpp"

namespace kamlab {

struct TransportPlan {
    struct Entry {
        int i, j;
        double w;
    };
    int rows = 0, cols = 0;
    std::vector<Entry> entries;   // strictly positive flows
    double primal_value = 0.0;
    int pivots = 0;
    // final simplex potentials: f_i - g_j = c_ij on the basis, and
    // c_ij - f_i + g_j >= 0 everywhere certifies optimality
    std::vector<double> dual_row, dual_col;

    std::vector<double> dense() const {
        std::vector<double> m(std::size_t(rows) * cols, 0.0);
        for (const auto& e : entries) m[std::size_t(e.i) * cols + e.j] = e.w;
        return m;
    }
};

// Exact optimum of the transportation polytope by the primal simplex on the
// basis tree: northwest-corner start, Dantzig entering arc, leaving arc the
// last blocking candidate along the pivot cycle (strong-feasibility style).
// Falls back to Bland's rule after a long degenerate streak so termination
// never depends on tie luck.
inline TransportPlan solve_transportation(const std::vector<double>& a,
                                          const std::vector<double>& b,
                                          const std::vector<double>& cost) {
    const int m = int(a.size()), n = int(b.size());
    if (m == 0 || n == 0) throw ConfigError("solve_transportation: empty marginals");
    if (cost.size() != std::size_t(m) * n)
        throw ConfigError("solve_transportation: cost shape mismatch");
    auto c = [&](int i, int j) { return cost[std::size_t(i) * n + j]; };

    struct Arc {
        int i, j;
        double flow;
        bool in_basis;
    };
    std::vector<Arc> arcs;
    arcs.reserve(m + n - 1);

    // northwest-corner initial basic feasible solution
    {
        std::vector<double> ra = a, rb = b;
        int i = 0, j = 0;
        while (true) {
            double q = std::min(ra[i], rb[j]);
            arcs.push_back({i, j, q, true});
            ra[i] -= q;
            rb[j] -= q;
            if (i == m - 1 && j == n - 1) break;
            if (ra[i] <= 1e-300 && i < m - 1)
                ++i;
            else
                ++j;
        }
    }

    const int nodes = m + n;   // rows 0..m-1, cols m..m+n-1
    std::vector<std::vector<int>> adj(nodes);
    auto rebuild_adj = [&]() {
        for (auto& v : adj) v.clear();
        for (int id = 0; id < int(arcs.size()); ++id) {
            adj[arcs[id].i].push_back(id);
            adj[m + arcs[id].j].push_back(id);
        }
    };
    rebuild_adj();

    std::vector<double> pf(m), pg(n);   // duals: pf_i - pg_j = c_ij on basis arcs
    std::vector<int> parent_arc(nodes), bfs_order(nodes);
    auto compute_potentials = [&]() {
        std::vector<char> seen(nodes, 0);
        pf[0] = 0.0;
        seen[0] = 1;
        int head = 0, tail = 0;
        bfs_order[tail++] = 0;
        while (head < tail) {
            int u = bfs_order[head++];
            for (int id : adj[u]) {
                const Arc& e = arcs[id];
                int v = (u == e.i) ? m + e.j : e.i;
                if (seen[v]) continue;
                seen[v] = 1;
                if (v >= m)
                    pg[v - m] = pf[e.i] - c(e.i, e.j);
                else
                    pf[v] = c(e.i, e.j) + pg[e.j];
                bfs_order[tail++] = v;
            }
        }
        if (tail != nodes) throw NumericalError("solve_transportation: basis not a spanning tree");
    };

    double scale = 1.0;
    for (double v : cost) scale = std::max(scale, std::abs(v));
    const double eps = 1e-12 * scale;
    const long pivot_cap = 200L * nodes * nodes + 1000;
    long degenerate_streak = 0;
    bool bland = false;

    TransportPlan plan;
    for (long pivot = 0;; ++pivot) {
        if (pivot > pivot_cap)
            throw NumericalError("solve_transportation: pivot bound exceeded (cycling guard)");
        compute_potentials();

        // entering arc
        int ei = -1, ej = -1;
        double best = -eps;
        std::vector<char> is_basis(std::size_t(m) * n, 0);
        for (const auto& e : arcs) is_basis[std::size_t(e.i) * n + e.j] = 1;
        for (int i = 0; i < m && (ei < 0 || !bland); ++i) {
            for (int j = 0; j < n; ++j) {
                if (is_basis[std::size_t(i) * n + j]) continue;
                double rc = c(i, j) - pf[i] + pg[j];
                if (bland) {
                    if (rc < -eps) {
                        ei = i;
                        ej = j;
                        break;
                    }
                } else if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                }
            }
        }
        if (ei < 0) break;   // optimal

        // tree path from row ei to col ej
        std::vector<int> par(nodes, -1), par_arc(nodes, -1);
        std::vector<char> seen(nodes, 0);
        std::vector<int> queue{ei};
        seen[ei] = 1;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            int u = queue[h];
            if (u == m + ej) break;
            for (int id : adj[u]) {
                const Arc& e = arcs[id];
                int v = (u == e.i) ? m + e.j : e.i;
                if (seen[v]) continue;
                seen[v] = 1;
                par[v] = u;
                par_arc[v] = id;
                queue.push_back(v);
            }
        }
        std::vector<int> path_arcs;   // from col ej back to row ei
        for (int v = m + ej; v != ei; v = par[v]) path_arcs.push_back(par_arc[v]);

        // signs alternate -,+,-,... starting at the arc adjacent to the
        // entering arc's head; theta = min flow over minus arcs, leaving arc
        // the last minus arc attaining it along the traversal
        double theta = kNoEdge;
        int leave = -1;
        for (std::size_t k = 0; k < path_arcs.size(); k += 2)
            theta = std::min(theta, arcs[path_arcs[k]].flow);
        for (std::size_t k = 0; k < path_arcs.size(); k += 2)
            if (arcs[path_arcs[k]].flow <= theta) leave = path_arcs[k];

        degenerate_streak = (theta <= 1e-300) ? degenerate_streak + 1 : 0;
        if (degenerate_streak > 4L * nodes) bland = true;

        for (std::size_t k = 0; k < path_arcs.size(); ++k)
            arcs[path_arcs[k]].flow += (k % 2 == 0) ? -theta : theta;
        arcs[leave] = {ei, ej, theta, true};
        rebuild_adj();
        plan.pivots = int(pivot + 1);
    }

    plan.rows = m;
    plan.cols = n;
    plan.dual_row = pf;
    plan.dual_col = pg;
    for (const auto& e : arcs) {
        plan.primal_value += e.flow * c(e.i, e.j);
        if (e.flow > 0.0) plan.entries.push_back({e.i, e.j, e.flow});
    }
    return plan;
}

enum class CostVariant { plain, tilde };

// Kantorovich problem between the projected Mather measures with the
// action-kernel cost, restricted to the supports.
//
//   plain:  c(x,y) = -(W(y,x) - drift)          drift = max_z W(z,z)
//   tilde:  c(x,y) = -(W(y,x) - drift) + I(y)
//
// drift removes the critical growth of the unit-time kernel (the minimal
// time-1 loop action equals E), which is what makes (u, u*) admissible with
// tight slackness on the optimal support; in the flat case drift = 0 and the
// cost is exactly -W.
struct TransportProblem {
    std::vector<int> sources;   // grid nodes carrying mu_+ (x variable)
    std::vector<int> sinks;     // grid nodes carrying mu_- (y variable)
    std::vector<double> a, b;   // masses on sources / sinks
    std::vector<double> cost;   // row-major over sources x sinks
    CostVariant variant = CostVariant::plain;
    double drift = 0.0;
    int grid_size = 0;

    double cost_at(std::size_t i, std::size_t j) const { return cost[i * sinks.size() + j]; }
};

inline TransportProblem build_problem(const GridMeasure& mu_plus,
                                      const GridMeasure& mu_minus,
                                      const KernelMatrix& w, const GridField& rate,
                                      CostVariant variant) {
    if (mu_plus.w.size() != mu_minus.w.size() || int(mu_plus.w.size()) != w.n)
        throw ConfigError("build_problem: measures and kernel on different grids");
    if (std::abs(mu_plus.total() - 1.0) > 1e-10 || std::abs(mu_minus.total() - 1.0) > 1e-10)
        throw ConfigError("build_problem: marginal mass differs from 1 beyond 1e-10");

    TransportProblem p;
    p.variant = variant;
    p.grid_size = w.n;
    for (int i = 0; i < w.n; ++i) {
        if (mu_plus.w[i] > 0.0) {
            p.sources.push_back(i);
            p.a.push_back(mu_plus.w[i]);
        }
        if (mu_minus.w[i] > 0.0) {
            p.sinks.push_back(i);
            p.b.push_back(mu_minus.w[i]);
        }
    }
    if (p.sources.empty() || p.sinks.empty())
        throw ConfigError("build_problem: empty support");
    if (p.sources.size() * p.sinks.size() > 10000)
        throw ConfigError("build_problem: support beyond desk scale (> 10^4 pairs)");

    p.drift = -kNoEdge;
    for (int z = 0; z < w.n; ++z) p.drift = std::max(p.drift, w.at(z, z));

    p.cost.resize(p.sources.size() * p.sinks.size());
    for (std::size_t i = 0; i < p.sources.size(); ++i) {
        for (std::size_t j = 0; j < p.sinks.size(); ++j) {
            int x = p.sources[i], y = p.sinks[j];
            double cxy = -(w.at(y, x) - p.drift);
            if (variant == CostVariant::tilde) cxy += rate[y];
            p.cost[i * p.sinks.size() + j] = cxy;
        }
    }
    return p;
}

inline TransportPlan solve_kantorovich(const TransportProblem& p) {
    TransportPlan plan = solve_transportation(p.a, p.b, p.cost);
    // marginal feasibility by direct summation
    std::vector<double> ra(p.a.size(), 0.0), rb(p.b.size(), 0.0);
    for (const auto& e : plan.entries) {
        ra[e.i] += e.w;
        rb[e.j] += e.w;
    }
    for (std::size_t i = 0; i < ra.size(); ++i)
        if (std::abs(ra[i] - p.a[i]) > 1e-10)
            throw NumericalError("solve_kantorovich: row marginal violated");
    for (std::size_t j = 0; j < rb.size(); ++j)
        if (std::abs(rb[j] - p.b[j]) > 1e-10)
            throw NumericalError("solve_kantorovich: column marginal violated");
    return plan;
}

// max over support pairs of f(x) - g(y) - c(x,y); <= 0 means c-admissible
inline double admissibility(const GridField& f, const GridField& g,
                            const TransportProblem& p) {
    double worst = -kNoEdge;
    for (std::size_t i = 0; i < p.sources.size(); ++i)
        for (std::size_t j = 0; j < p.sinks.size(); ++j)
            worst = std::max(worst, f[p.sources[i]] - g[p.sinks[j]] - p.cost_at(i, j));
    return worst;
}

// same violation over every grid pair (c-admissibility proper quantifies
// over all x, y, not just the supports)
inline double admissibility_full(const GridField& f, const GridField& g,
                                 const KernelMatrix& w, const GridField& rate,
                                 CostVariant variant, double drift) {
    double worst = -kNoEdge;
    for (int x = 0; x < w.n; ++x) {
        for (int y = 0; y < w.n; ++y) {
            double cxy = -(w.at(y, x) - drift);
            if (variant == CostVariant::tilde) cxy += rate[y];
            worst = std::max(worst, f[x] - g[y] - cxy);
        }
    }
    return worst;
}

struct DualityReport {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;   // primal - dual, >= 0 up to tolerance for admissible pairs
};

inline DualityReport duality_gap(const TransportPlan& plan, const GridField& f,
                                 const GridField& g, const TransportProblem& p) {
    DualityReport r;
    r.primal = plan.primal_value;
    for (std::size_t i = 0; i < p.sources.size(); ++i) r.dual += p.a[i] * f[p.sources[i]];
    for (std::size_t j = 0; j < p.sinks.size(); ++j) r.dual -= p.b[j] * g[p.sinks[j]];
    r.gap = r.primal - r.dual;
    return r;
}

struct SlacknessViolation {
    int x, y;
    double amount;
};

// plan-support pairs where f(x) - g(y) differs from c(x,y); empty certifies
// the support characterization
inline std::vector<SlacknessViolation> slackness_check(const TransportPlan& plan,
                                                       const GridField& f,
                                                       const GridField& g,
                                                       const TransportProblem& p,
                                                       double tol) {
    std::vector<SlacknessViolation> out;
    for (const auto& e : plan.entries) {
        if (e.w <= 1e-15) continue;
        double v = std::abs(f[p.sources[e.i]] - g[p.sinks[e.j]] - p.cost_at(e.i, e.j));
        if (v > tol) out.push_back({p.sources[e.i], p.sinks[e.j], v});
    }
    return out;
}

// keep only weights above rel_floor * max weight, renormalized; used when a
// quantum measure stands in for a Mather measure.  max_nodes caps the support
// at the heaviest nodes so the restricted transport problem stays desk scale.
inline GridMeasure truncate_support(const GridMeasure& mu, double rel_floor,
                                    std::size_t max_nodes = SIZE_MAX) {
    double mx = 0.0;
    for (double w : mu.w) mx = std::max(mx, w);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < mu.w.size(); ++i)
        if (mu.w[i] > rel_floor * mx) order.push_back({mu.w[i], i});
    std::sort(order.begin(), order.end(), std::greater<>());
    if (order.size() > max_nodes) order.resize(max_nodes);
    GridMeasure out;
    out.w.assign(mu.w.size(), 0.0);
    double mass = 0.0;
    for (const auto& [w, i] : order) {
        out.w[i] = w;
        mass += w;
    }
    if (mass <= 0.0) throw NumericalError("truncate_support: measure vanished");
    for (double& w : out.w) w /= mass;
    return out;
}

} // namespace kamlab
