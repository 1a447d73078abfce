#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kamlab/torus.hpp"

namespace kamlab {

// One-step action matrix c_h(y,x) for the discrete Lax-Oleinik operator.
//
//   c_h(y,x) = min over lifts D of  |D|^2/(2h) - h (V(y)+V(x))/2 + sign <P, D>
//
// sign = -1 selects L^- (form subtracted), sign = +1 selects L^+.  Entries
// with every lift faster than v_max are absent (kNoEdge sentinel).  The
// kinetic-plus-form part depends on (x - y) mod 1 only, so it is tabulated
// per displacement class; the potential part is added on the fly.
struct OneStepCost {
    TorusGrid grid;
    double h = 0.05;
    double v_max = 4.0;
    int sign = -1;
    GridField v;                  // node samples of V
    std::vector<double> kin;      // per offset class, kNoEdge when inadmissible
    std::vector<int> offsets;     // classes with finite kin

    double operator()(int y, int x) const {
        double k = kin[grid.offset_class(y, x)];
        if (k == kNoEdge) return kNoEdge;
        return k - 0.5 * h * (v[y] + v[x]);
    }

    bool admissible(int y, int x) const { return kin[grid.offset_class(y, x)] != kNoEdge; }

    // transposed matrix: same potential part, displacement classes negated
    OneStepCost transposed() const {
        OneStepCost t = *this;
        for (int cls = 0; cls < grid.size(); ++cls) {
            auto c = grid.coords_of(cls);
            t.kin[grid.index_of(-c[0], -c[1])] = kin[cls];
        }
        t.offsets.clear();
        for (int cls = 0; cls < grid.size(); ++cls)
            if (t.kin[cls] != kNoEdge) t.offsets.push_back(cls);
        return t;
    }
};

inline OneStepCost one_step_cost(const TorusGrid& grid, const Potential& pot,
                                 const ClosedForm& form, int sign, double h,
                                 double v_max, int k_max = 2) {
    if (!(h > 0.0 && h <= 1.0)) throw ConfigError("one_step_cost: h must lie in (0,1]");
    if (sign != -1 && sign != 1) throw ConfigError("one_step_cost: sign must be -1 or +1");
    if (v_max * h < grid.dx - 1e-15)
        throw ConfigError("one_step_cost: v_max*h < dx, nearest-neighbor moves inadmissible");

    OneStepCost c;
    c.grid = grid;
    c.h = h;
    c.v_max = v_max;
    c.sign = sign;
    c.v = eval_potential(pot, grid);
    c.kin.assign(grid.size(), kNoEdge);

    double reach_sq = v_max * v_max * h * h * (1.0 + 1e-12);
    for (int cls = 0; cls < grid.size(); ++cls) {
        for (const auto& lift : lifted_displacement(grid, 0, cls, k_max)) {
            if (lift.norm_sq > reach_sq) continue;
            double val = lift.norm_sq / (2.0 * h) + sign * form.along(lift.delta);
            if (val < c.kin[cls]) c.kin[cls] = val;
        }
        if (c.kin[cls] != kNoEdge) c.offsets.push_back(cls);
    }
    return c;
}

// min-plus matrix-vector product: (T u)(x) = min_y [ u(y) + c(y,x) ]
inline GridField lax_oleinik_step(const GridField& u, const OneStepCost& cost) {
    const TorusGrid& g = cost.grid;
    const int size = g.size();
    GridField out(size);
    // u(y) - h V(y)/2 collected once per source node
    GridField src(size);
    for (int y = 0; y < size; ++y) src[y] = u[y] - 0.5 * cost.h * cost.v[y];

    if (g.dim == 1) {
        for (int x = 0; x < size; ++x) {
            double best = kNoEdge;
            for (int cls : cost.offsets) {
                int y = x - cls;
                if (y < 0) y += size;
                double cand = src[y] + cost.kin[cls];
                if (cand < best) best = cand;
            }
            out[x] = best - 0.5 * cost.h * cost.v[x];
        }
    } else {
        for (int x = 0; x < size; ++x) {
            auto cx = g.coords_of(x);
            double best = kNoEdge;
            for (int cls : cost.offsets) {
                auto d = g.coords_of(cls);
                int y = g.index_of(cx[0] - d[0], cx[1] - d[1]);
                double cand = src[y] + cost.kin[cls];
                if (cand < best) best = cand;
            }
            out[x] = best - 0.5 * cost.h * cost.v[x];
        }
    }
    return out;
}

struct WeakKamHalf {
    GridField u;
    double E = 0.0;
    double residual = 0.0;
    int iterations = 0;
    int grid_size = 0;   // recorded so cross-method comparisons can reject mismatched runs
    double h = 0.0;
};

namespace detail {

// history ring for value iteration: normalized iterates plus cumulative shifts
struct IterateRing {
    int cap;
    std::vector<GridField> u;
    std::vector<double> cum_shift;   // S_k = sum of shifts before iterate k
    std::vector<long> index;         // iteration number of each slot
    int count = 0;

    explicit IterateRing(int capacity) : cap(capacity), u(capacity), cum_shift(capacity), index(capacity) {}

    void push(const GridField& f, double s, long k) {
        int slot = int(k % cap);
        u[slot] = f;
        cum_shift[slot] = s;
        index[slot] = k;
        count = std::min(count + 1, cap);
    }

    bool has(long k) const { return k >= 0 && index[int(k % cap)] == k && count > 0; }
    const GridField& at(long k) const { return u[int(k % cap)]; }
    double shift_at(long k) const { return cum_shift[int(k % cap)]; }
};

// range of (a - b); returns {min, max}
inline std::pair<double, double> diff_range(const GridField& a, const GridField& b) {
    double lo = a[0] - b[0], hi = lo;
    for (std::size_t i = 1; i < a.size(); ++i) {
        double d = a[i] - b[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {lo, hi};
}

} // namespace detail

// Value iteration u_{k+1} = T_h u_k - min_x(T_h u_k - u_k).  E is read off the
// stabilized shift.  When the critical graph is periodic (rotating Mather
// cycles) the normalized iterates settle into an exact cycle instead of a
// fixed point; the eigenvector is then recovered as the min over a full
// period of the drift-compensated iterates.  The returned pair always passes
// the certificate sup|T_h u - u - h E| <= tol by direct re-evaluation.
inline WeakKamHalf solve_weak_kam(const OneStepCost& cost, double tol = 1e-9,
                                  int max_iters = 60000) {
    if (!(tol > 0.0)) throw ConfigError("solve_weak_kam: tol must be positive");
    const int size = cost.grid.size();
    // history window: enough to cover one period of the critical graph, with
    // the ring capped at ~64 MB for large 2D grids
    const int mem_cap = std::max(64, int(std::min<long>(8 * 1024 * 1024 / size, 1 << 20)));
    const int window = std::min(4 * size + 64, mem_cap);
    detail::IterateRing ring(window);

    GridField u(size, 0.0);
    double cum = 0.0;
    ring.push(u, cum, 0);

    double last_residual = kNoEdge;
    auto certify = [&](const GridField& v, double hE, WeakKamHalf& out) {
        GridField tv = lax_oleinik_step(v, cost);
        double r = 0.0;
        for (int i = 0; i < size; ++i) r = std::max(r, std::abs(tv[i] - v[i] - hE));
        last_residual = r;
        if (r <= tol) {
            out.u = v;
            double m = field_min(out.u);
            for (double& x : out.u) x -= m;
            out.E = hE / cost.h;
            out.residual = r;
            out.grid_size = size;
            out.h = cost.h;
            return true;
        }
        return false;
    };

    WeakKamHalf result;
    for (long k = 1; k <= max_iters; ++k) {
        GridField tu = lax_oleinik_step(u, cost);
        double s = tu[0] - u[0];
        for (int i = 1; i < size; ++i) s = std::min(s, tu[i] - u[i]);
        for (int i = 0; i < size; ++i) tu[i] -= s;
        u = std::move(tu);
        cum += s;
        ring.push(u, cum, k);

        bool scan = (k % 16 == 0) || k == max_iters;
        long cmax = scan ? std::min<long>(k, window - 1) : 1;
        double scale = 1.0 + std::max(std::abs(field_max(u)), std::abs(field_min(u)));
        double eps_detect = std::max(1e-10 * scale, 0.05 * tol);
        for (long c = 1; c <= cmax; ++c) {
            if (!ring.has(k - c)) break;
            auto [lo, hi] = detail::diff_range(u, ring.at(k - c));
            if (hi - lo > eps_detect) continue;
            // periodic orbit found: recover hE and the window-min eigenvector
            double drift = 0.5 * (lo + hi);
            double hE = (drift + (cum - ring.shift_at(k - c))) / double(c);
            GridField v(size, kNoEdge);
            for (long j = k - c + 1; j <= k; ++j) {
                const GridField& uj = ring.at(j);
                double off = (ring.shift_at(j) - cum) - double(j - k) * hE;
                for (int i = 0; i < size; ++i) v[i] = std::min(v[i], uj[i] + off);
            }
            result.iterations = int(k);
            if (certify(v, hE, result)) return result;
            break;   // not yet exact; keep iterating
        }
    }
    throw NumericalError(
        "solve_weak_kam: no fixed point after " + std::to_string(max_iters) +
        " iterations, last residual " + std::to_string(last_residual) +
        " (h too large for dx, or v_max too small?)");
}

// backward solution: same scheme on the transposed cost matrix
inline WeakKamHalf solve_backward(const OneStepCost& cost, double tol = 1e-9,
                                  int max_iters = 60000) {
    return solve_weak_kam(cost.transposed(), tol, max_iters);
}

struct RateFunction {
    GridField I;
    std::vector<int> aubry;
};

// I = u + u* gauged so min I = 0; the discrete Aubry set is its sub-level set.
inline RateFunction rate_function(const GridField& u, const GridField& u_star,
                                  double aubry_tol) {
    RateFunction r;
    r.I.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) r.I[i] = u[i] + u_star[i];
    double m = field_min(r.I);
    for (double& x : r.I) x -= m;
    for (std::size_t i = 0; i < r.I.size(); ++i)
        if (r.I[i] <= aubry_tol) r.aubry.push_back(int(i));
    return r;
}

struct WeakKamSolution {
    GridField u;
    GridField u_star;
    double E = 0.0;
    double residual = 0.0;
    GridField I;
    std::vector<int> aubry;
    int iterations = 0;
};

inline WeakKamSolution solve_weak_kam_pair(const OneStepCost& cost, double tol = 1e-9,
                                           int max_iters = 60000,
                                           double aubry_tol_rel = 1e-3) {
    WeakKamHalf fwd = solve_weak_kam(cost, tol, max_iters);
    WeakKamHalf bwd = solve_backward(cost, tol, max_iters);
    if (std::abs(fwd.E - bwd.E) > 2.0 * tol)
        throw NumericalError("forward/backward critical values disagree beyond 2*tol");
    WeakKamSolution s;
    s.u = fwd.u;
    s.u_star = bwd.u;
    s.E = fwd.E;
    s.residual = std::max(fwd.residual, bwd.residual);
    s.iterations = fwd.iterations + bwd.iterations;
    auto rf = rate_function(s.u, s.u_star, 0.0);
    double range = field_max(rf.I);
    rf = rate_function(s.u, s.u_star, aubry_tol_rel * std::max(range, 1e-300));
    s.I = std::move(rf.I);
    s.aubry = std::move(rf.aubry);
    return s;
}

// default time step: h = 5 sqrt(dx / scale(V)) clamped to [0.02, 0.2]
inline double default_time_step(const TorusGrid& grid, const Potential& pot) {
    double scale = std::max(pot.scale(), 1.0);
    double h = 5.0 * std::sqrt(grid.dx / scale);
    return std::clamp(h, 0.02, 0.2);
}

} // namespace kamlab
