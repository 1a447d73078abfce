#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kamlab/common.hpp"

namespace kamlab {

using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2sq(const Vec2& a) { return dot(a, a); }

// Uniform periodic grid on T^dim, dim in {1,2}, spacing 1/n per dimension.
// Node i (flat index) has coordinates (i1/n, i2/n); index arithmetic is
// cyclic modulo n in each dimension.
struct TorusGrid {
    int dim = 1;
    int n = 8;
    double dx = 0.125;

    int size() const { return dim == 1 ? n : n * n; }
    double cell_volume() const { return dim == 1 ? dx : dx * dx; }

    int wrap(int i) const {
        i %= n;
        return i < 0 ? i + n : i;
    }

    int index_of(int i1, int i2 = 0) const {
        return dim == 1 ? wrap(i1) : wrap(i1) * n + wrap(i2);
    }

    std::array<int, 2> coords_of(int idx) const {
        if (dim == 1) return {idx, 0};
        return {idx / n, idx % n};
    }

    Vec2 point(int idx) const {
        auto c = coords_of(idx);
        return {c[0] * dx, dim == 2 ? c[1] * dx : 0.0};
    }

    // node shifted by an integer lattice offset (d1, d2)
    int shifted(int idx, int d1, int d2 = 0) const {
        auto c = coords_of(idx);
        return index_of(c[0] + d1, c[1] + d2);
    }

    // flat index of the displacement class (x - y) mod n, used to tabulate
    // translation-invariant cost entries
    int offset_class(int y, int x) const {
        auto cy = coords_of(y);
        auto cx = coords_of(x);
        return index_of(cx[0] - cy[0], cx[1] - cy[1]);
    }
};

inline TorusGrid build_grid(int dim, int n) {
    if (dim != 1 && dim != 2)
        throw ConfigError("grid dim must be 1 or 2, got " + std::to_string(dim));
    if (n < 8)
        throw ConfigError("grid N must be >= 8, got " + std::to_string(n));
    TorusGrid g;
    g.dim = dim;
    g.n = n;
    g.dx = 1.0 / n;
    return g;
}

// Real-valued function sampled at grid nodes.
using GridField = std::vector<double>;

// Nonnegative node weights summing to 1.
struct GridMeasure {
    std::vector<double> w;

    double total() const {
        double s = 0.0;
        for (double x : w) s += x;
        return s;
    }

    void validate(double tol = 1e-12) const {
        for (double x : w)
            if (!(x >= 0.0)) throw NumericalError("measure has a negative weight");
        if (std::abs(total() - 1.0) > tol)
            throw NumericalError("measure mass differs from 1 beyond tolerance");
    }
};

// Trigonometric polynomial V(x) = sum_k a_k cos(2 pi <k,x>) + b_k sin(2 pi <k,x>).
// Closed under exact evaluation; term order is fixed at insertion, so node
// samples are bit-reproducible.
class Potential {
public:
    struct Term {
        std::array<int, 2> k;
        double cos_coef;
        double sin_coef;
    };

    Potential() = default;

    void add(std::array<int, 2> k, double cos_coef, double sin_coef) {
        for (auto& t : terms_) {
            if (t.k == k) {
                t.cos_coef += cos_coef;
                t.sin_coef += sin_coef;
                return;
            }
        }
        terms_.push_back({k, cos_coef, sin_coef});
    }
    void add_cos(std::array<int, 2> k, double a) { add(k, a, 0.0); }
    void add_sin(std::array<int, 2> k, double b) { add(k, 0.0, b); }

    bool empty() const { return terms_.empty(); }
    const std::vector<Term>& terms() const { return terms_; }

    double operator()(const Vec2& x) const {
        double v = 0.0;
        for (const auto& t : terms_) {
            double phase = kTwoPi * (t.k[0] * x[0] + t.k[1] * x[1]);
            if (t.cos_coef != 0.0) v += t.cos_coef * std::cos(phase);
            if (t.sin_coef != 0.0) v += t.sin_coef * std::sin(phase);
        }
        return v;
    }

    // crude amplitude bound, used for default step-size heuristics
    double scale() const {
        double s = 0.0;
        for (const auto& t : terms_) s += std::abs(t.cos_coef) + std::abs(t.sin_coef);
        return s;
    }

    // sup-norm bound on the gradient
    double grad_bound() const {
        double s = 0.0;
        for (const auto& t : terms_) {
            double kn = std::sqrt(double(t.k[0]) * t.k[0] + double(t.k[1]) * t.k[1]);
            s += kTwoPi * kn * (std::abs(t.cos_coef) + std::abs(t.sin_coef));
        }
        return s;
    }

private:
    std::vector<Term> terms_;
};

inline GridField eval_potential(const Potential& v, const TorusGrid& grid) {
    GridField f(grid.size());
    for (int i = 0; i < grid.size(); ++i) f[i] = v(grid.point(i));
    return f;
}

// Closed form w(v) = <P, v>. Exact on the universal cover: the lift integral
// from x0 to x equals <P, x - x0> independently of the connecting path.
struct ClosedForm {
    Vec2 p{0.0, 0.0};
    Vec2 x0{0.0, 0.0};

    double lift_integral(const Vec2& x) const {
        return p[0] * (x[0] - x0[0]) + p[1] * (x[1] - x0[1]);
    }

    // integral of w along a straight lifted segment with displacement delta
    double along(const Vec2& delta) const { return dot(p, delta); }

    double norm1() const { return std::abs(p[0]) + std::abs(p[1]); }
};

struct Lift {
    Vec2 delta;                // x + k - y on the cover
    double norm_sq;            // |delta|^2
    std::array<int, 2> k;      // deck translation
};

// All lifted displacements x + k - y with |k_j| <= k_max, sorted by |delta|.
// Ties resolved by smaller |k|, then lexicographically smaller k, which puts
// the positive representative first on the 1D antipodal tie.
inline std::vector<Lift> lifted_displacement(const TorusGrid& grid, int y, int x,
                                             int k_max = 2) {
    if (k_max < 1) throw ConfigError("lifted_displacement requires k_max >= 1");
    Vec2 py = grid.point(y);
    Vec2 px = grid.point(x);
    std::vector<Lift> out;
    auto push = [&](int k1, int k2) {
        Vec2 d{px[0] + k1 - py[0], grid.dim == 2 ? px[1] + k2 - py[1] : 0.0};
        out.push_back({d, norm2sq(d), {k1, k2}});
    };
    if (grid.dim == 1) {
        for (int k1 = -k_max; k1 <= k_max; ++k1) push(k1, 0);
    } else {
        for (int k1 = -k_max; k1 <= k_max; ++k1)
            for (int k2 = -k_max; k2 <= k_max; ++k2) push(k1, k2);
    }
    std::sort(out.begin(), out.end(), [](const Lift& a, const Lift& b) {
        if (a.norm_sq != b.norm_sq) return a.norm_sq < b.norm_sq;
        long ka = long(a.k[0]) * a.k[0] + long(a.k[1]) * a.k[1];
        long kb = long(b.k[0]) * b.k[0] + long(b.k[1]) * b.k[1];
        if (ka != kb) return ka < kb;
        return a.k < b.k;
    });
    return out;
}

// torus distance realized by the closest lift
inline double torus_distance(const TorusGrid& grid, int y, int x) {
    return std::sqrt(lifted_displacement(grid, y, x, 1).front().norm_sq);
}

inline double field_min(const GridField& f) {
    double m = f[0];
    for (double x : f) m = std::min(m, x);
    return m;
}

inline double field_max(const GridField& f) {
    double m = f[0];
    for (double x : f) m = std::max(m, x);
    return m;
}

inline double sup_dist(const GridField& a, const GridField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace kamlab
