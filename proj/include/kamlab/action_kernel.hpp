#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kamlab/rng.hpp"
#include "kamlab/schroedinger.hpp"
#include "kamlab/weak_kam.hpp"

namespace kamlab {

// Unit-horizon action kernel W(y,x) over all node pairs.
struct KernelMatrix {
    int n = 0;            // node count
    double t = 1.0;       // horizon (fixed to 1 for the DP kernel)
    int slices = 0;
    std::vector<double> w;   // row-major, w[y*n + x]
    double lipschitz_bound = 0.0;

    double at(int y, int x) const { return w[std::size_t(y) * n + x]; }
};

namespace detail {

// C2(y,x) = min_z C(y,z) + C(z,x), dense min-plus product with itself
inline std::vector<double> min_plus_square(const std::vector<double>& c, int n) {
    std::vector<double> out(std::size_t(n) * n, kNoEdge);
    for (int y = 0; y < n; ++y) {
        const double* row_y = c.data() + std::size_t(y) * n;
        double* row_o = out.data() + std::size_t(y) * n;
        for (int z = 0; z < n; ++z) {
            double cyz = row_y[z];
            if (cyz == kNoEdge) continue;
            const double* row_z = c.data() + std::size_t(z) * n;
            for (int x = 0; x < n; ++x) {
                double cand = cyz + row_z[x];
                if (cand < row_o[x]) row_o[x] = cand;
            }
        }
    }
    return out;
}

} // namespace detail

// W(y,x) = -(minimal m-slice action of L^+ paths from y to x over unit time),
// computed by log2(m) min-plus squarings of the slice cost matrix.
inline KernelMatrix compute_w_kernel(const TorusGrid& grid, const Potential& pot,
                                     const ClosedForm& form, int slices,
                                     double v_max = 4.0) {
    if (slices < 4 || (slices & (slices - 1)) != 0)
        throw ConfigError("compute_w_kernel: slices must be a power of two >= 4");
    const int n = grid.size();
    if (n > 1200) throw ConfigError("compute_w_kernel: grid beyond desk scale for a dense kernel");
    const double hs = 1.0 / slices;
    if (v_max * hs < grid.dx - 1e-15)
        throw ConfigError("compute_w_kernel: v_max/slices < dx (slice/step mismatch)");

    OneStepCost slice = one_step_cost(grid, pot, form, +1, hs, v_max);
    std::vector<double> c(std::size_t(n) * n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) c[std::size_t(y) * n + x] = slice(y, x);
    for (int m = slices; m > 1; m >>= 1) c = detail::min_plus_square(c, n);

    KernelMatrix k;
    k.n = n;
    k.t = 1.0;
    k.slices = slices;
    k.w.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) k.w[i] = -c[i];
    k.lipschitz_bound = v_max + form.norm1() + 0.5 * grid.dx * slices +
                        0.5 * pot.grad_bound() / slices;
    return k;
}

struct McEstimate {
    double estimate = 0.0;     // (1/beta) log of the sampled kernel
    double std_error = 0.0;    // jackknife
    int samples = 0;
    int steps = 0;
    std::uint64_t seed = 0;
    int y = 0, x = 0;
    double t = 0.0;
    double beta = 0.0;
    Vec2 delta{0.0, 0.0};      // chosen minimal-displacement lift
    bool degenerate = false;   // all sample weights identical (flat integrand)
    bool lift_ambiguous = false;   // near-antipodal endpoints, reported not resolved
};

// Levy midpoint construction of a Brownian bridge from a to b over [0, t]
// with variance rate 1/beta; exact bridge marginals at the dyadic times.
inline void levy_bridge(const Vec2& a, const Vec2& b, double t, double beta, int steps,
                        int dim, CounterRng& rng, std::vector<Vec2>& path) {
    path.resize(steps + 1);
    path[0] = a;
    path[steps] = b;
    const double dt = t / steps;
    for (int len = steps; len >= 2; len >>= 1) {
        double sigma = std::sqrt(len * dt / (4.0 * beta));
        for (int start = 0; start + len <= steps; start += len) {
            int mid = start + len / 2;
            for (int j = 0; j < dim; ++j)
                path[mid][j] =
                    0.5 * (path[start][j] + path[start + len][j]) + sigma * rng.normal();
        }
    }
}

// Brownian-bridge Feynman-Kac estimate of (1/beta) log of the kernel weight
//
//   E[ exp( beta int_0^t V(path) ds - beta <P, x - y> ) ]
//
// over Levy-midpoint bridges from y to x with variance rate 1/beta.  The
// Gaussian bridge density prefactor is omitted; comparisons against the DP
// kernel add the explicit d(y,x)^2/(2t) kinetic term.  The form term uses the
// minimal-displacement lift.  Per-sample counter seeding makes the estimate a
// pure function of (inputs, seed).
inline McEstimate feynman_kac_mc(const TorusGrid& grid, const Potential& pot,
                                 const ClosedForm& form, int y, int x, double t,
                                 double beta, int samples, int steps,
                                 std::uint64_t seed) {
    if (samples < 100) throw ConfigError("feynman_kac_mc: samples must be >= 100");
    if (steps < 16 || (steps & (steps - 1)) != 0)
        throw ConfigError("feynman_kac_mc: steps must be a power of two >= 16");
    if (!(t > 0.0)) throw ConfigError("feynman_kac_mc: t must be positive");

    auto lifts = lifted_displacement(grid, y, x, 2);
    McEstimate est;
    est.samples = samples;
    est.steps = steps;
    est.seed = seed;
    est.y = y;
    est.x = x;
    est.t = t;
    est.beta = beta;
    est.delta = lifts[0].delta;
    est.lift_ambiguous =
        lifts.size() > 1 && lifts[1].norm_sq - lifts[0].norm_sq <= 1e-12;

    const Vec2 py = grid.point(y);
    const Vec2 px{py[0] + est.delta[0], py[1] + est.delta[1]};
    const double dt = t / steps;
    const double form_term = beta * form.along(est.delta);
    const int dim = grid.dim;

    std::vector<double> weights(samples);
    std::vector<Vec2> path(steps + 1);
    for (int s = 0; s < samples; ++s) {
        CounterRng rng(seed, std::uint64_t(s));
        levy_bridge(py, px, t, beta, steps, dim, rng, path);
        double intv = 0.0;
        double prev = pot(path[0]);
        for (int i = 1; i <= steps; ++i) {
            double cur = pot(path[i]);
            intv += 0.5 * (prev + cur) * dt;
            prev = cur;
        }
        weights[s] = beta * intv - form_term;
    }

    double wmax = weights[0], wmin = weights[0];
    for (double w : weights) {
        wmax = std::max(wmax, w);
        wmin = std::min(wmin, w);
    }
    est.degenerate = (wmax - wmin) <= 1e-13 * (1.0 + std::abs(wmax));

    double sum = 0.0;
    for (double w : weights) sum += std::exp(w - wmax);
    est.estimate = (wmax + std::log(sum) - std::log(double(samples))) / beta;

    if (!est.degenerate) {
        double mean = 0.0;
        std::vector<double> loo(samples);
        for (int j = 0; j < samples; ++j) {
            double sj = sum - std::exp(weights[j] - wmax);
            loo[j] = (wmax + std::log(sj) - std::log(double(samples - 1))) / beta;
            mean += loo[j];
        }
        mean /= samples;
        double var = 0.0;
        for (double v : loo) var += (v - mean) * (v - mean);
        est.std_error = std::sqrt(var * double(samples - 1) / double(samples));
    }
    return est;
}

struct SchilderCheck {
    std::vector<double> betas;
    std::vector<double> errors;   // |mc - (W + d^2/(2t))| per run
    bool decreasing = false;
};

inline SchilderCheck schilder_limit_check(const KernelMatrix& dp, const TorusGrid& grid,
                                          const std::vector<McEstimate>& runs) {
    if (runs.empty()) throw ConfigError("schilder_limit_check: no runs");
    SchilderCheck out;
    const int y = runs.front().y, x = runs.front().x;
    const double t = runs.front().t;
    double d = torus_distance(grid, y, x);
    double target = dp.at(y, x) + d * d / (2.0 * t);
    double prev_beta = 0.0;
    for (const auto& r : runs) {
        if (r.y != y || r.x != x || r.t != t)
            throw ConfigError("schilder_limit_check: runs use mismatched (y, x, t)");
        if (r.beta <= prev_beta)
            throw ConfigError("schilder_limit_check: betas must be strictly increasing");
        prev_beta = r.beta;
        out.betas.push_back(r.beta);
        out.errors.push_back(std::abs(r.estimate - target));
    }
    out.decreasing = out.errors.back() < out.errors.front();
    return out;
}

// Applies the transpose semigroup e^{t G^T} (explicit Euler, step bounded by
// the stencil norm) to psi* and returns 1 - cosine similarity against it.
// For a converged pair this is eigenvector invariance; at P = 0 psi and psi*
// coincide up to scale, matching the involution identity of the kernel.
inline double eigen_kernel_collinearity(const GridField& psi_star,
                                        const TwistedGenerator& g, double t) {
    TwistedGenerator gt = g.transposed();
    int k = std::max(1000, int(std::ceil(100.0 * t * gt.norm_inf())));
    double dt = t / k;
    GridField f = psi_star;
    for (int i = 0; i < k; ++i) {
        GridField gf = gt.apply(f);
        double m = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) {
            f[j] += dt * gf[j];
            m = std::max(m, std::abs(f[j]));
        }
        if (i % 32 == 31 || m > 1e100)
            for (double& v : f) v /= m;
    }
    double dot_fp = 0.0, nf = 0.0, np = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        dot_fp += f[j] * psi_star[j];
        nf += f[j] * f[j];
        np += psi_star[j] * psi_star[j];
    }
    return 1.0 - dot_fp / std::sqrt(nf * np);
}

} // namespace kamlab
