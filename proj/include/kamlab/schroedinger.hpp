#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kamlab/torus.hpp"

namespace kamlab {

// Discrete twisted Feynman-Kac generator
//
//   (G f)(x) = (1/(2 b dx^2)) sum_{j,+-} [ e^{-+ sign b P_j dx} f(x +- e_j dx) - f(x) ]
//              + b V(x) f(x)
//
// The conjugation by e^{sign b <P,x>} is realized as hopping-weight factors,
// which keeps the operator periodic even though <P,x> is not.  sign = +1 is
// the forward twist (right Perron vector psi), sign = -1 the backward one;
// the transpose of one is the other.  E_beta := -lambda_max(G)/beta, the
// convention under which -(log psi)/beta satisfies the viscous
// Hamilton-Jacobi identity tested in the semiclassical module.
//
// The diagonal carries +beta V: the potential enters the path weight as
// e^{+beta int V}, which is what makes the ground state concentrate on the
// discrete Aubry set (argmax V at P=0) and E_beta converge to the weak KAM
// constant.
struct TwistedGenerator {
    TorusGrid grid;
    double beta = 1.0;
    int sign = 1;
    double coef = 0.0;                  // 1/(2 beta dx^2)
    std::array<double, 2> hop_plus{1.0, 1.0};   // weight on f(x + e_j dx)
    std::array<double, 2> hop_minus{1.0, 1.0};  // weight on f(x - e_j dx)
    GridField diag;                     // -dim/(beta dx^2) + beta V(x)

    GridField apply(const GridField& f) const {
        const int n = grid.n;
        GridField out(grid.size());
        if (grid.dim == 1) {
            for (int i = 0; i < n; ++i) {
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                out[i] = coef * (hop_plus[0] * f[ip] + hop_minus[0] * f[im]) + diag[i] * f[i];
            }
        } else {
            for (int i = 0; i < n; ++i) {
                int ip = (i + 1 == n ? 0 : i + 1) * n;
                int im = (i == 0 ? n - 1 : i - 1) * n;
                int ic = i * n;
                for (int j = 0; j < n; ++j) {
                    int jp = j + 1 == n ? 0 : j + 1;
                    int jm = j == 0 ? n - 1 : j - 1;
                    out[ic + j] = coef * (hop_plus[0] * f[ip + j] + hop_minus[0] * f[im + j] +
                                          hop_plus[1] * f[ic + jp] + hop_minus[1] * f[ic + jm]) +
                                  diag[ic + j] * f[ic + j];
                }
            }
        }
        return out;
    }

    GridField apply_transpose(const GridField& f) const { return transposed().apply(f); }

    TwistedGenerator transposed() const {
        TwistedGenerator t = *this;
        std::swap(t.hop_plus, t.hop_minus);
        t.sign = -sign;
        return t;
    }

    // max row absolute sum
    double norm_inf() const {
        double hops = 0.0;
        for (int j = 0; j < grid.dim; ++j) hops += hop_plus[j] + hop_minus[j];
        double m = 0.0;
        for (double d : diag) m = std::max(m, std::abs(d) + coef * hops);
        return m;
    }
};

inline TwistedGenerator assemble_twisted_generator(const TorusGrid& grid,
                                                   const Potential& pot,
                                                   const ClosedForm& form, double beta,
                                                   int sign) {
    if (!(beta > 0.0)) throw ConfigError("assemble_twisted_generator: beta must be > 0");
    if (sign != 1 && sign != -1)
        throw ConfigError("assemble_twisted_generator: sign must be -1 or +1");
    for (int j = 0; j < grid.dim; ++j)
        if (std::abs(beta * form.p[j] * grid.dx) > 30.0)
            throw ConfigError("assemble_twisted_generator: |beta P dx| > 30, hopping weights overflow");

    TwistedGenerator g;
    g.grid = grid;
    g.beta = beta;
    g.sign = sign;
    g.coef = 1.0 / (2.0 * beta * grid.dx * grid.dx);
    for (int j = 0; j < grid.dim; ++j) {
        g.hop_plus[j] = std::exp(-sign * beta * form.p[j] * grid.dx);
        g.hop_minus[j] = std::exp(sign * beta * form.p[j] * grid.dx);
    }
    GridField v = eval_potential(pot, grid);
    g.diag.resize(grid.size());
    double lap_diag = -2.0 * grid.dim * g.coef;
    for (int i = 0; i < grid.size(); ++i) g.diag[i] = lap_diag + beta * v[i];
    return g;
}

struct PerronResult {
    double lambda = 0.0;
    GridField vec;
    double residual = 0.0;
    int iterations = 0;
    double gap_estimate = 0.0;
};

// Power iteration on M = I + delta G with delta = 0.9/||G||_inf, which keeps
// M entrywise nonnegative with strictly positive diagonal.  Rayleigh-quotient
// eigenvalue; stopping on the pointwise-ratio residual max |(Gv)_i/v_i - l|,
// which controls the eigenvector in relative terms even in the exponentially
// small tails (the log-fields and tail masses downstream depend on those).
inline PerronResult perron_eigenpair(const TwistedGenerator& g, double tol = 1e-10,
                                     int max_iters = 2000000) {
    const int size = g.grid.size();
    const double delta = 0.9 / g.norm_inf();
    GridField v(size, 1.0 / size);
    PerronResult res;
    double prev_resid = kNoEdge;
    int probe = 0;
    for (int it = 1; it <= max_iters; ++it) {
        GridField gv = g.apply(v);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < size; ++i) {
            num += v[i] * gv[i];
            den += v[i] * v[i];
        }
        double lambda = num / den;
        double resid = 0.0;
        for (int i = 0; i < size; ++i) {
            if (!(v[i] > 0.0))
                throw NumericalError(
                    "perron_eigenpair: eigenvector entry underflowed to zero "
                    "(beta too large for this potential range)");
            resid = std::max(resid, std::abs(gv[i] / v[i] - lambda));
        }
        if (++probe == 64) {
            probe = 0;
            if (prev_resid != kNoEdge && resid > 0.0) {
                double rho = std::pow(resid / prev_resid, 1.0 / 64.0);
                res.gap_estimate = std::max(0.0, (1.0 - rho) / delta);
            }
            prev_resid = resid;
        }
        if (resid <= tol * std::max(1.0, std::abs(lambda))) {
            res.lambda = lambda;
            res.vec = v;
            res.residual = resid;
            res.iterations = it;
            double s = 0.0;
            for (double x : res.vec) s += x;
            for (double& x : res.vec) x /= s;   // positive, l1-normalized
            return res;
        }
        // v <- (I + delta G) v, renormalized
        double s = 0.0;
        for (int i = 0; i < size; ++i) {
            v[i] += delta * gv[i];
            s += v[i];
        }
        for (int i = 0; i < size; ++i) v[i] /= s;
    }
    throw NumericalError("perron_eigenpair: no convergence after " +
                         std::to_string(max_iters) + " iterations (estimated spectral gap " +
                         std::to_string(res.gap_estimate) + "; near-degenerate?)");
}

inline PerronResult left_eigenpair(const TwistedGenerator& g, double tol = 1e-10,
                                   int max_iters = 2000000) {
    return perron_eigenpair(g.transposed(), tol, max_iters);
}

struct EigenPair {
    double beta = 0.0;
    double E_beta = 0.0;       // -lambda/beta
    double lambda = 0.0;
    GridField psi;
    GridField psi_star;
    double residual_right = 0.0;
    double residual_left = 0.0;
    int iterations = 0;
    double gap_estimate = 0.0;
};

// Fix scales so that sum psi_star dx^dim = 1 and sum psi psi_star dx^dim = 1.
inline EigenPair normalize_pair(const GridField& psi, const GridField& psi_star,
                                const TorusGrid& grid) {
    for (std::size_t i = 0; i < psi.size(); ++i)
        if (!(psi[i] > 0.0) || !(psi_star[i] > 0.0))
            throw NumericalError("normalize_pair: eigenvectors must be strictly positive");
    const double vol = grid.cell_volume();
    EigenPair p;
    p.psi_star = psi_star;
    double s1 = 0.0;
    for (double x : psi_star) s1 += x;
    double b = 1.0 / (s1 * vol);
    for (double& x : p.psi_star) x *= b;
    p.psi = psi;
    double s2 = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) s2 += psi[i] * p.psi_star[i];
    double a = 1.0 / (s2 * vol);
    for (double& x : p.psi) x *= a;
    return p;
}

inline EigenPair solve_eigenpair(const TwistedGenerator& g, double tol = 1e-10,
                                 int max_iters = 2000000) {
    PerronResult right = perron_eigenpair(g, tol, max_iters);
    PerronResult left = left_eigenpair(g, tol, max_iters);
    if (std::abs(left.lambda - right.lambda) >
        10.0 * tol * std::max(1.0, std::abs(right.lambda)))
        throw NumericalError("solve_eigenpair: left/right eigenvalues disagree beyond 10*tol");
    EigenPair p = normalize_pair(right.vec, left.vec, g.grid);
    p.beta = g.beta;
    p.lambda = right.lambda;
    p.E_beta = -right.lambda / g.beta;
    p.residual_right = right.residual;
    p.residual_left = left.residual;
    p.iterations = right.iterations + left.iterations;
    p.gap_estimate = std::max(right.gap_estimate, left.gap_estimate);
    return p;
}

// nu_beta = psi psi* dx^dim; sums to 1 by the pair normalization
inline GridMeasure quantum_measure(const EigenPair& pair, const TorusGrid& grid) {
    GridMeasure nu;
    nu.w.resize(pair.psi.size());
    const double vol = grid.cell_volume();
    for (std::size_t i = 0; i < nu.w.size(); ++i) nu.w[i] = pair.psi[i] * pair.psi_star[i] * vol;
    return nu;
}

struct StationarityResidual {
    double row_sum = 0.0;    // sup |rows of the Doob generator|
    double left = 0.0;       // ||nu L||_1
};

// Doob transform L f = psi^{-1} [G(psi f) - lambda psi f]; rows must sum to 0
// and nu_beta must annihilate L from the left.
inline StationarityResidual markov_stationarity_check(const EigenPair& pair,
                                                      const TwistedGenerator& g) {
    StationarityResidual r;
    GridField gpsi = g.apply(pair.psi);
    for (std::size_t i = 0; i < pair.psi.size(); ++i)
        r.row_sum = std::max(r.row_sum,
                             std::abs((gpsi[i] - pair.lambda * pair.psi[i]) / pair.psi[i]));
    // nu L (y) = vol * psi(y) [ (G^T psi*)(y) - lambda psi*(y) ]
    GridField gt = g.apply_transpose(pair.psi_star);
    const double vol = g.grid.cell_volume();
    for (std::size_t i = 0; i < pair.psi_star.size(); ++i)
        r.left += std::abs(vol * pair.psi[i] * (gt[i] - pair.lambda * pair.psi_star[i]));
    return r;
}

} // namespace kamlab
