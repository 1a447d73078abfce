#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kamlab/action_kernel.hpp"
#include "kamlab/schroedinger.hpp"
#include "kamlab/torus.hpp"

namespace kamlab {

// u_beta = -(log psi)/beta and u*_beta = -(log psi*)/beta, each re-gauged to
// min = 0 so they are comparable with the weak KAM pair.
struct SemiclassicalPair {
    GridField u_beta;
    GridField u_star_beta;
};

inline SemiclassicalPair normalized_log(const EigenPair& pair) {
    SemiclassicalPair s;
    s.u_beta.resize(pair.psi.size());
    s.u_star_beta.resize(pair.psi_star.size());
    for (std::size_t i = 0; i < pair.psi.size(); ++i) {
        s.u_beta[i] = -std::log(pair.psi[i]) / pair.beta;
        s.u_star_beta[i] = -std::log(pair.psi_star[i]) / pair.beta;
    }
    double m = field_min(s.u_beta);
    for (double& x : s.u_beta) x -= m;
    m = field_min(s.u_star_beta);
    for (double& x : s.u_star_beta) x -= m;
    return s;
}

// sup_x | -(1/(2 beta)) Lap_h u + ||grad_h u + P||^2/2 + V + E_beta | with
// central differences.  The identity holds with +E_beta under the eigenvalue
// convention E_beta = -lambda/beta (V==0, P!=0, u==0 gives |P^2/2 + E_beta|,
// which vanishes with the stencil's cosh expansion).  The backward variant
// flips the gradient sign, H^w(x, -d u*).
inline double viscous_hj_residual(const GridField& u, double beta, const GridField& v,
                                  const ClosedForm& form, double e_beta,
                                  const TorusGrid& grid, bool backward = false) {
    const double dx = grid.dx;
    const double gsign = backward ? -1.0 : 1.0;
    double worst = 0.0;
    for (int idx = 0; idx < grid.size(); ++idx) {
        auto c = grid.coords_of(idx);
        double lap = 0.0, ham = 0.0;
        for (int j = 0; j < grid.dim; ++j) {
            int up = j == 0 ? grid.index_of(c[0] + 1, c[1]) : grid.index_of(c[0], c[1] + 1);
            int dn = j == 0 ? grid.index_of(c[0] - 1, c[1]) : grid.index_of(c[0], c[1] - 1);
            double grad = (u[up] - u[dn]) / (2.0 * dx);
            lap += (u[up] - 2.0 * u[idx] + u[dn]) / (dx * dx);
            double comp = gsign * grad + form.p[j];
            ham += 0.5 * comp * comp;
        }
        double r = -lap / (2.0 * beta) + ham + v[idx] + e_beta;
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

struct LdpTable {
    std::vector<double> betas;
    // err[set][beta_index] = | (1/beta) log nu_beta(A) + min_A I |
    std::vector<std::vector<double>> err;
    std::vector<double> min_rate;          // min_A I per set
    std::vector<bool> decreasing;          // err(A, beta_max) < err(A, beta_min)
};

inline LdpTable ldp_check(const std::vector<std::pair<double, GridMeasure>>& measures,
                          const GridField& rate,
                          const std::vector<std::vector<int>>& test_sets) {
    LdpTable t;
    for (const auto& [beta, nu] : measures) t.betas.push_back(beta);
    t.err.resize(test_sets.size());
    for (std::size_t s = 0; s < test_sets.size(); ++s) {
        if (test_sets[s].empty()) throw ConfigError("ldp_check: empty test set");
        double min_i = kNoEdge;
        for (int node : test_sets[s]) min_i = std::min(min_i, rate[node]);
        t.min_rate.push_back(min_i);
        for (const auto& [beta, nu] : measures) {
            double mass = 0.0;
            for (int node : test_sets[s]) mass += nu.w[node];
            double lhs = std::log(mass) / beta;
            t.err[s].push_back(std::abs(lhs + min_i));
        }
        t.decreasing.push_back(t.err[s].back() < t.err[s].front());
    }
    return t;
}

// err(beta) = | (1/beta) log int e^{beta F} d nu  -  max (F - I) |
// evaluated with log-sum-exp, overflow-free for beta F up to ~700.
inline std::vector<double> varadhan_check(
    const std::vector<std::pair<double, GridMeasure>>& measures, const GridField& f,
    const GridField& rate) {
    double target = -kNoEdge;
    for (std::size_t i = 0; i < f.size(); ++i) target = std::max(target, f[i] - rate[i]);
    std::vector<double> err;
    for (const auto& [beta, nu] : measures) {
        double wmax = -kNoEdge;
        for (std::size_t i = 0; i < f.size(); ++i)
            wmax = std::max(wmax, beta * f[i] + std::log(nu.w[i]));
        double sum = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i)
            sum += std::exp(beta * f[i] + std::log(nu.w[i]) - wmax);
        double lhs = (wmax + std::log(sum)) / beta;
        err.push_back(std::abs(lhs - target));
    }
    return err;
}

// sup_x | u(x) - min_z( -W(z,x) + u*(z) ) | after aligning the two sides by
// one additive constant (midrange of the difference)
inline double kernel_representation_check(const GridField& u, const GridField& u_star,
                                          const KernelMatrix& w) {
    double lo = kNoEdge, hi = -kNoEdge;
    for (int x = 0; x < w.n; ++x) {
        double m = kNoEdge;
        for (int z = 0; z < w.n; ++z) m = std::min(m, -w.at(z, x) + u_star[z]);
        double d = u[x] - m;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return 0.5 * (hi - lo);
}

struct SweepRecord {
    double beta = 0.0;
    int grid_n = 0;
    double E_beta = 0.0;
    double E_weak_kam = 0.0;
    double sup_dist_u = 0.0;
    double sup_dist_ustar = 0.0;
    double hj_residual = 0.0;
    std::vector<double> ldp_errors;
    double varadhan_error = 0.0;
    double collinearity = 0.0;
};

} // namespace kamlab
