#pragma once

// Brute-force references used only by the tests. Nothing here calls into the
// library solvers: paths are enumerated explicitly and costs are summed node
// by node, so agreement with the library is a real cross-check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fgame/model.hpp"

namespace oracle {

using fgame::Mat;
using fgame::Vec;
using Nodes = std::vector<std::vector<Vec>>;  // [level][node]

inline Mat gauss(std::mt19937_64& rng, int r, int c, double scale);

/// Two-point product noise: sign patterns mapped by the eigen square root.
inline std::vector<Vec> branches(const Mat& delta)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (delta + delta.transpose()));
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const int p = static_cast<int>(delta.rows());
    std::vector<Vec> out;
    for (int code = 0; code < (1 << p); ++code) {
        Vec s(p);
        for (int i = 0; i < p; ++i)
            s(i) = (code >> i) & 1 ? -1.0 : 1.0;
        out.push_back(root * s);
    }
    return out;
}

/// Uniform-branching path space over stages t0 .. t0 + depth.
struct PathSpace {
    int t0 = 0, depth = 0, B = 1;
    std::vector<std::vector<Vec>> w;  // [level][b]

    std::size_t count(int level) const
    {
        std::size_t c = 1;
        for (int l = 0; l < level; ++l)
            c *= static_cast<std::size_t>(B);
        return c;
    }
};

inline PathSpace make_paths(const fgame::NoiseSpec& noise, int t0, int depth)
{
    PathSpace ps;
    ps.t0 = t0;
    ps.depth = depth;
    ps.B = 1 << noise.p;
    for (int l = 0; l < depth; ++l)
        ps.w.push_back(branches(noise.deltas[t0 + l]));
    return ps;
}

/// Stage weights in a common layout: c is the stacked control.
struct Weights {
    Mat Q, Qb, S, Sb, R, Rb;
    Vec q, r;
};
struct Terminal {
    Mat G, Gb;
    Vec g;
};

inline Weights from(const fgame::StageCost& s)
{
    return {s.Q, s.Qbar, s.S, s.Sbar, s.R, s.Rbar, s.q, s.rho};
}
inline Weights from(const fgame::LQStageCost& s)
{
    const Mat Z = Mat::Zero(s.R.rows(), s.Q.rows());
    return {s.Q, s.Qbar, Z, Z, s.R, s.Rbar, s.q, Vec::Zero(s.R.rows())};
}
inline Terminal from(const fgame::TerminalCost& g) { return {g.G, g.Gbar, g.g}; }
inline Terminal from(const fgame::LQTerminalCost& g) { return {g.G, g.Gbar, g.g}; }

/// Conditional cost from node (level0, node0): each later level is averaged
/// over the descendants, and the mean-field terms use the descendant means.
inline double node_cost(const PathSpace& ps, int level0, std::size_t node0, const Nodes& X, const Nodes& C,
                        const std::function<Weights(int level)>& stage, const Terminal& term)
{
    double total = 0;
    std::size_t span = 1;
    for (int l = level0; l <= ps.depth; ++l) {
        const double pr = 1.0 / static_cast<double>(span);
        Vec mx = Vec::Zero(X[l][0].size());
        if (l < ps.depth) {
            const Weights w = stage(l);
            Vec mc = Vec::Zero(C[l][0].size());
            for (std::size_t j = node0 * span; j < (node0 + 1) * span; ++j) {
                const Vec& x = X[l][j];
                const Vec& c = C[l][j];
                total += pr * (x.dot(w.Q * x) + 2 * c.dot(w.S * x) + c.dot(w.R * c) + 2 * w.q.dot(x)
                               + 2 * w.r.dot(c));
                mx += pr * x;
                mc += pr * c;
            }
            total += mx.dot(w.Qb * mx) + 2 * mc.dot(w.Sb * mx) + mc.dot(w.Rb * mc);
        } else {
            for (std::size_t j = node0 * span; j < (node0 + 1) * span; ++j) {
                const Vec& x = X[l][j];
                total += pr * (x.dot(term.G * x) + 2 * term.g.dot(x));
                mx += pr * x;
            }
            total += mx.dot(term.Gb * mx);
        }
        span *= static_cast<std::size_t>(ps.B);
    }
    return total;
}

/// Forward states x' = A x + B c + sum_i (C_i x + D_i c) w_i under node controls.
using Step = std::function<Vec(int k, const Vec& x, const Vec& c, const Vec& w)>;

inline Nodes forward(const PathSpace& ps, const Vec& x0, const Nodes& C, const Step& step)
{
    Nodes X(ps.depth + 1);
    X[0] = {x0};
    for (int l = 0; l < ps.depth; ++l)
        for (std::size_t j = 0; j < X[l].size(); ++j)
            for (int b = 0; b < ps.B; ++b)
                X[l + 1].push_back(step(ps.t0 + l, X[l][j], C[l][j], ps.w[l][b]));
    return X;
}

/// Closed loop: the control at each node is a function of the node state.
inline void closed_loop(const PathSpace& ps, const Vec& x0, const std::function<Vec(int k, const Vec& x)>& law,
                        const Step& step, Nodes& X, Nodes& C)
{
    X.assign(ps.depth + 1, {});
    C.assign(ps.depth, {});
    X[0] = {x0};
    for (int l = 0; l < ps.depth; ++l)
        for (std::size_t j = 0; j < X[l].size(); ++j) {
            const Vec c = law(ps.t0 + l, X[l][j]);
            C[l].push_back(c);
            for (int b = 0; b < ps.B; ++b)
                X[l + 1].push_back(step(ps.t0 + l, X[l][j], c, ps.w[l][b]));
        }
}

inline Step lq_step(const fgame::LQProblem& lq)
{
    return [&lq](int k, const Vec& x, const Vec& c, const Vec& w) {
        Vec y = lq.A[k] * x + lq.B[k] * c;
        for (int i = 0; i < w.size(); ++i)
            y += (lq.C[k][i] * x + lq.D[k][i] * c) * w(i);
        return Vec(y);
    };
}

inline Step glq_step(const fgame::GLQProblem& g)
{
    return [&g](int k, const Vec& x, const Vec& c, const Vec& w) {
        const auto& d = g.dyn;
        const Vec u = c.head(d.m1), v = c.tail(d.m2);
        Vec y = d.A[k] * x + d.B1[k] * u + d.B2[k] * v;
        for (int i = 0; i < w.size(); ++i)
            y += (d.C[k][i] * x + d.D1[k][i] * u + d.D2[k][i] * v) * w(i);
        return Vec(y);
    };
}

/// J(k, X_node) of the original LQ problem, weights taken at initial time k.
inline double lq_cost(const fgame::LQProblem& lq, const PathSpace& ps, int level, std::size_t node, const Nodes& X,
                      const Nodes& U)
{
    const int k = ps.t0 + level;
    return node_cost(
        ps, level, node, X, U, [&](int l) { return from(lq.cost.stage(k, ps.t0 + l)); },
        from(lq.cost.terminal(k)));
}

/// E_t0 J(k, X_k) over all nodes of `level`.
inline double lq_expected_cost(const fgame::LQProblem& lq, const PathSpace& ps, int level, const Nodes& X,
                               const Nodes& U)
{
    double acc = 0;
    const std::size_t n = ps.count(level);
    for (std::size_t j = 0; j < n; ++j)
        acc += lq_cost(lq, ps, level, j, X, U) / static_cast<double>(n);
    return acc;
}

inline double glq_cost1(const fgame::GLQProblem& g, const PathSpace& ps, const Nodes& X, const Nodes& C)
{
    return node_cost(
        ps, 0, 0, X, C, [&](int l) { return from(g.cost1.stage(ps.t0, ps.t0 + l)); },
        from(g.cost1.terminal(ps.t0)));
}

inline double glq_cost2(const fgame::GLQProblem& g, const PathSpace& ps, int level, std::size_t node,
                        const Nodes& X, const Nodes& C)
{
    const int k = ps.t0 + level;
    return node_cost(
        ps, level, node, X, C, [&](int l) { return from(g.cost2.stage(k, ps.t0 + l)); },
        from(g.cost2.terminal(k)));
}

/// Open-loop equilibrium on the path space by finite differences of the
/// brute-force costs. Costs are quadratic in the node controls, so central
/// differences with unit step give exact gradients. Unknowns are all node
/// controls (u; v); equations are dJ1/du at every node and dJ2(node)/dv at
/// that node.
struct NashResult {
    Nodes X, C;
    double residual = 0;
};

inline NashResult finite_difference_nash(const fgame::GLQProblem& g, const Vec& y, const PathSpace& ps)
{
    const int m1 = g.dyn.m1, m2 = g.dyn.m2, m = m1 + m2;
    const Step step = glq_step(g);
    std::vector<std::pair<int, std::size_t>> slots;
    for (int l = 0; l < ps.depth; ++l)
        for (std::size_t j = 0; j < ps.count(l); ++j)
            slots.push_back({l, j});
    const int nu = static_cast<int>(slots.size()) * m;

    auto unpack = [&](const Vec& z) {
        Nodes C(ps.depth);
        for (std::size_t s = 0; s < slots.size(); ++s)
            C[slots[s].first].push_back(z.segment(static_cast<Eigen::Index>(s) * m, m));
        return C;
    };
    auto at = [&](const Vec& z, Eigen::Index i, double h) {
        Vec zz = z;
        zz(i) += h;
        return zz;
    };
    auto F = [&](const Vec& z) {
        Vec out(nu);
        for (std::size_t s = 0; s < slots.size(); ++s) {
            const auto [l, j] = slots[s];
            for (int r = 0; r < m; ++r) {
                const Eigen::Index i = static_cast<Eigen::Index>(s) * m + r;
                const Vec zp = at(z, i, 1.0), zm = at(z, i, -1.0);
                const Nodes Cp = unpack(zp), Cm = unpack(zm);
                const Nodes Xp = forward(ps, y, Cp, step), Xm = forward(ps, y, Cm, step);
                if (r < m1)
                    out(i) = 0.5 * (glq_cost1(g, ps, Xp, Cp) - glq_cost1(g, ps, Xm, Cm));
                else
                    out(i) = 0.5 * (glq_cost2(g, ps, l, j, Xp, Cp) - glq_cost2(g, ps, l, j, Xm, Cm));
            }
        }
        return out;
    };

    const Vec z0 = Vec::Zero(nu);
    const Vec f0 = F(z0);
    Mat J(nu, nu);
    for (int i = 0; i < nu; ++i)
        J.col(i) = F(at(z0, i, 1.0)) - f0;
    const Vec z = J.colPivHouseholderQr().solve(-f0);

    NashResult res;
    res.C = unpack(z);
    res.X = forward(ps, y, res.C, step);
    res.residual = F(z).cwiseAbs().maxCoeff();
    return res;
}

/// Augmented closed loop split into its blocks: the fictitious copy X^ is
/// driven by u, the real state X by v, both by the same noise.
struct AugmentedPaths {
    Nodes Xh, X, U, V;
};

inline AugmentedPaths augmented_paths(const fgame::LQProblem& lq, const PathSpace& ps, const Vec& x0,
                                      const std::function<Vec(int k, const Vec& z)>& law)
{
    const int n = lq.n, m = lq.m;
    const Step base = lq_step(lq);
    const Step step = [&](int k, const Vec& z, const Vec& c, const Vec& w) {
        Vec out(2 * n);
        out << base(k, z.head(n), c.head(m), w), base(k, z.tail(n), c.tail(m), w);
        return out;
    };
    Vec z0(2 * n);
    z0 << x0, x0;
    Nodes Z, C;
    closed_loop(ps, z0, law, step, Z, C);
    AugmentedPaths ap;
    ap.Xh.resize(Z.size());
    ap.X.resize(Z.size());
    ap.U.resize(C.size());
    ap.V.resize(C.size());
    for (std::size_t l = 0; l < Z.size(); ++l)
        for (const Vec& z : Z[l]) {
            ap.Xh[l].push_back(z.head(n));
            ap.X[l].push_back(z.tail(n));
        }
    for (std::size_t l = 0; l < C.size(); ++l)
        for (const Vec& c : C[l]) {
            ap.U[l].push_back(c.head(m));
            ap.V[l].push_back(c.tail(m));
        }
    return ap;
}

/// Open-loop time consistency. For each level, `directions` random
/// perturbations d of v at that level (one unit vector per node, all other
/// controls kept as realized) are compared node by node through J(k, X_node).
/// With J(v + d) - J(v) = 2 a + b and J(v - d) - J(v) = -2 a + b, a is the
/// first-order term and b the second-order one.
struct ConsistencyCheck {
    double max_first = 0;
    double min_second = 1e300;
};

inline ConsistencyCheck time_consistency(const fgame::LQProblem& lq, const PathSpace& ps, const Vec& x0,
                                         const Nodes& V, int directions, std::mt19937_64& rng)
{
    ConsistencyCheck out;
    const Step step = lq_step(lq);
    const Nodes X = forward(ps, x0, V, step);
    for (int l = 0; l < ps.depth; ++l) {
        std::vector<double> j0(ps.count(l));
        for (std::size_t j = 0; j < j0.size(); ++j)
            j0[j] = lq_cost(lq, ps, l, j, X, V);
        for (int d = 0; d < directions; ++d) {
            Nodes Vp = V, Vm = V;
            for (std::size_t j = 0; j < j0.size(); ++j) {
                Vec dir = gauss(rng, lq.m, 1, 1.0);
                dir /= dir.norm();
                Vp[l][j] += dir;
                Vm[l][j] -= dir;
            }
            const Nodes Xp = forward(ps, x0, Vp, step), Xm = forward(ps, x0, Vm, step);
            for (std::size_t j = 0; j < j0.size(); ++j) {
                const double jp = lq_cost(lq, ps, l, j, Xp, Vp), jm = lq_cost(lq, ps, l, j, Xm, Vm);
                out.max_first = std::max(out.max_first, std::abs(jp - jm) / 4);
                out.min_second = std::min(out.min_second, (jp + jm) / 2 - j0[j]);
            }
        }
    }
    return out;
}

// ---- random instances

inline Mat gauss(std::mt19937_64& rng, int r, int c, double scale)
{
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = nd(rng);
    return m;
}

inline Mat spd(std::mt19937_64& rng, int n, double floor)
{
    const Mat a = gauss(rng, n, n, 0.6);
    return a * a.transpose() + floor * Mat::Identity(n, n);
}

/// Random LQ with PSD weights, mean-field weights that keep the script
/// versions PSD, multiplicative noise and small linear terms.
inline fgame::LQProblem random_lq(std::mt19937_64& rng, int n, int m, int p, int N)
{
    fgame::LQProblem lq;
    lq.N = N;
    lq.n = n;
    lq.m = m;
    lq.noise.p = p;
    for (int k = 0; k < N; ++k) {
        lq.A.push_back(Mat::Identity(n, n) + gauss(rng, n, n, 0.3));
        lq.B.push_back(gauss(rng, n, m, 0.6));
        std::vector<Mat> C, D;
        for (int i = 0; i < p; ++i) {
            C.push_back(gauss(rng, n, n, 0.2));
            D.push_back(gauss(rng, n, m, 0.2));
        }
        lq.C.push_back(C);
        lq.D.push_back(D);
        const Mat s = gauss(rng, p, p, 0.5);
        lq.noise.deltas.push_back(s * s.transpose() + 0.3 * Mat::Identity(p, p));
    }
    lq.cost = fgame::zero_lq_cost(N, n, m, fgame::StorageKind::Stationary);
    for (int k = 0; k < N; ++k) {
        auto& s = lq.cost.stage(0, k);
        s.Q = spd(rng, n, 0.1);
        s.Qbar = 0.3 * spd(rng, n, 0.0);
        s.R = spd(rng, m, 0.5);
        s.Rbar = 0.2 * spd(rng, m, 0.0);
        s.q = gauss(rng, n, 1, 0.2);
    }
    auto& g = lq.cost.terminal(0);
    g.G = spd(rng, n, 0.5);
    g.Gbar = -0.3 * g.G;
    g.g = gauss(rng, n, 1, 0.2);
    return lq;
}

/// Random two-player game. Player 2 discounts hyperbolically in (k, l), so
/// its cost is genuinely double indexed.
inline fgame::GLQProblem random_glq(std::mt19937_64& rng, int n, int m1, int m2, int p, int N)
{
    fgame::GLQProblem g;
    auto& d = g.dyn;
    d.N = N;
    d.n = n;
    d.m1 = m1;
    d.m2 = m2;
    g.noise.p = p;
    for (int k = 0; k < N; ++k) {
        d.A.push_back(Mat::Identity(n, n) + gauss(rng, n, n, 0.3));
        d.B1.push_back(gauss(rng, n, m1, 0.6));
        d.B2.push_back(gauss(rng, n, m2, 0.6));
        std::vector<Mat> C, D1, D2;
        for (int i = 0; i < p; ++i) {
            C.push_back(gauss(rng, n, n, 0.2));
            D1.push_back(gauss(rng, n, m1, 0.2));
            D2.push_back(gauss(rng, n, m2, 0.2));
        }
        d.C.push_back(C);
        d.D1.push_back(D1);
        d.D2.push_back(D2);
        const Mat s = gauss(rng, p, p, 0.5);
        g.noise.deltas.push_back(s * s.transpose() + 0.3 * Mat::Identity(p, p));
    }
    const int m = m1 + m2;
    auto stage = [&](double scale) {
        fgame::StageCost s;
        s.Q = scale * spd(rng, n, 0.1);
        s.Qbar = 0.2 * scale * spd(rng, n, 0.0);
        s.S = gauss(rng, m, n, 0.1);
        s.Sbar = gauss(rng, m, n, 0.05);
        s.R = spd(rng, m, 0.8);
        s.Rbar = 0.2 * spd(rng, m, 0.0);
        s.q = gauss(rng, n, 1, 0.2);
        s.rho = gauss(rng, m, 1, 0.2);
        return s;
    };
    auto terminal = [&](double scale) {
        fgame::TerminalCost t;
        t.G = scale * spd(rng, n, 0.5);
        t.Gbar = -0.2 * t.G;
        t.g = gauss(rng, n, 1, 0.2);
        return t;
    };
    g.cost1 = fgame::PlayerCost(N, n, m1, m2, fgame::StorageKind::Stationary);
    for (int k = 0; k < N; ++k)
        g.cost1.stage(0, k) = stage(1.0);
    g.cost1.terminal(0) = terminal(1.0);

    g.cost2 = fgame::PlayerCost(N, n, m1, m2, fgame::StorageKind::DoubleIndexed);
    std::vector<fgame::StageCost> base;
    for (int l = 0; l < N; ++l)
        base.push_back(stage(1.0));
    const fgame::TerminalCost tb = terminal(1.0);
    for (int k = 0; k < N; ++k) {
        for (int l = k; l < N; ++l) {
            const double disc = 1.0 / (1.0 + 0.5 * (l - k));
            fgame::StageCost s = base[l];
            s.Q *= disc;
            s.Qbar *= disc;
            s.q *= disc;
            g.cost2.stage(k, l) = s;
        }
        fgame::TerminalCost t = tb;
        const double disc = 1.0 / (1.0 + 0.5 * (N - k));
        t.G *= disc;
        t.Gbar *= disc;
        t.g *= disc;
        g.cost2.terminal(k) = t;
    }
    return g;
}

}  // namespace oracle
