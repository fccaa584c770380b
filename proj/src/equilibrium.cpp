#include "fgame/equilibrium.hpp"

#include <algorithm>
#include <random>

namespace fgame {

namespace {

Mat stack_two(const Mat& H, int n)
{
    // H (x; x) = H S2 x
    return H.leftCols(n) + H.rightCols(n);
}

void check_tree_for(const GLQProblem& pr, const ScenarioTree& tree, int t)
{
    if (tree.t0 != t || tree.t0 + tree.depth != pr.dyn.N)
        throw TreeInvalid("tree must span stages " + std::to_string(t) + ".." + std::to_string(pr.dyn.N));
    check_tree(tree, pr.noise);
}

std::vector<Vec> level_means(const ScenarioTree& tree, int l, const std::vector<Vec>& v)
{
    return tree.condition(l, v, 0);
}

TerminalCost terminal_of(const PlayerCost& c, int t, bool linear)
{
    TerminalCost g = c.terminal(t);
    if (!linear)
        g.g.setZero();
    return g;
}

}  // namespace

EquilibriumLaw synthesize_law(const GLQProblem& pr, const RiccatiBundle& r, const Vec& y)
{
    const GLQDynamics& d = pr.dyn;
    if (r.N != d.N || r.n != d.n || r.m1 != d.m1 || r.m2 != d.m2)
        throw DimensionError("synthesize_law: bundle does not belong to this problem");
    if (y.size() != d.n)
        throw DimensionError("synthesize_law: initial state has length " + std::to_string(y.size()));
    EquilibriumLaw law;
    law.t = r.t;
    law.N = r.N;
    law.n = d.n;
    law.m1 = d.m1;
    law.m2 = d.m2;
    law.Kdev.resize(r.N);
    law.Kbar.resize(r.N);
    law.c.resize(r.N);
    law.mean_path.resize(r.N + 1);
    law.mean_path[r.t] = y;
    for (int k = r.t; k < r.N; ++k) {
        const StageBlocks& sb = r.stage[k];
        law.Kdev[k] = -sb.W_pinv * stack_two(sb.H, d.n);
        law.Kbar[k] = -sb.Ws_pinv * stack_two(sb.Hs, d.n);
        law.c[k] = -sb.Ws_pinv * sb.h;
        Mat B(d.n, d.m1 + d.m2);
        B << d.B1[k], d.B2[k];
        law.mean_path[k + 1] = (d.A[k] + B * law.Kbar[k]) * law.mean_path[k] + B * law.c[k];
    }
    return law;
}

NodeVecs tree_states(const GLQProblem& pr, const ScenarioTree& tree, const Vec& y, const NodeVecs& ctrl)
{
    const GLQDynamics& d = pr.dyn;
    NodeVecs X(tree.depth + 1);
    X[0] = {y};
    for (int l = 0; l < tree.depth; ++l) {
        const int k = tree.t0 + l;
        const int B = tree.branching(l);
        X[l + 1].resize(X[l].size() * B);
        for (std::size_t j = 0; j < X[l].size(); ++j) {
            const Vec& x = X[l][j];
            const Vec u = ctrl[l][j].head(d.m1);
            const Vec v = ctrl[l][j].tail(d.m2);
            const Vec drift = d.A[k] * x + d.B1[k] * u + d.B2[k] * v;
            for (int b = 0; b < B; ++b) {
                Vec nx = drift;
                for (int i = 0; i < tree.p; ++i) {
                    const double wi = tree.w[l][b](i);
                    if (wi != 0.0)
                        nx += (d.C[k][i] * x + d.D1[k][i] * u + d.D2[k][i] * v) * wi;
                }
                X[l + 1][j * B + b] = nx;
            }
        }
    }
    return X;
}

TreeSolution fill_tree(const GLQProblem& pr, const ScenarioTree& tree, const Vec& y, const NodeVecs& ctrl)
{
    const GLQDynamics& d = pr.dyn;
    const int t = tree.t0, D = tree.depth, N = d.N;
    TreeSolution ts;
    ts.t = t;
    ts.ctrl = ctrl;
    ts.X = tree_states(pr, tree, y, ctrl);

    // Backward pass shared by Y and each Z^kk: given the value at the next
    // level, returns E_l(V) and E_l(V w^i) per node.
    auto child_moments = [&](int l, const std::vector<Vec>& next, std::size_t j,
                             Vec& ev, std::vector<Vec>& evw) {
        const int B = tree.branching(l);
        ev = Vec::Zero(next[0].size());
        evw.assign(tree.p, Vec::Zero(next[0].size()));
        for (int b = 0; b < B; ++b) {
            const double pr_b = tree.prob[l][b];
            const Vec& z = next[j * B + b];
            ev += pr_b * z;
            for (int i = 0; i < tree.p; ++i)
                evw[i] += pr_b * tree.w[l][b](i) * z;
        }
    };

    // Y: conditional means are with respect to the root.
    ts.Y.resize(D + 1);
    {
        const TerminalCost& g = pr.cost1.terminal(t);
        const Vec mX = level_means(tree, D, ts.X[D])[0];
        ts.Y[D].resize(ts.X[D].size());
        for (std::size_t j = 0; j < ts.X[D].size(); ++j)
            ts.Y[D][j] = g.G * ts.X[D][j] + g.Gbar * mX + g.g;
        for (int l = D - 1; l >= 0; --l) {
            const int k = t + l;
            const StageCost& s = pr.cost1.stage(t, k);
            const Vec mx = level_means(tree, l, ts.X[l])[0];
            const Vec mc = level_means(tree, l, ctrl[l])[0];
            ts.Y[l].resize(ts.X[l].size());
            Vec ev;
            std::vector<Vec> evw;
            for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
                child_moments(l, ts.Y[l + 1], j, ev, evw);
                Vec y0 = s.Q * ts.X[l][j] + s.Qbar * mx + s.S.transpose() * ctrl[l][j]
                    + s.Sbar.transpose() * mc + d.A[k].transpose() * ev + s.q;
                for (int i = 0; i < tree.p; ++i)
                    y0 += d.C[k][i].transpose() * evw[i];
                ts.Y[l][j] = y0;
            }
        }
    }

    // Z^kk for each self kk: conditional means given the level-kk ancestor.
    ts.Z.resize(D);
    for (int kk = 0; kk < D; ++kk) {
        const int sk = t + kk;
        NodeVecs& Z = ts.Z[kk];
        Z.resize(D + 1);
        const TerminalCost& g = pr.cost2.terminal(sk);
        {
            const std::vector<Vec> mX = tree.condition(D, ts.X[D], kk);
            Z[D].resize(ts.X[D].size());
            for (std::size_t j = 0; j < ts.X[D].size(); ++j)
                Z[D][j] = g.G * ts.X[D][j] + g.Gbar * mX[tree.ancestor(D, j, kk)] + g.g;
        }
        for (int l = D - 1; l >= kk; --l) {
            const int k = t + l;
            const StageCost& s = pr.cost2.stage(sk, k);
            const std::vector<Vec> mx = tree.condition(l, ts.X[l], kk);
            const std::vector<Vec> mc = tree.condition(l, ctrl[l], kk);
            Z[l].resize(ts.X[l].size());
            Vec ev;
            std::vector<Vec> evw;
            for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
                const std::size_t a = tree.ancestor(l, j, kk);
                child_moments(l, Z[l + 1], j, ev, evw);
                Vec z = s.Q * ts.X[l][j] + s.Qbar * mx[a] + s.S.transpose() * ctrl[l][j]
                    + s.Sbar.transpose() * mc[a] + d.A[k].transpose() * ev + s.q;
                for (int i = 0; i < tree.p; ++i)
                    z += d.C[k][i].transpose() * evw[i];
                Z[l][j] = z;
            }
        }
    }
    (void)N;
    return ts;
}

TreeSolution solve_on_tree(const GLQProblem& pr, const EquilibriumLaw& law, const ScenarioTree& tree)
{
    check_tree_for(pr, tree, law.t);
    const GLQDynamics& d = pr.dyn;
    NodeVecs ctrl(tree.depth);
    NodeVecs X(tree.depth + 1);
    X[0] = {law.mean_path[law.t]};
    // states and controls must be generated together since the law is feedback
    for (int l = 0; l < tree.depth; ++l) {
        const int k = tree.t0 + l;
        const int B = tree.branching(l);
        ctrl[l].resize(X[l].size());
        X[l + 1].resize(X[l].size() * B);
        for (std::size_t j = 0; j < X[l].size(); ++j) {
            const Vec& x = X[l][j];
            ctrl[l][j] = law.control(k, x);
            const Vec u = ctrl[l][j].head(d.m1);
            const Vec v = ctrl[l][j].tail(d.m2);
            const Vec drift = d.A[k] * x + d.B1[k] * u + d.B2[k] * v;
            for (int b = 0; b < B; ++b) {
                Vec nx = drift;
                for (int i = 0; i < tree.p; ++i)
                    nx += (d.C[k][i] * x + d.D1[k][i] * u + d.D2[k][i] * v) * tree.w[l][b](i);
                X[l + 1][j * B + b] = nx;
            }
        }
    }
    return fill_tree(pr, tree, law.mean_path[law.t], ctrl);
}

double StationarityResidual::max() const
{
    double m = 0;
    for (double v : player1)
        m = std::max(m, v);
    for (double v : player2)
        m = std::max(m, v);
    return m;
}

NodeVecs stationarity_vectors(const GLQProblem& pr, const ScenarioTree& tree, const TreeSolution& ts)
{
    const GLQDynamics& d = pr.dyn;
    const int t = tree.t0, D = tree.depth, m1 = d.m1, m2 = d.m2;
    NodeVecs out(D);
    for (int l = 0; l < D; ++l) {
        const int k = t + l;
        const int B = tree.branching(l);
        const StageCost& s1 = pr.cost1.stage(t, k);
        const StageCost& s2 = pr.cost2.stage(k, k);
        const Vec mx = level_means(tree, l, ts.X[l])[0];
        const Vec mc = level_means(tree, l, ts.ctrl[l])[0];
        const Mat S2s = s2.S + s2.Sbar;
        const Mat R2s = s2.R + s2.Rbar;
        out[l].resize(ts.X[l].size());
        for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
            const Vec& x = ts.X[l][j];
            const Vec& c = ts.ctrl[l][j];
            Vec r1 = (s1.S * x + s1.Sbar * mx + s1.R * c + s1.Rbar * mc + s1.rho).head(m1);
            Vec r2 = (S2s * x + R2s * c + s2.rho).tail(m2);
            for (int b = 0; b < B; ++b) {
                const double pb = tree.prob[l][b];
                const std::size_t ch = j * B + b;
                const Vec& y = ts.Y[l + 1][ch];
                const Vec& z = ts.Z[l][l + 1][ch];
                Vec wy = d.B1[k].transpose() * y;
                Vec wz = d.B2[k].transpose() * z;
                for (int i = 0; i < tree.p; ++i) {
                    const double wi = tree.w[l][b](i);
                    wy += wi * d.D1[k][i].transpose() * y;
                    wz += wi * d.D2[k][i].transpose() * z;
                }
                r1 += pb * wy;
                r2 += pb * wz;
            }
            out[l][j].resize(m1 + m2);
            out[l][j] << r1, r2;
        }
    }
    return out;
}

StationarityResidual stationarity_residual(const GLQProblem& pr, const ScenarioTree& tree,
                                           const TreeSolution& ts)
{
    const int D = tree.depth, m1 = pr.dyn.m1, m2 = pr.dyn.m2;
    const NodeVecs r = stationarity_vectors(pr, tree, ts);
    StationarityResidual res;
    res.player1.assign(D, 0.0);
    res.player2.assign(D, 0.0);
    for (int l = 0; l < D; ++l)
        for (const Vec& v : r[l]) {
            if (m1 > 0)
                res.player1[l] = std::max(res.player1[l], v.head(m1).cwiseAbs().maxCoeff());
            if (m2 > 0)
                res.player2[l] = std::max(res.player2[l], v.tail(m2).cwiseAbs().maxCoeff());
        }
    return res;
}

AdjointError adjoint_closed_form_error(const RiccatiBundle& r, const ScenarioTree& tree,
                                       const TreeSolution& ts)
{
    AdjointError e;
    const int t = tree.t0, D = tree.depth;
    std::vector<Vec> mt(D + 1);
    for (int l = 0; l <= D; ++l)
        mt[l] = level_means(tree, l, ts.X[l])[0];
    for (int l = 0; l <= D; ++l) {
        const int k = t + l;
        for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
            const Vec cf = r.P[k] * (ts.X[l][j] - mt[l]) + r.Ps[k] * mt[l] + r.sigma[k];
            e.Y = std::max(e.Y, (cf - ts.Y[l][j]).cwiseAbs().maxCoeff());
        }
    }
    for (int kk = 0; kk < D; ++kk) {
        const int sk = t + kk;
        for (int l = kk; l <= D; ++l) {
            const int k = t + l;
            const std::vector<Vec> mk = tree.condition(l, ts.X[l], kk);
            for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
                const Vec& ek = mk[tree.ancestor(l, j, kk)];
                const Vec cf = r.T.at(sk, k) * (ts.X[l][j] - ek) + r.Ts.at(sk, k) * ek
                    + r.Tt.at(sk, k) * mt[l] + r.xi.at(sk, k);
                e.Z = std::max(e.Z, (cf - ts.Z[kk][l][j]).cwiseAbs().maxCoeff());
            }
        }
    }
    return e;
}

bool PointwiseRangeReport::ok() const
{
    for (bool b : mean_ok)
        if (!b)
            return false;
    for (std::size_t f : deviation_fail)
        if (f)
            return false;
    return true;
}

PointwiseRangeReport check_pointwise_ranges(const GLQProblem& pr, const RiccatiBundle& r,
                                            const EquilibriumLaw& law, const ScenarioTree& tree,
                                            const Tolerances& tol)
{
    check_tree_for(pr, tree, r.t);
    PointwiseRangeReport rep;
    const TreeSolution ts = solve_on_tree(pr, law, tree);
    const int n = pr.dyn.n;
    for (int l = 0; l < tree.depth; ++l) {
        const int k = r.t + l;
        const StageBlocks& sb = r.stage[k];
        const Vec& m = law.mean_path[k];
        rep.mean_ok.push_back(in_range(sb.Ws, Vec(stack_two(sb.Hs, n) * m + sb.h), tol));
        const Mat Proj = sb.W * sb.W_pinv;
        const Mat H2 = stack_two(sb.H, n);
        std::size_t fails = 0;
        for (std::size_t j = 0; j < ts.X[l].size(); ++j) {
            const Vec x = H2 * (ts.X[l][j] - m);
            if ((x - Proj * x).norm() > tol.range_rtol * (1.0 + x.norm()))
                ++fails;
        }
        rep.deviation_fail.push_back(fails);
    }
    return rep;
}

double tree_cost1(const GLQProblem& pr, const ScenarioTree& tree, const NodeVecs& X,
                  const NodeVecs& ctrl, bool linear)
{
    const int t = tree.t0;
    return subtree_cost(tree, 0, 0, X, ctrl,
                        [&](int l) -> const StageCost& { return pr.cost1.stage(t, t + l); },
                        terminal_of(pr.cost1, t, linear), linear);
}

double tree_cost2(const GLQProblem& pr, const ScenarioTree& tree, int level, std::size_t node,
                  const NodeVecs& X, const NodeVecs& ctrl, bool linear)
{
    const int t = tree.t0, sk = t + level;
    return subtree_cost(tree, level, node, X, ctrl,
                        [&](int l) -> const StageCost& { return pr.cost2.stage(sk, t + l); },
                        terminal_of(pr.cost2, sk, linear), linear);
}

namespace {

NodeVecs zero_controls(const ScenarioTree& tree, int m)
{
    NodeVecs c(tree.depth);
    for (int l = 0; l < tree.depth; ++l)
        c[l].assign(tree.nodes(l), Vec::Zero(m));
    return c;
}

}  // namespace

double variation_cost1(const GLQProblem& pr, const ScenarioTree& tree, const NodeVecs& u)
{
    const int m1 = pr.dyn.m1, m = m1 + pr.dyn.m2;
    NodeVecs ctrl = zero_controls(tree, m);
    for (int l = 0; l < tree.depth; ++l)
        for (std::size_t j = 0; j < ctrl[l].size(); ++j)
            ctrl[l][j].head(m1) = u[l][j];
    const NodeVecs alpha = tree_states(pr, tree, Vec::Zero(pr.dyn.n), ctrl);
    return tree_cost1(pr, tree, alpha, ctrl, false);
}

double completed_square_cost1(const GLQProblem& pr, const ConvexityBundle& c,
                              const ScenarioTree& tree, const NodeVecs& u)
{
    const int m1 = pr.dyn.m1, m = m1 + pr.dyn.m2;
    NodeVecs ctrl = zero_controls(tree, m);
    for (int l = 0; l < tree.depth; ++l)
        for (std::size_t j = 0; j < ctrl[l].size(); ++j)
            ctrl[l][j].head(m1) = u[l][j];
    const NodeVecs alpha = tree_states(pr, tree, Vec::Zero(pr.dyn.n), ctrl);
    double total = 0;
    for (int l = 0; l < tree.depth; ++l) {
        const int k = tree.t0 + l;
        const Vec ma = level_means(tree, l, alpha[l])[0];
        const Vec mu = level_means(tree, l, u[l])[0];
        const Mat MOM = c.M[k].transpose() * pinv(c.O[k]) * c.M[k];
        for (std::size_t j = 0; j < alpha[l].size(); ++j) {
            const double pr_j = tree.node_prob(l, j);
            const Vec da = alpha[l][j] - ma;
            const Vec du = u[l][j] - mu;
            total += pr_j * (da.dot(MOM * da) + 2 * du.dot(c.M[k] * da) + du.dot(c.O[k] * du));
        }
        const Mat MOMs = c.Ms[k].transpose() * pinv(c.Os[k]) * c.Ms[k];
        total += ma.dot(MOMs * ma) + 2 * mu.dot(c.Ms[k] * ma) + mu.dot(c.Os[k] * mu);
    }
    return total;
}

double variation_cost2(const GLQProblem& pr, const ScenarioTree& tree, int level, std::size_t node,
                       const Vec& v)
{
    const int m1 = pr.dyn.m1, m = m1 + pr.dyn.m2;
    NodeVecs ctrl = zero_controls(tree, m);
    ctrl[level][node].tail(pr.dyn.m2) = v;
    const NodeVecs beta = tree_states(pr, tree, Vec::Zero(pr.dyn.n), ctrl);
    return tree_cost2(pr, tree, level, node, beta, ctrl, false);
}

InequalityReport verify_equilibrium_inequalities(const GLQProblem& pr, const ScenarioTree& tree,
                                                 const TreeSolution& ts, int directions,
                                                 std::uint64_t seed)
{
    const int m1 = pr.dyn.m1, m2 = pr.dyn.m2;
    const Vec y = ts.X[0][0];
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto draw = [&](int m) {
        Vec v(m);
        for (int i = 0; i < m; ++i)
            v(i) = nd(rng);
        return v;
    };

    InequalityReport rep;
    rep.directions = directions;
    rep.min_second1 = rep.min_second2 = std::numeric_limits<double>::infinity();
    const double J1 = tree_cost1(pr, tree, ts.X, ts.ctrl);
    std::vector<std::vector<double>> J2(tree.depth);
    for (int l = 0; l < tree.depth; ++l)
        for (std::size_t j = 0; j < tree.nodes(l); ++j)
            J2[l].push_back(tree_cost2(pr, tree, l, j, ts.X, ts.ctrl));

    for (int s = 0; s < directions; ++s) {
        if (m1 > 0) {
            NodeVecs du(tree.depth);
            NodeVecs ctrl = ts.ctrl;
            for (int l = 0; l < tree.depth; ++l)
                for (std::size_t j = 0; j < tree.nodes(l); ++j) {
                    du[l].push_back(draw(m1));
                    ctrl[l][j].head(m1) += du[l][j];
                }
            const NodeVecs X = tree_states(pr, tree, y, ctrl);
            const double second = variation_cost1(pr, tree, du);
            const double first = 0.5 * (tree_cost1(pr, tree, X, ctrl) - J1 - second);
            rep.max_first1 = std::max(rep.max_first1, std::abs(first));
            rep.min_second1 = std::min(rep.min_second1, second);
        }
        if (m2 > 0) {
            for (int l = 0; l < tree.depth; ++l) {
                NodeVecs ctrl = ts.ctrl;
                std::vector<Vec> dv;
                for (std::size_t j = 0; j < tree.nodes(l); ++j) {
                    dv.push_back(draw(m2));
                    ctrl[l][j].tail(m2) += dv[j];
                }
                const NodeVecs X = tree_states(pr, tree, y, ctrl);
                // subtrees are disjoint, so one variation pass serves every node
                NodeVecs vctrl = zero_controls(tree, m1 + m2);
                for (std::size_t j = 0; j < tree.nodes(l); ++j)
                    vctrl[l][j].tail(m2) = dv[j];
                const NodeVecs beta = tree_states(pr, tree, Vec::Zero(pr.dyn.n), vctrl);
                for (std::size_t j = 0; j < tree.nodes(l); ++j) {
                    const double second = tree_cost2(pr, tree, l, j, beta, vctrl, false);
                    const double first = 0.5 * (tree_cost2(pr, tree, l, j, X, ctrl) - J2[l][j] - second);
                    rep.max_first2 = std::max(rep.max_first2, std::abs(first));
                    rep.min_second2 = std::min(rep.min_second2, second);
                }
            }
        }
    }
    if (m1 == 0 || directions == 0)
        rep.min_second1 = 0;
    if (m2 == 0 || directions == 0)
        rep.min_second2 = 0;
    return rep;
}

}  // namespace fgame
