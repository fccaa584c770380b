#include "fgame/fictitious.hpp"

namespace fgame {

namespace {

Mat blockdiag(const Mat& a, const Mat& b)
{
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

Mat upper(const Mat& b, int n)
{
    Mat out = Mat::Zero(2 * n, b.cols());
    out.topRows(n) = b;
    return out;
}

Mat lower(const Mat& b, int n)
{
    Mat out = Mat::Zero(2 * n, b.cols());
    out.bottomRows(n) = b;
    return out;
}

Vec upper(const Vec& v)
{
    Vec out = Vec::Zero(2 * v.size());
    out.head(v.size()) = v;
    return out;
}

Vec lower(const Vec& v)
{
    Vec out = Vec::Zero(2 * v.size());
    out.tail(v.size()) = v;
    return out;
}

/// [[a, b], [b^T, c]] for the stacked (u; v) control.
Mat control_block(const Mat& a, const Mat& b, const Mat& c)
{
    const Eigen::Index m = a.rows();
    Mat out(2 * m, 2 * m);
    out << a, b, b.transpose(), c;
    return out;
}

PlayerLaw rows_of(const EquilibriumLaw& law, int first, int count)
{
    PlayerLaw p;
    p.Kdev.resize(law.N);
    p.Kbar.resize(law.N);
    p.c.resize(law.N);
    for (int k = law.t; k < law.N; ++k) {
        p.Kdev[k] = law.Kdev[k].middleRows(first, count);
        p.Kbar[k] = law.Kbar[k].middleRows(first, count);
        p.c[k] = law.c[k].segment(first, count);
    }
    return p;
}

}  // namespace

Punishment Punishment::constant(int N, double mu, const Mat& psi)
{
    return Punishment{std::vector<double>(N, mu), std::vector<Mat>(N, psi)};
}

GLQProblem augment(const LQProblem& lq, const Punishment& pu, const AugmentOptions& opt)
{
    const ValidationReport vr = validate(lq);
    if (!vr.ok())
        throw DimensionError("augment: invalid LQ problem\n" + vr.str());
    const int N = lq.N, n = lq.n, m = lq.m, p = lq.p();
    if (static_cast<int>(pu.mus.size()) != N || static_cast<int>(pu.psis.size()) != N)
        throw DimensionError("augment: punishment must have " + std::to_string(N) + " stages");
    for (int k = 0; k < N; ++k) {
        if (pu.psis[k].rows() != m || pu.psis[k].cols() != m)
            throw DimensionError("augment: Psi[" + std::to_string(k) + "] must be " + std::to_string(m)
                                 + "x" + std::to_string(m));
        if (pu.mus[k] < 0 && !opt.allow_negative_mu)
            throw std::invalid_argument("augment: negative punishment intensity at stage " + std::to_string(k));
    }

    GLQProblem g;
    g.noise = lq.noise;
    GLQDynamics& d = g.dyn;
    d.N = N;
    d.n = 2 * n;
    d.m1 = m;
    d.m2 = m;
    for (int k = 0; k < N; ++k) {
        d.A.push_back(blockdiag(lq.A[k], lq.A[k]));
        d.B1.push_back(upper(lq.B[k], n));
        d.B2.push_back(lower(lq.B[k], n));
        std::vector<Mat> C, D1, D2;
        for (int i = 0; i < p; ++i) {
            C.push_back(blockdiag(lq.C[k][i], lq.C[k][i]));
            D1.push_back(upper(lq.D[k][i], n));
            D2.push_back(lower(lq.D[k][i], n));
        }
        d.C.push_back(C);
        d.D1.push_back(D1);
        d.D2.push_back(D2);
    }

    const Mat zn = Mat::Zero(n, n), zm = Mat::Zero(m, m);
    const double off = opt.literal_upsilon ? 1.0 : -1.0;
    g.cost1 = PlayerCost(N, 2 * n, m, m, lq.cost.kind());
    g.cost2 = PlayerCost(N, 2 * n, m, m, StorageKind::DoubleIndexed);
    for (int t = 0; t < N; ++t) {
        const LQTerminalCost& lt = lq.cost.terminal(t);
        if (lq.cost.kind() == StorageKind::DoubleIndexed || t == 0) {
            TerminalCost& t1 = g.cost1.terminal(t);
            t1.G = blockdiag(lt.G, zn);
            t1.Gbar = blockdiag(lt.Gbar, zn);
            t1.g = upper(lt.g);
        }
        TerminalCost& t2 = g.cost2.terminal(t);
        t2.G = blockdiag(zn, lt.G);
        t2.Gbar = blockdiag(zn, lt.Gbar);
        t2.g = lower(lt.g);
        for (int k = t; k < N; ++k) {
            const LQStageCost& ls = lq.cost.stage(t, k);
            const Mat U = pu.mus[k] * pu.psis[k];
            if (lq.cost.kind() == StorageKind::DoubleIndexed || t == 0) {
                StageCost& s1 = g.cost1.stage(t, k);
                s1.Q = blockdiag(ls.Q, zn);
                s1.Qbar = blockdiag(ls.Qbar, zn);
                s1.R = control_block(ls.R + U, off * U, U);
                s1.Rbar = blockdiag(ls.Rbar, zm);
                s1.q = upper(ls.q);
            }
            StageCost& s2 = g.cost2.stage(t, k);
            s2.Q = blockdiag(zn, ls.Q);
            s2.Qbar = blockdiag(zn, ls.Qbar);
            // the penalty binds only the current self
            s2.R = k == t ? control_block(U, off * U, ls.R + U) : blockdiag(zm, ls.R);
            s2.Rbar = blockdiag(zm, ls.Rbar);
            s2.q = lower(ls.q);
        }
    }
    return g;
}

PlayerLaw SelfCoordinationSolution::real() const
{
    return rows_of(law, m, m);
}

PlayerLaw SelfCoordinationSolution::fictitious() const
{
    return rows_of(law, 0, m);
}

SelfCoordinationSolution self_coordination(const LQProblem& lq, const Punishment& punish, int t,
                                           const Vec& x, const Tolerances& tol,
                                           const AugmentOptions& opt)
{
    if (x.size() != lq.n)
        throw DimensionError("self_coordination: initial state has length " + std::to_string(x.size()));
    SelfCoordinationSolution s;
    s.n = lq.n;
    s.m = lq.m;
    s.t = t;
    s.game = augment(lq, punish, opt);
    s.bundle = backward_pass(s.game, t, tol, opt.recursion);
    s.convexity = convexity_pass(s.game, t, tol);
    s.report = check_solvability(s.bundle, s.convexity, tol);
    Vec xa(2 * lq.n);
    xa << x, x;
    s.law = synthesize_law(s.game, s.bundle, xa);
    return s;
}

}  // namespace fgame
