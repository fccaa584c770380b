#include "fgame/model.hpp"

#include <sstream>

namespace fgame {

PlayerCost::PlayerCost(int N, int n, int m1, int m2, StorageKind kind)
    : WeightTable(N, kind), n_(n), m1_(m1), m2_(m2)
{
    const int m = m1 + m2;
    StageCost s{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(m, n), Mat::Zero(m, n),
                Mat::Zero(m, m), Mat::Zero(m, m), Vec::Zero(n), Vec::Zero(m)};
    TerminalCost g{Mat::Zero(n, n), Mat::Zero(n, n), Vec::Zero(n)};
    for (int t = 0; t < N; ++t) {
        terminal(t) = g;
        for (int k = t; k < N; ++k)
            stage(t, k) = s;
    }
}

Mat PlayerCost::block(Block b, int t, int k) const
{
    if (b == Block::G)
        return terminal(t).G;
    if (b == Block::Gbar)
        return terminal(t).Gbar;
    const StageCost& s = stage(t, k);
    const int a = m1_, c = m2_;
    switch (b) {
    case Block::Q: return s.Q;
    case Block::Qbar: return s.Qbar;
    case Block::S1: return s.S.topRows(a);
    case Block::S2: return s.S.bottomRows(c);
    case Block::Sbar1: return s.Sbar.topRows(a);
    case Block::Sbar2: return s.Sbar.bottomRows(c);
    case Block::R11: return s.R.topLeftCorner(a, a);
    case Block::R12: return s.R.topRightCorner(a, c);
    case Block::R21: return s.R.bottomLeftCorner(c, a);
    case Block::R22: return s.R.bottomRightCorner(c, c);
    case Block::Rbar11: return s.Rbar.topLeftCorner(a, a);
    case Block::Rbar12: return s.Rbar.topRightCorner(a, c);
    case Block::Rbar21: return s.Rbar.bottomLeftCorner(c, a);
    case Block::Rbar22: return s.Rbar.bottomRightCorner(c, c);
    default: break;
    }
    throw std::logic_error("unhandled block");
}

Vec PlayerCost::linear(Linear w, int t, int k) const
{
    switch (w) {
    case Linear::g: return terminal(t).g;
    case Linear::q: return stage(t, k).q;
    case Linear::rho1: return stage(t, k).rho.head(m1_);
    case Linear::rho2: return stage(t, k).rho.tail(m2_);
    }
    throw std::logic_error("unhandled linear weight");
}

PlayerCost PlayerCost::lifted() const
{
    return PlayerCost(WeightTable::lifted(), n_, m1_, m2_);
}

Mat script_weight(const PlayerCost& cost, Block which, int t, int k)
{
    Block bar;
    switch (which) {
    case Block::Q: bar = Block::Qbar; break;
    case Block::S1: bar = Block::Sbar1; break;
    case Block::S2: bar = Block::Sbar2; break;
    case Block::R11: bar = Block::Rbar11; break;
    case Block::R12: bar = Block::Rbar12; break;
    case Block::R21: bar = Block::Rbar21; break;
    case Block::R22: bar = Block::Rbar22; break;
    case Block::G: bar = Block::Gbar; break;
    default:
        throw std::invalid_argument("script_weight: expects a plain block name");
    }
    return cost.block(which, t, k) + cost.block(bar, t, k);
}

PlayerCost stationary_lift(const PlayerCost& cost)
{
    return cost.lifted();
}

LQCost zero_lq_cost(int N, int n, int m, StorageKind kind)
{
    return LQCost(N, kind,
                  LQStageCost{Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(m, m), Mat::Zero(m, m), Vec::Zero(n)},
                  LQTerminalCost{Mat::Zero(n, n), Mat::Zero(n, n), Vec::Zero(n)});
}

std::string ValidationReport::str() const
{
    std::ostringstream os;
    for (const auto& s : issues)
        os << s << "\n";
    return os.str();
}

namespace {

struct Checker {
    std::vector<std::string>& out;

    void shape(const Mat& m, Eigen::Index r, Eigen::Index c, const std::string& where)
    {
        if (m.rows() != r || m.cols() != c) {
            std::ostringstream os;
            os << where << ": expected " << r << "x" << c << ", got " << m.rows() << "x" << m.cols();
            out.push_back(os.str());
        } else if (!m.allFinite()) {
            out.push_back(where + ": non-finite entry");
        }
    }
    void vec(const Vec& v, Eigen::Index n, const std::string& where)
    {
        if (v.size() != n)
            out.push_back(where + ": expected length " + std::to_string(n) + ", got "
                          + std::to_string(v.size()));
        else if (!v.allFinite())
            out.push_back(where + ": non-finite entry");
    }
    void sym(const Mat& m, const std::string& where)
    {
        if (m.rows() == m.cols() && m.allFinite() && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + m.cwiseAbs().maxCoeff()))
            out.push_back(where + ": not symmetric");
    }
    void psd(const Mat& m, const std::string& where)
    {
        if (m.rows() == m.cols() && m.allFinite() && min_eigenvalue(m) < -1e-12 * (1 + m.norm()))
            out.push_back(where + ": not positive semidefinite");
    }
};

std::string at(const std::string& what, int k)
{
    return what + "[" + std::to_string(k) + "]";
}

std::string at(const std::string& who, int t, int k, const std::string& what)
{
    return who + " (t=" + std::to_string(t) + ", k=" + std::to_string(k) + ") " + what;
}

void check_cost(Checker& c, const PlayerCost& pc, const std::string& who, int N, int n, int m1, int m2)
{
    if (pc.horizon() != N) {
        c.out.push_back(who + ": horizon " + std::to_string(pc.horizon()) + " != " + std::to_string(N));
        return;
    }
    if (pc.n() != n || pc.m1() != m1 || pc.m2() != m2) {
        c.out.push_back(who + ": declared dimensions disagree with dynamics");
        return;
    }
    const int m = m1 + m2;
    for (int t = 0; t < N; ++t) {
        if (pc.kind() == StorageKind::Stationary && t > 0)
            break;
        const TerminalCost& g = pc.terminal(t);
        c.shape(g.G, n, n, at(who, t, N, "G"));
        c.shape(g.Gbar, n, n, at(who, t, N, "Gbar"));
        c.vec(g.g, n, at(who, t, N, "g"));
        c.sym(g.G, at(who, t, N, "G"));
        c.sym(g.Gbar, at(who, t, N, "Gbar"));
        for (int k = t; k < N; ++k) {
            const StageCost& s = pc.stage(t, k);
            c.shape(s.Q, n, n, at(who, t, k, "Q"));
            c.shape(s.Qbar, n, n, at(who, t, k, "Qbar"));
            c.shape(s.S, m, n, at(who, t, k, "S"));
            c.shape(s.Sbar, m, n, at(who, t, k, "Sbar"));
            c.shape(s.R, m, m, at(who, t, k, "R"));
            c.shape(s.Rbar, m, m, at(who, t, k, "Rbar"));
            c.vec(s.q, n, at(who, t, k, "q"));
            c.vec(s.rho, m, at(who, t, k, "rho"));
            c.sym(s.Q, at(who, t, k, "Q"));
            c.sym(s.Qbar, at(who, t, k, "Qbar"));
            // symmetry of R covers R^{(21)} = R^{(12)T}
            c.sym(s.R, at(who, t, k, "R"));
            c.sym(s.Rbar, at(who, t, k, "Rbar"));
        }
    }
}

}  // namespace

ValidationReport validate(const NoiseSpec& noise, int N)
{
    ValidationReport r;
    Checker c{r.issues};
    if (noise.p < 0)
        r.issues.push_back("noise: negative dimension");
    if (static_cast<int>(noise.deltas.size()) != N) {
        r.issues.push_back("noise: expected " + std::to_string(N) + " stage covariances, got "
                           + std::to_string(noise.deltas.size()));
        return r;
    }
    for (int k = 0; k < N; ++k) {
        c.shape(noise.deltas[k], noise.p, noise.p, at("noise delta", k));
        c.sym(noise.deltas[k], at("noise delta", k));
        c.psd(noise.deltas[k], at("noise delta", k));
    }
    return r;
}

ValidationReport validate(const GLQProblem& p)
{
    ValidationReport r = validate(p.noise, p.dyn.N);
    Checker c{r.issues};
    const GLQDynamics& d = p.dyn;
    const int N = d.N, n = d.n, m1 = d.m1, m2 = d.m2, np = p.noise.p;
    if (N < 1 || n < 1 || m1 < 0 || m2 < 0) {
        r.issues.push_back("dynamics: invalid dimensions");
        return r;
    }
    auto len = [&](std::size_t got, const std::string& what) {
        if (static_cast<int>(got) != N) {
            r.issues.push_back("dynamics " + what + ": expected " + std::to_string(N) + " stages");
            return false;
        }
        return true;
    };
    if (len(d.A.size(), "A") && len(d.B1.size(), "B1") && len(d.B2.size(), "B2")
        && len(d.C.size(), "C") && len(d.D1.size(), "D1") && len(d.D2.size(), "D2")) {
        for (int k = 0; k < N; ++k) {
            c.shape(d.A[k], n, n, at("A", k));
            c.shape(d.B1[k], n, m1, at("B1", k));
            c.shape(d.B2[k], n, m2, at("B2", k));
            if (static_cast<int>(d.C[k].size()) != np || static_cast<int>(d.D1[k].size()) != np
                || static_cast<int>(d.D2[k].size()) != np) {
                r.issues.push_back(at("noise channels", k) + ": expected " + std::to_string(np));
                continue;
            }
            for (int i = 0; i < np; ++i) {
                c.shape(d.C[k][i], n, n, at("C", k) + "[" + std::to_string(i) + "]");
                c.shape(d.D1[k][i], n, m1, at("D1", k) + "[" + std::to_string(i) + "]");
                c.shape(d.D2[k][i], n, m2, at("D2", k) + "[" + std::to_string(i) + "]");
            }
        }
    }
    check_cost(c, p.cost1, "player 1", N, n, m1, m2);
    check_cost(c, p.cost2, "player 2", N, n, m1, m2);
    return r;
}

ValidationReport validate(const LQProblem& p)
{
    ValidationReport r = validate(p.noise, p.N);
    Checker c{r.issues};
    const int N = p.N, n = p.n, m = p.m, np = p.noise.p;
    if (N < 1 || n < 1 || m < 1) {
        r.issues.push_back("LQ: invalid dimensions");
        return r;
    }
    if (static_cast<int>(p.A.size()) != N || static_cast<int>(p.B.size()) != N
        || static_cast<int>(p.C.size()) != N || static_cast<int>(p.D.size()) != N) {
        r.issues.push_back("LQ: stage lists must have length " + std::to_string(N));
        return r;
    }
    for (int k = 0; k < N; ++k) {
        c.shape(p.A[k], n, n, at("A", k));
        c.shape(p.B[k], n, m, at("B", k));
        if (static_cast<int>(p.C[k].size()) != np || static_cast<int>(p.D[k].size()) != np) {
            r.issues.push_back(at("noise channels", k) + ": expected " + std::to_string(np));
            continue;
        }
        for (int i = 0; i < np; ++i) {
            c.shape(p.C[k][i], n, n, at("C", k) + "[" + std::to_string(i) + "]");
            c.shape(p.D[k][i], n, m, at("D", k) + "[" + std::to_string(i) + "]");
        }
    }
    if (p.cost.horizon() != N) {
        r.issues.push_back("LQ cost: horizon mismatch");
        return r;
    }
    for (int t = 0; t < N; ++t) {
        if (p.cost.kind() == StorageKind::Stationary && t > 0)
            break;
        const LQTerminalCost& g = p.cost.terminal(t);
        c.shape(g.G, n, n, at("LQ", t, N, "G"));
        c.shape(g.Gbar, n, n, at("LQ", t, N, "Gbar"));
        c.vec(g.g, n, at("LQ", t, N, "g"));
        c.sym(g.G, at("LQ", t, N, "G"));
        c.sym(g.Gbar, at("LQ", t, N, "Gbar"));
        for (int k = t; k < N; ++k) {
            const LQStageCost& s = p.cost.stage(t, k);
            c.shape(s.Q, n, n, at("LQ", t, k, "Q"));
            c.shape(s.Qbar, n, n, at("LQ", t, k, "Qbar"));
            c.shape(s.R, m, m, at("LQ", t, k, "R"));
            c.shape(s.Rbar, m, m, at("LQ", t, k, "Rbar"));
            c.vec(s.q, n, at("LQ", t, k, "q"));
            c.sym(s.Q, at("LQ", t, k, "Q"));
            c.sym(s.Qbar, at("LQ", t, k, "Qbar"));
            c.sym(s.R, at("LQ", t, k, "R"));
            c.sym(s.Rbar, at("LQ", t, k, "Rbar"));
        }
    }
    return r;
}

}  // namespace fgame
