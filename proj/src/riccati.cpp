#include "fgame/riccati.hpp"

#include <random>

namespace fgame {

namespace {

using Mats = std::vector<Mat>;

/// sum_{i,j} delta^{ij} X_i^T P Y_j
Mat noise_form(const Mat& delta, const Mats& X, const Mat& P, const Mats& Y)
{
    Mat out = Mat::Zero(X.empty() ? 0 : X[0].cols(), Y.empty() ? 0 : Y[0].cols());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Mat XP = X[i].transpose() * P;
        for (std::size_t j = 0; j < Y.size(); ++j)
            if (delta(i, j) != 0.0)
                out += delta(i, j) * XP * Y[j];
    }
    return out;
}

void guard(const Mat& m, int k, const char* name)
{
    if (!m.allFinite())
        throw NumericalBreakdown("non-finite " + std::string(name) + " at stage " + std::to_string(k));
}

void guard_index(const GLQProblem& p, int t)
{
    if (t < 0 || t >= p.dyn.N)
        throw IndexError("initial time " + std::to_string(t) + " outside [0, " + std::to_string(p.dyn.N) + ")");
}

Mat hstack(const Mat& a, const Mat& b)
{
    Mat out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Mat vstack(const Mat& a, const Mat& b)
{
    Mat out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

Vec vstack(const Vec& a, const Vec& b)
{
    Vec out(a.size() + b.size());
    out << a, b;
    return out;
}

Mat blockdiag(const Mat& a, const Mat& b)
{
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

}  // namespace

RiccatiBundle backward_pass(const GLQProblem& pr, int t, const Tolerances& tol, RecursionForm form)
{
    guard_index(pr, t);
    const GLQDynamics& d = pr.dyn;
    const PlayerCost& c1 = pr.cost1;
    const PlayerCost& c2 = pr.cost2;
    const int N = d.N, n = d.n;

    RiccatiBundle r;
    r.t = t;
    r.N = N;
    r.n = n;
    r.m1 = d.m1;
    r.m2 = d.m2;
    r.P.resize(N + 1);
    r.Ps.resize(N + 1);
    r.sigma.resize(N + 1);
    r.stage.resize(N);
    r.T = Triangle<Mat>(t, N);
    r.Ts = Triangle<Mat>(t, N);
    r.Tt = Triangle<Mat>(t, N);
    r.xi = Triangle<Vec>(t, N);
    r.rows = Triangle<RowBlocks>(t, N);

    r.P[N] = c1.block(Block::G, t, N);
    r.Ps[N] = script_weight(c1, Block::G, t, N);
    r.sigma[N] = c1.linear(Linear::g, t, N);
    for (int k = t; k < N; ++k) {
        r.T.at(k, N) = c2.block(Block::G, k, N);
        r.Ts.at(k, N) = script_weight(c2, Block::G, k, N);
        r.Tt.at(k, N) = Mat::Zero(n, n);
        r.xi.at(k, N) = c2.linear(Linear::g, k, N);
    }

    for (int l = N - 1; l >= t; --l) {
        const Mat& A = d.A[l];
        const std::array<Mat, 2> B{d.B1[l], d.B2[l]};
        const std::array<Mats, 2> D{d.D1[l], d.D2[l]};
        const Mats& C = d.C[l];
        const Mat& dl = pr.noise.deltas[l];

        // Player 1 at (t, l). The noise terms always carry the deviation
        // matrix: E_l(Y_{l+1} w) only sees X_{l+1} - E_t X_{l+1}.
        const Mat& P1 = r.P[l + 1];
        const Mat& P1s = r.Ps[l + 1];
        StageBlocks& sb = r.stage[l];
        const std::array<Block, 2> R1{Block::R11, Block::R12};
        const std::array<Block, 2> S{Block::S1, Block::S2};
        std::array<Mat, 2> W1, W1s, H1, H1s, L1, L1s;
        for (int s = 0; s < 2; ++s) {
            const Mat dn = noise_form(dl, D[0], P1, D[s]);
            W1[s] = c1.block(R1[s], t, l) + B[0].transpose() * P1 * B[s] + dn;
            W1s[s] = script_weight(c1, R1[s], t, l) + B[0].transpose() * P1s * B[s] + dn;
            const Mat cn = noise_form(dl, D[s], P1, C);
            H1[s] = c1.block(S[s], t, l) + B[s].transpose() * P1 * A + cn;
            H1s[s] = script_weight(c1, S[s], t, l) + B[s].transpose() * P1s * A + cn;
            const Mat ln = noise_form(dl, C, P1, D[s]);
            L1[s] = c1.block(S[s], t, l).transpose() + A.transpose() * P1 * B[s] + ln;
            L1s[s] = script_weight(c1, S[s], t, l).transpose() + A.transpose() * P1s * B[s] + ln;
            if (form == RecursionForm::Printed) {
                L1[s] = H1[s].transpose();
                L1s[s] = H1s[s].transpose();
            }
        }
        sb.W1_11 = W1[0];
        sb.W1_12 = W1[1];
        sb.Ws1_11 = W1s[0];
        sb.Ws1_12 = W1s[1];
        sb.H1_1 = H1[0];
        sb.H1_2 = H1[1];
        sb.Hs1_1 = H1s[0];
        sb.Hs1_2 = H1s[1];
        sb.h1 = B[0].transpose() * r.sigma[l + 1] + c1.linear(Linear::rho1, t, l);

        // Player 2 at its own diagonal (l, l).
        {
            const Mat& T2 = r.T.at(l, l + 1);
            const Mat& T2s = r.Ts.at(l, l + 1);
            const Mat T2m = T2s + r.Tt.at(l, l + 1);
            const std::array<Block, 2> R2{Block::R21, Block::R22};
            std::array<Mat, 2> Wh, Ws2;
            for (int s = 0; s < 2; ++s) {
                const Mat dn = noise_form(dl, D[1], T2, D[s]);
                const Mat Rs = script_weight(c2, R2[s], l, l);
                Wh[s] = Rs + B[1].transpose() * T2s * B[s] + dn;
                Ws2[s] = Rs + B[1].transpose() * T2m * B[s] + dn;
            }
            sb.Wh2_21 = Wh[0];
            sb.Wh2_22 = Wh[1];
            sb.Ws2_21 = Ws2[0];
            sb.Ws2_22 = Ws2[1];
            const Mat cn = noise_form(dl, D[1], T2, C);
            const Mat S22 = script_weight(c2, Block::S2, l, l);
            sb.Hh2_2 = S22 + B[1].transpose() * T2s * A + cn;
            sb.Hs2_2 = S22 + B[1].transpose() * T2m * A + cn;
            sb.h2 = B[1].transpose() * r.xi.at(l, l + 1) + c2.linear(Linear::rho2, l, l);
        }

        sb.W = vstack(hstack(sb.W1_11, sb.W1_12), hstack(sb.Wh2_21, sb.Wh2_22));
        sb.Ws = vstack(hstack(sb.Ws1_11, sb.Ws1_12), hstack(sb.Ws2_21, sb.Ws2_22));
        sb.H = blockdiag(sb.H1_1, sb.Hh2_2);
        sb.Hs = blockdiag(sb.Hs1_1, sb.Hs2_2);
        sb.h = vstack(sb.h1, sb.h2);
        guard(sb.W, l, "W");
        guard(sb.Ws, l, "W~");
        guard(sb.H, l, "H");
        guard(sb.Hs, l, "H~");
        guard(sb.h, l, "h");
        sb.W_pinv = pinv(sb.W, tol);
        sb.Ws_pinv = pinv(sb.Ws, tol);

        // Feedback pieces shared by every recursion at this stage.
        const Mat K = -sb.W_pinv * vstack(sb.H1_1, sb.Hh2_2);
        const Mat Kbar = -sb.Ws_pinv * vstack(sb.Hs1_1, sb.Hs2_2);
        const Vec c = -sb.Ws_pinv * sb.h;

        const Mat CPC = noise_form(dl, C, P1, C);
        r.P[l] = c1.block(Block::Q, t, l) + A.transpose() * P1 * A + CPC + hstack(L1[0], L1[1]) * K;
        r.Ps[l] = script_weight(c1, Block::Q, t, l) + A.transpose() * P1s * A + CPC + hstack(L1s[0], L1s[1]) * Kbar;
        r.sigma[l] = A.transpose() * r.sigma[l + 1] + c1.linear(Linear::q, t, l) + hstack(L1s[0], L1s[1]) * c;
        guard(r.P[l], l, "P");
        guard(r.Ps[l], l, "script P");
        guard(r.sigma[l], l, "sigma");

        for (int k = t; k <= l; ++k) {
            const Mat& Tk = r.T.at(k, l + 1);
            const Mat& Tks = r.Ts.at(k, l + 1);
            const Mat Tkm = Tks + r.Tt.at(k, l + 1);
            RowBlocks& rb = r.rows.at(k, l);
            std::array<Mat, 2> L2, Lh2, Ls2;
            for (int s = 0; s < 2; ++s) {
                const Mat cn = noise_form(dl, D[s], Tk, C);
                const Mat Ss = script_weight(c2, S[s], k, l);
                rb.H2[s] = c2.block(S[s], k, l) + B[s].transpose() * Tk * A + cn;
                rb.Hh2[s] = Ss + B[s].transpose() * Tks * A + cn;
                rb.Hs2[s] = Ss + B[s].transpose() * Tkm * A + cn;
                const Mat ln = noise_form(dl, C, Tk, D[s]);
                L2[s] = c2.block(S[s], k, l).transpose() + A.transpose() * Tk * B[s] + ln;
                Lh2[s] = Ss.transpose() + A.transpose() * Tks * B[s] + ln;
                Ls2[s] = Ss.transpose() + A.transpose() * Tkm * B[s] + ln;
                if (form == RecursionForm::Printed) {
                    L2[s] = rb.H2[s].transpose();
                    Lh2[s] = rb.Hh2[s].transpose();
                    Ls2[s] = rb.Hs2[s].transpose();
                }
            }
            const Mat H2T = hstack(L2[0], L2[1]);
            const Mat Hh2T = hstack(Lh2[0], Lh2[1]);
            const Mat Hs2T = hstack(Ls2[0], Ls2[1]);
            const Mat CTC = noise_form(dl, C, Tk, C);
            r.T.at(k, l) = c2.block(Block::Q, k, l) + A.transpose() * Tk * A + CTC + H2T * K;
            r.Ts.at(k, l) = script_weight(c2, Block::Q, k, l) + A.transpose() * Tks * A + CTC + Hh2T * K;
            r.Tt.at(k, l) = A.transpose() * r.Tt.at(k, l + 1) * A + Hs2T * Kbar - Hh2T * K;
            r.xi.at(k, l) = A.transpose() * r.xi.at(k, l + 1) + c2.linear(Linear::q, k, l) + Hs2T * c;
            guard(r.T.at(k, l), l, "T");
            guard(r.Ts.at(k, l), l, "script T");
            guard(r.Tt.at(k, l), l, "tilde T");
            guard(r.xi.at(k, l), l, "xi");
        }
    }
    return r;
}

ConvexityBundle convexity_pass(const GLQProblem& pr, int t, const Tolerances& tol)
{
    guard_index(pr, t);
    const GLQDynamics& d = pr.dyn;
    const PlayerCost& c1 = pr.cost1;
    const PlayerCost& c2 = pr.cost2;
    const int N = d.N;

    ConvexityBundle c;
    c.t = t;
    c.N = N;
    c.U.resize(N + 1);
    c.Us.resize(N + 1);
    c.M.resize(N);
    c.Ms.resize(N);
    c.O.resize(N);
    c.Os.resize(N);
    c.OO.resize(N);
    c.V = Triangle<Mat>(t, N);
    c.Vs = Triangle<Mat>(t, N);

    c.U[N] = c1.block(Block::G, t, N);
    c.Us[N] = script_weight(c1, Block::G, t, N);
    for (int k = t; k < N; ++k) {
        c.V.at(k, N) = c2.block(Block::G, k, N);
        c.Vs.at(k, N) = script_weight(c2, Block::G, k, N);
    }
    for (int k = N - 1; k >= t; --k) {
        const Mat& A = d.A[k];
        const Mat& B1 = d.B1[k];
        const Mat& B2 = d.B2[k];
        const Mats& C = d.C[k];
        const Mats& D1 = d.D1[k];
        const Mats& D2 = d.D2[k];
        const Mat& dl = pr.noise.deltas[k];
        const Mat& U1 = c.U[k + 1];
        const Mat& U1s = c.Us[k + 1];

        const Mat dC = noise_form(dl, D1, U1, C);
        const Mat dD = noise_form(dl, D1, U1, D1);
        const Mat CUC = noise_form(dl, C, U1, C);
        c.M[k] = c1.block(Block::S1, t, k) + B1.transpose() * U1 * A + dC;
        c.Ms[k] = script_weight(c1, Block::S1, t, k) + B1.transpose() * U1s * A + dC;
        c.O[k] = symmetrize(c1.block(Block::R11, t, k) + B1.transpose() * U1 * B1 + dD);
        c.Os[k] = symmetrize(script_weight(c1, Block::R11, t, k) + B1.transpose() * U1s * B1 + dD);
        c.U[k] = symmetrize(c1.block(Block::Q, t, k) + A.transpose() * U1 * A + CUC
                            - c.M[k].transpose() * pinv(c.O[k], tol) * c.M[k]);
        c.Us[k] = symmetrize(script_weight(c1, Block::Q, t, k) + A.transpose() * U1s * A + CUC
                             - c.Ms[k].transpose() * pinv(c.Os[k], tol) * c.Ms[k]);
        guard(c.U[k], k, "U");
        guard(c.Us[k], k, "script U");

        for (int j = t; j <= k; ++j) {
            const Mat& V1 = c.V.at(j, k + 1);
            const Mat CVC = noise_form(dl, C, V1, C);
            c.V.at(j, k) = symmetrize(c2.block(Block::Q, j, k) + A.transpose() * V1 * A + CVC);
            c.Vs.at(j, k) = symmetrize(script_weight(c2, Block::Q, j, k)
                                       + A.transpose() * c.Vs.at(j, k + 1) * A + CVC);
            guard(c.V.at(j, k), k, "V");
            guard(c.Vs.at(j, k), k, "script V");
        }
        c.OO[k] = symmetrize(script_weight(c2, Block::R22, k, k)
                             + B2.transpose() * c.Vs.at(k, k + 1) * B2
                             + noise_form(dl, D2, c.V.at(k, k + 1), D2));
    }
    return c;
}

const char* to_string(RecursionForm f)
{
    return f == RecursionForm::Stationary ? "stationary" : "printed";
}

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::SufficientUnique: return "SufficientUnique";
    case Verdict::SufficientExists: return "SufficientExists";
    case Verdict::Undetermined: return "Undetermined";
    }
    return "?";
}

SolvabilityReport check_solvability(const RiccatiBundle& r, const ConvexityBundle& c,
                                    const Tolerances& tol)
{
    if (r.t != c.t || r.N != c.N)
        throw std::invalid_argument("check_solvability: bundles from different initial times");
    SolvabilityReport rep;
    rep.t = r.t;
    bool all = true, nonsing = true;
    for (int k = r.t; k < r.N; ++k) {
        const StageBlocks& sb = r.stage[k];
        StageCheck s;
        s.W_projects_H = projection_identity(sb.W, sb.H, tol);
        s.Ws_projects_Hs = projection_identity(sb.Ws, sb.Hs, tol);
        s.Ws_projects_h = projection_identity(sb.Ws, sb.h, tol);
        s.O_projects_M = projection_identity(c.O[k], c.M[k], tol);
        s.Os_projects_Ms = projection_identity(c.Os[k], c.Ms[k], tol);
        s.O_psd = is_psd(c.O[k], tol);
        s.Os_psd = is_psd(c.Os[k], tol);
        s.OO_psd = is_psd(c.OO[k], tol);
        s.W_nonsingular = is_nonsingular(sb.W, tol);
        s.Ws_nonsingular = is_nonsingular(sb.Ws, tol);
        all = all && s.sufficient();
        nonsing = nonsing && s.W_nonsingular && s.Ws_nonsingular;
        rep.stages.push_back(s);
    }
    rep.verdict = !all ? Verdict::Undetermined
        : nonsing      ? Verdict::SufficientUnique
                       : Verdict::SufficientExists;
    return rep;
}

std::vector<std::string> SolvabilityReport::failures() const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const StageCheck& s = stages[i];
        const std::string at = "stage " + std::to_string(t + static_cast<int>(i)) + ": ";
        if (!s.W_projects_H) out.push_back(at + "W W^+ H != H");
        if (!s.Ws_projects_Hs) out.push_back(at + "W~ W~^+ H~ != H~");
        if (!s.Ws_projects_h) out.push_back(at + "W~ W~^+ h != h");
        if (!s.O_projects_M) out.push_back(at + "O O^+ M != M");
        if (!s.Os_projects_Ms) out.push_back(at + "script O projection fails on script M");
        if (!s.O_psd) out.push_back(at + "O not PSD");
        if (!s.Os_psd) out.push_back(at + "script O not PSD");
        if (!s.OO_psd) out.push_back(at + "player-2 O not PSD");
    }
    return out;
}

RangeCheckReport convexity_range_check(const GLQProblem& pr, const ConvexityBundle& c,
                                       const ScenarioTree& tree, int samples, std::uint64_t seed,
                                       const Tolerances& tol)
{
    if (tree.t0 != c.t || tree.depth != c.N - c.t)
        throw TreeInvalid("convexity_range_check: tree depth must equal N - t");
    check_tree(tree, pr.noise);
    const GLQDynamics& d = pr.dyn;
    const int n = d.n, m1 = d.m1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;

    std::vector<Mat> Op(c.N), Osp(c.N);
    for (int k = c.t; k < c.N; ++k) {
        Op[k] = pinv(c.O[k], tol);
        Osp[k] = pinv(c.Os[k], tol);
    }

    RangeCheckReport rep;
    rep.samples = samples;
    for (int s = 0; s < samples; ++s) {
        bool ok = true;
        std::vector<Vec> alpha(1, Vec::Zero(n));
        for (int l = 0; l < tree.depth && ok; ++l) {
            const int k = c.t + l;
            const std::size_t nn = tree.nodes(l);
            Vec mean = Vec::Zero(n);
            for (std::size_t j = 0; j < nn; ++j)
                mean += tree.node_prob(l, j) * alpha[j];
            const Vec Mmean = c.Ms[k] * mean;
            if (!in_range(c.Os[k], Mmean, tol)) {
                ok = false;
                rep.failures.push_back("sample " + std::to_string(s) + " stage " + std::to_string(k)
                                       + ": mean part outside Ran(script O)");
                break;
            }
            const int B = tree.branching(l);
            std::vector<Vec> next(nn * B);
            for (std::size_t j = 0; j < nn; ++j) {
                const Vec dev = c.M[k] * (alpha[j] - mean);
                if (!in_range(c.O[k], dev, tol)) {
                    ok = false;
                    rep.failures.push_back("sample " + std::to_string(s) + " stage " + std::to_string(k)
                                           + " node " + std::to_string(j) + ": deviation outside Ran(O)");
                    break;
                }
                Vec u(m1);
                for (int i = 0; i < m1; ++i)
                    u(i) = nd(rng);
                const Vec eta = u - Op[k] * dev - Osp[k] * Mmean;
                const Vec drift = d.A[k] * alpha[j] + d.B1[k] * eta;
                for (int b = 0; b < B; ++b) {
                    Vec x = drift;
                    for (int i = 0; i < tree.p; ++i)
                        x += (d.C[k][i] * alpha[j] + d.D1[k][i] * eta) * tree.w[l][b](i);
                    next[j * B + b] = x;
                }
            }
            alpha = std::move(next);
        }
        if (ok)
            ++rep.passed;
    }
    return rep;
}

}  // namespace fgame
