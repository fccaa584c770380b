#include "fgame/meanvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fgame {

double MarketData::growth(int k) const
{
    double g = 1.0;
    for (int j = k; j < N; ++j)
        g *= s[j];
    return g;
}

ValidationReport validate(const MarketData& md)
{
    ValidationReport r;
    if (md.N < 1 || md.p0 < 1) {
        r.issues.push_back("market: invalid dimensions");
        return r;
    }
    if (static_cast<int>(md.s.size()) != md.N || static_cast<int>(md.mean_e.size()) != md.N
        || static_cast<int>(md.cov_e.size()) != md.N) {
        r.issues.push_back("market: stage lists must have length " + std::to_string(md.N));
        return r;
    }
    if (!(md.lambda > 0))
        r.issues.push_back("market: lambda must be positive");
    for (int k = 0; k < md.N; ++k) {
        const std::string at = "market stage " + std::to_string(k) + ": ";
        if (!(md.s[k] > 1))
            r.issues.push_back(at + "riskless return must exceed 1");
        if (md.mean_e[k].size() != md.p0)
            r.issues.push_back(at + "mean return length");
        if (md.cov_e[k].rows() != md.p0 || md.cov_e[k].cols() != md.p0) {
            r.issues.push_back(at + "covariance shape");
            continue;
        }
        if ((md.cov_e[k] - md.cov_e[k].transpose()).cwiseAbs().maxCoeff() > 1e-12)
            r.issues.push_back(at + "covariance not symmetric");
        else if (min_eigenvalue(md.cov_e[k]) < -1e-12)
            r.issues.push_back(at + "covariance not positive semidefinite");
    }
    return r;
}

MVPunishment MVPunishment::constant(int N, double mu, const Mat& phi)
{
    return MVPunishment{std::vector<double>(N, mu), std::vector<Mat>(N, phi)};
}

LQProblem mv_lq(const MarketData& md)
{
    const ValidationReport vr = validate(md);
    if (!vr.ok())
        throw DimensionError("invalid market data\n" + vr.str());
    LQProblem lq;
    lq.N = md.N;
    lq.n = 1;
    lq.m = md.p0;
    lq.noise.p = md.p0;
    lq.noise.sampler = md.sampler;
    for (int k = 0; k < md.N; ++k) {
        lq.A.push_back(Mat::Constant(1, 1, md.s[k]));
        lq.B.push_back(md.mean_theta(k).transpose());
        std::vector<Mat> C, D;
        for (int i = 0; i < md.p0; ++i) {
            C.push_back(Mat::Zero(1, 1));
            Mat row = Mat::Zero(1, md.p0);
            row(0, i) = 1.0;  // selects the i-th risky position
            D.push_back(row);
        }
        lq.C.push_back(C);
        lq.D.push_back(D);
        lq.noise.deltas.push_back(md.cov_e[k]);
    }
    lq.cost = zero_lq_cost(md.N, 1, md.p0, StorageKind::Stationary);
    lq.cost.terminal(0).G = Mat::Constant(1, 1, 1.0);
    lq.cost.terminal(0).Gbar = Mat::Constant(1, 1, -1.0);
    lq.cost.terminal(0).g = Vec::Constant(1, -md.lambda / 2);
    return lq;
}

GLQProblem build_mv(const MarketData& md, const MVPunishment& pu)
{
    for (std::size_t k = 0; k < pu.phis.size(); ++k)
        if (pu.phis[k].rows() == pu.phis[k].cols() && min_eigenvalue(pu.phis[k]) < -1e-12)
            throw std::invalid_argument("build_mv: Phi[" + std::to_string(k) + "] not PSD");
    return augment(mv_lq(md), Punishment{pu.mus, pu.phis});
}

MVRiccati mv_backward(const MarketData& md, const MVPunishment& pu, const Tolerances& tol, RecursionForm form)
{
    const ValidationReport vr = validate(md);
    if (!vr.ok())
        throw DimensionError("invalid market data\n" + vr.str());
    const int N = md.N, p0 = md.p0;
    if (static_cast<int>(pu.mus.size()) != N || static_cast<int>(pu.phis.size()) != N)
        throw DimensionError("mv_backward: punishment must have " + std::to_string(N) + " stages");
    MVRiccati r;
    r.N = N;
    r.p0 = p0;
    r.P11.assign(N + 1, 0.0);
    r.Tbar.resize(N + 1);
    r.W.resize(N);
    r.Ws.resize(N);
    r.W_pinv.resize(N);
    r.Ws_pinv.resize(N);
    r.H1.resize(N);
    r.h.resize(N);

    r.P11[N] = 1.0;
    r.Tbar[N] = Mat::Zero(2, 2);
    r.Tbar[N](1, 1) = 1.0;
    double sig = -md.lambda / 2;
    for (int k = N - 1; k >= 0; --k) {
        const double s = md.s[k];
        const double P = r.P11[k + 1];
        const Mat& T = r.Tbar[k + 1];
        const Vec et = md.mean_theta(k);
        const Mat& cov = md.cov_theta(k);
        const Mat U = pu.mus[k] * pu.phis[k];

        Mat W(2 * p0, 2 * p0), Ws(2 * p0, 2 * p0);
        W << U + P * md.second_theta(k), -U, -U + T(1, 0) * cov, U + T(1, 1) * cov;
        Ws << U + P * cov, -U, -U + T(1, 0) * cov, U + T(1, 1) * cov;
        Mat H1 = Mat::Zero(2 * p0, 2);
        H1.topLeftCorner(p0, 1) = s * P * et;
        Vec h(2 * p0);
        h << sig * et, sig * et;
        if (!W.allFinite() || !Ws.allFinite())
            throw NumericalBreakdown("mean-variance recursion: non-finite W at stage " + std::to_string(k));

        const Mat Wp = pinv(W, tol);
        r.P11[k] = s * s * P * (1.0 - P * et.dot(Wp.topLeftCorner(p0, p0) * et));
        // player-2 coupling A^T T B^s, or (B^sT T A)^T in the printed form
        Mat L2(2, 2 * p0);
        if (form == RecursionForm::Stationary) {
            L2.leftCols(p0) = s * T.col(0) * et.transpose();
            L2.rightCols(p0) = s * T.col(1) * et.transpose();
        } else {
            L2.leftCols(p0) = s * T.row(0).transpose() * et.transpose();
            L2.rightCols(p0) = s * T.row(1).transpose() * et.transpose();
        }
        r.Tbar[k] = s * s * T - L2 * Wp * H1;
        if (!std::isfinite(r.P11[k]) || !r.Tbar[k].allFinite())
            throw NumericalBreakdown("mean-variance recursion: non-finite P/T at stage " + std::to_string(k));

        r.W[k] = W;
        r.Ws[k] = Ws;
        r.W_pinv[k] = Wp;
        r.Ws_pinv[k] = pinv(Ws, tol);
        r.H1[k] = H1;
        r.h[k] = h;
        sig *= s;
    }
    return r;
}

MVLaw mv_control(const MVRiccati& r, const MarketData& md, int t, double z, const Tolerances& tol)
{
    if (t < 0 || t >= r.N)
        throw IndexError("mv_control: initial time out of range");
    std::string diag;
    for (int k = t; k < r.N; ++k) {
        if (!projection_identity(r.W[k], r.H1[k], tol))
            diag += "stage " + std::to_string(k) + ": H outside Ran(W)\n";
        if (!in_range(r.Ws[k], r.h[k], tol))
            diag += "stage " + std::to_string(k) + ": h outside Ran(W~)\n";
    }
    if (!diag.empty())
        throw SolvabilityError("existence unverified\n" + diag);

    const int p0 = r.p0;
    MVLaw law;
    law.t = t;
    law.Kdev.resize(r.N);
    law.c.resize(r.N);
    law.mean_path.resize(r.N + 1);
    law.mean_path[t] = Vec::Constant(2, z);
    for (int k = t; k < r.N; ++k) {
        law.Kdev[k] = -r.W_pinv[k] * r.H1[k];
        law.c[k] = -r.Ws_pinv[k] * r.h[k];
        const Vec et = md.mean_theta(k);
        Vec drift(2);
        drift << et.dot(law.c[k].head(p0)), et.dot(law.c[k].tail(p0));
        law.mean_path[k + 1] = md.s[k] * law.mean_path[k] + drift;
    }
    return law;
}

EquilibriumLaw to_equilibrium_law(const MVLaw& l, int p0)
{
    EquilibriumLaw e;
    e.t = l.t;
    e.N = static_cast<int>(l.Kdev.size());
    e.n = 2;
    e.m1 = e.m2 = p0;
    e.Kdev = l.Kdev;
    e.c = l.c;
    e.mean_path = l.mean_path;
    e.Kbar.resize(e.N);
    for (int k = e.t; k < e.N; ++k)
        e.Kbar[k] = Mat::Zero(2 * p0, 2);
    return e;
}

XiFit xi_membership(const Mat& phi, const Mat& cov, const Vec& mean_theta)
{
    const Mat mm = mean_theta * mean_theta.transpose();
    const Eigen::Index sz = phi.size();
    Mat X(sz, 2);
    X.col(0) = Eigen::Map<const Vec>(cov.data(), sz);
    X.col(1) = Eigen::Map<const Vec>(mm.data(), sz);
    const Vec y = Eigen::Map<const Vec>(phi.data(), sz);

    auto resid = [&](double a1, double a2) { return (y - a1 * X.col(0) - a2 * X.col(1)).norm(); };
    XiFit best;
    best.residual = std::numeric_limits<double>::infinity();
    auto consider = [&](double a1, double a2) {
        if (a1 < 0 || a2 < 0)
            return;
        const double r = resid(a1, a2);
        if (r < best.residual) {
            best.a1 = a1;
            best.a2 = a2;
            best.residual = r;
        }
    };
    const Vec a = X.colPivHouseholderQr().solve(y);
    consider(a(0), a(1));
    const double n0 = X.col(0).squaredNorm(), n1 = X.col(1).squaredNorm();
    consider(n0 > 0 ? std::max(0.0, X.col(0).dot(y) / n0) : 0.0, 0.0);
    consider(0.0, n1 > 0 ? std::max(0.0, X.col(1).dot(y) / n1) : 0.0);
    consider(0.0, 0.0);
    best.member = best.residual <= 1e-8 * std::max(1.0, phi.norm());
    return best;
}

StructuralReport structural_checks(const MVRiccati& r, const MarketData& md, const MVPunishment& pu)
{
    StructuralReport rep;
    rep.zero_punishment = std::all_of(pu.mus.begin(), pu.mus.end(), [](double m) { return m == 0.0; });
    for (int k = 0; k < r.N; ++k)
        rep.xi.push_back(xi_membership(pu.phis[k], md.cov_theta(k), md.mean_theta(k)));
    if (!rep.zero_punishment)
        return rep;
    const int p0 = r.p0;
    for (int k = 0; k <= r.N; ++k) {
        rep.max_T21 = std::max(rep.max_T21, std::abs(r.Tbar[k](1, 0)));
        rep.max_T12 = std::max(rep.max_T12, std::abs(r.Tbar[k](0, 1)));
        if (k < r.N) {
            rep.max_T22_recursion_gap = std::max(
                rep.max_T22_recursion_gap,
                std::abs(r.Tbar[k](1, 1) - md.s[k] * md.s[k] * r.Tbar[k + 1](1, 1)));
            Mat block = Mat::Zero(2 * p0, 2 * p0);
            block.topLeftCorner(p0, p0) = r.P11[k + 1] * md.second_theta(k);
            block.bottomRightCorner(p0, p0) = r.Tbar[k + 1](1, 1) * md.cov_theta(k);
            rep.max_blockform_gap = std::max(rep.max_blockform_gap, (r.W[k] - block).cwiseAbs().maxCoeff());
            if (!(r.P11[k] > 0))
                rep.P11_positive = false;
        }
        if (k < r.N && !(r.Tbar[k](1, 1) > 0))
            rep.T22_positive = false;
    }
    if (rep.max_T21 > 1e-12)
        rep.failures.push_back("T21 not zero");
    if (rep.max_T12 > 1e-12)
        rep.failures.push_back("T12 not zero");
    if (rep.max_T22_recursion_gap > 1e-12)
        rep.failures.push_back("T22 deviates from the s^2 product");
    if (rep.max_blockform_gap > 1e-12)
        rep.failures.push_back("W not block diagonal");
    if (!rep.P11_positive)
        rep.failures.push_back("P11 not positive");
    if (!rep.T22_positive)
        rep.failures.push_back("T22 not positive");
    return rep;
}

GenericityScan genericity_scan(const MarketData& md, const MVPunishment& downstream, int k,
                               const std::vector<double>& grid, const Tolerances& tol, RecursionForm form)
{
    if (k < 0 || k >= md.N)
        throw IndexError("genericity_scan: stage out of range");
    GenericityScan sc;
    MVPunishment pu = downstream;
    double scale = 0;
    for (double mu : grid) {
        pu.mus[k] = mu;
        const MVRiccati r = mv_backward(md, pu, tol, form);
        sc.mu.push_back(mu);
        sc.det.push_back(r.W[k].determinant());
        scale = std::max(scale, std::abs(sc.det.back()));
    }
    for (std::size_t i = 0; i < sc.det.size(); ++i) {
        if (std::abs(sc.det[i]) < 1e-12 * scale)
            sc.roots.push_back(sc.mu[i]);
        else if (i > 0 && std::abs(sc.det[i - 1]) >= 1e-12 * scale && (sc.det[i - 1] < 0) != (sc.det[i] < 0))
            sc.roots.push_back(0.5 * (sc.mu[i - 1] + sc.mu[i]));
    }
    return sc;
}

}  // namespace fgame
