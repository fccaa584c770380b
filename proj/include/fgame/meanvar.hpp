#pragma once

#include <string>
#include <vector>

#include "fgame/fictitious.hpp"

namespace fgame {

/// Market with one riskless asset (gross return s_k) and p0 risky assets
/// with returns e_k. Theta_k = e_k - s_k 1 is the excess return.
struct MarketData {
    int N = 0, p0 = 0;
    std::vector<double> s;
    std::vector<Vec> mean_e;
    std::vector<Mat> cov_e;
    double lambda = 1.0;
    SamplerKind sampler = SamplerKind::TwoPointProduct;

    Vec mean_theta(int k) const { return mean_e[k] - s[k] * Vec::Ones(p0); }
    const Mat& cov_theta(int k) const { return cov_e[k]; }
    Mat second_theta(int k) const
    {
        const Vec m = mean_theta(k);
        return cov_e[k] + m * m.transpose();
    }
    /// s_{k} s_{k+1} ... s_{N-1}; 1 for k = N.
    double growth(int k) const;
};

ValidationReport validate(const MarketData& md);

struct MVPunishment {
    std::vector<double> mus;
    std::vector<Mat> phis;

    static MVPunishment constant(int N, double mu, const Mat& phi);
};

/// Wealth problem as an LQ instance: X' = s X + Theta^T u, with terminal
/// cost X_N^2 - (E X_N)^2 - lambda E X_N written as G = 1, Gbar = -1, g = -lambda/2.
LQProblem mv_lq(const MarketData& md);

/// Augmented game for the mean-variance problem.
GLQProblem build_mv(const MarketData& md, const MVPunishment& punish);

struct MVRiccati {
    int N = 0, p0 = 0;
    std::vector<double> P11;   ///< [k], k in [0, N]
    std::vector<Mat> Tbar;     ///< [k] 2x2
    std::vector<Mat> W, Ws, W_pinv, Ws_pinv;  ///< [k], 2p0 x 2p0
    std::vector<Mat> H1;       ///< [k], 2p0 x 2, acts on the augmented deviation
    std::vector<Vec> h;        ///< [k], 2p0
};

/// Scalar-wealth specialization of the game recursion. `form` as in backward_pass.
MVRiccati mv_backward(const MarketData& md, const MVPunishment& punish, const Tolerances& tol = {},
                      RecursionForm form = RecursionForm::Stationary);

struct MVLaw {
    int t = 0;
    std::vector<Mat> Kdev;       ///< [k], 2p0 x 2, rows (u; v)
    std::vector<Vec> c;          ///< [k], 2p0
    std::vector<Vec> mean_path;  ///< E_t X^a_k, 2-vectors

    Mat v_gain(int k) const { return Kdev[k].bottomRows(Kdev[k].rows() / 2); }
    Vec v_offset(int k) const { return c[k].tail(c[k].size() / 2); }
};

/// Throws SolvabilityError with per-stage diagnostics when the range
/// conditions fail.
MVLaw mv_control(const MVRiccati& r, const MarketData& md, int t, double z, const Tolerances& tol = {});

/// The same law written on the augmented state, for the generic evaluator.
EquilibriumLaw to_equilibrium_law(const MVLaw& law, int p0);

struct XiFit {
    double a1 = 0, a2 = 0, residual = 0;
    bool member = false;
};

/// Nonnegative least-squares fit Phi ~ a1 Cov + a2 mean mean^T.
XiFit xi_membership(const Mat& phi, const Mat& cov, const Vec& mean_theta);

struct StructuralReport {
    bool zero_punishment = false;
    double max_T21 = 0, max_T12 = 0;
    double max_T22_recursion_gap = 0;   ///< |T22_k - s_k^2 T22_{k+1}|
    double max_blockform_gap = 0;       ///< |W - diag(P E(TT^T), T22 Cov)|
    bool P11_positive = true, T22_positive = true;
    std::vector<XiFit> xi;              ///< [k]
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

StructuralReport structural_checks(const MVRiccati& r, const MarketData& md, const MVPunishment& punish);

struct GenericityScan {
    std::vector<double> mu, det;
    std::vector<double> roots;   ///< candidate near-zeros
};

/// det W_k(mu) on a grid with the downstream intensities fixed by `downstream`
/// (its stage-k entry is overwritten).
GenericityScan genericity_scan(const MarketData& md, const MVPunishment& downstream, int k,
                               const std::vector<double>& grid, const Tolerances& tol = {},
                               RecursionForm form = RecursionForm::Stationary);

}  // namespace fgame
