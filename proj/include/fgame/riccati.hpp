#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fgame/model.hpp"
#include "fgame/tree.hpp"

namespace fgame {

/// Storage for pairs (k, l) with lo <= k <= l <= N.
template <class T>
class Triangle {
public:
    Triangle() = default;
    Triangle(int lo, int N) : lo_(lo), N_(N)
    {
        const std::size_t r = static_cast<std::size_t>(N - lo + 1);
        data_.resize(r * (r + 1) / 2);
    }
    const T& at(int k, int l) const { return data_[slot(k, l)]; }
    T& at(int k, int l) { return data_[slot(k, l)]; }
    int lo() const { return lo_; }
    int hi() const { return N_; }

private:
    std::size_t slot(int k, int l) const
    {
        if (k < lo_ || l < k || l > N_)
            throw IndexError("pair (" + std::to_string(k) + ", " + std::to_string(l)
                             + ") outside " + std::to_string(lo_) + " <= k <= l <= "
                             + std::to_string(N_));
        const std::size_t r = static_cast<std::size_t>(N_ - lo_ + 1);
        const std::size_t kk = static_cast<std::size_t>(k - lo_);
        return kk * r - kk * (kk - 1) / 2 + static_cast<std::size_t>(l - k);
    }
    int lo_ = 0, N_ = 0;
    std::vector<T> data_;
};

/// Per-stage assembled blocks for initial time t.
/// Naming: W1_1s = W^{1(1s)}, Ws = script (mean) version, Wh = hat version.
struct StageBlocks {
    Mat W1_11, W1_12, Ws1_11, Ws1_12;
    Mat Wh2_21, Wh2_22, Ws2_21, Ws2_22;
    Mat H1_1, H1_2, Hs1_1, Hs1_2;
    Mat Hh2_2, Hs2_2;  ///< hat and script H^{2(2)} at (k, k)
    Vec h1, h2;
    Mat W, Ws;         ///< stacked deviation / mean matrices
    Mat H, Hs;         ///< block-diagonal, (m1+m2) x 2n
    Vec h;
    Mat W_pinv, Ws_pinv;
};

/// H^{2(s)}_{k,l}, hat and script versions, s = 1, 2.
struct RowBlocks {
    std::array<Mat, 2> H2, Hh2, Hs2;
};

struct RiccatiBundle {
    int t = 0, N = 0, n = 0, m1 = 0, m2 = 0;
    std::vector<Mat> P, Ps;      ///< [k], k in [t, N]; Ps is the mean (script) version
    std::vector<Vec> sigma;
    Triangle<Mat> T, Ts, Tt;     ///< T, script T, tilde T over (k, l)
    Triangle<Vec> xi;
    Triangle<RowBlocks> rows;    ///< defined for l < N
    std::vector<StageBlocks> stage;  ///< [k], k in [t, N)
};

/// How the adjoint updates combine the next-stage matrices with the feedback.
/// Stationary uses S^T + A^T P B + sum C^T P D, which keeps the tree first-order
/// conditions exact. Printed uses H^T = S^T + A^T P^T B + sum C^T P^T D, the
/// textbook form; the two agree while P and T stay symmetric.
enum class RecursionForm { Stationary, Printed };

const char* to_string(RecursionForm f);

RiccatiBundle backward_pass(const GLQProblem& problem, int t, const Tolerances& tol = {},
                            RecursionForm form = RecursionForm::Stationary);

struct ConvexityBundle {
    int t = 0, N = 0;
    std::vector<Mat> U, Us;      ///< [k], k in [t, N]
    Triangle<Mat> V, Vs;
    std::vector<Mat> M, Ms, O, Os, OO;  ///< [k], k in [t, N); OO is the player-2 matrix at (k,k)
};

ConvexityBundle convexity_pass(const GLQProblem& problem, int t, const Tolerances& tol = {});

enum class Verdict { SufficientUnique, SufficientExists, Undetermined };

const char* to_string(Verdict v);

struct StageCheck {
    bool W_projects_H = false;
    bool Ws_projects_Hs = false;
    bool Ws_projects_h = false;
    bool O_projects_M = false;
    bool Os_projects_Ms = false;
    bool O_psd = false, Os_psd = false, OO_psd = false;
    bool W_nonsingular = false, Ws_nonsingular = false;

    bool sufficient() const
    {
        return W_projects_H && Ws_projects_Hs && Ws_projects_h && O_projects_M && Os_projects_Ms
            && O_psd && Os_psd && OO_psd;
    }
};

struct SolvabilityReport {
    int t = 0;
    std::vector<StageCheck> stages;  ///< [k - t]
    Verdict verdict = Verdict::Undetermined;

    /// One line per failing condition, tagged by stage.
    std::vector<std::string> failures() const;
};

SolvabilityReport check_solvability(const RiccatiBundle& r, const ConvexityBundle& c,
                                    const Tolerances& tol = {});

struct RangeCheckReport {
    int samples = 0;
    int passed = 0;
    std::vector<std::string> failures;
    bool ok() const { return passed == samples; }
};

/// Random tree-adapted u; alpha^u by the shifted variation dynamics, then
/// node-wise range tests for M (alpha - E alpha) and the mean part.
RangeCheckReport convexity_range_check(const GLQProblem& problem, const ConvexityBundle& c,
                                       const ScenarioTree& tree, int samples, std::uint64_t seed,
                                       const Tolerances& tol = {});

}  // namespace fgame
