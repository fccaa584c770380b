#pragma once

#include <string>
#include <vector>

#include "fgame/numkit.hpp"

namespace fgame {

enum class StorageKind { DoubleIndexed, Stationary };
enum class SamplerKind { TwoPointProduct, GaussianWithCov };

/// Martingale-difference noise: E_k w_k = 0, E_k w_k w_k^T = deltas[k].
struct NoiseSpec {
    int p = 0;
    std::vector<Mat> deltas;
    SamplerKind sampler = SamplerKind::TwoPointProduct;
};

/// Weights indexed by (initial time t, stage k) with t <= k < N, plus
/// terminal weights indexed by t. Stationary storage keeps one entry per
/// stage and a single terminal entry; the accessors then ignore t.
template <class Stage, class Terminal>
class WeightTable {
public:
    WeightTable() = default;
    WeightTable(int N, StorageKind kind, const Stage& s = {}, const Terminal& g = {})
        : N_(N), kind_(kind)
    {
        if (N < 1)
            throw std::invalid_argument("horizon must be positive");
        const std::size_t ns = kind == StorageKind::Stationary
            ? static_cast<std::size_t>(N)
            : static_cast<std::size_t>(N) * (N + 1) / 2;
        stages_.assign(ns, s);
        terminals_.assign(kind == StorageKind::Stationary ? 1 : N, g);
    }

    int horizon() const { return N_; }
    StorageKind kind() const { return kind_; }

    const Stage& stage(int t, int k) const { return stages_[slot(t, k)]; }
    Stage& stage(int t, int k) { return stages_[slot(t, k)]; }

    const Terminal& terminal(int t) const { return terminals_[tslot(t)]; }
    Terminal& terminal(int t) { return terminals_[tslot(t)]; }

    /// Double-indexed copy with entry(t,k) = entry(k) for all t <= k.
    WeightTable lifted() const
    {
        WeightTable out(N_, StorageKind::DoubleIndexed);
        for (int t = 0; t < N_; ++t) {
            out.terminal(t) = terminal(t);
            for (int k = t; k < N_; ++k)
                out.stage(t, k) = stage(t, k);
        }
        return out;
    }

private:
    std::size_t slot(int t, int k) const
    {
        if (t < 0 || k < t || k >= N_)
            throw IndexError("weight index (t=" + std::to_string(t) + ", k=" + std::to_string(k)
                             + ") outside 0 <= t <= k < " + std::to_string(N_));
        if (kind_ == StorageKind::Stationary)
            return static_cast<std::size_t>(k);
        // row t holds k = t..N-1
        const std::size_t tt = static_cast<std::size_t>(t);
        return tt * N_ - tt * (tt - 1) / 2 + static_cast<std::size_t>(k - t);
    }
    std::size_t tslot(int t) const
    {
        if (t < 0 || t >= N_)
            throw IndexError("terminal index t=" + std::to_string(t) + " outside [0, "
                             + std::to_string(N_) + ")");
        return kind_ == StorageKind::Stationary ? 0 : static_cast<std::size_t>(t);
    }

    int N_ = 0;
    StorageKind kind_ = StorageKind::Stationary;
    std::vector<Stage> stages_;
    std::vector<Terminal> terminals_;
};

/// Running weights of one player at (t,k). S, Sbar are (m1+m2) x n,
/// R, Rbar are (m1+m2) x (m1+m2), rho has m1+m2 entries.
struct StageCost {
    Mat Q, Qbar, S, Sbar, R, Rbar;
    Vec q, rho;
};

struct TerminalCost {
    Mat G, Gbar;
    Vec g;
};

/// Named weight blocks. Plain names have barred partners.
enum class Block {
    Q, Qbar,
    S1, S2, Sbar1, Sbar2,
    R11, R12, R21, R22, Rbar11, Rbar12, Rbar21, Rbar22,
    G, Gbar
};

enum class Linear { q, rho1, rho2, g };

class PlayerCost : public WeightTable<StageCost, TerminalCost> {
public:
    PlayerCost() = default;
    /// All weights zero.
    PlayerCost(int N, int n, int m1, int m2, StorageKind kind);

    int n() const { return n_; }
    int m1() const { return m1_; }
    int m2() const { return m2_; }

    /// Sub-block at (t,k); for G and Gbar k is ignored.
    Mat block(Block b, int t, int k) const;
    Vec linear(Linear w, int t, int k) const;

    PlayerCost lifted() const;

private:
    PlayerCost(const WeightTable<StageCost, TerminalCost>& base, int n, int m1, int m2)
        : WeightTable(base), n_(n), m1_(m1), m2_(m2) {}
    int n_ = 0, m1_ = 0, m2_ = 0;
};

/// Plain + barred version of a plain block (Q -> Q + Qbar, ...).
Mat script_weight(const PlayerCost& cost, Block which, int t, int k);

PlayerCost stationary_lift(const PlayerCost& cost);

struct GLQDynamics {
    int N = 0, n = 0, m1 = 0, m2 = 0;
    std::vector<Mat> A, B1, B2;
    std::vector<std::vector<Mat>> C, D1, D2;  ///< [k][i]
};

struct GLQProblem {
    GLQDynamics dyn;
    NoiseSpec noise;
    PlayerCost cost1, cost2;

    int N() const { return dyn.N; }
    int p() const { return noise.p; }
};

struct LQStageCost {
    Mat Q, Qbar, R, Rbar;
    Vec q;  ///< linear state weight; zero in the classical setting
};

struct LQTerminalCost {
    Mat G, Gbar;
    Vec g;
};

using LQCost = WeightTable<LQStageCost, LQTerminalCost>;

struct LQProblem {
    int N = 0, n = 0, m = 0;
    std::vector<Mat> A, B;
    std::vector<std::vector<Mat>> C, D;  ///< [k][i]
    LQCost cost;
    NoiseSpec noise;

    int p() const { return noise.p; }
};

/// Allocates an LQ cost with all-zero weights of the right shapes.
LQCost zero_lq_cost(int N, int n, int m, StorageKind kind);

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
    std::string str() const;
};

ValidationReport validate(const GLQProblem& p);
ValidationReport validate(const LQProblem& p);
ValidationReport validate(const NoiseSpec& noise, int N);

}  // namespace fgame
