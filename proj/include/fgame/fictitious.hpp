#pragma once

#include <vector>

#include "fgame/equilibrium.hpp"

namespace fgame {

/// Penalty mu_k (u - v)^T Psi_k (u - v) coupling the two players.
struct Punishment {
    std::vector<double> mus;
    std::vector<Mat> psis;

    /// Same mu and Psi at every stage.
    static Punishment constant(int N, double mu, const Mat& psi);
};

struct AugmentOptions {
    /// Reads the punishment as mu [[Psi, Psi], [Psi, Psi]] instead of
    /// mu [[Psi, -Psi], [-Psi, Psi]]. Diagnostic only.
    bool literal_upsilon = false;
    bool allow_negative_mu = false;
    RecursionForm recursion = RecursionForm::Stationary;
};

/// Builds the two-player game on X^a = (X^; X): player 1 (u) drives the
/// fictitious copy and is precommitted, player 2 (v) drives the real state.
GLQProblem augment(const LQProblem& lq, const Punishment& punish, const AugmentOptions& opt = {});

/// Rows of the augmented law belonging to one player.
struct PlayerLaw {
    std::vector<Mat> Kdev, Kbar;  ///< m x 2n
    std::vector<Vec> c;
};

struct SelfCoordinationSolution {
    int n = 0, m = 0, t = 0;
    GLQProblem game;
    RiccatiBundle bundle;
    ConvexityBundle convexity;
    EquilibriumLaw law;       ///< on the augmented state
    SolvabilityReport report;

    PlayerLaw real() const;        ///< v rows
    PlayerLaw fictitious() const;  ///< u rows
};

SelfCoordinationSolution self_coordination(const LQProblem& lq, const Punishment& punish, int t,
                                           const Vec& x, const Tolerances& tol = {},
                                           const AugmentOptions& opt = {});

}  // namespace fgame
