#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgame/fictitious.hpp"
#include "fgame/meanvar.hpp"

namespace fgame {

/// Which rows of an augmented law are evaluated, and on which state block.
enum class Policy {
    SelfCoordination,  ///< v rows on the real state X
    Precommit,         ///< u rows on the fictitious copy X^
};

const char* to_string(Policy p);

/// Exact E[J(k, X_k; law|_{T_k})] by moment propagation, for every k in ks.
/// The law lives on the augmented state (X^; X) and starts at law.t.
std::vector<double> tail_costs(const LQProblem& lq, const EquilibriumLaw& law,
                               const std::vector<int>& ks, Policy policy = Policy::SelfCoordination);

double expected_tail_cost(const LQProblem& lq, const SelfCoordinationSolution& scs, int k);

/// V^pr_k from the u rows of a mu = 0 solution.
double precommit_baseline(const LQProblem& lq, const SelfCoordinationSolution& scs, int k);

/// Exhaustive expectation over a scenario tree spanning [law.t, N].
double tree_tail_cost(const LQProblem& lq, const EquilibriumLaw& law, const ScenarioTree& tree, int k,
                      Policy policy = Policy::SelfCoordination);

struct McEstimate {
    double estimate = 0;
    double stderr_ = 0;
};

/// Simulated tail costs; the conditional means E_k X_l are propagated by the
/// closed-loop drift from the simulated X_k.
std::vector<McEstimate> monte_carlo_tail_cost(const LQProblem& lq, const EquilibriumLaw& law,
                                              const std::vector<int>& ks, long paths, std::uint64_t seed,
                                              Policy policy = Policy::SelfCoordination, int threads = 1);

struct OracleResult {
    bool consistent = false;
    double residual = 0;     ///< max-norm of the stationarity residual at the solution
    NodeVecs ctrl;           ///< stacked (u; v), [level][node]
    TreeSolution solution;
};

/// Solves the first-order system on the tree with node controls as unknowns.
OracleResult tree_oracle_equilibrium(const GLQProblem& problem, const Vec& y, const ScenarioTree& tree,
                                     double consistency_tol = 1e-8, const Tolerances& tol = {});

struct SweepOptions {
    int threads = 0;  ///< 0: hardware concurrency
    Tolerances tol;
    AugmentOptions augment;
};

struct SweepResult {
    std::vector<double> grid;
    std::vector<int> ks;
    std::vector<std::vector<double>> values;  ///< [ki][mu index]; NaN on failure
    std::vector<bool> failed;                 ///< [mu index]
    std::vector<std::string> errors;          ///< [mu index]
    std::vector<double> argmin, min;          ///< [ki]
    std::vector<double> pr, tc;               ///< [ki] baselines at mu = 0
};

/// mu is broadcast over all stages; psis fixes the punishment direction.
SweepResult sweep(const LQProblem& lq, const Vec& x0, const std::vector<Mat>& psis,
                  const std::vector<double>& grid, const std::vector<int>& ks, const SweepOptions& opt = {});

/// Mean-variance sweep on the specialized recursion.
SweepResult sweep_mv(const MarketData& md, double z, const std::vector<Mat>& phis,
                     const std::vector<double>& grid, const std::vector<int>& ks, const SweepOptions& opt = {});

/// Union of {l 1e-5}, {l 1e-3}, {l} for l = 0..1e5, restricted to values <= cap.
std::vector<double> standard_grid(double cap = 1e5);

/// `standard`, `standard:CAP`, `list:[a,b,...]`, `linspace:a,b,n`, `logspace:a,b,n`.
/// Result is sorted and deduplicated; negative values are rejected.
std::vector<double> parse_grid(const std::string& spec);

}  // namespace fgame
