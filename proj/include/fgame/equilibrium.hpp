#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgame/riccati.hpp"
#include "fgame/tree.hpp"

namespace fgame {

/// Affine law (u; v)_k = Kdev_k (X_k - E_t X_k) + Kbar_k E_t X_k + c_k.
struct EquilibriumLaw {
    int t = 0, N = 0, n = 0, m1 = 0, m2 = 0;
    std::vector<Mat> Kdev, Kbar;  ///< [k], k in [t, N)
    std::vector<Vec> c;
    std::vector<Vec> mean_path;   ///< E_t X_k, k in [t, N]

    Vec control(int k, const Vec& x) const
    {
        return Kdev[k] * (x - mean_path[k]) + Kbar[k] * mean_path[k] + c[k];
    }
};

EquilibriumLaw synthesize_law(const GLQProblem& problem, const RiccatiBundle& r, const Vec& y);

/// Node-indexed quantities, [level][node].
using NodeVecs = std::vector<std::vector<Vec>>;

struct TreeSolution {
    int t = 0;
    NodeVecs X;                 ///< levels 0..depth
    NodeVecs ctrl;              ///< stacked (u; v), levels 0..depth-1
    NodeVecs Y;                 ///< levels 0..depth
    std::vector<NodeVecs> Z;    ///< Z[kk][l], l >= kk; adjoint of the self at level kk
};

/// Forward pass of the GLQ state under given node controls.
NodeVecs tree_states(const GLQProblem& problem, const ScenarioTree& tree, const Vec& y,
                     const NodeVecs& ctrl);

/// Controls from the law along the tree, states, and the backward adjoints.
TreeSolution solve_on_tree(const GLQProblem& problem, const EquilibriumLaw& law,
                           const ScenarioTree& tree);

/// Same, for arbitrary node controls.
TreeSolution fill_tree(const GLQProblem& problem, const ScenarioTree& tree, const Vec& y,
                       const NodeVecs& ctrl);

/// Conditional quadratic cost over the subtree of (level0, node0), conditional
/// means taken given that node. stage(level) supplies running weights for the
/// stacked control; linear terms are skipped when `linear` is false.
template <class StageFn>
double subtree_cost(const ScenarioTree& tree, int level0, std::size_t node0, const NodeVecs& X,
                    const NodeVecs& ctrl, StageFn stage, const TerminalCost& term, bool linear = true);

struct StationarityResidual {
    std::vector<double> player1, player2;  ///< max-norm per stage
    double max() const;
};

/// Node-wise first-order residuals, stacked (player 1; player 2).
NodeVecs stationarity_vectors(const GLQProblem& problem, const ScenarioTree& tree,
                              const TreeSolution& ts);

StationarityResidual stationarity_residual(const GLQProblem& problem, const ScenarioTree& tree,
                                           const TreeSolution& ts);

struct AdjointError {
    double Y = 0, Z = 0;
};

/// Node-wise distance between recursed adjoints and the Riccati closed forms.
AdjointError adjoint_closed_form_error(const RiccatiBundle& r, const ScenarioTree& tree,
                                       const TreeSolution& ts);

struct PointwiseRangeReport {
    std::vector<bool> mean_ok;               ///< [k - t]
    std::vector<std::size_t> deviation_fail; ///< failing node count per stage
    bool ok() const;
};

PointwiseRangeReport check_pointwise_ranges(const GLQProblem& problem, const RiccatiBundle& r,
                                            const EquilibriumLaw& law, const ScenarioTree& tree,
                                            const Tolerances& tol = {});

struct InequalityReport {
    int directions = 0;
    double max_first1 = 0, min_second1 = 0;  ///< player 1, whole-horizon perturbations
    double max_first2 = 0, min_second2 = 0;  ///< player 2, single-stage perturbations
    bool ok(double tol = 1e-9) const
    {
        return max_first1 <= tol && min_second1 >= -tol && max_first2 <= tol && min_second2 >= -tol;
    }
};

/// Player 1: J1(u* + d, v*) - J1(u*, v*) = 2 first + J~1(d), with J~1 from the
/// variation dynamics. Player 2: the same at every node for single-stage d.
InequalityReport verify_equilibrium_inequalities(const GLQProblem& problem, const ScenarioTree& tree,
                                                 const TreeSolution& ts, int directions,
                                                 std::uint64_t seed);

/// J1(t, y; u, v) on the tree.
double tree_cost1(const GLQProblem& problem, const ScenarioTree& tree, const NodeVecs& X,
                  const NodeVecs& ctrl, bool linear = true);
/// J2(k, X_node; u, v) for the node at `level`.
double tree_cost2(const GLQProblem& problem, const ScenarioTree& tree, int level, std::size_t node,
                  const NodeVecs& X, const NodeVecs& ctrl, bool linear = true);

/// J~1(t, 0; u) evaluated directly from the variation dynamics.
double variation_cost1(const GLQProblem& problem, const ScenarioTree& tree, const NodeVecs& u);
/// J~1 in completed-square form built from U, M, O and their mean versions.
double completed_square_cost1(const GLQProblem& problem, const ConvexityBundle& c,
                              const ScenarioTree& tree, const NodeVecs& u);
/// J~2(k, 0; v_k) at one node from the variation dynamics.
double variation_cost2(const GLQProblem& problem, const ScenarioTree& tree, int level,
                       std::size_t node, const Vec& v);

// ---- template implementation

template <class StageFn>
double subtree_cost(const ScenarioTree& tree, int level0, std::size_t node0, const NodeVecs& X,
                    const NodeVecs& ctrl, StageFn stage, const TerminalCost& term, bool linear)
{
    double total = 0;
    std::size_t span = 1;
    for (int l = level0; l <= tree.depth; ++l) {
        const std::size_t first = node0 * span;
        const double base = tree.node_prob(level0, node0);
        Vec mx = Vec::Zero(X[l][first].size());
        double acc = 0;
        if (l < tree.depth) {
            const StageCost& s = stage(l);
            Vec mc = Vec::Zero(ctrl[l][first].size());
            for (std::size_t j = first; j < first + span; ++j) {
                const double pr = tree.node_prob(l, j) / base;
                const Vec& x = X[l][j];
                const Vec& c = ctrl[l][j];
                acc += pr * (x.dot(s.Q * x) + 2 * c.dot(s.S * x) + c.dot(s.R * c));
                if (linear)
                    acc += pr * 2 * (s.q.dot(x) + s.rho.dot(c));
                mx += pr * x;
                mc += pr * c;
            }
            acc += mx.dot(s.Qbar * mx) + 2 * mc.dot(s.Sbar * mx) + mc.dot(s.Rbar * mc);
            span *= static_cast<std::size_t>(tree.branching(l));
        } else {
            for (std::size_t j = first; j < first + span; ++j) {
                const double pr = tree.node_prob(l, j) / base;
                const Vec& x = X[l][j];
                acc += pr * x.dot(term.G * x);
                if (linear)
                    acc += pr * 2 * term.g.dot(x);
                mx += pr * x;
            }
            acc += mx.dot(term.Gbar * mx);
        }
        total += acc;
    }
    return total;
}

}  // namespace fgame
