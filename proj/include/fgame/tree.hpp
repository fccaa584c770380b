#pragma once

#include <cstddef>
#include <vector>

#include "fgame/model.hpp"

namespace fgame {

/// Finite moment-matched realization of the noise filtration.
/// Level l of the tree is stage t0 + l; node j at level l has children
/// j * branching(l) + b, b = 0..branching(l)-1.
struct ScenarioTree {
    int t0 = 0;
    int depth = 0;
    int p = 0;
    std::vector<std::vector<Vec>> w;       ///< [level][branch]
    std::vector<std::vector<double>> prob; ///< [level][branch]

    int branching(int level) const { return static_cast<int>(w[level].size()); }
    std::size_t nodes(int level) const;
    /// Unconditional probability of node j at level l.
    double node_prob(int level, std::size_t j) const;
    /// Ancestor at level `up` of node j at level l (up <= l).
    std::size_t ancestor(int level, std::size_t j, int up) const;

    /// Conditional expectation at level `up` of values living at level l:
    /// result[a] = E[ value | ancestor a ].
    template <class T>
    std::vector<T> condition(int level, const std::vector<T>& values, int up) const
    {
        std::vector<T> cur = values;
        for (int l = level; l > up; --l) {
            const int B = branching(l - 1);
            std::vector<T> next(nodes(l - 1));
            for (std::size_t a = 0; a < next.size(); ++a) {
                T acc = prob[l - 1][0] * cur[a * B];
                for (int b = 1; b < B; ++b)
                    acc += prob[l - 1][b] * cur[a * B + b];
                next[a] = acc;
            }
            cur = std::move(next);
        }
        return cur;
    }
};

/// Product two-point tree: each of the p Rademacher signs is flipped
/// independently (2^p branches, probability 2^-p) and mapped by the
/// symmetric square root of delta_k.
ScenarioTree make_tree(const NoiseSpec& noise, int t0, int depth);

/// Throws TreeInvalid when branch moments disagree with the noise specification beyond tol.
void check_tree(const ScenarioTree& tree, const NoiseSpec& noise, double tol = 1e-12);

Mat sqrt_psd(const Mat& m);

}  // namespace fgame
