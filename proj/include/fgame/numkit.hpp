#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fgame/errors.hpp"

namespace fgame {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Tolerances {
    double rank_rtol = 1e-10;   ///< relative singular-value cutoff
    double psd_atol = 1e-9;     ///< eigenvalue floor for PSD tests
    double range_rtol = 1e-8;   ///< residual bound for range tests

    /// Throws std::invalid_argument unless all fields are strictly positive.
    void check() const;
};

/// Moore-Penrose pseudoinverse by SVD; singular values below
/// rank_rtol * sigma_max are dropped.
Mat pinv(const Mat& m, const Tolerances& tol = {});

Mat symmetrize(const Mat& m);

/// Smallest eigenvalue of the symmetric part. Empty input gives +inf.
double min_eigenvalue(const Mat& m);

bool is_psd(const Mat& m, const Tolerances& tol = {});

/// Column-wise test ||x - W W^+ x|| <= range_rtol (1 + ||x||).
bool in_range(const Mat& w, const Mat& x, const Tolerances& tol = {});

/// ||W W^+ H - H|| <= range_rtol (1 + ||H||).
bool projection_identity(const Mat& w, const Mat& h, const Tolerances& tol = {});

/// sigma_min / sigma_max > rank_rtol, for square w.
bool is_nonsingular(const Mat& w, const Tolerances& tol = {});

bool all_finite(const Mat& m);

struct Moments {
    Vec mean;
    Mat smom;  ///< E[Y Y^T]
};

/// One exact step of E[Y] and E[YY^T] for
///   Y' = F Y + f + sum_i (G^i Y + g^i) w^i,   E w = 0, E w w^T = delta.
Moments second_moment_step(const Mat& F, const Vec& f,
                           const std::vector<Mat>& G, const std::vector<Vec>& g,
                           const Mat& delta, const Vec& mean, const Mat& smom);

}  // namespace fgame
