#include "fgame/numkit.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fgame {

namespace {

std::string shape(const Mat& m)
{
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

}  // namespace

void Tolerances::check() const
{
    if (!(rank_rtol > 0) || !(psd_atol > 0) || !(range_rtol > 0))
        throw std::invalid_argument("tolerances must be strictly positive");
}

Mat pinv(const Mat& m, const Tolerances& tol)
{
    if (m.size() == 0)
        return Mat::Zero(m.cols(), m.rows());
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cut = tol.rank_rtol * s(0);
    Vec inv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > 0)
            inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat symmetrize(const Mat& m)
{
    if (m.rows() != m.cols())
        throw DimensionError("symmetrize: non-square " + shape(m));
    return 0.5 * (m + m.transpose());
}

double min_eigenvalue(const Mat& m)
{
    if (m.rows() != m.cols())
        throw DimensionError("min_eigenvalue: non-square " + shape(m));
    if (m.size() == 0)
        return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const Mat& m, const Tolerances& tol)
{
    return min_eigenvalue(m) >= -tol.psd_atol;
}

bool in_range(const Mat& w, const Mat& x, const Tolerances& tol)
{
    if (w.rows() != x.rows())
        throw DimensionError("in_range: W is " + shape(w) + ", x is " + shape(x));
    const Mat proj = w * pinv(w, tol);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const Vec col = x.col(j);
        if ((col - proj * col).norm() > tol.range_rtol * (1.0 + col.norm()))
            return false;
    }
    return true;
}

bool projection_identity(const Mat& w, const Mat& h, const Tolerances& tol)
{
    if (w.rows() != h.rows())
        throw DimensionError("projection_identity: W is " + shape(w) + ", H is " + shape(h));
    const Mat r = w * pinv(w, tol) * h - h;
    return r.norm() <= tol.range_rtol * (1.0 + h.norm());
}

bool is_nonsingular(const Mat& w, const Tolerances& tol)
{
    if (w.rows() != w.cols())
        throw DimensionError("is_nonsingular: non-square " + shape(w));
    if (w.size() == 0)
        return true;
    Eigen::JacobiSVD<Mat> svd(w);
    const Vec& s = svd.singularValues();
    return s(0) > 0 && s(s.size() - 1) / s(0) > tol.rank_rtol;
}

bool all_finite(const Mat& m)
{
    return m.allFinite();
}

Moments second_moment_step(const Mat& F, const Vec& f,
                           const std::vector<Mat>& G, const std::vector<Vec>& g,
                           const Mat& delta, const Vec& mean, const Mat& smom)
{
    const Eigen::Index d = mean.size();
    const std::size_t p = G.size();
    if (F.cols() != d || smom.rows() != d || smom.cols() != d || F.rows() != f.size())
        throw DimensionError("second_moment_step: state dimension mismatch");
    if (g.size() != p || delta.rows() != static_cast<Eigen::Index>(p) || delta.cols() != delta.rows())
        throw DimensionError("second_moment_step: noise channel count mismatch");
    for (std::size_t i = 0; i < p; ++i)
        if (G[i].rows() != F.rows() || G[i].cols() != d || g[i].size() != F.rows())
            throw DimensionError("second_moment_step: channel " + std::to_string(i) + " shape");

    Moments out;
    const Vec Fm = F * mean;
    out.mean = Fm + f;
    Mat s = F * smom * F.transpose();
    s += Fm * f.transpose() + f * Fm.transpose() + f * f.transpose();
    // E[(G^i Y + g^i)(G^j Y + g^j)^T]
    std::vector<Mat> GS(p);
    std::vector<Vec> Gm(p);
    for (std::size_t i = 0; i < p; ++i) {
        GS[i] = G[i] * smom;
        Gm[i] = G[i] * mean;
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            const double dij = delta(i, j);
            if (dij == 0.0)
                continue;
            s += dij * (GS[i] * G[j].transpose() + Gm[i] * g[j].transpose()
                        + g[i] * Gm[j].transpose() + g[i] * g[j].transpose());
        }
    out.smom = 0.5 * (s + s.transpose());
    return out;
}

}  // namespace fgame
