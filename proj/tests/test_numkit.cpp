#include <doctest.h>

#include <random>

#include "fgame/numkit.hpp"
#include "oracle.hpp"

using namespace fgame;

namespace {

double maxabs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Random matrix of prescribed rank.
Mat low_rank(std::mt19937_64& rng, int r, int c, int rank)
{
    return oracle::gauss(rng, r, rank, 1.0) * oracle::gauss(rng, rank, c, 1.0);
}

}  // namespace

TEST_SUITE("numkit") {

TEST_CASE("pinv of identity and of a singular diagonal")
{
    CHECK(maxabs(pinv(Mat::Identity(4, 4)) - Mat::Identity(4, 4)) < 1e-15);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 2;
    Mat e = Mat::Zero(2, 2);
    e(0, 0) = 0.5;
    CHECK(maxabs(pinv(d) - e) < 1e-15);
    CHECK(pinv(Mat(0, 3)).rows() == 3);
}

TEST_CASE("Penrose conditions on random matrices")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const int r = 1 + static_cast<int>(rng() % 12), c = 1 + static_cast<int>(rng() % 12);
        const int rank = 1 + static_cast<int>(rng() % std::min(r, c));
        const Mat m = low_rank(rng, r, c, rank);
        const Mat x = pinv(m);
        const double s = std::max(1.0, maxabs(m)) * std::max(1.0, maxabs(x));
        CAPTURE(r);
        CAPTURE(c);
        CAPTURE(rank);
        CHECK(maxabs(m * x * m - m) < 1e-9 * s);
        CHECK(maxabs(x * m * x - x) < 1e-9 * s);
        CHECK(maxabs((m * x).transpose() - m * x) < 1e-9 * s);
        CHECK(maxabs((x * m).transpose() - x * m) < 1e-9 * s);
    }
}

TEST_CASE("pinv is an involution on full-rank input")
{
    std::mt19937_64 rng(11);
    for (int n = 1; n <= 8; ++n) {
        const Mat m = oracle::spd(rng, n, 0.5) + oracle::gauss(rng, n, n, 0.2);
        CHECK(maxabs(pinv(pinv(m)) - m) < 1e-9 * std::max(1.0, maxabs(m)));
    }
}

TEST_CASE("rank cutoff follows the tolerance")
{
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = 1e-12;
    CHECK(pinv(d)(1, 1) == 0.0);
    Tolerances loose;
    loose.rank_rtol = 1e-14;
    CHECK(pinv(d, loose)(1, 1) == doctest::Approx(1e12));
}

TEST_CASE("PSD tests")
{
    Mat a(2, 2);
    a << 1, 0, 0, -1;
    CHECK_FALSE(is_psd(a));
    CHECK(is_psd(Mat::Zero(3, 3)));
    Mat b(2, 2);
    b << 1, 1, 1, 1;
    CHECK(is_psd(b));
    CHECK(min_eigenvalue(b) == doctest::Approx(0.0).epsilon(1e-14));
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat g = oracle::gauss(rng, 5, 3, 1.0);
        CHECK(is_psd(g * g.transpose()));
        CHECK(is_psd(g * g.transpose() + Mat::Identity(5, 5)));
    }
}

TEST_CASE("range and projection tests")
{
    Mat w = Mat::Zero(2, 2);
    w(0, 0) = 1;
    Vec x(2);
    x << 3, 0;
    CHECK(in_range(w, x));
    x << 3, 1e-3;
    CHECK_FALSE(in_range(w, x));
    CHECK(projection_identity(w, w));
    CHECK_FALSE(projection_identity(w, Mat::Identity(2, 2)));
    CHECK(projection_identity(Mat::Identity(3, 3), Mat::Ones(3, 5)));
    CHECK(is_nonsingular(Mat::Identity(3, 3)));
    CHECK_FALSE(is_nonsingular(w));
    CHECK_THROWS_AS(in_range(w, Vec::Ones(3)), DimensionError);
}

TEST_CASE("symmetrize and finiteness")
{
    Mat a(2, 2);
    a << 1, 2, 4, 3;
    CHECK(symmetrize(a)(0, 1) == 3.0);
    CHECK(all_finite(a));
    a(1, 1) = std::nan("");
    CHECK_FALSE(all_finite(a));
    CHECK_THROWS_AS(symmetrize(Mat::Ones(2, 3)), DimensionError);
}

TEST_CASE("tolerances must be positive")
{
    Tolerances t;
    CHECK_NOTHROW(t.check());
    t.psd_atol = 0;
    CHECK_THROWS_AS(t.check(), std::invalid_argument);
}

TEST_CASE("second moment step matches enumeration of a two-point law")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3, p = 2;
        const Mat F = oracle::gauss(rng, n, n, 0.7);
        const Vec f = oracle::gauss(rng, n, 1, 0.5);
        std::vector<Mat> G;
        std::vector<Vec> g;
        for (int i = 0; i < p; ++i) {
            G.push_back(oracle::gauss(rng, n, n, 0.4));
            g.push_back(oracle::gauss(rng, n, 1, 0.4));
        }
        const Mat s = oracle::gauss(rng, p, p, 0.6);
        const Mat delta = s * s.transpose() + 0.1 * Mat::Identity(p, p);
        // Y itself two-point: a mean plus a symmetric spread
        const Vec m0 = oracle::gauss(rng, n, 1, 1.0);
        const Vec e0 = oracle::gauss(rng, n, 1, 1.0);
        const Mat smom = m0 * m0.transpose() + e0 * e0.transpose();

        Vec mean = Vec::Zero(n);
        Mat second = Mat::Zero(n, n);
        const auto ws = oracle::branches(delta);
        for (double sy : {-1.0, 1.0})
            for (const Vec& w : ws) {
                const Vec y = m0 + sy * e0;
                Vec next = F * y + f;
                for (int i = 0; i < p; ++i)
                    next += (G[i] * y + g[i]) * w(i);
                const double pr = 0.5 / static_cast<double>(ws.size());
                mean += pr * next;
                second += pr * next * next.transpose();
            }
        const Moments mo = second_moment_step(F, f, G, g, delta, m0, smom);
        CHECK(maxabs(mo.mean - mean) < 1e-12);
        CHECK(maxabs(mo.smom - second) < 1e-11 * std::max(1.0, maxabs(second)));
        CHECK(maxabs(mo.smom - mo.smom.transpose()) < 1e-13 * std::max(1.0, maxabs(second)));
        CHECK(is_psd(mo.smom - mo.mean * mo.mean.transpose()));
    }
}

TEST_CASE("second moment step rejects mismatched shapes")
{
    const Mat F = Mat::Identity(2, 2);
    CHECK_THROWS_AS(second_moment_step(F, Vec::Zero(3), {Mat::Zero(2, 2)}, {Vec::Zero(2)}, Mat::Identity(1, 1),
                                       Vec::Zero(2), Mat::Zero(2, 2)),
                    DimensionError);
    CHECK_THROWS_AS(second_moment_step(F, Vec::Zero(2), {Mat::Zero(2, 2)}, {}, Mat::Identity(1, 1), Vec::Zero(2),
                                       Mat::Zero(2, 2)),
                    DimensionError);
}

}
