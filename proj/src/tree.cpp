#include "fgame/tree.hpp"

#include <cmath>
#include <sstream>

namespace fgame {

std::size_t ScenarioTree::nodes(int level) const
{
    std::size_t n = 1;
    for (int l = 0; l < level; ++l)
        n *= static_cast<std::size_t>(branching(l));
    return n;
}

double ScenarioTree::node_prob(int level, std::size_t j) const
{
    double pr = 1.0;
    for (int l = level; l > 0; --l) {
        const std::size_t B = static_cast<std::size_t>(branching(l - 1));
        pr *= prob[l - 1][j % B];
        j /= B;
    }
    return pr;
}

std::size_t ScenarioTree::ancestor(int level, std::size_t j, int up) const
{
    for (int l = level; l > up; --l)
        j /= static_cast<std::size_t>(branching(l - 1));
    return j;
}

Mat sqrt_psd(const Mat& m)
{
    if (m.size() == 0)
        return m;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

ScenarioTree make_tree(const NoiseSpec& noise, int t0, int depth)
{
    if (depth < 0 || t0 < 0 || t0 + depth > static_cast<int>(noise.deltas.size()))
        throw IndexError("make_tree: levels exceed the noise horizon");
    if (noise.p > 16)
        throw std::invalid_argument("make_tree: 2^p branching too large");
    ScenarioTree tr;
    tr.t0 = t0;
    tr.depth = depth;
    tr.p = noise.p;
    const int p = noise.p;
    const int B = 1 << p;
    for (int l = 0; l < depth; ++l) {
        const Mat L = sqrt_psd(noise.deltas[t0 + l]);
        std::vector<Vec> ws;
        std::vector<double> ps;
        for (int b = 0; b < B; ++b) {
            Vec eps(p);
            for (int i = 0; i < p; ++i)
                eps(i) = (b >> i) & 1 ? -1.0 : 1.0;
            ws.push_back(L * eps);
            ps.push_back(1.0 / B);
        }
        tr.w.push_back(std::move(ws));
        tr.prob.push_back(std::move(ps));
    }
    return tr;
}

void check_tree(const ScenarioTree& tree, const NoiseSpec& noise, double tol)
{
    for (int l = 0; l < tree.depth; ++l) {
        const int k = tree.t0 + l;
        if (k >= static_cast<int>(noise.deltas.size()))
            throw TreeInvalid("tree level " + std::to_string(l) + " beyond horizon");
        double ps = 0;
        Vec mean = Vec::Zero(noise.p);
        Mat second = Mat::Zero(noise.p, noise.p);
        for (int b = 0; b < tree.branching(l); ++b) {
            const Vec& w = tree.w[l][b];
            if (w.size() != noise.p)
                throw TreeInvalid("tree level " + std::to_string(l) + ": noise dimension");
            ps += tree.prob[l][b];
            mean += tree.prob[l][b] * w;
            second += tree.prob[l][b] * w * w.transpose();
        }
        const double scale = 1.0 + noise.deltas[k].cwiseAbs().maxCoeff();
        std::ostringstream os;
        if (std::abs(ps - 1.0) > tol)
            os << "probabilities sum to " << ps;
        else if (mean.size() && mean.cwiseAbs().maxCoeff() > tol * scale)
            os << "branch mean " << mean.cwiseAbs().maxCoeff();
        else if (second.size() && (second - noise.deltas[k]).cwiseAbs().maxCoeff() > tol * scale)
            os << "second moment off by " << (second - noise.deltas[k]).cwiseAbs().maxCoeff();
        if (!os.str().empty())
            throw TreeInvalid("tree level " + std::to_string(l) + " (stage " + std::to_string(k)
                              + "): " + os.str());
    }
}

}  // namespace fgame
