#include "fgame/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace fgame {

const char* to_string(Policy p)
{
    return p == Policy::SelfCoordination ? "selfcoord" : "precommit";
}

namespace {

Mat blockdiag(const Mat& a, const Mat& b)
{
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

/// Closed-loop coefficients of the augmented state at one stage:
/// Z' = F Z + f + sum_i (G_i Z + g_i) w_i.
struct ClosedLoop {
    Mat F, A, B;
    Vec f, d;
    std::vector<Mat> G;
    std::vector<Vec> g;
    std::vector<Mat> C, D;
};

ClosedLoop closed_loop(const LQProblem& lq, const EquilibriumLaw& law, int l)
{
    ClosedLoop cl;
    cl.A = blockdiag(lq.A[l], lq.A[l]);
    cl.B = blockdiag(lq.B[l], lq.B[l]);
    const Mat& K = law.Kdev[l];
    cl.d = (law.Kbar[l] - K) * law.mean_path[l] + law.c[l];
    cl.F = cl.A + cl.B * K;
    cl.f = cl.B * cl.d;
    for (int i = 0; i < lq.p(); ++i) {
        cl.C.push_back(blockdiag(lq.C[l][i], lq.C[l][i]));
        cl.D.push_back(blockdiag(lq.D[l][i], lq.D[l][i]));
        cl.G.push_back(cl.C.back() + cl.D.back() * K);
        cl.g.push_back(cl.D.back() * cl.d);
    }
    return cl;
}

void check_law(const LQProblem& lq, const EquilibriumLaw& law)
{
    if (law.n != 2 * lq.n || law.m1 != lq.m || law.m2 != lq.m || law.N != lq.N)
        throw DimensionError("evaluator: law does not match the augmented problem");
}

void check_k(const EquilibriumLaw& law, int k)
{
    if (k < law.t || k > law.N)
        throw IndexError("evaluator: k = " + std::to_string(k) + " outside [" + std::to_string(law.t) + ", "
                         + std::to_string(law.N) + "]");
}

double trace_prod(const Mat& a, const Mat& b)
{
    return (a.cwiseProduct(b.transpose())).sum();
}

/// Tail cost from the stage-k moments of Z.
double tail_from(const LQProblem& lq, const EquilibriumLaw& law, const std::vector<ClosedLoop>& cls, int k,
                 const Vec& mean, const Mat& smom, Policy policy)
{
    const int n = lq.n, m = lq.m, dd = 2 * n;
    const int so = policy == Policy::SelfCoordination ? n : 0;
    const int ro = policy == Policy::SelfCoordination ? m : 0;
    Vec M(2 * dd);
    M << mean, mean;
    Mat SS(2 * dd, 2 * dd);
    SS << smom, smom, smom, smom;

    double val = 0;
    for (int l = k; l < lq.N; ++l) {
        const LQStageCost& w = lq.cost.stage(k, l);
        const ClosedLoop& cl = cls[l];
        val += trace_prod(w.Q, SS.block(so, so, n, n)) + trace_prod(w.Qbar, SS.block(dd + so, dd + so, n, n));
        if (w.q.size() == n)
            val += 2 * w.q.dot(M.segment(so, n));
        const Mat Kr = law.Kdev[l].middleRows(ro, m);
        const Vec dr = cl.d.segment(ro, m);
        const Mat KRK = Kr.transpose() * w.R * Kr;
        const Mat KRbK = Kr.transpose() * w.Rbar * Kr;
        val += trace_prod(KRK, SS.topLeftCorner(dd, dd)) + 2 * dr.dot(w.R * Kr * M.head(dd)) + dr.dot(w.R * dr);
        val += trace_prod(KRbK, SS.bottomRightCorner(dd, dd)) + 2 * dr.dot(w.Rbar * Kr * M.tail(dd))
            + dr.dot(w.Rbar * dr);

        // m evolves by drift only
        const Mat Zd = Mat::Zero(dd, dd);
        const Mat FF = blockdiag(cl.F, cl.F);
        Vec ff(2 * dd);
        ff << cl.f, cl.f;
        std::vector<Mat> GG;
        std::vector<Vec> gg;
        for (int i = 0; i < lq.p(); ++i) {
            GG.push_back(blockdiag(cl.G[i], Zd));
            Vec gi(2 * dd);
            gi << cl.g[i], Vec::Zero(dd);
            gg.push_back(gi);
        }
        const Moments mo = second_moment_step(FF, ff, GG, gg, lq.noise.deltas[l], M, SS);
        M = mo.mean;
        SS = mo.smom;
    }
    const LQTerminalCost& g = lq.cost.terminal(k);
    val += trace_prod(g.G, SS.block(so, so, n, n)) + trace_prod(g.Gbar, SS.block(dd + so, dd + so, n, n));
    if (g.g.size() == n)
        val += 2 * g.g.dot(M.segment(so, n));
    return val;
}

Vec initial_state(const EquilibriumLaw& law)
{
    return law.mean_path[law.t];
}

int resolve_threads(int threads)
{
    if (threads > 0)
        return threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn fn)
{
    threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                fn(i);
        });
    for (auto& th : pool)
        th.join();
}

}  // namespace

std::vector<double> tail_costs(const LQProblem& lq, const EquilibriumLaw& law, const std::vector<int>& ks,
                               Policy policy)
{
    check_law(lq, law);
    for (int k : ks)
        check_k(law, k);
    std::vector<ClosedLoop> cls(lq.N);
    for (int l = law.t; l < lq.N; ++l)
        cls[l] = closed_loop(lq, law, l);

    std::vector<double> out(ks.size());
    Vec mean = initial_state(law);
    Mat smom = mean * mean.transpose();
    int at = law.t;
    std::vector<std::size_t> order(ks.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ks[a] < ks[b]; });
    for (std::size_t i : order) {
        for (; at < ks[i]; ++at) {
            const ClosedLoop& cl = cls[at];
            const Moments mo = second_moment_step(cl.F, cl.f, cl.G, cl.g, lq.noise.deltas[at], mean, smom);
            mean = mo.mean;
            smom = mo.smom;
        }
        out[i] = tail_from(lq, law, cls, ks[i], mean, smom, policy);
    }
    return out;
}

double expected_tail_cost(const LQProblem& lq, const SelfCoordinationSolution& scs, int k)
{
    return tail_costs(lq, scs.law, {k}, Policy::SelfCoordination)[0];
}

double precommit_baseline(const LQProblem& lq, const SelfCoordinationSolution& scs, int k)
{
    return tail_costs(lq, scs.law, {k}, Policy::Precommit)[0];
}

double tree_tail_cost(const LQProblem& lq, const EquilibriumLaw& law, const ScenarioTree& tree, int k,
                      Policy policy)
{
    check_law(lq, law);
    check_k(law, k);
    if (tree.t0 != law.t || tree.t0 + tree.depth != lq.N)
        throw DimensionError("tree_tail_cost: tree must span [law.t, N]");
    const int n = lq.n, m = lq.m, D = tree.depth;
    const int so = policy == Policy::SelfCoordination ? n : 0;
    const int ro = policy == Policy::SelfCoordination ? m : 0;

    NodeVecs Z(D + 1), U(D);
    Z[0] = {initial_state(law)};
    for (int l = 0; l < D; ++l) {
        const int kk = tree.t0 + l;
        const int B = tree.branching(l);
        const Mat A = blockdiag(lq.A[kk], lq.A[kk]);
        const Mat Bm = blockdiag(lq.B[kk], lq.B[kk]);
        Z[l + 1].resize(Z[l].size() * B);
        U[l].resize(Z[l].size());
        for (std::size_t j = 0; j < Z[l].size(); ++j) {
            const Vec u = law.control(kk, Z[l][j]);
            U[l][j] = u;
            const Vec drift = A * Z[l][j] + Bm * u;
            for (int b = 0; b < B; ++b) {
                Vec x = drift;
                for (int i = 0; i < tree.p; ++i)
                    x += tree.w[l][b](i)
                        * (blockdiag(lq.C[kk][i], lq.C[kk][i]) * Z[l][j] + blockdiag(lq.D[kk][i], lq.D[kk][i]) * u);
                Z[l + 1][j * B + b] = x;
            }
        }
    }

    // Select the evaluated block and rows, then reuse the subtree evaluator.
    const int lk = k - tree.t0;
    NodeVecs X(D + 1), C(D);
    for (int l = 0; l <= D; ++l)
        for (const Vec& z : Z[l])
            X[l].push_back(z.segment(so, n));
    for (int l = 0; l < D; ++l)
        for (const Vec& u : U[l])
            C[l].push_back(u.segment(ro, m));
    auto stage = [&](int l) {
        const LQStageCost& w = lq.cost.stage(k, tree.t0 + l);
        StageCost s;
        s.Q = w.Q;
        s.Qbar = w.Qbar;
        s.S = s.Sbar = Mat::Zero(m, n);
        s.R = w.R;
        s.Rbar = w.Rbar;
        s.q = w.q.size() == n ? w.q : Vec::Zero(n);
        s.rho = Vec::Zero(m);
        return s;
    };
    const LQTerminalCost& g = lq.cost.terminal(k);
    const TerminalCost term{g.G, g.Gbar, g.g.size() == n ? g.g : Vec::Zero(n)};
    double total = 0;
    for (std::size_t j = 0; j < tree.nodes(lk); ++j) {
        total += tree.node_prob(lk, j) * subtree_cost(tree, lk, j, X, C, stage, term);
    }
    return total;
}

std::vector<McEstimate> monte_carlo_tail_cost(const LQProblem& lq, const EquilibriumLaw& law,
                                              const std::vector<int>& ks, long paths, std::uint64_t seed,
                                              Policy policy, int threads)
{
    if (paths < 2)
        throw std::invalid_argument("monte_carlo_tail_cost: need at least 2 paths");
    check_law(lq, law);
    for (int k : ks)
        check_k(law, k);
    const int n = lq.n, m = lq.m, N = lq.N, t = law.t, p = lq.p();
    const int so = policy == Policy::SelfCoordination ? n : 0;
    const int ro = policy == Policy::SelfCoordination ? m : 0;

    std::vector<ClosedLoop> cls(N);
    std::vector<Mat> roots(N);
    for (int l = t; l < N; ++l) {
        cls[l] = closed_loop(lq, law, l);
        roots[l] = sqrt_psd(lq.noise.deltas[l]);
    }

    constexpr long chunk = 4096;
    const long chunks = (paths + chunk - 1) / chunk;
    const std::size_t nk = ks.size();
    // per chunk: count, mean, M2 per k
    std::vector<std::vector<double>> cmean(chunks, std::vector<double>(nk, 0.0)),
        cm2(chunks, std::vector<double>(nk, 0.0));
    std::vector<long> ccount(chunks, 0);

    parallel_for(static_cast<std::size_t>(chunks), resolve_threads(threads), [&](std::size_t ci) {
        std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(ci)};
        std::mt19937_64 rng(sq);
        std::normal_distribution<double> gauss;
        std::bernoulli_distribution coin;
        const long begin = static_cast<long>(ci) * chunk;
        const long end = std::min(paths, begin + chunk);
        std::vector<Vec> Z(N + 1);
        Vec eps(p);
        for (long path = begin; path < end; ++path) {
            Z[t] = initial_state(law);
            for (int l = t; l < N; ++l) {
                for (int i = 0; i < p; ++i)
                    eps(i) = lq.noise.sampler == SamplerKind::GaussianWithCov ? gauss(rng) : (coin(rng) ? 1.0 : -1.0);
                const Vec w = roots[l] * eps;
                const ClosedLoop& cl = cls[l];
                Vec next = cl.F * Z[l] + cl.f;
                for (int i = 0; i < p; ++i)
                    next += w(i) * (cl.G[i] * Z[l] + cl.g[i]);
                Z[l + 1] = next;
            }
            ++ccount[ci];
            const double cnt = static_cast<double>(ccount[ci]);
            for (std::size_t ki = 0; ki < nk; ++ki) {
                const int k = ks[ki];
                Vec mz = Z[k];
                double cost = 0;
                for (int l = k; l < N; ++l) {
                    const LQStageCost& wc = lq.cost.stage(k, l);
                    const Vec x = Z[l].segment(so, n);
                    const Vec mx = mz.segment(so, n);
                    const Vec full = law.control(l, Z[l]);
                    const Vec mfull = law.control(l, mz);
                    const Vec u = full.segment(ro, m);
                    const Vec mu = mfull.segment(ro, m);
                    cost += x.dot(wc.Q * x) + mx.dot(wc.Qbar * mx) + u.dot(wc.R * u) + mu.dot(wc.Rbar * mu);
                    if (wc.q.size() == n)
                        cost += 2 * wc.q.dot(x);
                    mz = cls[l].A * mz + cls[l].B * mfull;
                }
                const LQTerminalCost& g = lq.cost.terminal(k);
                const Vec x = Z[N].segment(so, n);
                const Vec mx = mz.segment(so, n);
                cost += x.dot(g.G * x) + mx.dot(g.Gbar * mx);
                if (g.g.size() == n)
                    cost += 2 * g.g.dot(x);
                const double delta = cost - cmean[ci][ki];
                cmean[ci][ki] += delta / cnt;
                cm2[ci][ki] += delta * (cost - cmean[ci][ki]);
            }
        }
    });

    std::vector<McEstimate> out(nk);
    for (std::size_t ki = 0; ki < nk; ++ki) {
        double cnt = 0, mean = 0, m2 = 0;
        for (long ci = 0; ci < chunks; ++ci) {
            const double nb = static_cast<double>(ccount[ci]);
            const double delta = cmean[ci][ki] - mean;
            const double tot = cnt + nb;
            mean += delta * nb / tot;
            m2 += cm2[ci][ki] + delta * delta * cnt * nb / tot;
            cnt = tot;
        }
        out[ki].estimate = mean;
        out[ki].stderr_ = std::sqrt(std::max(0.0, m2 / (cnt - 1)) / cnt);
    }
    return out;
}

OracleResult tree_oracle_equilibrium(const GLQProblem& pr, const Vec& y, const ScenarioTree& tree,
                                     double consistency_tol, const Tolerances& tol)
{
    const int mc = pr.dyn.m1 + pr.dyn.m2;
    const int D = tree.depth;
    std::size_t total = 0;
    for (int l = 0; l < D; ++l)
        total += tree.nodes(l) * static_cast<std::size_t>(mc);
    if (total > 4000)
        throw std::invalid_argument("tree_oracle_equilibrium: tree too large (" + std::to_string(total)
                                    + " unknowns)");

    auto unpack = [&](const Vec& v) {
        NodeVecs ctrl(D);
        std::size_t at = 0;
        for (int l = 0; l < D; ++l)
            for (std::size_t j = 0; j < tree.nodes(l); ++j) {
                ctrl[l].push_back(v.segment(static_cast<Eigen::Index>(at), mc));
                at += mc;
            }
        return ctrl;
    };
    auto residual = [&](const Vec& v) {
        const TreeSolution ts = fill_tree(pr, tree, y, unpack(v));
        const NodeVecs r = stationarity_vectors(pr, tree, ts);
        Vec out(static_cast<Eigen::Index>(total));
        std::size_t at = 0;
        for (int l = 0; l < D; ++l)
            for (const Vec& x : r[l]) {
                out.segment(static_cast<Eigen::Index>(at), mc) = x;
                at += mc;
            }
        return out;
    };

    const Eigen::Index nu = static_cast<Eigen::Index>(total);
    const Vec r0 = residual(Vec::Zero(nu));
    Mat J(nu, nu);
    for (Eigen::Index i = 0; i < nu; ++i)
        J.col(i) = residual(Vec::Unit(nu, i)) - r0;
    const Vec sol = -pinv(J, tol) * r0;

    OracleResult res;
    res.ctrl = unpack(sol);
    res.solution = fill_tree(pr, tree, y, res.ctrl);
    res.residual = stationarity_residual(pr, tree, res.solution).max();
    res.consistent = res.residual <= consistency_tol;
    return res;
}

namespace {

void finish_sweep(SweepResult& sr)
{
    const std::size_t nk = sr.ks.size();
    sr.argmin.assign(nk, std::numeric_limits<double>::quiet_NaN());
    sr.min.assign(nk, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t ki = 0; ki < nk; ++ki) {
        for (std::size_t i = 0; i < sr.grid.size(); ++i) {
            const double v = sr.values[ki][i];
            if (sr.failed[i] || !std::isfinite(v))
                continue;
            // strict comparison keeps the smallest mu on ties
            if (std::isnan(sr.min[ki]) || v < sr.min[ki]) {
                sr.min[ki] = v;
                sr.argmin[ki] = sr.grid[i];
            }
        }
    }
}

template <class LawFn>
SweepResult run_sweep(const LQProblem& lq, const std::vector<double>& grid, const std::vector<int>& ks,
                      const SweepOptions& opt, LawFn law_at)
{
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0))
            throw std::invalid_argument("sweep: grid values must be nonnegative");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("sweep: grid must be sorted and deduplicated");
    }
    SweepResult sr;
    sr.grid = grid;
    sr.ks = ks;
    sr.values.assign(ks.size(), std::vector<double>(grid.size(), std::numeric_limits<double>::quiet_NaN()));
    sr.failed.assign(grid.size(), false);
    sr.errors.assign(grid.size(), "");

    {
        const EquilibriumLaw law0 = law_at(0.0);
        sr.tc = tail_costs(lq, law0, ks, Policy::SelfCoordination);
        sr.pr = tail_costs(lq, law0, ks, Policy::Precommit);
    }

    std::vector<char> failed(grid.size(), 0);
    parallel_for(grid.size(), resolve_threads(opt.threads), [&](std::size_t i) {
        try {
            const std::vector<double> v = tail_costs(lq, law_at(grid[i]), ks, Policy::SelfCoordination);
            for (std::size_t ki = 0; ki < ks.size(); ++ki)
                sr.values[ki][i] = v[ki];
        } catch (const std::exception& e) {
            failed[i] = 1;
            sr.errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < grid.size(); ++i)
        sr.failed[i] = failed[i] != 0;
    finish_sweep(sr);
    return sr;
}

}  // namespace

SweepResult sweep(const LQProblem& lq, const Vec& x0, const std::vector<Mat>& psis, const std::vector<double>& grid,
                  const std::vector<int>& ks, const SweepOptions& opt)
{
    return run_sweep(lq, grid, ks, opt, [&](double mu) {
        const Punishment pu{std::vector<double>(lq.N, mu), psis};
        SelfCoordinationSolution s = self_coordination(lq, pu, 0, x0, opt.tol, opt.augment);
        std::string diag;
        for (std::size_t i = 0; i < s.report.stages.size(); ++i) {
            const StageCheck& c = s.report.stages[i];
            if (!c.W_projects_H || !c.Ws_projects_Hs || !c.Ws_projects_h)
                diag += "stage " + std::to_string(i) + ": range condition fails; ";
        }
        if (!diag.empty())
            throw SolvabilityError(diag);
        return std::move(s.law);
    });
}

SweepResult sweep_mv(const MarketData& md, double z, const std::vector<Mat>& phis, const std::vector<double>& grid,
                     const std::vector<int>& ks, const SweepOptions& opt)
{
    const LQProblem lq = mv_lq(md);
    return run_sweep(lq, grid, ks, opt, [&](double mu) {
        const MVPunishment pu{std::vector<double>(md.N, mu), phis};
        const MVRiccati r = mv_backward(md, pu, opt.tol, opt.augment.recursion);
        return to_equilibrium_law(mv_control(r, md, 0, z, opt.tol), md.p0);
    });
}

std::vector<double> standard_grid(double cap)
{
    const long long limit = static_cast<long long>(std::floor(cap * 1e5 + 1e-6));
    std::vector<long long> keys;
    for (long long l = 0; l <= 100000; ++l)
        for (long long key : {l, 100 * l, 100000 * l})
            if (key <= limit)
                keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<double> out;
    out.reserve(keys.size());
    for (long long key : keys)
        out.push_back(static_cast<double>(key) / 1e5);
    return out;
}

namespace {

std::vector<double> parse_numbers(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (item.find_first_not_of(" \t", used) != std::string::npos)
            throw std::invalid_argument("trailing characters in '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::vector<double> parse_grid(const std::string& spec)
{
    std::vector<double> out;
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    try {
        if (kind == "standard") {
            out = rest.empty() ? standard_grid() : standard_grid(parse_numbers(rest).at(0));
        } else if (kind == "list") {
            std::string body = rest;
            if (body.size() < 2 || body.front() != '[' || body.back() != ']')
                throw std::invalid_argument("list needs brackets");
            out = parse_numbers(body.substr(1, body.size() - 2));
        } else if (kind == "linspace" || kind == "logspace") {
            const std::vector<double> a = parse_numbers(rest);
            if (a.size() != 3 || a[2] < 1 || a[2] != std::floor(a[2]))
                throw std::invalid_argument("expected a,b,n");
            const int cnt = static_cast<int>(a[2]);
            for (int i = 0; i < cnt; ++i) {
                const double x = cnt == 1 ? a[0] : a[0] + (a[1] - a[0]) * i / (cnt - 1);
                out.push_back(kind == "linspace" ? x : std::pow(10.0, x));
            }
        } else {
            throw std::invalid_argument("unknown grid kind");
        }
    } catch (const std::exception& e) {
        throw ConfigError("bad grid spec '" + spec + "': " + e.what());
    }
    for (double v : out)
        if (!(v >= 0) || !std::isfinite(v))
            throw ConfigError("bad grid spec '" + spec + "': values must be finite and nonnegative");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace fgame
