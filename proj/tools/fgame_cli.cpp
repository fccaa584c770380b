#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fgame/config.hpp"
#include "fgame/evaluate.hpp"

using namespace fgame;
namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string config;
    int t = -1;
    std::vector<double> mu;
    std::string mu_grid;
    std::string ks;
    std::string output = ".";
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long paths = 0;
    double tol_rank = 0;
    bool literal_upsilon = false;
    std::string recursion = "stationary";
    int directions = 50;

    RecursionForm form() const
    {
        return recursion == "printed" ? RecursionForm::Printed : RecursionForm::Stationary;
    }
};

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<int> parse_ks(const std::string& s)
{
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(std::stoi(item));
    return out;
}

/// Game, Riccati data and law for the configured problem at the requested punishment.
struct Instance {
    Config cfg;
    LQProblem lq;  ///< empty for glq
    GLQProblem game;
    RiccatiBundle bundle;
    ConvexityBundle convexity;
    SolvabilityReport report;
    EquilibriumLaw law;
    Vec y;
};

Instance build(const Config& cfg, const Flags& f)
{
    Instance in;
    in.cfg = cfg;
    if (f.t >= 0)
        in.cfg.t = f.t;
    if (f.tol_rank > 0)
        in.cfg.tol.rank_rtol = f.tol_rank;
    const Tolerances& tol = in.cfg.tol;
    const int t = in.cfg.t;
    AugmentOptions opt;
    opt.literal_upsilon = f.literal_upsilon;
    opt.recursion = f.form();

    if (cfg.kind == ProblemKind::GLQ) {
        in.game = cfg.glq;
        in.y = cfg.x;
        in.bundle = backward_pass(in.game, t, tol, f.form());
        in.convexity = convexity_pass(in.game, t, tol);
        in.report = check_solvability(in.bundle, in.convexity, tol);
        in.law = synthesize_law(in.game, in.bundle, in.y);
        return in;
    }
    Punishment pu;
    Vec x;
    if (cfg.kind == ProblemKind::LQ) {
        in.lq = cfg.lq;
        pu = cfg.punish;
        x = cfg.x;
    } else {
        in.lq = mv_lq(cfg.market);
        pu = Punishment{cfg.mv_punish.mus, cfg.mv_punish.phis};
        x = Vec::Constant(1, cfg.z);
    }
    if (f.mu.size() == 1)
        pu.mus.assign(in.lq.N, f.mu[0]);
    SelfCoordinationSolution s = self_coordination(in.lq, pu, t, x, tol, opt);
    in.game = std::move(s.game);
    in.bundle = std::move(s.bundle);
    in.convexity = std::move(s.convexity);
    in.report = std::move(s.report);
    in.law = std::move(s.law);
    in.y.resize(2 * x.size());
    in.y << x, x;
    return in;
}

std::ofstream open_out(const Flags& f, const std::string& name)
{
    fs::create_directories(f.output);
    const fs::path p = fs::path(f.output) / name;
    std::ofstream out(p);
    if (!out)
        throw std::runtime_error("cannot write " + p.string());
    return out;
}

int cmd_solve(const Config& cfg, const Flags& f)
{
    const Instance in = build(cfg, f);
    std::ofstream g = open_out(f, "gains.csv");
    g << "k,kind,row,col,value\n";
    for (int k = in.law.t; k < in.law.N; ++k) {
        auto dump = [&](const char* kind, const Mat& m) {
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    g << k << ',' << kind << ',' << r << ',' << c << ',' << num(m(r, c)) << '\n';
        };
        dump("Kdev", in.law.Kdev[k]);
        dump("Kbar", in.law.Kbar[k]);
        dump("c", in.law.c[k]);
        dump("mean", in.law.mean_path[k]);
    }
    if (cfg.kind == ProblemKind::MV) {
        const double mu = f.mu.size() == 1 ? f.mu[0] : -1;
        MVPunishment pu = cfg.mv_punish;
        if (mu >= 0)
            pu.mus.assign(cfg.market.N, mu);
        const MVRiccati r = mv_backward(cfg.market, pu, in.cfg.tol, f.form());
        std::ofstream m = open_out(f, "mv_riccati.csv");
        m << "k,P11,T11,T12,T21,T22\n";
        for (int k = 0; k <= r.N; ++k)
            m << k << ',' << num(r.P11[k]) << ',' << num(r.Tbar[k](0, 0)) << ',' << num(r.Tbar[k](0, 1)) << ','
              << num(r.Tbar[k](1, 0)) << ',' << num(r.Tbar[k](1, 1)) << '\n';
    }
    std::cout << "verdict: " << to_string(in.report.verdict) << '\n';
    for (const std::string& line : in.report.failures())
        std::cout << "  " << line << '\n';
    return in.report.verdict == Verdict::Undetermined ? 2 : 0;
}

void emit_plotdata(const SweepResult& sr, const Flags& f)
{
    if (sr.ks.empty()) {
        std::cerr << "warning: empty k list, no plot data written\n";
        return;
    }
    for (std::size_t ki = 0; ki < sr.ks.size(); ++ki) {
        const std::string k = std::to_string(sr.ks[ki]);
        std::ofstream curve = open_out(f, "curve_k" + k + ".dat");
        for (std::size_t i = 0; i < sr.grid.size(); ++i)
            if (!sr.failed[i])
                curve << num(sr.grid[i]) << ' ' << num(sr.values[ki][i]) << '\n';
        std::ofstream pr = open_out(f, "precommit_k" + k + ".dat");
        std::ofstream tc = open_out(f, "timeconsistent_k" + k + ".dat");
        for (double mu : {sr.grid.front(), sr.grid.back()}) {
            pr << num(mu) << ' ' << num(sr.pr[ki]) << '\n';
            tc << num(mu) << ' ' << num(sr.tc[ki]) << '\n';
        }
    }
}

int cmd_sweep(const Config& cfg, const Flags& f)
{
    if (cfg.kind == ProblemKind::GLQ)
        throw ConfigError("sweep needs an lq or mv problem");
    const std::vector<double> grid = parse_grid(f.mu_grid.empty() ? cfg.eval.grid : f.mu_grid);
    if (grid.empty())
        throw ConfigError("empty grid");
    const std::vector<int> ks = f.ks.empty() ? cfg.eval.ks : parse_ks(f.ks);
    SweepOptions opt;
    opt.threads = f.threads;
    opt.tol = cfg.tol;
    if (f.tol_rank > 0)
        opt.tol.rank_rtol = f.tol_rank;
    opt.augment.literal_upsilon = f.literal_upsilon;
    opt.augment.recursion = f.form();
    const SweepResult sr = cfg.kind == ProblemKind::LQ
        ? sweep(cfg.lq, cfg.x, cfg.punish.psis, grid, ks, opt)
        : sweep_mv(cfg.market, cfg.z, cfg.mv_punish.phis, grid, ks, opt);

    std::ofstream out = open_out(f, "sweep.csv");
    out << "mu,k,policy,value\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t ki = 0; ki < ks.size(); ++ki)
            out << num(grid[i]) << ',' << ks[ki] << ",selfcoord,"
                << (sr.failed[i] ? std::string("nan") : num(sr.values[ki][i])) << '\n';
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        out << "0," << ks[ki] << ",precommit," << num(sr.pr[ki]) << '\n';
        out << "0," << ks[ki] << ",timeconsistent," << num(sr.tc[ki]) << '\n';
    }
    std::ofstream sum = open_out(f, "summary.csv");
    sum << "k,argmin,min,precommit,timeconsistent\n";
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        sum << ks[ki] << ',' << num(sr.argmin[ki]) << ',' << num(sr.min[ki]) << ',' << num(sr.pr[ki]) << ','
            << num(sr.tc[ki]) << '\n';
        std::printf("k=%d  argmin=%.5f  min=%.4f  precommit=%.4f  timeconsistent=%.4f\n", ks[ki], sr.argmin[ki],
                    sr.min[ki], sr.pr[ki], sr.tc[ki]);
    }
    std::size_t failed = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (sr.failed[i]) {
            if (failed++ < 5)
                std::cerr << "mu=" << num(grid[i]) << " failed: " << sr.errors[i] << '\n';
        }
    if (failed)
        std::cerr << failed << " of " << grid.size() << " grid points failed\n";
    emit_plotdata(sr, f);
    return 0;
}

int cmd_verify(const Config& cfg, const Flags& f)
{
    const Instance in = build(cfg, f);
    const int t = in.cfg.t;
    const ScenarioTree tree = make_tree(in.game.noise, t, in.game.N() - t);
    const TreeSolution ts = solve_on_tree(in.game, in.law, tree);
    const StationarityResidual sr = stationarity_residual(in.game, tree, ts);
    const AdjointError ae = adjoint_closed_form_error(in.bundle, tree, ts);
    const PointwiseRangeReport pw = check_pointwise_ranges(in.game, in.bundle, in.law, tree, in.cfg.tol);
    const std::uint64_t seed = f.seed_set ? f.seed : in.cfg.eval.seed;
    const InequalityReport iq = verify_equilibrium_inequalities(in.game, tree, ts, f.directions, seed);

    std::printf("verdict: %s\n", to_string(in.report.verdict));
    std::printf("stationarity residual: %.3e\n", sr.max());
    std::printf("adjoint closed-form error: Y %.3e  Z %.3e\n", ae.Y, ae.Z);
    std::printf("pointwise ranges: %s\n", pw.ok() ? "ok" : "FAIL");
    std::printf("player 1: max first-order %.3e, min second-order %.3e\n", iq.max_first1, iq.min_second1);
    std::printf("player 2: max first-order %.3e, min second-order %.3e\n", iq.max_first2, iq.min_second2);
    std::ofstream out = open_out(f, "verify.csv");
    out << "check,value\n"
        << "stationarity," << num(sr.max()) << '\n'
        << "adjoint_Y," << num(ae.Y) << '\n'
        << "adjoint_Z," << num(ae.Z) << '\n'
        << "max_first1," << num(iq.max_first1) << '\n'
        << "min_second1," << num(iq.min_second1) << '\n'
        << "max_first2," << num(iq.max_first2) << '\n'
        << "min_second2," << num(iq.min_second2) << '\n';
    const bool ok = sr.max() <= 1e-8 && ae.Y <= 1e-8 && ae.Z <= 1e-8 && pw.ok() && iq.ok(1e-8);
    if (in.report.verdict == Verdict::Undetermined)
        return 2;
    return ok ? 0 : 2;
}

int cmd_oracle(const Config& cfg, const Flags& f)
{
    const Instance in = build(cfg, f);
    const int t = in.cfg.t;
    const ScenarioTree tree = make_tree(in.game.noise, t, in.game.N() - t);
    const OracleResult orc = tree_oracle_equilibrium(in.game, in.y, tree, 1e-8, in.cfg.tol);
    if (!orc.consistent) {
        std::printf("oracle: no equilibrium (residual %.3e)\n", orc.residual);
        return 2;
    }
    const TreeSolution ts = solve_on_tree(in.game, in.law, tree);
    double gap = 0;
    std::ofstream out = open_out(f, "oracle.csv");
    out << "level,node,index,oracle,law\n";
    for (int l = 0; l < tree.depth; ++l)
        for (std::size_t j = 0; j < ts.ctrl[l].size(); ++j)
            for (Eigen::Index i = 0; i < ts.ctrl[l][j].size(); ++i) {
                const double a = orc.ctrl[l][j](i), b = ts.ctrl[l][j](i);
                gap = std::max(gap, std::abs(a - b));
                out << l << ',' << j << ',' << i << ',' << num(a) << ',' << num(b) << '\n';
            }
    std::printf("oracle residual %.3e, max node gap to law %.3e\n", orc.residual, gap);
    return 0;
}

int cmd_mc(const Config& cfg, const Flags& f)
{
    if (cfg.kind == ProblemKind::GLQ)
        throw ConfigError("mc needs an lq or mv problem");
    const Instance in = build(cfg, f);
    const std::vector<int> ks = f.ks.empty() ? in.cfg.eval.ks : parse_ks(f.ks);
    const long paths = f.paths > 0 ? f.paths : in.cfg.eval.paths;
    const std::uint64_t seed = f.seed_set ? f.seed : in.cfg.eval.seed;
    const std::vector<double> exact = tail_costs(in.lq, in.law, ks);
    const std::vector<McEstimate> mc =
        monte_carlo_tail_cost(in.lq, in.law, ks, paths, seed, Policy::SelfCoordination, f.threads);
    std::ofstream out = open_out(f, "mc.csv");
    out << "k,exact,estimate,stderr,z\n";
    bool ok = true;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double z = mc[i].stderr_ > 0 ? (mc[i].estimate - exact[i]) / mc[i].stderr_ : 0.0;
        ok = ok && std::abs(z) <= 4;
        out << ks[i] << ',' << num(exact[i]) << ',' << num(mc[i].estimate) << ',' << num(mc[i].stderr_) << ','
            << num(z) << '\n';
        std::printf("k=%d exact=%.6f mc=%.6f se=%.6f z=%.2f\n", ks[i], exact[i], mc[i].estimate, mc[i].stderr_, z);
    }
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fictitious-game solver for time-inconsistent stochastic LQ problems"};
    app.require_subcommand(1);
    Flags f;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON problem description")->required();
        sub->add_option("--t", f.t, "initial time (overrides the config)");
        sub->add_option("--mu", f.mu, "constant punishment intensity")->expected(1);
        sub->add_option("--output", f.output, "output directory");
        sub->add_option("--threads", f.threads, "worker threads (0: all cores)");
        sub->add_option("--tol-rank", f.tol_rank, "relative rank cutoff for pseudoinverses");
        sub->add_flag("--literal-upsilon", f.literal_upsilon, "read the punishment as mu [[Psi,Psi],[Psi,Psi]]");
        sub->add_option("--recursion", f.recursion, "adjoint update: stationary | printed")
            ->check(CLI::IsMember({"stationary", "printed"}));
    };
    auto* solve = app.add_subcommand("solve", "law, solvability report and gains CSV");
    auto* sweep_cmd = app.add_subcommand("sweep", "expected tail costs over a mu grid");
    auto* verify = app.add_subcommand("verify", "tree residuals, inequalities, closed-form adjoints");
    auto* oracle = app.add_subcommand("oracle", "brute-force tree equilibrium versus the law");
    auto* mc = app.add_subcommand("mc", "Monte-Carlo cross-check of the exact evaluator");
    for (auto* s : {solve, sweep_cmd, verify, oracle, mc})
        common(s);
    sweep_cmd->add_option("--mu-grid", f.mu_grid, "standard[:cap] | list:[..] | linspace:a,b,n | logspace:a,b,n");
    for (auto* s : {sweep_cmd, mc})
        s->add_option("--k", f.ks, "comma separated stages");
    for (auto* s : {verify, mc})
        s->add_option("--seed", f.seed, "random seed")->each([&](const std::string&) { f.seed_set = true; });
    mc->add_option("--paths", f.paths, "number of simulated paths");
    verify->add_option("--directions", f.directions, "random perturbations per check");
    auto* fixture = app.add_subcommand("fixture", "write a bundled fixture as JSON");
    std::string fixture_name;
    fixture->add_option("--name", fixture_name, "lq_example | mv_example | scalar_n1")->required();
    fixture->add_option("--output", f.output, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*fixture) {
        Config fx;
        if (fixture_name == "lq_example")
            fx = lq_example();
        else if (fixture_name == "mv_example")
            fx = mv_example();
        else if (fixture_name == "scalar_n1")
            fx = scalar_n1();
        else {
            std::cerr << "input error: unknown fixture " << fixture_name << '\n';
            return 1;
        }
        open_out(f, fixture_name + ".json") << dump_config(fx);
        return 0;
    }

    Config cfg;
    try {
        cfg = parse_config_file(f.config);
        if (f.t >= 0) {
            const int N = cfg.kind == ProblemKind::MV ? cfg.market.N
                : cfg.kind == ProblemKind::LQ         ? cfg.lq.N
                                                      : cfg.glq.N();
            if (f.t >= N)
                throw ConfigError("--t must be below the horizon");
        }
        if (!f.ks.empty())
            (void)parse_ks(f.ks);
    } catch (const std::exception& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*solve)
            return cmd_solve(cfg, f);
        if (*sweep_cmd)
            return cmd_sweep(cfg, f);
        if (*verify)
            return cmd_verify(cfg, f);
        if (*oracle)
            return cmd_oracle(cfg, f);
        return cmd_mc(cfg, f);
    } catch (const SolvabilityError& e) {
        std::cerr << "solvability failure: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
