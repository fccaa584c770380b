#include "fgame/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fgame {

using nlohmann::json;

const char* to_string(ProblemKind k)
{
    switch (k) {
    case ProblemKind::GLQ: return "glq";
    case ProblemKind::LQ: return "lq";
    case ProblemKind::MV: return "mv";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg)
{
    throw ConfigError(path + ": " + msg);
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!j.is_object())
        fail(path, "expected an object");
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            fail(path + "." + it.key(), "unknown key");
}

const json& need(const json& j, const std::string& path, const char* key)
{
    if (!j.contains(key))
        fail(path + "." + key, "missing");
    return j.at(key);
}

double as_number(const json& j, const std::string& path)
{
    if (!j.is_number())
        fail(path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path, int lo = 0)
{
    if (!j.is_number_integer())
        fail(path, "expected an integer");
    const long long v = j.get<long long>();
    if (v < lo || v > 1000000)
        fail(path, "out of range");
    return static_cast<int>(v);
}

std::string shape(const json& j)
{
    if (j.is_number())
        return "scalar";
    if (!j.is_array())
        return std::string(j.type_name());
    if (j.empty())
        return "0x0";
    if (j[0].is_array())
        return std::to_string(j.size()) + "x" + std::to_string(j[0].size());
    return "vector of " + std::to_string(j.size());
}

Mat as_matrix(const json& j, const std::string& path, int rows, int cols)
{
    const std::string want = std::to_string(rows) + "x" + std::to_string(cols);
    if (j.is_number() && rows == 1 && cols == 1)
        return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        fail(path, "expected " + want + ", got " + shape(j));
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const json& row = j[r];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            fail(path, "expected " + want + ", got " + shape(j));
        for (int c = 0; c < cols; ++c)
            m(r, c) = as_number(row[c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    return m;
}

Vec as_vector(const json& j, const std::string& path, int size)
{
    if (j.is_number() && size == 1)
        return Vec::Constant(1, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != size)
        fail(path, "expected vector of " + std::to_string(size) + ", got " + shape(j));
    Vec v(size);
    for (int i = 0; i < size; ++i)
        v(i) = as_number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

bool numbers_only(const json& j)
{
    if (!j.is_array())
        return false;
    for (const auto& e : j)
        if (!e.is_number())
            return false;
    return true;
}

/// A single matrix value: rows of numbers, or a bare number for 1x1.
bool matrix_leaf(const json& j, int rows, int cols)
{
    if (rows == 1 && cols == 1)
        return j.is_number() || (j.is_array() && j.size() == 1 && numbers_only(j[0]) && j[0].size() == 1);
    if (!j.is_array() || j.empty())
        return false;
    for (const auto& r : j)
        if (!numbers_only(r))
            return false;
    return true;
}

/// A single vector value: numbers, or a bare number for size 1.
bool vector_leaf(const json& j, int size)
{
    if (size == 1)
        return j.is_number() || (numbers_only(j) && j.size() == 1);
    return numbers_only(j);
}

std::string at(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

/// Single matrix broadcast over N stages, or a list of N matrices.
std::vector<Mat> matrix_list(const json& j, const std::string& path, int N, int rows, int cols)
{
    if (matrix_leaf(j, rows, cols))
        return std::vector<Mat>(N, as_matrix(j, path, rows, cols));
    if (!j.is_array() || static_cast<int>(j.size()) != N)
        fail(path, "expected one " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix or a list of "
                 + std::to_string(N) + ", got " + shape(j));
    std::vector<Mat> out;
    for (int k = 0; k < N; ++k)
        out.push_back(as_matrix(j[k], at(path, k), rows, cols));
    return out;
}

std::vector<Vec> vector_list(const json& j, const std::string& path, int N, int size)
{
    if (vector_leaf(j, size))
        return std::vector<Vec>(N, as_vector(j, path, size));
    if (!j.is_array() || static_cast<int>(j.size()) != N)
        fail(path, "expected one vector of " + std::to_string(size) + " or a list of " + std::to_string(N));
    std::vector<Vec> out;
    for (int k = 0; k < N; ++k)
        out.push_back(as_vector(j[k], at(path, k), size));
    return out;
}

std::vector<double> scalar_list(const json& j, const std::string& path, int N)
{
    if (j.is_number())
        return std::vector<double>(N, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != N)
        fail(path, "expected a number or a list of " + std::to_string(N));
    std::vector<double> out;
    for (int k = 0; k < N; ++k)
        out.push_back(as_number(j[k], at(path, k)));
    return out;
}

/// Noise-channel matrices: a list of p matrices (broadcast) or N such lists.
std::vector<std::vector<Mat>> channel_list(const json& j, const std::string& path, int N, int p, int rows,
                                           int cols)
{
    if (!j.is_array() || j.empty())
        fail(path, "expected a list");
    std::vector<std::vector<Mat>> out(N);
    if (matrix_leaf(j[0], rows, cols)) {
        if (static_cast<int>(j.size()) != p)
            fail(path, "expected " + std::to_string(p) + " channel matrices, got " + std::to_string(j.size()));
        std::vector<Mat> ch;
        for (int i = 0; i < p; ++i)
            ch.push_back(as_matrix(j[i], at(path, i), rows, cols));
        for (auto& o : out)
            o = ch;
        return out;
    }
    if (static_cast<int>(j.size()) != N)
        fail(path, "expected a list of " + std::to_string(N) + " stages");
    for (int k = 0; k < N; ++k) {
        const json& s = j[k];
        if (!s.is_array() || static_cast<int>(s.size()) != p)
            fail(at(path, k), "expected " + std::to_string(p) + " channel matrices");
        for (int i = 0; i < p; ++i)
            out[k].push_back(as_matrix(s[i], at(at(path, k), i), rows, cols));
    }
    return out;
}

json mat_json(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json vec_json(const Vec& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

template <class T, class F>
json list_json(const std::vector<T>& xs, F f)
{
    json out = json::array();
    for (const auto& x : xs)
        out.push_back(f(x));
    return out;
}

StorageKind parse_storage(const json& s, const std::string& path)
{
    if (s == "stationary")
        return StorageKind::Stationary;
    if (s == "double_indexed")
        return StorageKind::DoubleIndexed;
    fail(path, "expected \"stationary\" or \"double_indexed\"");
}

/// One weight of a WeightTable: a single value, N values by stage, or (double
/// indexed only) a list over t whose entry t lists k = t..N-1.
template <class Table, class Leaf, class Reader, class Setter>
void fill_stages(Table& table, const json& j, const std::string& path, int N, StorageKind kind, Leaf is_leaf,
                 Reader read, Setter set)
{
    const int tmax = kind == StorageKind::Stationary ? 0 : N - 1;
    if (is_leaf(j)) {
        const auto v = read(j, path);
        for (int t = 0; t <= tmax; ++t)
            for (int k = t; k < N; ++k)
                set(table.stage(t, k), v);
        return;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != N)
        fail(path, "expected one value or a list of " + std::to_string(N));
    if (is_leaf(j[0])) {
        for (int k = 0; k < N; ++k) {
            const auto v = read(j[k], at(path, k));
            for (int t = 0; t <= std::min(k, tmax); ++t)
                set(table.stage(t, k), v);
        }
        return;
    }
    if (kind != StorageKind::DoubleIndexed)
        fail(path, "per-(t,k) weights need \"storage\": \"double_indexed\"");
    for (int t = 0; t < N; ++t) {
        const json& row = j[t];
        if (!row.is_array() || static_cast<int>(row.size()) != N - t)
            fail(at(path, t), "expected " + std::to_string(N - t) + " entries (k = t..N-1)");
        for (int k = t; k < N; ++k)
            set(table.stage(t, k), read(row[k - t], at(at(path, t), k - t)));
    }
}

template <class Table, class Leaf, class Reader, class Setter>
void fill_terminal(Table& table, const json& j, const std::string& path, int N, StorageKind kind, Leaf is_leaf,
                   Reader read, Setter set)
{
    if (is_leaf(j)) {
        const auto v = read(j, path);
        for (int t = 0; t < (kind == StorageKind::Stationary ? 1 : N); ++t)
            set(table.terminal(t), v);
        return;
    }
    if (kind != StorageKind::DoubleIndexed)
        fail(path, "per-t terminal weights need \"storage\": \"double_indexed\"");
    if (!j.is_array() || static_cast<int>(j.size()) != N)
        fail(path, "expected one value or a list of " + std::to_string(N) + " (over t)");
    for (int t = 0; t < N; ++t)
        set(table.terminal(t), read(j[t], at(path, t)));
}

template <class Table, class Setter>
void stage_matrix(Table& table, const json& j, const std::string& path, int N, StorageKind kind, int r, int c,
                  Setter set)
{
    fill_stages(
        table, j, path, N, kind, [r, c](const json& x) { return matrix_leaf(x, r, c); },
        [r, c](const json& x, const std::string& p) { return as_matrix(x, p, r, c); }, set);
}

template <class Table, class Setter>
void stage_vector(Table& table, const json& j, const std::string& path, int N, StorageKind kind, int n,
                  Setter set)
{
    fill_stages(
        table, j, path, N, kind, [n](const json& x) { return vector_leaf(x, n); },
        [n](const json& x, const std::string& p) { return as_vector(x, p, n); }, set);
}

template <class Table, class Setter>
void terminal_matrix(Table& table, const json& j, const std::string& path, int N, StorageKind kind, int n,
                     Setter set)
{
    fill_terminal(
        table, j, path, N, kind, [n](const json& x) { return matrix_leaf(x, n, n); },
        [n](const json& x, const std::string& p) { return as_matrix(x, p, n, n); }, set);
}

template <class Table, class Setter>
void terminal_vector(Table& table, const json& j, const std::string& path, int N, StorageKind kind, int n,
                     Setter set)
{
    fill_terminal(
        table, j, path, N, kind, [n](const json& x) { return vector_leaf(x, n); },
        [n](const json& x, const std::string& p) { return as_vector(x, p, n); }, set);
}

SamplerKind parse_sampler(const json& j, const std::string& path)
{
    if (j == "two_point")
        return SamplerKind::TwoPointProduct;
    if (j == "gaussian")
        return SamplerKind::GaussianWithCov;
    fail(path, "expected \"two_point\" or \"gaussian\"");
}

const char* sampler_name(SamplerKind s)
{
    return s == SamplerKind::TwoPointProduct ? "two_point" : "gaussian";
}

NoiseSpec parse_noise(const json& j, const std::string& path, int N, int p)
{
    allow_keys(j, path, {"delta", "sampler"});
    NoiseSpec ns;
    ns.p = p;
    ns.deltas = matrix_list(need(j, path, "delta"), path + ".delta", N, p, p);
    if (j.contains("sampler"))
        ns.sampler = parse_sampler(j.at("sampler"), path + ".sampler");
    return ns;
}

json noise_json(const NoiseSpec& ns)
{
    return json{{"delta", list_json(ns.deltas, mat_json)}, {"sampler", sampler_name(ns.sampler)}};
}

void parse_tolerances(const json& doc, Tolerances& tol)
{
    if (!doc.contains("tolerances"))
        return;
    const json& j = doc.at("tolerances");
    allow_keys(j, "$.tolerances", {"rank_rtol", "psd_atol", "range_rtol"});
    if (j.contains("rank_rtol"))
        tol.rank_rtol = as_number(j.at("rank_rtol"), "$.tolerances.rank_rtol");
    if (j.contains("psd_atol"))
        tol.psd_atol = as_number(j.at("psd_atol"), "$.tolerances.psd_atol");
    if (j.contains("range_rtol"))
        tol.range_rtol = as_number(j.at("range_rtol"), "$.tolerances.range_rtol");
    try {
        tol.check();
    } catch (const std::exception& e) {
        fail("$.tolerances", e.what());
    }
}

void parse_eval(const json& doc, EvalSettings& ev, int N)
{
    if (!doc.contains("evaluation"))
        return;
    const json& j = doc.at("evaluation");
    const std::string p = "$.evaluation";
    allow_keys(j, p, {"k", "grid", "paths", "seed"});
    if (j.contains("k")) {
        const json& ks = j.at("k");
        if (!ks.is_array())
            fail(p + ".k", "expected a list of integers");
        ev.ks.clear();
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const int k = as_int(ks[i], at(p + ".k", i));
            if (k > N)
                fail(at(p + ".k", i), "beyond the horizon");
            ev.ks.push_back(k);
        }
    }
    if (j.contains("grid")) {
        if (!j.at("grid").is_string())
            fail(p + ".grid", "expected a grid spec string");
        ev.grid = j.at("grid").get<std::string>();
    }
    if (j.contains("paths"))
        ev.paths = as_int(j.at("paths"), p + ".paths", 2);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned())
            fail(p + ".seed", "expected a nonnegative integer");
        ev.seed = j.at("seed").get<std::uint64_t>();
    }
}

json eval_json(const EvalSettings& ev)
{
    return json{{"k", ev.ks}, {"grid", ev.grid}, {"paths", ev.paths}, {"seed", ev.seed}};
}

json tol_json(const Tolerances& t)
{
    return json{{"rank_rtol", t.rank_rtol}, {"psd_atol", t.psd_atol}, {"range_rtol", t.range_rtol}};
}

void check_report(const ValidationReport& r)
{
    if (!r.ok())
        throw ConfigError("$: problem validation failed\n" + r.str());
}

// ---- lq

void parse_lq(const json& doc, Config& cfg)
{
    allow_keys(doc, "$",
               {"kind", "N", "n", "m", "p", "storage", "dynamics", "noise", "cost", "punishment", "initial",
                "evaluation", "tolerances"});
    LQProblem& lq = cfg.lq;
    const int N = as_int(need(doc, "$", "N"), "$.N", 1);
    const int n = as_int(need(doc, "$", "n"), "$.n", 1);
    const int m = as_int(need(doc, "$", "m"), "$.m", 1);
    const int p = as_int(need(doc, "$", "p"), "$.p", 1);
    const StorageKind kind =
        doc.contains("storage") ? parse_storage(doc.at("storage"), "$.storage") : StorageKind::Stationary;
    lq.N = N;
    lq.n = n;
    lq.m = m;

    const json& dj = need(doc, "$", "dynamics");
    allow_keys(dj, "$.dynamics", {"A", "B", "C", "D"});
    lq.A = matrix_list(need(dj, "$.dynamics", "A"), "$.dynamics.A", N, n, n);
    lq.B = matrix_list(need(dj, "$.dynamics", "B"), "$.dynamics.B", N, n, m);
    if (dj.contains("C"))
        lq.C = channel_list(dj.at("C"), "$.dynamics.C", N, p, n, n);
    else
        lq.C.assign(N, std::vector<Mat>(p, Mat::Zero(n, n)));
    if (dj.contains("D"))
        lq.D = channel_list(dj.at("D"), "$.dynamics.D", N, p, n, m);
    else
        lq.D.assign(N, std::vector<Mat>(p, Mat::Zero(n, m)));
    lq.noise = parse_noise(need(doc, "$", "noise"), "$.noise", N, p);

    lq.cost = zero_lq_cost(N, n, m, kind);
    if (doc.contains("cost")) {
        const json& cj = doc.at("cost");
        const std::string cp = "$.cost";
        allow_keys(cj, cp, {"Q", "Qbar", "R", "Rbar", "q", "G", "Gbar", "g"});
        if (cj.contains("Q"))
            stage_matrix(lq.cost, cj.at("Q"), cp + ".Q", N, kind, n, n, [](LQStageCost& s, const Mat& v) { s.Q = v; });
        if (cj.contains("Qbar"))
            stage_matrix(lq.cost, cj.at("Qbar"), cp + ".Qbar", N, kind, n, n,
                         [](LQStageCost& s, const Mat& v) { s.Qbar = v; });
        if (cj.contains("R"))
            stage_matrix(lq.cost, cj.at("R"), cp + ".R", N, kind, m, m, [](LQStageCost& s, const Mat& v) { s.R = v; });
        if (cj.contains("Rbar"))
            stage_matrix(lq.cost, cj.at("Rbar"), cp + ".Rbar", N, kind, m, m,
                         [](LQStageCost& s, const Mat& v) { s.Rbar = v; });
        if (cj.contains("q"))
            stage_vector(lq.cost, cj.at("q"), cp + ".q", N, kind, n, [](LQStageCost& s, const Vec& v) { s.q = v; });
        if (cj.contains("G"))
            terminal_matrix(lq.cost, cj.at("G"), cp + ".G", N, kind, n,
                          [](LQTerminalCost& s, const Mat& v) { s.G = v; });
        if (cj.contains("Gbar"))
            terminal_matrix(lq.cost, cj.at("Gbar"), cp + ".Gbar", N, kind, n,
                          [](LQTerminalCost& s, const Mat& v) { s.Gbar = v; });
        if (cj.contains("g"))
            terminal_vector(lq.cost, cj.at("g"), cp + ".g", N, kind, n,
                          [](LQTerminalCost& s, const Vec& v) { s.g = v; });
    }

    cfg.punish = Punishment::constant(N, 0.0, Mat::Identity(m, m));
    if (doc.contains("punishment")) {
        const json& pj = doc.at("punishment");
        allow_keys(pj, "$.punishment", {"mu", "psi"});
        if (pj.contains("mu"))
            cfg.punish.mus = scalar_list(pj.at("mu"), "$.punishment.mu", N);
        if (pj.contains("psi"))
            cfg.punish.psis = matrix_list(pj.at("psi"), "$.punishment.psi", N, m, m);
    }
    cfg.x = Vec::Zero(n);
    if (doc.contains("initial")) {
        const json& ij = doc.at("initial");
        allow_keys(ij, "$.initial", {"t", "x"});
        if (ij.contains("t"))
            cfg.t = as_int(ij.at("t"), "$.initial.t");
        if (ij.contains("x"))
            cfg.x = as_vector(ij.at("x"), "$.initial.x", n);
    }
    check_report(validate(lq));
}

json lq_cost_json(const LQCost& c, int N)
{
    json out;
    const bool di = c.kind() == StorageKind::DoubleIndexed;
    auto stages = [&](auto get) {
        json rows = json::array();
        if (!di) {
            for (int k = 0; k < N; ++k)
                rows.push_back(get(c.stage(0, k)));
            return rows;
        }
        for (int t = 0; t < N; ++t) {
            json row = json::array();
            for (int k = t; k < N; ++k)
                row.push_back(get(c.stage(t, k)));
            rows.push_back(row);
        }
        return rows;
    };
    auto terms = [&](auto get) {
        if (!di)
            return get(c.terminal(0));
        json rows = json::array();
        for (int t = 0; t < N; ++t)
            rows.push_back(get(c.terminal(t)));
        return rows;
    };
    out["Q"] = stages([](const LQStageCost& s) { return mat_json(s.Q); });
    out["Qbar"] = stages([](const LQStageCost& s) { return mat_json(s.Qbar); });
    out["R"] = stages([](const LQStageCost& s) { return mat_json(s.R); });
    out["Rbar"] = stages([](const LQStageCost& s) { return mat_json(s.Rbar); });
    out["q"] = stages([](const LQStageCost& s) { return vec_json(s.q); });
    out["G"] = terms([](const LQTerminalCost& s) { return mat_json(s.G); });
    out["Gbar"] = terms([](const LQTerminalCost& s) { return mat_json(s.Gbar); });
    out["g"] = terms([](const LQTerminalCost& s) { return vec_json(s.g); });
    return out;
}

// ---- glq

void parse_player(const json& j, const std::string& path, PlayerCost& cost, int N, StorageKind kind, int n, int m)
{
    allow_keys(j, path, {"Q", "Qbar", "S", "Sbar", "R", "Rbar", "q", "rho", "G", "Gbar", "g"});
    using SC = StageCost;
    using TC = TerminalCost;
    if (j.contains("Q"))
        stage_matrix(cost, j.at("Q"), path + ".Q", N, kind, n, n, [](SC& s, const Mat& v) { s.Q = v; });
    if (j.contains("Qbar"))
        stage_matrix(cost, j.at("Qbar"), path + ".Qbar", N, kind, n, n, [](SC& s, const Mat& v) { s.Qbar = v; });
    if (j.contains("S"))
        stage_matrix(cost, j.at("S"), path + ".S", N, kind, m, n, [](SC& s, const Mat& v) { s.S = v; });
    if (j.contains("Sbar"))
        stage_matrix(cost, j.at("Sbar"), path + ".Sbar", N, kind, m, n, [](SC& s, const Mat& v) { s.Sbar = v; });
    if (j.contains("R"))
        stage_matrix(cost, j.at("R"), path + ".R", N, kind, m, m, [](SC& s, const Mat& v) { s.R = v; });
    if (j.contains("Rbar"))
        stage_matrix(cost, j.at("Rbar"), path + ".Rbar", N, kind, m, m, [](SC& s, const Mat& v) { s.Rbar = v; });
    if (j.contains("q"))
        stage_vector(cost, j.at("q"), path + ".q", N, kind, n, [](SC& s, const Vec& v) { s.q = v; });
    if (j.contains("rho"))
        stage_vector(cost, j.at("rho"), path + ".rho", N, kind, m, [](SC& s, const Vec& v) { s.rho = v; });
    if (j.contains("G"))
        terminal_matrix(cost, j.at("G"), path + ".G", N, kind, n, [](TC& s, const Mat& v) { s.G = v; });
    if (j.contains("Gbar"))
        terminal_matrix(cost, j.at("Gbar"), path + ".Gbar", N, kind, n,
                      [](TC& s, const Mat& v) { s.Gbar = v; });
    if (j.contains("g"))
        terminal_vector(cost, j.at("g"), path + ".g", N, kind, n, [](TC& s, const Vec& v) { s.g = v; });
}

json player_json(const PlayerCost& c, int N)
{
    json out;
    const bool di = c.kind() == StorageKind::DoubleIndexed;
    auto stages = [&](auto get) {
        json rows = json::array();
        if (!di) {
            for (int k = 0; k < N; ++k)
                rows.push_back(get(c.stage(0, k)));
            return rows;
        }
        for (int t = 0; t < N; ++t) {
            json row = json::array();
            for (int k = t; k < N; ++k)
                row.push_back(get(c.stage(t, k)));
            rows.push_back(row);
        }
        return rows;
    };
    auto terms = [&](auto get) {
        if (!di)
            return get(c.terminal(0));
        json rows = json::array();
        for (int t = 0; t < N; ++t)
            rows.push_back(get(c.terminal(t)));
        return rows;
    };
    out["Q"] = stages([](const StageCost& s) { return mat_json(s.Q); });
    out["Qbar"] = stages([](const StageCost& s) { return mat_json(s.Qbar); });
    out["S"] = stages([](const StageCost& s) { return mat_json(s.S); });
    out["Sbar"] = stages([](const StageCost& s) { return mat_json(s.Sbar); });
    out["R"] = stages([](const StageCost& s) { return mat_json(s.R); });
    out["Rbar"] = stages([](const StageCost& s) { return mat_json(s.Rbar); });
    out["q"] = stages([](const StageCost& s) { return vec_json(s.q); });
    out["rho"] = stages([](const StageCost& s) { return vec_json(s.rho); });
    out["G"] = terms([](const TerminalCost& s) { return mat_json(s.G); });
    out["Gbar"] = terms([](const TerminalCost& s) { return mat_json(s.Gbar); });
    out["g"] = terms([](const TerminalCost& s) { return vec_json(s.g); });
    return out;
}

void parse_glq(const json& doc, Config& cfg)
{
    allow_keys(doc, "$",
               {"kind", "N", "n", "m1", "m2", "p", "storage", "storage2", "dynamics", "noise", "cost1", "cost2",
                "initial", "evaluation", "tolerances"});
    GLQProblem& g = cfg.glq;
    GLQDynamics& d = g.dyn;
    const int N = as_int(need(doc, "$", "N"), "$.N", 1);
    const int n = as_int(need(doc, "$", "n"), "$.n", 1);
    const int m1 = as_int(need(doc, "$", "m1"), "$.m1", 0);
    const int m2 = as_int(need(doc, "$", "m2"), "$.m2", 0);
    const int p = as_int(need(doc, "$", "p"), "$.p", 1);
    d.N = N;
    d.n = n;
    d.m1 = m1;
    d.m2 = m2;
    const json& dj = need(doc, "$", "dynamics");
    const std::string dp = "$.dynamics";
    allow_keys(dj, dp, {"A", "B1", "B2", "C", "D1", "D2"});
    d.A = matrix_list(need(dj, dp, "A"), dp + ".A", N, n, n);
    d.B1 = matrix_list(need(dj, dp, "B1"), dp + ".B1", N, n, m1);
    d.B2 = matrix_list(need(dj, dp, "B2"), dp + ".B2", N, n, m2);
    d.C = dj.contains("C") ? channel_list(dj.at("C"), dp + ".C", N, p, n, n)
                           : std::vector<std::vector<Mat>>(N, std::vector<Mat>(p, Mat::Zero(n, n)));
    d.D1 = dj.contains("D1") ? channel_list(dj.at("D1"), dp + ".D1", N, p, n, m1)
                             : std::vector<std::vector<Mat>>(N, std::vector<Mat>(p, Mat::Zero(n, m1)));
    d.D2 = dj.contains("D2") ? channel_list(dj.at("D2"), dp + ".D2", N, p, n, m2)
                             : std::vector<std::vector<Mat>>(N, std::vector<Mat>(p, Mat::Zero(n, m2)));
    g.noise = parse_noise(need(doc, "$", "noise"), "$.noise", N, p);

    const StorageKind k1 =
        doc.contains("storage") ? parse_storage(doc.at("storage"), "$.storage") : StorageKind::Stationary;
    const StorageKind k2 =
        doc.contains("storage2") ? parse_storage(doc.at("storage2"), "$.storage2") : StorageKind::DoubleIndexed;
    g.cost1 = PlayerCost(N, n, m1, m2, k1);
    g.cost2 = PlayerCost(N, n, m1, m2, k2);
    if (doc.contains("cost1"))
        parse_player(doc.at("cost1"), "$.cost1", g.cost1, N, k1, n, m1 + m2);
    if (doc.contains("cost2"))
        parse_player(doc.at("cost2"), "$.cost2", g.cost2, N, k2, n, m1 + m2);

    cfg.x = Vec::Zero(n);
    if (doc.contains("initial")) {
        const json& ij = doc.at("initial");
        allow_keys(ij, "$.initial", {"t", "y"});
        if (ij.contains("t"))
            cfg.t = as_int(ij.at("t"), "$.initial.t");
        if (ij.contains("y"))
            cfg.x = as_vector(ij.at("y"), "$.initial.y", n);
    }
    check_report(validate(g));
}

// ---- mv

void parse_mv(const json& doc, Config& cfg)
{
    allow_keys(doc, "$", {"kind", "N", "p0", "market", "punishment", "initial", "evaluation", "tolerances"});
    MarketData& md = cfg.market;
    md.N = as_int(need(doc, "$", "N"), "$.N", 1);
    md.p0 = as_int(need(doc, "$", "p0"), "$.p0", 1);
    const json& mj = need(doc, "$", "market");
    const std::string mp = "$.market";
    allow_keys(mj, mp, {"s", "mean_e", "cov_e", "lambda", "sampler"});
    md.s = scalar_list(need(mj, mp, "s"), mp + ".s", md.N);
    md.mean_e = vector_list(need(mj, mp, "mean_e"), mp + ".mean_e", md.N, md.p0);
    md.cov_e = matrix_list(need(mj, mp, "cov_e"), mp + ".cov_e", md.N, md.p0, md.p0);
    md.lambda = as_number(need(mj, mp, "lambda"), mp + ".lambda");
    if (mj.contains("sampler"))
        md.sampler = parse_sampler(mj.at("sampler"), mp + ".sampler");

    cfg.mv_punish = MVPunishment::constant(md.N, 0.0, Mat::Identity(md.p0, md.p0));
    if (doc.contains("punishment")) {
        const json& pj = doc.at("punishment");
        allow_keys(pj, "$.punishment", {"mu", "phi"});
        if (pj.contains("mu"))
            cfg.mv_punish.mus = scalar_list(pj.at("mu"), "$.punishment.mu", md.N);
        if (pj.contains("phi"))
            cfg.mv_punish.phis = matrix_list(pj.at("phi"), "$.punishment.phi", md.N, md.p0, md.p0);
    }
    if (doc.contains("initial")) {
        const json& ij = doc.at("initial");
        allow_keys(ij, "$.initial", {"t", "z"});
        if (ij.contains("t"))
            cfg.t = as_int(ij.at("t"), "$.initial.t");
        if (ij.contains("z"))
            cfg.z = as_number(ij.at("z"), "$.initial.z");
    }
    check_report(validate(md));
    cfg.x = Vec::Constant(1, cfg.z);
}

}  // namespace

Config parse_config(const json& doc)
{
    if (!doc.is_object())
        fail("$", "expected an object");
    const json& kj = need(doc, "$", "kind");
    Config cfg;
    if (kj == "lq")
        cfg.kind = ProblemKind::LQ;
    else if (kj == "glq")
        cfg.kind = ProblemKind::GLQ;
    else if (kj == "mv")
        cfg.kind = ProblemKind::MV;
    else
        fail("$.kind", "expected \"glq\", \"lq\" or \"mv\"");

    switch (cfg.kind) {
    case ProblemKind::LQ: parse_lq(doc, cfg); break;
    case ProblemKind::GLQ: parse_glq(doc, cfg); break;
    case ProblemKind::MV: parse_mv(doc, cfg); break;
    }
    const int N = cfg.kind == ProblemKind::MV ? cfg.market.N : cfg.kind == ProblemKind::LQ ? cfg.lq.N : cfg.glq.N();
    if (cfg.t >= N)
        fail("$.initial.t", "must be below the horizon");
    parse_eval(doc, cfg.eval, N);
    if (cfg.eval.ks.empty())
        for (int k = cfg.t; k < N; ++k)
            cfg.eval.ks.push_back(k);
    parse_tolerances(doc, cfg.tol);
    return cfg;
}

Config parse_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path + ": cannot open");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

json to_json(const Config& cfg)
{
    json out;
    out["kind"] = to_string(cfg.kind);
    if (cfg.kind == ProblemKind::LQ) {
        const LQProblem& lq = cfg.lq;
        out["N"] = lq.N;
        out["n"] = lq.n;
        out["m"] = lq.m;
        out["p"] = lq.p();
        out["storage"] = lq.cost.kind() == StorageKind::Stationary ? "stationary" : "double_indexed";
        auto chan = [](const std::vector<Mat>& v) { return list_json(v, mat_json); };
        out["dynamics"] = {{"A", list_json(lq.A, mat_json)},
                           {"B", list_json(lq.B, mat_json)},
                           {"C", list_json(lq.C, chan)},
                           {"D", list_json(lq.D, chan)}};
        out["noise"] = noise_json(lq.noise);
        out["cost"] = lq_cost_json(lq.cost, lq.N);
        out["punishment"] = {{"mu", cfg.punish.mus}, {"psi", list_json(cfg.punish.psis, mat_json)}};
        out["initial"] = {{"t", cfg.t}, {"x", vec_json(cfg.x)}};
    } else if (cfg.kind == ProblemKind::GLQ) {
        const GLQProblem& g = cfg.glq;
        const GLQDynamics& d = g.dyn;
        out["N"] = d.N;
        out["n"] = d.n;
        out["m1"] = d.m1;
        out["m2"] = d.m2;
        out["p"] = g.p();
        out["storage"] = g.cost1.kind() == StorageKind::Stationary ? "stationary" : "double_indexed";
        out["storage2"] = g.cost2.kind() == StorageKind::Stationary ? "stationary" : "double_indexed";
        auto chan = [](const std::vector<Mat>& v) { return list_json(v, mat_json); };
        out["dynamics"] = {{"A", list_json(d.A, mat_json)},   {"B1", list_json(d.B1, mat_json)},
                           {"B2", list_json(d.B2, mat_json)}, {"C", list_json(d.C, chan)},
                           {"D1", list_json(d.D1, chan)},     {"D2", list_json(d.D2, chan)}};
        out["noise"] = noise_json(g.noise);
        out["cost1"] = player_json(g.cost1, d.N);
        out["cost2"] = player_json(g.cost2, d.N);
        out["initial"] = {{"t", cfg.t}, {"y", vec_json(cfg.x)}};
    } else {
        const MarketData& md = cfg.market;
        out["N"] = md.N;
        out["p0"] = md.p0;
        out["market"] = {{"s", md.s},
                         {"mean_e", list_json(md.mean_e, vec_json)},
                         {"cov_e", list_json(md.cov_e, mat_json)},
                         {"lambda", md.lambda},
                         {"sampler", sampler_name(md.sampler)}};
        out["punishment"] = {{"mu", cfg.mv_punish.mus}, {"phi", list_json(cfg.mv_punish.phis, mat_json)}};
        out["initial"] = {{"t", cfg.t}, {"z", cfg.z}};
    }
    out["evaluation"] = eval_json(cfg.eval);
    out["tolerances"] = tol_json(cfg.tol);
    return out;
}

namespace {

bool has_object(const json& j)
{
    if (j.is_object())
        return true;
    if (j.is_array())
        for (const auto& e : j)
            if (has_object(e))
                return true;
    return false;
}

void pretty(std::ostream& os, const json& j, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    if (!has_object(j)) {
        os << j.dump();
        return;
    }
    if (j.is_array()) {
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            os << pad << "  ";
            pretty(os, j[i], indent + 2);
            os << (i + 1 < j.size() ? ",\n" : "\n");
        }
        os << pad << "]";
        return;
    }
    os << "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        os << pad << "  " << json(it.key()).dump() << ": ";
        pretty(os, it.value(), indent + 2);
        os << (i + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << "}";
}

}  // namespace

std::string dump_config(const Config& cfg)
{
    std::ostringstream os;
    pretty(os, to_json(cfg), 0);
    os << '\n';
    return os.str();
}

// ---- fixtures

namespace {

Mat m22(double a, double b, double c, double d)
{
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Mat v2(double a, double b)
{
    Mat m(2, 1);
    m << a, b;
    return m;
}

}  // namespace

Config lq_example()
{
    Config cfg;
    cfg.kind = ProblemKind::LQ;
    LQProblem& lq = cfg.lq;
    lq.N = 4;
    lq.n = 2;
    lq.m = 1;
    lq.A = {m22(1, 0.4, 0.3, 2), m22(1.102, -0.24, 0.53, 1.89), m22(1.89, 0.49, 0, 1.75), m22(0.8, -0.4, 0.2, 0.7)};
    lq.B = {v2(1.2, -0.5), v2(1, 1), v2(1.2, 0.2), v2(1, 0.3)};
    lq.D = {{v2(1, 0.3)}, {v2(1, 0.4)}, {v2(0.45, 0.25)}, {v2(0.52, 0)}};
    lq.C.assign(4, {Mat::Zero(2, 2)});
    lq.noise.p = 1;
    lq.noise.deltas.assign(4, Mat::Identity(1, 1));
    lq.cost = zero_lq_cost(4, 2, 1, StorageKind::Stationary);
    const Mat Q[4] = {m22(0.55, 0.25, 0.25, 0.6), m22(1, -0.325, -0.325, 0.5), m22(1.25, 0.25, 0.25, 1.4),
                      m22(0.5, 0, 0, 0.375)};
    const Mat Qb[4] = {m22(1, 0.325, 0.325, 1.15), m22(1.265, 0.175, 0.175, 0.95), m22(1.25, 0.325, 0.325, 0.9),
                       m22(1, 0, 0, 1.5)};
    const double R[4] = {1.5, 1.4, 1.6, 2.0};
    for (int k = 0; k < 4; ++k) {
        lq.cost.stage(0, k).Q = Q[k];
        lq.cost.stage(0, k).Qbar = Qb[k];
        lq.cost.stage(0, k).R = Mat::Constant(1, 1, R[k]);
    }
    lq.cost.terminal(0).G = m22(1, -0.1, -0.1, 1);
    lq.cost.terminal(0).Gbar = m22(0.5, 0, 0, 0.5);
    cfg.punish = Punishment::constant(4, 0.0, Mat::Identity(1, 1));
    cfg.x = Vec::Constant(2, 0.5);
    cfg.eval.ks = {0, 1, 2, 3};
    cfg.eval.grid = "standard:2";
    return cfg;
}

Config mv_example()
{
    Config cfg;
    cfg.kind = ProblemKind::MV;
    MarketData& md = cfg.market;
    md.N = 4;
    md.p0 = 3;
    md.s.assign(4, 1.04);
    Vec e(3);
    e << 1.162, 1.246, 1.228;
    md.mean_e.assign(4, e);
    Mat cov(3, 3);
    cov << 0.0146, 0.0187, 0.0145, 0.0187, 0.0854, 0.0104, 0.0145, 0.0104, 0.0289;
    md.cov_e.assign(4, cov);
    md.lambda = 1.0;
    cfg.mv_punish = MVPunishment::constant(4, 0.0, Mat::Identity(3, 3));
    cfg.z = 10.0;
    cfg.x = Vec::Constant(1, 10.0);
    cfg.eval.ks = {0, 1, 2, 3};
    cfg.eval.grid = "standard:1";
    return cfg;
}

Config scalar_n1()
{
    Config cfg;
    cfg.kind = ProblemKind::GLQ;
    GLQProblem& g = cfg.glq;
    g.dyn.N = 1;
    g.dyn.n = g.dyn.m1 = g.dyn.m2 = 1;
    const Mat one = Mat::Ones(1, 1);
    g.dyn.A = {one};
    g.dyn.B1 = {one};
    g.dyn.B2 = {one};
    g.dyn.C = {{Mat::Zero(1, 1)}};
    g.dyn.D1 = {{Mat::Zero(1, 1)}};
    g.dyn.D2 = {{Mat::Zero(1, 1)}};
    g.noise.p = 1;
    g.noise.deltas = {one};
    g.cost1 = PlayerCost(1, 1, 1, 1, StorageKind::Stationary);
    g.cost2 = PlayerCost(1, 1, 1, 1, StorageKind::DoubleIndexed);
    g.cost1.stage(0, 0).R(0, 0) = 1.0;
    g.cost1.terminal(0).G = one;
    g.cost2.stage(0, 0).R(1, 1) = 1.0;
    g.cost2.terminal(0).G = one;
    cfg.x = one.col(0);
    cfg.eval.ks = {0};
    return cfg;
}

}  // namespace fgame
