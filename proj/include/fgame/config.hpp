#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgame/fictitious.hpp"
#include "fgame/meanvar.hpp"

namespace fgame {

enum class ProblemKind { GLQ, LQ, MV };

const char* to_string(ProblemKind k);

struct EvalSettings {
    std::vector<int> ks;
    std::string grid = "list:[0]";
    long paths = 100000;
    std::uint64_t seed = 1;
};

/// Parsed document. Only the members matching `kind` are meaningful.
struct Config {
    ProblemKind kind = ProblemKind::LQ;
    GLQProblem glq;
    LQProblem lq;
    MarketData market;
    Punishment punish;        ///< lq
    MVPunishment mv_punish;   ///< mv
    int t = 0;
    Vec x;                    ///< lq: x, glq: y
    double z = 0;             ///< mv initial wealth
    EvalSettings eval;
    Tolerances tol;
};

/// Strict parse: unknown keys and shape mismatches raise ConfigError
/// naming the location, e.g. "$.dynamics.A[2]: expected 2x2, got 2x3".
Config parse_config(const nlohmann::json& doc);
Config parse_config_file(const std::string& path);

nlohmann::json to_json(const Config& cfg);
/// to_json with numeric arrays kept on one line.
std::string dump_config(const Config& cfg);

Config lq_example();
Config mv_example();
/// One-step scalar game x' = x + u + v with unit control and terminal weights.
Config scalar_n1();

}  // namespace fgame
