#pragma once

// Experiment configuration and the four subcommands behind the `ssr` executable.

#include "ssr/benchmark.hpp"
#include "ssr/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ssr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericFailure = 3;

/// Malformed configuration; the message starts with the offending field path or line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TaskConfig {
    int clusters = 8;
    Index d = 16;
    Index tokens = 4096;
    int steps = 2000;
    double learning_rate = 0.05;
    Index batch_size = 64;
    Index experts = 8;
    Index hidden = 0;  // 0 means 2d
    double cluster_std = 0.25;
    double separation = 8.0;
};

struct RunConfig {
    std::string name;
    RouterConfig router;
    Regularizer regularizer = Regularizer::None;
    double coefficient = 0.0;
    double gate_init_std = 0.1;
    std::optional<std::uint64_t> seed;  // falls back to the global seed
};

struct BenchConfig {
    Index m = 512;
    Index n = 16;
    Index d = 32;
    int repetitions = 30;
    int warmup = 3;
};

struct ExperimentConfig {
    TaskConfig task;
    std::vector<RunConfig> routers;
    std::string output_dir = "results";
    std::uint64_t seed = 0;
    BenchConfig bench;
};

/// Validates field names, types and ranges. Throws ConfigError.
ExperimentConfig parse_experiment_config(const json& doc);
/// Parses JSON text; syntax errors report line and column.
ExperimentConfig parse_experiment_config_text(const std::string& text);

struct RunSummary {
    std::string name;
    bool failed = false;
    std::string failure;  // "NaN" for failed runs
    int failed_step = -1;
    double final_loss = 0.0;
    double load_entropy = 0.0;  // top-k, normalized by log n
    double load_cv = 0.0;       // top-k
    double wall_time_s = 0.0;
    std::vector<TrainRecord> records;
};

SyntheticTask make_task(const ExperimentConfig& config);
/// Trains one block for `run` on `task`. Block init uses seed + 100, minibatches and routing seed + 200.
RunSummary run_training(const ExperimentConfig& config, const RunConfig& run, const SyntheticTask& task);
json run_summary_to_json(const RunSummary& summary);

int cmd_verify(const std::string& filter, const VerifyContext& ctx, std::ostream& out, std::ostream& err);
int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_bench(const std::string& config_path, std::ostream& out, std::ostream& err);

struct RouteArgs {
    std::string scores_path;
    int k = 2;
    double p = 0.0;
    double xi = 0.5;
    double delta = 1e-4;
    int eta = 100;
    std::string cost = "softmax";
    double alpha_noise = 0.0;
    double sigma = 1.0;
    std::string mode = "train";
    std::string force_branch;  // empty for none
    bool plan = false;
    bool naive = false;
    std::uint64_t seed = 0;
};

int cmd_route(const RouteArgs& args, std::ostream& out, std::ostream& err);

}  // namespace ssr
