#pragma once

// Training-step overhead of router configurations relative to plain softmax routing.

#include "ssr/moe.hpp"

#include <string>
#include <vector>

namespace ssr {

struct NamedRouter {
    std::string name;
    RouterConfig config;
};

struct BenchmarkSetup {
    Index m = 512;
    Index n = 16;
    Index d = 32;
    int repetitions = 30;
    int warmup = 3;
    int groups = 5;  // median-of-means group count
    std::uint64_t seed = 0;
};

struct BenchmarkRow {
    std::string config_id;
    RouterConfig config;
    double mean_ms = 0.0;  // median of group means
    double std_ms = 0.0;   // sample standard deviation of all repetitions
    double overhead_ratio = 1.0;
    int sinkhorn_calls = 0;
    std::vector<double> samples_ms;

    double standard_error() const;
};

/// Times forward + backward of identical blocks that differ only in router config.
/// Repetitions are interleaved across configs, each config owns an identically seeded
/// random stream, and the ratio is taken against the first p = 0 config without an
/// override (or an implicit one built from the first config).
std::vector<BenchmarkRow> overhead_benchmark(const std::vector<NamedRouter>& routers, const BenchmarkSetup& setup);

inline constexpr const char* kBenchmarkCsvHeader = "config_id,p,xi,cost_mode,mean_ms,std_ms,overhead_ratio";
std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace ssr
