#include "ssr/benchmark.hpp"

#include "ssr/io.hpp"

#include <algorithm>
#include <chrono>

namespace ssr {

double BenchmarkRow::standard_error() const
{
    if (samples_ms.empty()) return 0.0;
    return std_ms / std::sqrt(static_cast<double>(samples_ms.size()));
}

namespace {

double median_of_means(const std::vector<double>& samples, int groups)
{
    const auto count = static_cast<int>(samples.size());
    groups = std::clamp(groups, 1, std::max(count, 1));
    std::vector<double> means;
    for (int g = 0; g < groups; ++g) {
        const int lo = g * count / groups;
        const int hi = (g + 1) * count / groups;
        if (hi <= lo) continue;
        double s = 0.0;
        for (int i = lo; i < hi; ++i) s += samples[static_cast<std::size_t>(i)];
        means.push_back(s / (hi - lo));
    }
    std::sort(means.begin(), means.end());
    const std::size_t mid = means.size() / 2;
    return means.size() % 2 == 1 ? means[mid] : 0.5 * (means[mid - 1] + means[mid]);
}

double sample_std(const std::vector<double>& samples)
{
    if (samples.size() < 2) return 0.0;
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    return std::sqrt(var / static_cast<double>(samples.size() - 1));
}

bool is_vanilla(const RouterConfig& c)
{
    return c.p == 0.0 && !c.branch_override;
}

}  // namespace

std::vector<BenchmarkRow> overhead_benchmark(const std::vector<NamedRouter>& routers, const BenchmarkSetup& setup)
{
    if (routers.empty()) throw std::invalid_argument("overhead_benchmark: no router configs");
    if (setup.repetitions < 1) throw std::invalid_argument("overhead_benchmark: repetitions must be >= 1");

    std::vector<NamedRouter> runs = routers;
    std::size_t baseline = runs.size();
    for (std::size_t c = 0; c < runs.size(); ++c) {
        if (is_vanilla(runs[c].config)) {
            baseline = c;
            break;
        }
    }
    const bool implicit_baseline = baseline == runs.size();
    if (implicit_baseline) {
        NamedRouter vanilla{"vanilla", routers.front().config};
        vanilla.config.p = 0.0;
        vanilla.config.branch_override.reset();
        runs.push_back(vanilla);
    }

    Rng init(setup.seed);
    const MoEBlock prototype = MoEBlock::random(setup.n, setup.d, runs.front().config, init);
    TokenBatch batch;
    batch.x = gaussian_matrix(setup.m, setup.d, 1.0, init);
    const Matrix upstream = gaussian_matrix(setup.m, setup.d, 1.0 / static_cast<double>(setup.m), init);

    std::vector<MoEBlock> blocks;
    std::vector<Rng> streams;
    std::vector<BenchmarkRow> rows(runs.size());
    for (std::size_t c = 0; c < runs.size(); ++c) {
        validate(runs[c].config, setup.n);
        MoEBlock b = prototype;
        b.config = runs[c].config;
        blocks.push_back(std::move(b));
        streams.emplace_back(setup.seed + 1);
        rows[c].config_id = runs[c].name;
        rows[c].config = runs[c].config;
    }

    auto one_step = [&](std::size_t c) {
        const MoEForward fwd = moe_forward(blocks[c], batch, streams[c]);
        const MoEGradients grads = moe_backward(blocks[c], batch, fwd, upstream);
        return std::pair{fwd.decision.branch == Branch::Sinkhorn, grads.gate(0, 0)};
    };

    double sink = 0.0;
    for (int w = 0; w < setup.warmup; ++w) {
        for (std::size_t c = 0; c < runs.size(); ++c) {
            Rng scratch(setup.seed + 2);
            const MoEForward fwd = moe_forward(blocks[c], batch, scratch);
            sink += moe_backward(blocks[c], batch, fwd, upstream).gate(0, 0);
        }
    }
    for (int rep = 0; rep < setup.repetitions; ++rep) {
        for (std::size_t c = 0; c < runs.size(); ++c) {
            const auto start = std::chrono::steady_clock::now();
            const auto [sinkhorn, probe] = one_step(c);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            rows[c].samples_ms.push_back(ms);
            rows[c].sinkhorn_calls += sinkhorn ? 1 : 0;
            sink += probe;
        }
    }
    if (std::isnan(sink)) throw std::runtime_error("overhead_benchmark: non-finite gradients");

    for (auto& row : rows) {
        row.mean_ms = median_of_means(row.samples_ms, setup.groups);
        row.std_ms = sample_std(row.samples_ms);
    }
    const double base = rows[baseline].mean_ms;
    for (auto& row : rows) row.overhead_ratio = base > 0.0 ? row.mean_ms / base : 1.0;
    if (implicit_baseline) rows.pop_back();
    return rows;
}

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows)
{
    std::string out = std::string(kBenchmarkCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += r.config_id + ',' + format_double(r.config.p) + ',' + format_double(r.config.xi) + ',' +
               to_string(r.config.cost_mode) + ',' + format_double(r.mean_ms) + ',' + format_double(r.std_ms) +
               ',' + format_double(r.overhead_ratio) + '\n';
    }
    return out;
}

}  // namespace ssr
