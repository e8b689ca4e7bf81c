#include "ssr/benchmark.hpp"

#include "doctest.h"

using namespace ssr;

TEST_CASE("benchmark rows and baseline")
{
    BenchmarkSetup setup;
    setup.m = 32;
    setup.n = 4;
    setup.d = 4;
    setup.repetitions = 10;
    setup.warmup = 1;
    RouterConfig vanilla;
    RouterConfig always;
    always.p = 1.0;
    const auto rows = overhead_benchmark({{"vanilla", vanilla}, {"p1", always}}, setup);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].overhead_ratio == 1.0);
    CHECK(rows[0].sinkhorn_calls == 0);
    CHECK(rows[1].sinkhorn_calls == 10);
    CHECK(rows[1].samples_ms.size() == 10);
    CHECK(rows[1].mean_ms > 0.0);

    const std::string csv = benchmark_csv(rows);
    CHECK(csv.rfind(std::string(kBenchmarkCsvHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("implicit baseline is not reported")
{
    BenchmarkSetup setup;
    setup.m = 16;
    setup.n = 4;
    setup.d = 4;
    setup.repetitions = 5;
    RouterConfig half;
    half.p = 0.5;
    const auto rows = overhead_benchmark({{"half", half}}, setup);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].config_id == "half");
    CHECK(rows[0].overhead_ratio > 0.0);
    CHECK_THROWS_AS(overhead_benchmark({}, setup), std::invalid_argument);
}
