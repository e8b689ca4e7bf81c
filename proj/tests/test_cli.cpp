#include "ssr/cli.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace ssr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "ssr_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write(const fs::path& path, const std::string& text)
{
    write_text_file(path, text);
    return path;
}

struct Captured {
    int code;
    std::string out;
    std::string err;
};

Captured route(RouteArgs args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = cmd_route(args, out, err);
    return {code, out.str(), err.str()};
}

std::string drop_last_column(const std::string& csv)
{
    std::istringstream in(csv);
    std::string line;
    std::string out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

int run_tool(const std::string& args)
{
    const int status = std::system((std::string(SSR_TOOL_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallTask = R"("task": {"clusters": 4, "d": 4, "tokens": 128, "steps": 40, "experts": 4, "batch_size": 16})";

}  // namespace

TEST_CASE("route fixtures")
{
    const fs::path dir = scratch("route");
    RouteArgs args;

    SUBCASE("softmax weights")
    {
        args.scores_path = write(dir / "s.csv", "0.6931471805599453,0\n");
        const Captured c = route(args);
        REQUIRE(c.code == kExitOk);
        const json j = json::parse(c.out);
        CHECK(j["branch"] == "Softmax");
        CHECK(j["tokens"][0]["weights"][0].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK(j["tokens"][0]["weights"][1].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("inference never takes sinkhorn")
    {
        args.scores_path = write(dir / "s.csv", "1,0\n0,1\n");
        args.mode = "inference";
        args.p = 1.0;
        args.plan = true;
        const json j = json::parse(route(args).out);
        CHECK(j["branch"] == "Softmax");
        CHECK(j["plan"].is_null());
        CHECK(j["diagnostics"].is_null());
    }
    SUBCASE("identity cost plan")
    {
        args.scores_path = write(dir / "s.csv", "1,0\n0,1\n");
        args.force_branch = "sinkhorn";
        args.cost = "linear";
        args.xi = 1.0;
        args.plan = true;
        const json j = json::parse(route(args).out);
        CHECK(j["branch"] == "Sinkhorn");
        const Matrix plan = matrix_from_json(j["plan"]);
        const double e = std::exp(1.0);
        CHECK(plan(0, 0) == doctest::Approx(e / (e + 1)).epsilon(1e-10));
        CHECK(plan(1, 0) == doctest::Approx(1 / (e + 1)).epsilon(1e-10));
        CHECK(j["diagnostics"]["converged"] == true);
    }
    SUBCASE("input errors exit 2")
    {
        args.scores_path = write(dir / "s.csv", "1,2\n3\n");
        CHECK(route(args).code == kExitInputError);
        args.scores_path = (dir / "missing.csv").string();
        CHECK(route(args).code == kExitInputError);
        args.scores_path = write(dir / "t.csv", "1,2\n3,4\n");
        args.k = 3;
        CHECK(route(args).code == kExitInputError);
        args.k = 2;
        args.cost = "quadratic";
        CHECK(route(args).code == kExitInputError);
    }
    SUBCASE("overflow exits 3 with diagnostics")
    {
        args.scores_path = write(dir / "s.csv", "40,0\n0,40.2\n");
        args.naive = true;
        args.cost = "linear";
        args.xi = 0.05;
        args.force_branch = "sinkhorn";
        const Captured c = route(args);
        CHECK(c.code == kExitNumericFailure);
        const json j = json::parse(c.out);
        CHECK(j["diagnostics"]["overflow"] == true);
    }
}

TEST_CASE("config parsing")
{
    SUBCASE("defaults and fields")
    {
        const ExperimentConfig c = parse_experiment_config_text(
            R"({"seed": 4, "routers": [{"name": "a", "p": 0.01, "cost": "linear", "regularizer": "z_loss",
                "coefficient": 0.001, "seed": 9}]})");
        CHECK(c.seed == 4);
        CHECK(c.task.clusters == 8);
        REQUIRE(c.routers.size() == 1);
        CHECK(c.routers[0].router.p == 0.01);
        CHECK(c.routers[0].router.cost_mode == CostMode::Linear);
        CHECK(c.routers[0].regularizer == Regularizer::ZLoss);
        CHECK(c.routers[0].seed == 9u);
    }
    auto message = [](const std::string& text) {
        try {
            parse_experiment_config_text(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message(R"({"routers": []})").rfind("routers", 0) == 0);
    CHECK(message(R"({"routers": [{"name": "a"}, {"name": "a"}]})").find("routers[1].name") == 0);
    CHECK(message(R"({"routers": [{"name": "a", "p": "high"}]})").find("routers[0].p") == 0);
    CHECK(message(R"({"routers": [{"name": "a", "q": 1}]})").find("routers[0].q: unknown") == 0);
    CHECK(message(R"({"routers": [{"name": "a", "k": 9}]})").find("routers[0]") == 0);
    CHECK(message(R"({"task": {"steps": 0}, "routers": [{"name": "a"}]})").find("task.steps") == 0);
    CHECK(message(R"({"routers": [{"name": "../x"}]})").find("routers[0].name") == 0);
    CHECK(message("{\n  \"routers\": [\n    {\"name\": \"a\",}\n  ]\n}").find("line 3") == 0);
}

TEST_CASE("train writes per-run csv and summary")
{
    const fs::path dir = scratch("train");
    const std::string config = std::string(R"({"seed": 1, "output_dir": ")") + (dir / "out").string() + "\", " +
                               kSmallTask + R"(, "routers": [
        {"name": "a", "p": 0.1, "seed": 1},
        {"name": "b", "p": 0.1, "seed": 2},
        {"name": "bad", "p": 1.0, "cost": "linear", "xi": 0.05, "stabilized": false, "gate_init_std": 80.0}
    ]})";
    const fs::path path = write(dir / "config.json", config);

    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_train(path.string(), out, err) == kExitOk);
    const std::string a = read_text_file(dir / "out" / "a.csv");
    const std::string b = read_text_file(dir / "out" / "b.csv");
    CHECK(a != b);
    CHECK(a.substr(0, a.find('\n')) == kTrainCsvHeader);
    CHECK(b.substr(0, b.find('\n')) == kTrainCsvHeader);
    CHECK(std::count(a.begin(), a.end(), '\n') == 41);

    const json summary = json::parse(read_text_file(dir / "out" / "summary.json"));
    REQUIRE(summary["runs"].size() == 3);
    for (const json& run : summary["runs"]) {
        CHECK(run.contains("final_loss"));
        CHECK(run.contains("load_entropy"));
        CHECK(run.contains("load_cv"));
        CHECK(run.contains("wall_time_s"));
    }
    CHECK(summary["runs"][0]["status"] == "ok");
    CHECK(summary["runs"][2]["status"] == "failed");
    CHECK(summary["runs"][2]["failed"] == "NaN");
    CHECK(summary["total_wall_time_s"].get<double>() > 0.0);

    // Same config and seed reproduce every column except step_ms.
    REQUIRE(cmd_train(path.string(), out, err) == kExitOk);
    CHECK(drop_last_column(read_text_file(dir / "out" / "a.csv")) == drop_last_column(a));
}

TEST_CASE("output directory override")
{
    const fs::path dir = scratch("override");
    const fs::path path = write(dir / "config.json", std::string(R"({"output_dir": "/nonexistent/never", )") +
                                                         kSmallTask + R"(, "routers": [{"name": "only"}]})");
    setenv("SSR_OUTPUT_DIR", (dir / "env").string().c_str(), 1);
    std::ostringstream out;
    std::ostringstream err;
    const int code = cmd_train(path.string(), out, err);
    unsetenv("SSR_OUTPUT_DIR");
    CHECK(code == kExitOk);
    CHECK(fs::exists(dir / "env" / "only.csv"));
}

TEST_CASE("train and bench config errors exit 2")
{
    const fs::path dir = scratch("errors");
    std::ostringstream out;
    std::ostringstream err;
    const fs::path empty = write(dir / "empty.json", R"({"routers": []})");
    CHECK(cmd_train(empty.string(), out, err) == kExitInputError);
    CHECK(cmd_bench(empty.string(), out, err) == kExitInputError);
    CHECK(cmd_train((dir / "missing.json").string(), out, err) == kExitInputError);
    const fs::path broken = write(dir / "broken.json", "{\"routers\": [\n");
    CHECK(cmd_train(broken.string(), out, err) == kExitInputError);
    CHECK(err.str().find("line") != std::string::npos);
}

TEST_CASE("bench writes csv and json")
{
    const fs::path dir = scratch("bench");
    const fs::path path = write(dir / "config.json", std::string(R"({"output_dir": ")") + (dir / "out").string() +
                                                         R"(", "bench": {"m": 32, "n": 4, "d": 4, "repetitions": 5},
        "routers": [{"name": "vanilla"}]})");
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cmd_bench(path.string(), out, err) == kExitOk);
    CHECK(err.str().find("warning") != std::string::npos);
    const std::string csv = read_text_file(dir / "out" / "bench.csv");
    CHECK(csv.rfind(std::string(kBenchmarkCsvHeader) + "\n", 0) == 0);
    const json j = json::parse(read_text_file(dir / "out" / "bench.json"));
    REQUIRE(j["rows"].size() == 1);
    CHECK(j["rows"][0]["overhead_ratio"] == 1.0);
}

TEST_CASE("executable exit codes")
{
    const fs::path dir = scratch("exe");
    CHECK(run_tool("verify --filter prop1") == kExitOk);
    CHECK(run_tool("--help") == kExitOk);
    CHECK(run_tool("route --no-such-flag") == kExitInputError);
    CHECK(run_tool("") == kExitInputError);
    const fs::path ragged = write(dir / "r.csv", "1,2\n3\n");
    CHECK(run_tool("route --scores " + ragged.string()) == kExitInputError);
    const fs::path big = write(dir / "b.csv", "40,0\n0,40.2\n");
    CHECK(run_tool("route --scores " + big.string() +
                   " --naive --cost linear --xi 0.05 --force-branch sinkhorn") == kExitNumericFailure);
}
