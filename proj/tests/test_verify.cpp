#include "ssr/cli.hpp"

#include "doctest.h"

#include <sstream>

using namespace ssr;

TEST_CASE("verify suite passes")
{
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_verify("", {}, out, err) == kExitOk);
    CHECK(out.str().find("FAIL") == std::string::npos);
}

TEST_CASE("verify filter")
{
    const auto results = run_verification({}, "prop1");
    REQUIRE(results.size() == 2);
    for (const auto& r : results) CHECK(r.name.rfind("prop1.", 0) == 0);
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_verify("no-such-check", {}, out, err) == kExitInputError);
}

TEST_CASE("flipped kernel sign is caught by the oracle check")
{
    VerifyContext ctx;
    ctx.solver = [](const CostMatrix& cost, const SinkhornOptions& opt) {
        CostMatrix flipped = cost;
        flipped.values = -cost.values;
        return sinkhorn_maxcost(flipped, opt);
    };
    std::ostringstream out;
    std::ostringstream err;
    CHECK(cmd_verify("ot.oracle", ctx, out, err) == kExitVerifyFailed);
    const std::string text = out.str();
    const std::string last = text.substr(text.rfind('\n', text.size() - 2) + 1);
    const json report = json::parse(last);
    CHECK(report["check"] == "ot.oracle");
    CHECK(report["counterexample"].contains("cost"));
    CHECK(report["counterexample"].contains("oracle"));
}
