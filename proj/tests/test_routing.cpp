#include "ssr/routing.hpp"

#include "doctest.h"

using namespace ssr;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

using Support = std::vector<Index>;

}  // namespace

TEST_CASE("topk_indices")
{
    CHECK(topk_indices(vec({0.1, 0.9, 0.5}), 2) == Support{1, 2});
    CHECK(topk_indices(vec({0.4, 0.4, 0.1}), 1) == Support{0});
    CHECK(topk_indices(vec({0.3, 0.1, 0.2}), 3) == Support{0, 1, 2});
    CHECK_THROWS_AS(topk_indices(vec({1, 2}), 3), std::invalid_argument);
}

TEST_CASE("softmax_route")
{
    Matrix s(1, 3);
    s << std::log(2.0), 0, -10;
    const RoutingDecision d = softmax_route({s}, 2);
    CHECK(d.branch == Branch::Softmax);
    CHECK(d.tokens[0].support == Support{0, 1});
    CHECK(d.tokens[0].weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(d.tokens[0].weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(softmax_route({s}, 1).tokens[0].weights == std::vector<double>{1.0});

    Rng rng(1);
    const RoutingDecision r = softmax_route({uniform_matrix(50, 6, -20, 20, rng)}, 3);
    for (const auto& t : r.tokens) {
        double sum = 0.0;
        for (double w : t.weights) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("renormalize_topk")
{
    const TokenRoute a = renormalize_topk(vec({0.5, 0.3, 0.2}), 2);
    CHECK(a.support == Support{0, 1});
    CHECK(a.weights[0] == doctest::Approx(0.625).epsilon(1e-15));
    CHECK(a.weights[1] == doctest::Approx(0.375).epsilon(1e-15));
    const TokenRoute full = renormalize_topk(vec({0.2, 0.3, 0.5}), 3);
    CHECK(full.weights[0] == doctest::Approx(0.2));
    CHECK(full.weights[2] == doctest::Approx(0.5));
    const TokenRoute one = renormalize_topk(vec({0.2, 0.3, 0.5}), 1);
    CHECK(one.support == Support{2});
    CHECK(one.weights == std::vector<double>{1.0});
    CHECK_THROWS_AS(renormalize_topk(vec({0.2, 0.0, 0.5}), 2), std::invalid_argument);
}

TEST_CASE("sinkhorn_route")
{
    RouterConfig cfg;
    cfg.k = 1;
    Rng rng(0);
    SUBCASE("diagonal scores")
    {
        Matrix s(2, 2);
        s << 10, 0, 0, 10;
        const RoutingDecision d = sinkhorn_route({s}, cfg, rng);
        CHECK(d.branch == Branch::Sinkhorn);
        CHECK(d.tokens[0].support == Support{0});
        CHECK(d.tokens[1].support == Support{1});
    }
    SUBCASE("constant scores collapse to expert 0 under the tie rule")
    {
        const RoutingDecision d = sinkhorn_route({Matrix::Zero(8, 4)}, cfg, rng);
        for (const auto& t : d.tokens) CHECK(t.support == Support{0});
    }
    SUBCASE("weights sum to one")
    {
        cfg.k = 3;
        const RoutingDecision d = sinkhorn_route({uniform_matrix(20, 5, -3, 3, rng)}, cfg, rng);
        for (const auto& t : d.tokens) {
            double sum = 0.0;
            for (double w : t.weights) sum += w;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    SUBCASE("naive overflow raises")
    {
        cfg.stabilized = false;
        cfg.cost_mode = CostMode::Linear;
        cfg.xi = 0.05;
        CHECK_THROWS_AS(sinkhorn_route({Matrix::Constant(4, 4, 50.0)}, cfg, rng), SinkhornOverflow);
    }
}

TEST_CASE("ssr_route branch selection")
{
    Rng data(3);
    const GatingScores s{uniform_matrix(4, 4, -1, 1, data)};
    RouterConfig cfg;
    Rng rng(42);
    SUBCASE("p = 0")
    {
        for (int i = 0; i < 200; ++i) CHECK(ssr_route(s, cfg, rng).branch == Branch::Softmax);
    }
    SUBCASE("p = 1")
    {
        cfg.p = 1.0;
        for (int i = 0; i < 200; ++i) CHECK(ssr_route(s, cfg, rng).branch == Branch::Sinkhorn);
    }
    SUBCASE("p = 0.5")
    {
        cfg.p = 0.5;
        int hits = 0;
        for (int i = 0; i < 10000; ++i) hits += ssr_route(s, cfg, rng).branch == Branch::Sinkhorn;
        CHECK(hits >= 4850);
        CHECK(hits <= 5150);
    }
    SUBCASE("inference consumes no randomness")
    {
        cfg.p = 1.0;
        cfg.mode = RouterMode::Inference;
        Rng before = rng;
        CHECK(ssr_route(s, cfg, rng).branch == Branch::Softmax);
        CHECK(before == rng);
    }
    SUBCASE("overrides")
    {
        cfg.branch_override = BranchOverride::ForceSinkhorn;
        CHECK(ssr_route(s, cfg, rng).branch == Branch::Sinkhorn);
        cfg.branch_override = BranchOverride::ForceSoftmax;
        cfg.p = 1.0;
        CHECK(ssr_route(s, cfg, rng).branch == Branch::Softmax);
        cfg.branch_override = BranchOverride::ForceBoth;
        cfg.alpha_noise = 1.0;
        const SsrOutcome both = ssr_route_detailed(s, cfg, rng);
        CHECK(both.decision.branch == Branch::Sinkhorn);
        REQUIRE(both.sinkhorn);
        CHECK(both.sinkhorn->diagnostics.converged);
        cfg.branch_override = BranchOverride::ForceNoise;
        CHECK(ssr_route(s, cfg, rng).branch == Branch::Softmax);
    }
}

TEST_CASE("kl_to_plan_row")
{
    const Vector row = vec({0.5, 0.3, 0.2});
    CHECK(kl_to_plan_row(renormalize_topk(row, 3), row) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kl_to_plan_row(renormalize_topk(row, 2), row) == doctest::Approx(0.2231435513142097).epsilon(1e-12));
}

TEST_CASE("brute_force_best_support")
{
    const SupportSearch s = brute_force_best_support(vec({0.5, 0.3, 0.2}), 2);
    CHECK(s.support == Support{0, 1});
    CHECK(s.kl == doctest::Approx(-std::log(0.8)));
    const SupportSearch full = brute_force_best_support(vec({0.5, 0.3, 0.2}), 3);
    CHECK(full.kl == doctest::Approx(0.0).epsilon(1e-15));

    // Independent enumeration of every k-subset in this test.
    Rng rng(17);
    std::uniform_int_distribution<Index> ns(2, 8);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int t = 0; t < 200; ++t) {
        const Index n = ns(rng);
        const int k = 1 + t % static_cast<int>(std::min<Index>(3, n));
        Vector row(n);
        for (Index j = 0; j < n; ++j) row(j) = u(rng);
        double best_mass = -1.0;
        Support best;
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            if (std::popcount(mask) != k) continue;
            double mass = 0.0;
            Support sup;
            for (Index j = 0; j < n; ++j)
                if (mask & (1u << j)) {
                    mass += row(j);
                    sup.push_back(j);
                }
            if (mass > best_mass) {
                best_mass = mass;
                best = sup;
            }
        }
        CHECK(brute_force_best_support(row, k).support == best);
        CHECK(topk_indices(row, k) == best);
    }
}

TEST_CASE("validate")
{
    RouterConfig cfg;
    CHECK_NOTHROW(validate(cfg, 4));
    cfg.k = 5;
    CHECK_THROWS_AS(validate(cfg, 4), std::invalid_argument);
    cfg.k = 2;
    cfg.p = 1.5;
    CHECK_THROWS_AS(validate(cfg, 4), std::invalid_argument);
    cfg.p = 0.5;
    cfg.xi = 0.0;
    CHECK_THROWS_AS(validate(cfg, 4), std::invalid_argument);
}
