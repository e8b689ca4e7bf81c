#include "ssr/analysis.hpp"

#include "doctest.h"

#include <numbers>

using namespace ssr;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

RoutingDecision top1_decision(const std::vector<Index>& experts)
{
    RoutingDecision d;
    for (Index e : experts) d.tokens.push_back({{e}, {1.0}, {}});
    return d;
}

}  // namespace

TEST_CASE("std_normal_cdf")
{
    CHECK(std_normal_cdf(0.0) == 0.5);
    for (double z : {0.5, 1.0, 3.0}) CHECK(std::abs(std_normal_cdf(z) + std_normal_cdf(-z) - 1.0) < 1e-14);
    // 0.760249938906523268841... from a 30-digit evaluation.
    CHECK(std::abs(std_normal_cdf(1.0 / std::numbers::sqrt2) - 0.7602499389065233) < 1e-15);
    CHECK(std_normal_cdf(-40.0) >= 0.0);
    CHECK(std_normal_cdf(-10.0) > 0.0);
}

TEST_CASE("selection_prob_formula")
{
    const SelectionProbs eq = selection_prob_formula(vec({0.3, 0.3}), 1.0, 1.0);
    CHECK(eq.probs(0) == 0.5);
    CHECK(eq.probs(1) == 0.5);

    const SelectionProbs two = selection_prob_formula(vec({1.0, 0.0}), 1.0, 1.0);
    CHECK(two.probs(0) == doctest::Approx(0.7602499389065233).epsilon(1e-14));
    CHECK(two.probs(1) == doctest::Approx(1 - 0.7602499389065233).epsilon(1e-13));

    // n > 2: the factors share noise, so the formula does not sum to one.
    const SelectionProbs three = selection_prob_formula(vec({0.0, 0.0, 0.0}), 1.0, 2.0);
    for (Index i = 0; i < 3; ++i) CHECK(three.probs(i) == 0.25);

    CHECK_THROWS_AS(selection_prob_formula(vec({1, 0}), 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("monte_carlo_selection")
{
    Rng rng(12);
    SUBCASE("single trial is one-hot")
    {
        const Vector v = monte_carlo_selection(vec({0.2, 0.5, 0.1}), 1.0, 1.0, 1, rng);
        CHECK(v.sum() == 1.0);
        CHECK(v.maxCoeff() == 1.0);
    }
    SUBCASE("two experts agree with the formula")
    {
        const long trials = 400000;
        const Vector g = vec({0.4, -0.2});
        const double p = selection_prob_formula(g, 0.8, 1.3).probs(0);
        const Vector v = monte_carlo_selection(g, 0.8, 1.3, trials, rng);
        CHECK(std::abs(v(0) - p) <= 3.0 * std::sqrt(p * (1 - p) / trials));
    }
    SUBCASE("three equal experts")
    {
        const Vector v = monte_carlo_selection(vec({1.0, 1.0, 1.0}), 1.0, 1.0, 1000000, rng);
        for (Index i = 0; i < 3; ++i) CHECK(std::abs(v(i) - 1.0 / 3.0) <= 0.0015);
    }
}

TEST_CASE("load statistics")
{
    SUBCASE("uniform")
    {
        const LoadStats s = load_stats(top1_decision({0, 1, 2, 3, 0, 1, 2, 3}), 4);
        CHECK(s.entropy_top1 == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(s.cv_top1 == doctest::Approx(0.0));
        CHECK(s.fractions_top1.sum() == doctest::Approx(1.0));
    }
    SUBCASE("collapsed")
    {
        const LoadStats s = load_stats(top1_decision({2, 2, 2, 2, 2}), 5);
        CHECK(s.entropy_top1 == doctest::Approx(0.0));
        CHECK(s.cv_top1 == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("top-k counts every selected expert")
    {
        RoutingDecision d;
        d.tokens.push_back({{0, 1}, {0.9, 0.1}, {}});
        d.tokens.push_back({{1, 2}, {0.2, 0.8}, {}});
        const LoadStats s = load_stats(d, 3);
        CHECK(s.counts_top1 == vec({1, 0, 1}));
        CHECK(s.counts_topk == vec({1, 2, 1}));
        CHECK(s.fractions_topk.sum() == doctest::Approx(2.0));
    }
}

TEST_CASE("sinkhorn balances a planted skew")
{
    Rng rng(77);
    Matrix s = gaussian_matrix(160, 16, 1.0, rng);
    s.col(5).array() += 2.0;
    RouterConfig cfg;
    cfg.k = 1;
    const double sk = load_stats(sinkhorn_route({s}, cfg, rng), 16).cv_top1;
    const double sm = load_stats(softmax_route({s}, 1), 16).cv_top1;
    CHECK(sk < sm);
}
