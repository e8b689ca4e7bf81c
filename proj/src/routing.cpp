#include "ssr/routing.hpp"

#include <algorithm>
#include <numeric>

namespace ssr {

const char* to_string(Branch branch)
{
    return branch == Branch::Softmax ? "Softmax" : "Sinkhorn";
}

const char* to_string(RouterMode mode)
{
    return mode == RouterMode::Train ? "train" : "inference";
}

const char* to_string(BranchOverride override)
{
    switch (override) {
    case BranchOverride::ForceSoftmax: return "softmax";
    case BranchOverride::ForceSinkhorn: return "sinkhorn";
    case BranchOverride::ForceNoise: return "noise";
    case BranchOverride::ForceBoth: return "both";
    }
    return "?";
}

RouterMode parse_router_mode(const std::string& text)
{
    if (text == "train") return RouterMode::Train;
    if (text == "inference") return RouterMode::Inference;
    throw std::invalid_argument("unknown mode '" + text + "' (expected train|inference)");
}

BranchOverride parse_branch_override(const std::string& text)
{
    if (text == "softmax") return BranchOverride::ForceSoftmax;
    if (text == "sinkhorn") return BranchOverride::ForceSinkhorn;
    if (text == "noise") return BranchOverride::ForceNoise;
    if (text == "both") return BranchOverride::ForceBoth;
    throw std::invalid_argument("unknown branch override '" + text + "' (expected softmax|sinkhorn|noise|both)");
}

void validate(const RouterConfig& config, Index n)
{
    if (config.k < 1 || config.k > n)
        throw std::invalid_argument("router config: k must satisfy 1 <= k <= n");
    if (!(config.p >= 0.0 && config.p <= 1.0))
        throw std::invalid_argument("router config: p must lie in [0, 1]");
    if (!(config.xi > 0.0)) throw std::invalid_argument("router config: xi must be > 0");
    if (!(config.delta > 0.0)) throw std::invalid_argument("router config: delta must be > 0");
    if (config.eta < 1) throw std::invalid_argument("router config: eta must be >= 1");
    if (!(config.alpha_noise >= 0.0)) throw std::invalid_argument("router config: alpha_noise must be >= 0");
    if (!(config.sigma > 0.0)) throw std::invalid_argument("router config: sigma must be > 0");
}

Matrix RoutingDecision::dense_weights(Index n) const
{
    Matrix out = Matrix::Zero(token_count(), n);
    for (Index i = 0; i < token_count(); ++i) {
        const auto& t = tokens[static_cast<std::size_t>(i)];
        for (std::size_t r = 0; r < t.support.size(); ++r) out(i, t.support[r]) = t.weights[r];
    }
    return out;
}

std::vector<Index> RoutingDecision::top1() const
{
    std::vector<Index> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < t.weights.size(); ++r)
            if (t.weights[r] > t.weights[best]) best = r;
        out.push_back(t.support[best]);
    }
    return out;
}

std::vector<Index> topk_indices(const Eigen::Ref<const Vector>& row, int k)
{
    const Index n = row.size();
    if (k < 1 || k > n) throw std::invalid_argument("topk_indices: k must satisfy 1 <= k <= n");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
        return row(a) > row(b) || (row(a) == row(b) && a < b);
    });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

namespace {

TokenRoute softmax_token(const Eigen::Ref<const Vector>& row, int k)
{
    TokenRoute t;
    t.support = topk_indices(row, k);
    t.selected_scores.reserve(t.support.size());
    for (Index j : t.support) t.selected_scores.push_back(row(j));
    const double c = *std::max_element(t.selected_scores.begin(), t.selected_scores.end());
    double total = 0.0;
    for (double s : t.selected_scores) {
        t.weights.push_back(std::exp(s - c));
        total += t.weights.back();
    }
    for (double& w : t.weights) w /= total;
    return t;
}

}  // namespace

RoutingDecision softmax_route(const GatingScores& scores, int k)
{
    RoutingDecision d;
    d.branch = Branch::Softmax;
    d.tokens.reserve(static_cast<std::size_t>(scores.token_count()));
    for (Index i = 0; i < scores.token_count(); ++i)
        d.tokens.push_back(softmax_token(scores.values.row(i).transpose(), k));
    return d;
}

TokenRoute renormalize_topk(const Eigen::Ref<const Vector>& plan_row, int k)
{
    if (!(plan_row.minCoeff() > 0.0))
        throw std::invalid_argument("renormalize_topk: plan row must be strictly positive");
    TokenRoute t;
    t.support = topk_indices(plan_row, k);
    double total = 0.0;
    for (Index j : t.support) total += plan_row(j);
    for (Index j : t.support) t.weights.push_back(plan_row(j) / total);
    return t;
}

SinkhornRouteResult sinkhorn_route_detailed(const GatingScores& scores, const RouterConfig& config, Rng& rng,
                                            bool with_noise)
{
    validate(config, scores.expert_count());
    CostMatrix cost = build_cost(scores, config.cost_mode);
    if (with_noise && config.alpha_noise > 0.0) cost = inject_noise(cost, config.alpha_noise, config.sigma, rng);

    SinkhornResult solved = sinkhorn_maxcost(cost, config.solver());
    if (solved.diagnostics.overflow || !solved.plan) throw SinkhornOverflow(solved.diagnostics);

    SinkhornRouteResult out;
    out.decision.branch = Branch::Sinkhorn;
    out.decision.tokens.reserve(static_cast<std::size_t>(scores.token_count()));
    for (Index i = 0; i < solved.plan->rows(); ++i)
        out.decision.tokens.push_back(renormalize_topk(solved.plan->values.row(i).transpose(), config.k));
    out.plan = std::move(*solved.plan);
    out.diagnostics = solved.diagnostics;
    return out;
}

RoutingDecision sinkhorn_route(const GatingScores& scores, const RouterConfig& config, Rng& rng)
{
    return sinkhorn_route_detailed(scores, config, rng, true).decision;
}

namespace {

RoutingDecision noisy_softmax_route(const GatingScores& scores, const RouterConfig& config, Rng& rng)
{
    if (config.alpha_noise <= 0.0) return softmax_route(scores, config.k);
    GatingScores noisy{scores.values + config.alpha_noise *
                                           gaussian_matrix(scores.token_count(), scores.expert_count(),
                                                           config.sigma, rng)};
    return softmax_route(noisy, config.k);
}

SsrOutcome from_sinkhorn(SinkhornRouteResult r)
{
    SsrOutcome out;
    out.decision = r.decision;
    out.sinkhorn = std::move(r);
    return out;
}

}  // namespace

SsrOutcome ssr_route_detailed(const GatingScores& scores, const RouterConfig& config, Rng& rng)
{
    validate(config, scores.expert_count());
    if (config.branch_override) {
        switch (*config.branch_override) {
        case BranchOverride::ForceSoftmax: return {softmax_route(scores, config.k), std::nullopt};
        case BranchOverride::ForceSinkhorn: return from_sinkhorn(sinkhorn_route_detailed(scores, config, rng, false));
        case BranchOverride::ForceNoise: return {noisy_softmax_route(scores, config, rng), std::nullopt};
        case BranchOverride::ForceBoth: return from_sinkhorn(sinkhorn_route_detailed(scores, config, rng, true));
        }
    }
    if (config.mode == RouterMode::Inference) return {softmax_route(scores, config.k), std::nullopt};

    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double tau = uniform(rng);
    if (tau < config.p) return from_sinkhorn(sinkhorn_route_detailed(scores, config, rng, true));
    return {softmax_route(scores, config.k), std::nullopt};
}

RoutingDecision ssr_route(const GatingScores& scores, const RouterConfig& config, Rng& rng)
{
    return ssr_route_detailed(scores, config, rng).decision;
}

double kl_to_plan_row(const TokenRoute& route, const Eigen::Ref<const Vector>& plan_row)
{
    double kl = 0.0;
    for (std::size_t r = 0; r < route.support.size(); ++r) {
        const double target = plan_row(route.support[r]);
        if (!(target > 0.0)) throw std::invalid_argument("kl_to_plan_row: support contains a zero plan entry");
        const double a = route.weights[r];
        if (a > 0.0) kl += a * std::log(a / target);
    }
    return kl;
}

namespace {

void enumerate_supports(const Eigen::Ref<const Vector>& row, int k, Index next, std::vector<Index>& current,
                        SupportSearch& best, bool& have_best)
{
    if (static_cast<int>(current.size()) == k) {
        double mass = 0.0;
        for (Index j : current) mass += row(j);
        std::vector<double> weights;
        double kl = 0.0;
        for (Index j : current) {
            const double a = row(j) / mass;
            weights.push_back(a);
            kl += a * std::log(a / row(j));
        }
        // Candidates arrive in lexicographic order; only a strict improvement replaces the incumbent.
        if (!have_best || kl < best.kl - 1e-15 * std::max(1.0, std::abs(best.kl))) {
            best.support = current;
            best.weights = std::move(weights);
            best.kl = kl;
            have_best = true;
        }
        return;
    }
    const Index remaining = k - static_cast<Index>(current.size());
    for (Index j = next; j <= row.size() - remaining; ++j) {
        current.push_back(j);
        enumerate_supports(row, k, j + 1, current, best, have_best);
        current.pop_back();
    }
}

}  // namespace

SupportSearch brute_force_best_support(const Eigen::Ref<const Vector>& plan_row, int k)
{
    const Index n = plan_row.size();
    if (n > kBruteForceMaxExperts) throw std::invalid_argument("brute_force_best_support: n exceeds cap");
    if (k < 1 || k > n) throw std::invalid_argument("brute_force_best_support: k must satisfy 1 <= k <= n");
    if (!(plan_row.minCoeff() > 0.0))
        throw std::invalid_argument("brute_force_best_support: plan row must be strictly positive");
    SupportSearch best;
    bool have_best = false;
    std::vector<Index> current;
    enumerate_supports(plan_row, k, 0, current, best, have_best);
    return best;
}

}  // namespace ssr
