#pragma once

// Token-to-expert routers: softmax top-k, Sinkhorn top-k with KL-optimal
// renormalization, and the selective router that picks between them.

#include "ssr/ot_core.hpp"

#include <optional>
#include <vector>

namespace ssr {

enum class Branch { Softmax, Sinkhorn };
enum class RouterMode { Train, Inference };

/// Ablation overrides. ForceNoise perturbs the scores before softmax top-k selection;
/// ForceBoth takes the Sinkhorn branch with cost noise.
enum class BranchOverride { ForceSoftmax, ForceSinkhorn, ForceNoise, ForceBoth };

const char* to_string(Branch branch);
const char* to_string(RouterMode mode);
const char* to_string(BranchOverride override);
RouterMode parse_router_mode(const std::string& text);
BranchOverride parse_branch_override(const std::string& text);

struct RouterConfig {
    double p = 0.0;  // probability of the Sinkhorn branch per call
    double xi = 0.5;
    double delta = 1e-4;
    int eta = 100;
    int k = 2;
    CostMode cost_mode = CostMode::Softmax;
    double alpha_noise = 0.0;
    double sigma = 1.0;
    RouterMode mode = RouterMode::Train;
    std::optional<BranchOverride> branch_override;
    bool stabilized = true;
    std::uint64_t seed = 0;

    SinkhornOptions solver() const { return {xi, delta, eta, stabilized}; }
};

/// Throws std::invalid_argument when the config cannot route `n` experts.
void validate(const RouterConfig& config, Index n);

/// One token's assignment. `support` is ascending; `weights[r]` belongs to `support[r]`.
struct TokenRoute {
    std::vector<Index> support;
    std::vector<double> weights;
    std::vector<double> selected_scores;  // raw scores on the support (Softmax branch only)
};

struct RoutingDecision {
    Branch branch = Branch::Softmax;
    std::vector<TokenRoute> tokens;

    Index token_count() const { return static_cast<Index>(tokens.size()); }
    /// Dense m x n weight matrix with exact zeros off the support.
    Matrix dense_weights(Index n) const;
    /// Expert with the largest weight per token, ties to the lower index.
    std::vector<Index> top1() const;
};

/// Indices of the k largest entries, ties to the lower index, returned ascending.
std::vector<Index> topk_indices(const Eigen::Ref<const Vector>& row, int k);

RoutingDecision softmax_route(const GatingScores& scores, int k);

/// Top-k entries of a positive plan row divided by their sum.
TokenRoute renormalize_topk(const Eigen::Ref<const Vector>& plan_row, int k);

struct SinkhornRouteResult {
    RoutingDecision decision;
    TransportPlan plan;
    SinkhornDiagnostics diagnostics;
};

/// Throws SinkhornOverflow when the solver reports overflow.
SinkhornRouteResult sinkhorn_route_detailed(const GatingScores& scores, const RouterConfig& config, Rng& rng,
                                            bool with_noise);
RoutingDecision sinkhorn_route(const GatingScores& scores, const RouterConfig& config, Rng& rng);

/// Full routing outcome; `sinkhorn` is set only when the Sinkhorn branch ran.
struct SsrOutcome {
    RoutingDecision decision;
    std::optional<SinkhornRouteResult> sinkhorn;
};

SsrOutcome ssr_route_detailed(const GatingScores& scores, const RouterConfig& config, Rng& rng);

/// Selective router: one uniform draw per call in Train mode, Sinkhorn iff draw < p.
/// Inference mode without an override always routes by softmax and consumes no randomness.
RoutingDecision ssr_route(const GatingScores& scores, const RouterConfig& config, Rng& rng);

/// KL(alpha || plan_row) over the support of `route`.
double kl_to_plan_row(const TokenRoute& route, const Eigen::Ref<const Vector>& plan_row);

struct SupportSearch {
    std::vector<Index> support;
    std::vector<double> weights;
    double kl = 0.0;
};

inline constexpr Index kBruteForceMaxExperts = 12;

/// Exhaustive search over all k-subsets for the KL-minimal renormalized assignment.
/// Ties keep the lexicographically smallest support.
SupportSearch brute_force_best_support(const Eigen::Ref<const Vector>& plan_row, int k);

}  // namespace ssr
