#pragma once

// Balance metrics and noisy-selection statistics.

#include "ssr/routing.hpp"

namespace ssr {

/// Per-expert loads. Top-1 fractions sum to 1; top-k fractions sum to k.
/// Entropies are normalized by log(n); CV is population std over mean of the counts.
struct LoadStats {
    Vector counts_top1;
    Vector counts_topk;
    Vector fractions_top1;
    Vector fractions_topk;
    double entropy_top1 = 0.0;
    double entropy_topk = 0.0;
    double cv_top1 = 0.0;
    double cv_topk = 0.0;
};

LoadStats load_stats(const RoutingDecision& decision, Index n);

/// Normalized Shannon entropy of a nonnegative count vector, in [0, 1].
double normalized_entropy(const Vector& counts);
double coefficient_of_variation(const Vector& counts);

/// Standard normal CDF, evaluated as erfc(-z / sqrt 2) / 2.
double std_normal_cdf(double z);

struct SelectionProbs {
    Vector probs;
    Vector g;
    double sigma = 1.0;
    double alpha_noise = 0.0;
};

/// P_i = prod_{j != i} Phi((g_i - g_j) / (sqrt(2) sigma alpha_noise)), evaluated verbatim.
/// The factors are treated as independent, so the result is exact only for n = 2.
SelectionProbs selection_prob_formula(const Vector& g, double sigma, double alpha_noise);

/// Empirical argmax frequencies of g + alpha_noise * N(0, sigma^2); ties to the lower index.
Vector monte_carlo_selection(const Vector& g, double sigma, double alpha_noise, long trials, Rng& rng);

}  // namespace ssr
