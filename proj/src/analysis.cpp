#include "ssr/analysis.hpp"

#include <numbers>

namespace ssr {

double normalized_entropy(const Vector& counts)
{
    const Index n = counts.size();
    const double total = counts.sum();
    if (n < 2 || total <= 0.0) return 0.0;
    double h = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double q = counts(j) / total;
        if (q > 0.0) h -= q * std::log(q);
    }
    return h / std::log(static_cast<double>(n));
}

double coefficient_of_variation(const Vector& counts)
{
    const double mean = counts.mean();
    if (mean <= 0.0) return 0.0;
    const double var = (counts.array() - mean).square().mean();
    return std::sqrt(var) / mean;
}

LoadStats load_stats(const RoutingDecision& decision, Index n)
{
    LoadStats st;
    st.counts_top1 = Vector::Zero(n);
    st.counts_topk = Vector::Zero(n);
    for (Index j : decision.top1()) st.counts_top1(j) += 1.0;
    for (const auto& t : decision.tokens)
        for (Index j : t.support) st.counts_topk(j) += 1.0;

    const double m = static_cast<double>(decision.token_count());
    if (m > 0) {
        st.fractions_top1 = st.counts_top1 / m;
        st.fractions_topk = st.counts_topk / m;
    } else {
        st.fractions_top1 = Vector::Zero(n);
        st.fractions_topk = Vector::Zero(n);
    }
    st.entropy_top1 = normalized_entropy(st.counts_top1);
    st.entropy_topk = normalized_entropy(st.counts_topk);
    st.cv_top1 = coefficient_of_variation(st.counts_top1);
    st.cv_topk = coefficient_of_variation(st.counts_topk);
    return st;
}

double std_normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

SelectionProbs selection_prob_formula(const Vector& g, double sigma, double alpha_noise)
{
    if (!(alpha_noise > 0.0))
        throw std::invalid_argument("selection_prob_formula: alpha_noise must be > 0 (zero noise is a deterministic argmax)");
    if (!(sigma > 0.0)) throw std::invalid_argument("selection_prob_formula: sigma must be > 0");
    const double scale = std::numbers::sqrt2 * sigma * alpha_noise;
    SelectionProbs out;
    out.g = g;
    out.sigma = sigma;
    out.alpha_noise = alpha_noise;
    out.probs = Vector::Ones(g.size());
    for (Index i = 0; i < g.size(); ++i)
        for (Index j = 0; j < g.size(); ++j)
            if (j != i) out.probs(i) *= std_normal_cdf((g(i) - g(j)) / scale);
    return out;
}

Vector monte_carlo_selection(const Vector& g, double sigma, double alpha_noise, long trials, Rng& rng)
{
    if (trials < 1) throw std::invalid_argument("monte_carlo_selection: trials must be >= 1");
    std::normal_distribution<double> normal(0.0, sigma);
    const Index n = g.size();
    Vector counts = Vector::Zero(n);
    for (long t = 0; t < trials; ++t) {
        Index best = 0;
        double best_value = g(0) + alpha_noise * normal(rng);
        for (Index j = 1; j < n; ++j) {
            const double v = g(j) + alpha_noise * normal(rng);
            if (v > best_value) {
                best_value = v;
                best = j;
            }
        }
        counts(best) += 1.0;
    }
    return counts / static_cast<double>(trials);
}

}  // namespace ssr
