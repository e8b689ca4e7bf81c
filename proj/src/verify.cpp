#include "ssr/verify.hpp"

#include "ssr/oracle.hpp"

#include <chrono>
#include <numbers>

namespace ssr {

namespace {

CheckResult pass(std::string detail = {})
{
    CheckResult r;
    r.passed = true;
    r.detail = std::move(detail);
    return r;
}

CheckResult fail(std::string detail, json counterexample)
{
    CheckResult r;
    r.passed = false;
    r.detail = std::move(detail);
    r.counterexample = std::move(counterexample);
    return r;
}

double max_abs_diff(const Matrix& a, const Matrix& b)
{
    return (a - b).cwiseAbs().maxCoeff();
}

CostMatrix raw_cost(Matrix values)
{
    CostMatrix c;
    c.values = std::move(values);
    return c;
}

// --- ot_core -------------------------------------------------------------

CheckResult check_feasibility(const VerifyContext& ctx)
{
    Rng rng(ctx.seed);
    int converged = 0;
    for (CostMode mode : {CostMode::Linear, CostMode::Softmax}) {
        for (double xi : {0.05, 0.1, 0.5, 1.0}) {
            for (int t = 0; t < 10; ++t) {
                const CostMatrix cost = build_cost({uniform_matrix(64, 16, -3.0, 3.0, rng)}, mode);
                const SinkhornOptions opt{xi, 1e-4, 100, true};
                const SinkhornResult r = ctx.solver(cost, opt);
                if (!r.diagnostics.converged) continue;
                ++converged;
                const auto [row, col] = marginal_residuals(*r.plan);
                if (!(r.plan->values.minCoeff() > 0.0) || row >= opt.delta || col >= opt.delta)
                    return fail("converged plan violates C1-C3",
                                {{"cost_mode", to_string(mode)}, {"xi", xi}, {"row_residual", row},
                                 {"col_residual", col}, {"cost", matrix_to_json(cost.values)}});
            }
        }
    }
    return pass(std::to_string(converged) + "/80 runs converged at eta=100; all converged plans feasible");
}

CheckResult check_oracle(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 1);
    const double xi = 0.5;
    double worst = 0.0;
    for (Index m = 1; m <= 4; ++m) {
        for (Index n = 1; n <= 4; ++n) {
            for (int t = 0; t < 10; ++t) {
                const CostMatrix cost = raw_cost(uniform_matrix(m, n, -3.0, 3.0, rng));
                const SinkhornResult r = ctx.solver(cost, {xi, 1e-11, 1000000, true});
                const TransportPlan ref = oracle_entropic_ot(cost, xi);
                if (!r.plan || !r.diagnostics.converged)
                    return fail("solver did not converge on a desk-scale instance",
                                {{"cost", matrix_to_json(cost.values)}, {"xi", xi}});
                const double err = max_abs_diff(r.plan->values, ref.values);
                worst = std::max(worst, err);
                if (err > 1e-6)
                    return fail("plan differs from the oracle by " + format_double(err),
                                {{"cost", matrix_to_json(cost.values)},
                                 {"xi", xi},
                                 {"plan", matrix_to_json(r.plan->values)},
                                 {"oracle", matrix_to_json(ref.values)}});
            }
        }
    }
    return pass("max deviation " + format_double(worst));
}

CheckResult check_naive_vs_stabilized(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 2);
    std::uniform_int_distribution<Index> rows(2, 32);
    std::uniform_int_distribution<Index> cols(2, 8);
    std::uniform_real_distribution<double> xis(0.1, 1.0);
    int compared = 0;
    for (int t = 0; t < 100; ++t) {
        const CostMatrix cost = raw_cost(uniform_matrix(rows(rng), cols(rng), -3.0, 3.0, rng));
        const double xi = xis(rng);
        const SinkhornResult naive = ctx.solver(cost, {xi, 1e-4, 100, false});
        if (naive.diagnostics.overflow) continue;
        const SinkhornResult stable = ctx.solver(cost, {xi, 1e-4, 100, true});
        ++compared;
        const double err = max_abs_diff(naive.plan->values, stable.plan->values);
        if (err > 1e-8)
            return fail("naive and log-domain plans differ by " + format_double(err),
                        {{"cost", matrix_to_json(cost.values)}, {"xi", xi}});
    }
    return pass(std::to_string(compared) + " instances compared");
}

CheckResult check_shift_invariance(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 3);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        const CostMatrix cost = raw_cost(uniform_matrix(12, 5, -3.0, 3.0, rng));
        CostMatrix shifted = cost;
        const double c = shift(rng);
        shifted.values.array() += c;
        const SinkhornResult a = ctx.solver(cost, {0.5, 1e-10, 10000, true});
        const SinkhornResult b = ctx.solver(shifted, {0.5, 1e-10, 10000, true});
        const double err = max_abs_diff(a.plan->values, b.plan->values);
        if (err > 1e-8)
            return fail("constant shift changed the plan by " + format_double(err),
                        {{"cost", matrix_to_json(cost.values)}, {"shift", c}});
    }
    return pass();
}

CheckResult check_factorization(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 4);
    for (bool stabilized : {true, false}) {
        for (int t = 0; t < 30; ++t) {
            const CostMatrix cost = raw_cost(uniform_matrix(10, 4, -3.0, 3.0, rng));
            const SinkhornResult r = ctx.solver(cost, {0.5, 1e-4, 100, stabilized});
            const Matrix rebuilt = reconstruct_plan(*r.plan, cost, 0.5);
            const double rel = ((rebuilt - r.plan->values).array() / r.plan->values.array()).abs().maxCoeff();
            if (rel > 1e-10)
                return fail("diag(u) K diag(v) does not reproduce the plan (rel " + format_double(rel) + ")",
                            {{"cost", matrix_to_json(cost.values)}, {"stabilized", stabilized}});
        }
    }
    return pass();
}

CheckResult check_monotone_residuals(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 5);
    for (int t = 0; t < 50; ++t) {
        const CostMatrix cost = build_cost({uniform_matrix(32, 8, -3.0, 3.0, rng)}, CostMode::Softmax);
        const SinkhornResult r = ctx.solver(cost, {0.1, 1e-4, 100, true});
        if (!r.diagnostics.converged) continue;
        const double last = std::max(r.diagnostics.final_row_residual, r.diagnostics.final_col_residual);
        if (last > r.diagnostics.first_max_residual)
            return fail("final residual exceeds the first-iteration residual",
                        {{"cost", matrix_to_json(cost.values)}, {"first", r.diagnostics.first_max_residual},
                         {"last", last}});
    }
    return pass();
}

CheckResult check_closed_form_plans(const VerifyContext& ctx)
{
    const SinkhornResult one = ctx.solver(raw_cost(Matrix::Constant(1, 1, 3.7)), {0.5, 1e-12, 10, true});
    if (std::abs(one.plan->values(0, 0) - 1.0) > 1e-12) return fail("1x1 plan is not [[1]]", {});

    const SinkhornResult flat = ctx.solver(raw_cost(Matrix::Constant(2, 2, 1.3)), {0.7, 1e-12, 10, true});
    if (max_abs_diff(flat.plan->values, Matrix::Constant(2, 2, 0.5)) > 1e-12)
        return fail("constant cost plan is not uniform", {{"plan", matrix_to_json(flat.plan->values)}});

    const double e = std::numbers::e;
    Matrix expect(2, 2);
    expect << e / (e + 1), 1 / (e + 1), 1 / (e + 1), e / (e + 1);
    const SinkhornResult id = ctx.solver(raw_cost(Matrix::Identity(2, 2)), {1.0, 1e-12, 100, true});
    if (max_abs_diff(id.plan->values, expect) > 1e-12)
        return fail("identity cost plan differs from e/(e+1)", {{"plan", matrix_to_json(id.plan->values)}});
    return pass();
}

// --- routing -------------------------------------------------------------

Vector random_positive_row(Index n, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Vector row(n);
    for (Index j = 0; j < n; ++j) row(j) = u(rng);
    return row;
}

CheckResult check_prop1_optimality(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 6);
    std::uniform_int_distribution<Index> ns(3, 8);
    std::uniform_int_distribution<int> ks(1, 3);
    for (int t = 0; t < 200; ++t) {
        const Vector row = random_positive_row(ns(rng), rng);
        const int k = ks(rng);
        const TokenRoute route = renormalize_topk(row, k);
        const SupportSearch best = brute_force_best_support(row, k);
        const double kl = kl_to_plan_row(route, row);
        double mass_route = 0.0;
        double mass_best = 0.0;
        for (Index j : route.support) mass_route += row(j);
        for (Index j : best.support) mass_best += row(j);
        const bool same_support = route.support == best.support || std::abs(mass_route - mass_best) <= 1e-15;
        if (std::abs(kl - best.kl) > 1e-12 || !same_support)
            return fail("renormalized top-k is not KL-optimal",
                        {{"row", std::vector<double>(row.data(), row.data() + row.size())},
                         {"k", k},
                         {"support", route.support},
                         {"oracle_support", best.support},
                         {"kl", kl},
                         {"oracle_kl", best.kl}});
    }
    return pass();
}

CheckResult check_prop1_closed_form(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 7);
    std::uniform_int_distribution<Index> ns(2, 10);
    for (int t = 0; t < 200; ++t) {
        Vector row = random_positive_row(ns(rng), rng);
        row /= row.sum();
        std::uniform_int_distribution<int> ks(1, static_cast<int>(row.size()));
        const int k = ks(rng);
        const TokenRoute route = renormalize_topk(row, k);
        double mass = 0.0;
        for (Index j : route.support) mass += row(j);
        const double direct = kl_to_plan_row(route, row);
        if (std::abs(direct + std::log(mass)) > 1e-10)
            return fail("KL differs from -log(selected mass)",
                        {{"row", std::vector<double>(row.data(), row.data() + row.size())}, {"k", k}});
    }
    return pass();
}

CheckResult check_softmax_topk_consistency(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 8);
    for (int t = 0; t < 200; ++t) {
        const Matrix s = uniform_matrix(1, 8, -5.0, 5.0, rng);
        const Matrix p = row_softmax(s);
        for (int k = 1; k <= 8; ++k) {
            if (topk_indices(s.row(0).transpose(), k) != topk_indices(p.row(0).transpose(), k))
                return fail("softmax changed the top-k set", {{"scores", matrix_to_json(s)}, {"k", k}});
        }
    }
    return pass();
}

CheckResult check_prop2_inference(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 9);
    const GatingScores scores{uniform_matrix(8, 4, -3.0, 3.0, rng)};
    RouterConfig cfg;
    cfg.p = 1.0;
    cfg.mode = RouterMode::Inference;
    cfg.alpha_noise = 1.0;
    const json reference = decision_to_json(ssr_route(scores, cfg, rng));
    for (int call = 0; call < 10000; ++call) {
        const RoutingDecision d = ssr_route(scores, cfg, rng);
        if (d.branch != Branch::Softmax)
            return fail("Sinkhorn branch taken in inference mode", {{"call", call}});
        if (decision_to_json(d) != reference)
            return fail("inference routing is not deterministic", {{"call", call}});
    }
    return pass();
}

CheckResult check_prop2_frequency(const VerifyContext& ctx)
{
    Rng data(ctx.seed + 10);
    const GatingScores scores{uniform_matrix(4, 4, -1.0, 1.0, data)};
    for (double p : {0.01, 0.5}) {
        RouterConfig cfg;
        cfg.p = p;
        Rng rng(ctx.seed + 11);
        const int calls = 10000;
        int hits = 0;
        for (int c = 0; c < calls; ++c) hits += ssr_route(scores, cfg, rng).branch == Branch::Sinkhorn ? 1 : 0;
        const double freq = static_cast<double>(hits) / calls;
        const double bound = 3.0 * std::sqrt(p * (1 - p) / calls);
        if (std::abs(freq - p) > bound)
            return fail("Sinkhorn branch frequency outside 3 standard errors",
                        {{"p", p}, {"frequency", freq}, {"bound", bound}});
    }
    return pass();
}

// --- analysis ------------------------------------------------------------

CheckResult check_prop3_two_experts(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 12);
    std::uniform_real_distribution<double> gs(-1.0, 1.0);
    std::uniform_real_distribution<double> scales(0.3, 2.0);
    const long trials = 200000;
    for (int t = 0; t < 5; ++t) {
        const Vector g = Vector{{gs(rng), gs(rng)}};
        const double sigma = scales(rng);
        const double alpha = scales(rng);
        const SelectionProbs formula = selection_prob_formula(g, sigma, alpha);
        const Vector emp = monte_carlo_selection(g, sigma, alpha, trials, rng);
        const double p = formula.probs(0);
        const double bound = 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(trials));
        if (std::abs(emp(0) - p) > bound || std::abs(formula.probs.sum() - 1.0) > 1e-12)
            return fail("two-expert selection formula disagrees with Monte Carlo",
                        {{"g", {g(0), g(1)}}, {"sigma", sigma}, {"alpha_noise", alpha}, {"formula", p},
                         {"empirical", emp(0)}});
    }
    return pass();
}

CheckResult check_prop3_positivity(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 13);
    std::uniform_real_distribution<double> alphas(0.3, 4.0);
    for (int t = 0; t < 20; ++t) {
        const Vector g = row_softmax(uniform_matrix(1, 4, -2.0, 2.0, rng)).row(0).transpose();
        const double alpha = alphas(rng);
        const SelectionProbs f = selection_prob_formula(g, 1.0, alpha);
        const Vector emp = monte_carlo_selection(g, 1.0, alpha, 20000, rng);
        if (!(f.probs.minCoeff() > 0.0) || !(emp.minCoeff() > 0.0) || std::abs(emp.sum() - 1.0) > 1e-12)
            return fail("an expert has zero selection probability",
                        {{"g", std::vector<double>(g.data(), g.data() + g.size())}, {"alpha_noise", alpha}});
    }
    return pass();
}

CheckResult check_prop3_lower_bound(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 14);
    std::uniform_real_distribution<double> scales(0.1, 4.0);
    for (int t = 0; t < 200; ++t) {
        const Index n = 2 + t % 7;
        const Vector g = row_softmax(uniform_matrix(1, n, -6.0, 6.0, rng)).row(0).transpose();
        const double sigma = scales(rng);
        const double alpha = scales(rng);
        const SelectionProbs f = selection_prob_formula(g, sigma, alpha);
        const double bound =
            std::pow(std_normal_cdf(-1.0 / (std::numbers::sqrt2 * sigma * alpha)), static_cast<double>(n - 1));
        if (f.probs.minCoeff() < bound)
            return fail("selection probability below the per-factor lower bound",
                        {{"g", std::vector<double>(g.data(), g.data() + g.size())}, {"sigma", sigma},
                         {"alpha_noise", alpha}, {"bound", bound}});
    }
    return pass();
}

CheckResult check_balance(const VerifyContext& ctx)
{
    for (std::uint64_t s = 0; s < 5; ++s) {
        Rng rng(ctx.seed + 100 + s);
        Matrix scores = gaussian_matrix(160, 16, 1.0, rng);
        scores.col(3).array() += 2.0;
        RouterConfig cfg;
        cfg.k = 1;
        const RoutingDecision sk = sinkhorn_route({scores}, cfg, rng);
        const RoutingDecision sm = softmax_route({scores}, 1);
        const double cv_sk = load_stats(sk, 16).cv_top1;
        const double cv_sm = load_stats(sm, 16).cv_top1;
        if (!(cv_sk < cv_sm))
            return fail("Sinkhorn routing is not better balanced than softmax routing",
                        {{"seed", ctx.seed + 100 + s}, {"cv_sinkhorn", cv_sk}, {"cv_softmax", cv_sm}});
    }
    return pass();
}

double quadrature_cdf(double z)
{
    // Composite Simpson on [0, z] of the standard normal density, in extended precision.
    const int intervals = 20000;
    const long double h = static_cast<long double>(z) / intervals;
    const long double c = 1.0L / std::sqrt(2.0L * std::numbers::pi_v<long double>);
    auto phi = [&](long double t) { return c * std::exp(-0.5L * t * t); };
    long double acc = phi(0.0L) + phi(static_cast<long double>(z));
    for (int i = 1; i < intervals; ++i) acc += (i % 2 == 1 ? 4.0L : 2.0L) * phi(i * h);
    return static_cast<double>(0.5L + acc * h / 3.0L);
}

CheckResult check_cdf(const VerifyContext&)
{
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double z = -8.0 + 16.0 * i / 49.0;
        worst = std::max(worst, std::abs(std_normal_cdf(z) - quadrature_cdf(z)));
    }
    if (worst > 1e-12) return fail("normal CDF error " + format_double(worst), {{"max_error", worst}});
    return pass("max error " + format_double(worst));
}

// --- moe -----------------------------------------------------------------

struct ParamRef {
    std::string name;
    double* value;
    const double* grad;
    Index size;
};

std::vector<ParamRef> parameter_refs(MoEBlock& block, const MoEGradients& g, bool gate, bool noise)
{
    std::vector<ParamRef> refs;
    if (gate) refs.push_back({"gate", block.gate.data(), g.gate.data(), block.gate.size()});
    if (noise)
        refs.push_back({"noise_weights", block.noise_weights.data(), g.noise_weights.data(),
                        block.noise_weights.size()});
    for (std::size_t j = 0; j < block.experts.size(); ++j) {
        Expert& e = block.experts[j];
        const ExpertGradient& eg = g.experts[j];
        const std::string p = "expert" + std::to_string(j) + ".";
        refs.push_back({p + "w1", e.w1.data(), eg.w1.data(), e.w1.size()});
        refs.push_back({p + "b1", e.b1.data(), eg.b1.data(), e.b1.size()});
        refs.push_back({p + "w2", e.w2.data(), eg.w2.data(), e.w2.size()});
        refs.push_back({p + "b2", e.b2.data(), eg.b2.data(), e.b2.size()});
    }
    return refs;
}

CheckResult gradient_case(const VerifyContext& ctx, BranchOverride branch, bool noisy)
{
    Rng rng(ctx.seed + 20);
    RouterConfig cfg;
    cfg.k = 2;
    cfg.branch_override = branch;
    MoEBlock block = MoEBlock::random(4, 4, cfg, rng, 0.5, 8);
    block.noisy_gating = noisy;
    if (noisy) block.noise_weights = gaussian_matrix(4, 4, 0.5, rng);
    TokenBatch batch;
    batch.x = gaussian_matrix(6, 4, 1.0, rng);
    batch.targets = gaussian_matrix(6, 4, 1.0, rng);

    const std::uint64_t fwd_seed = ctx.seed + 21;
    auto loss = [&](const MoEBlock& b) {
        Rng r(fwd_seed);
        return mse(moe_forward(b, batch, r).outputs, *batch.targets);
    };
    Rng r(fwd_seed);
    const MoEForward fwd = moe_forward(block, batch, r);
    const Matrix upstream = (2.0 / static_cast<double>(fwd.outputs.size())) * (fwd.outputs - *batch.targets);
    const MoEGradients grads = moe_backward(block, batch, fwd, upstream);

    const bool softmax = branch == BranchOverride::ForceSoftmax || branch == BranchOverride::ForceNoise;
    if (!softmax && !grads.gate.isZero(0.0))
        return fail("gate gradient is not exactly zero on the Sinkhorn branch", {});

    const double h = 1e-5;
    for (const ParamRef& p : parameter_refs(block, grads, softmax, noisy && softmax)) {
        for (Index i = 0; i < p.size; ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = loss(block);
            p.value[i] = saved - h;
            const double down = loss(block);
            p.value[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - p.grad[i]) / std::max({std::abs(fd), std::abs(p.grad[i]), 1e-6});
            if (rel > 1e-4)
                return fail("analytic gradient disagrees with central differences",
                            {{"parameter", p.name}, {"index", i}, {"analytic", p.grad[i]}, {"finite_difference", fd},
                             {"branch", to_string(branch)}});
        }
    }
    return pass();
}

CheckResult check_gradients(const VerifyContext& ctx)
{
    for (auto [branch, noisy] : {std::pair{BranchOverride::ForceSoftmax, false},
                                 std::pair{BranchOverride::ForceSinkhorn, false},
                                 std::pair{BranchOverride::ForceSoftmax, true}}) {
        CheckResult r = gradient_case(ctx, branch, noisy);
        if (!r.passed) return r;
    }
    return pass("softmax, sinkhorn and noisy-gating cases");
}

CheckResult check_forward_equivalence(const VerifyContext& ctx)
{
    for (BranchOverride branch : {BranchOverride::ForceSoftmax, BranchOverride::ForceSinkhorn}) {
        for (int t = 0; t < 10; ++t) {
            Rng rng(ctx.seed + 30 + static_cast<std::uint64_t>(t));
            RouterConfig cfg;
            cfg.k = 2;
            cfg.branch_override = branch;
            const MoEBlock block = MoEBlock::random(4, 5, cfg, rng, 1.0);
            TokenBatch batch;
            batch.x = gaussian_matrix(4, 5, 1.0, rng);
            const MoEForward fwd = moe_forward(block, batch, rng);
            const double err = max_abs_diff(fwd.outputs, dense_combine(block, batch.x, fwd.decision));
            if (err > 1e-12)
                return fail("sparse and dense expert combination differ by " + format_double(err),
                            {{"branch", to_string(branch)}});
        }
    }
    return pass();
}

CheckResult check_instability(const VerifyContext& ctx)
{
    Rng rng(ctx.seed + 40);
    const GatingScores scores{uniform_matrix(64, 16, 40.0, 40.3, rng)};
    const CostMatrix cost = build_cost(scores, CostMode::Linear);
    const SinkhornResult naive = ctx.solver(cost, {0.05, 1e-4, 100, false});
    const SinkhornResult stable = ctx.solver(cost, {0.05, 1e-4, 100, true});
    if (!naive.diagnostics.overflow || naive.plan)
        return fail("naive solver did not report overflow on large linear scores", {});
    if (!stable.diagnostics.converged)
        return fail("log-domain solver did not converge on large linear scores",
                    {{"iterations", stable.diagnostics.iterations_used}});
    return pass();
}

}  // namespace

const std::vector<CheckSpec>& verification_checks()
{
    static const std::vector<CheckSpec> checks = {
        {"ot.feasibility", "converged plans are positive with marginals within delta", check_feasibility},
        {"ot.oracle", "Sinkhorn plans match the extended-precision Newton oracle", check_oracle},
        {"ot.naive_vs_stabilized", "naive and log-domain solvers agree", check_naive_vs_stabilized},
        {"ot.shift_invariance", "constant cost shifts leave the plan unchanged", check_shift_invariance},
        {"ot.factorization", "plan equals diag(u) K diag(v)", check_factorization},
        {"ot.monotone_residuals", "final residual <= first residual", check_monotone_residuals},
        {"ot.closed_form", "analytically forced plans", check_closed_form_plans},
        {"prop1.optimality", "top-k renormalization is the KL-optimal sparse assignment", check_prop1_optimality},
        {"prop1.closed_form", "KL equals -log of the selected plan mass", check_prop1_closed_form},
        {"routing.softmax_monotone", "softmax cost keeps the raw top-k set", check_softmax_topk_consistency},
        {"prop2.inference", "inference never takes the Sinkhorn branch and is deterministic", check_prop2_inference},
        {"prop2.frequency", "train-mode Sinkhorn frequency matches p", check_prop2_frequency},
        {"prop3.two_experts", "selection formula is exact for n = 2", check_prop3_two_experts},
        {"prop3.positivity", "noise gives every expert positive probability", check_prop3_positivity},
        {"prop3.lower_bound", "per-factor lower bound on selection probability", check_prop3_lower_bound},
        {"analysis.cdf", "normal CDF against quadrature", check_cdf},
        {"balance.skew", "Sinkhorn routing lowers top-1 load CV under planted skew", check_balance},
        {"moe.forward", "sparse combination equals dense evaluate-then-mask", check_forward_equivalence},
        {"moe.gradients", "analytic gradients match central differences", check_gradients},
        {"instability.overflow", "naive linear cost overflows where log-domain converges", check_instability},
    };
    return checks;
}

std::vector<CheckResult> run_verification(const VerifyContext& ctx, const std::string& filter)
{
    std::vector<CheckResult> results;
    for (const CheckSpec& spec : verification_checks()) {
        if (!filter.empty() && spec.name.find(filter) == std::string::npos) continue;
        const auto start = std::chrono::steady_clock::now();
        CheckResult r;
        try {
            r = spec.run(ctx);
        } catch (const std::exception& e) {
            r = fail(std::string("exception: ") + e.what(), {{"exception", e.what()}});
        }
        r.name = spec.name;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace ssr
