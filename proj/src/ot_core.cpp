#include "ssr/ot_core.hpp"

#include <sstream>

namespace ssr {

namespace {

// Denominators below this in naive mode are treated as overflow.
constexpr double kDivisionFloor = 1e-300;

// out(j) = log sum_i exp(a(i, j) + shift(i))
Vector column_log_sum_exp(const Matrix& a, const Vector& shift)
{
    Vector out(a.cols());
    for (Index j = 0; j < a.cols(); ++j) out(j) = log_sum_exp(a.col(j) + shift);
    return out;
}

// out(i) = log sum_j exp(a(i, j) + shift(j))
Vector row_log_sum_exp(const Matrix& a, const Vector& shift)
{
    Vector out(a.rows());
    for (Index i = 0; i < a.rows(); ++i) out(i) = log_sum_exp(a.row(i).transpose() + shift);
    return out;
}

bool safe_denominator(const Vector& d)
{
    return all_finite(d) && d.minCoeff() >= kDivisionFloor;
}

}  // namespace

const char* to_string(CostMode mode)
{
    return mode == CostMode::Linear ? "linear" : "softmax";
}

CostMode parse_cost_mode(const std::string& text)
{
    if (text == "linear") return CostMode::Linear;
    if (text == "softmax") return CostMode::Softmax;
    throw std::invalid_argument("unknown cost mode '" + text + "' (expected linear|softmax)");
}

CostMatrix build_cost(const GatingScores& scores, CostMode mode)
{
    const Matrix& s = scores.values;
    if (s.rows() < 1) throw std::invalid_argument("build_cost: score matrix has no rows");
    if (s.cols() < 2) throw std::invalid_argument("build_cost: need at least 2 experts");
    for (Index i = 0; i < s.rows(); ++i) {
        for (Index j = 0; j < s.cols(); ++j) {
            if (!std::isfinite(s(i, j))) {
                std::ostringstream msg;
                msg << "build_cost: non-finite score at row " << i << ", column " << j;
                throw std::invalid_argument(msg.str());
            }
        }
    }
    CostMatrix cost;
    cost.mode = mode;
    cost.values = mode == CostMode::Linear ? s : row_softmax(s);
    return cost;
}

CostMatrix inject_noise(const CostMatrix& cost, double alpha_noise, double sigma, Rng& rng)
{
    if (!(alpha_noise >= 0.0)) throw std::invalid_argument("inject_noise: alpha_noise must be >= 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("inject_noise: sigma must be > 0");
    CostMatrix out = cost;
    out.values += alpha_noise * gaussian_matrix(cost.rows(), cost.cols(), sigma, rng);
    out.noise_applied = true;
    out.noise_scale = alpha_noise;
    out.noise_std = sigma;
    return out;
}

std::pair<double, double> marginal_residuals(const TransportPlan& plan)
{
    const double row = (plan.values.rowwise().sum() - plan.row_target).lpNorm<1>();
    const double col = (plan.values.colwise().sum().transpose() - plan.col_target).lpNorm<1>();
    return {row, col};
}

TransportPlan make_plan(Matrix values)
{
    TransportPlan plan;
    const Index m = values.rows();
    const Index n = values.cols();
    plan.row_target = Vector::Ones(m);
    plan.col_target = Vector::Constant(n, static_cast<double>(m) / static_cast<double>(n));
    plan.log_u = Vector::Zero(m);
    plan.log_v = Vector::Zero(n);
    plan.values = std::move(values);
    return plan;
}

Matrix reconstruct_plan(const TransportPlan& plan, const CostMatrix& cost, double xi)
{
    Matrix out(cost.rows(), cost.cols());
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j)
            out(i, j) = std::exp(plan.log_u(i) + cost.values(i, j) / xi + plan.log_v(j));
    return out;
}

SinkhornResult sinkhorn_maxcost(const CostMatrix& cost, const SinkhornOptions& options)
{
    if (!(options.xi > 0.0)) throw std::invalid_argument("sinkhorn_maxcost: xi must be > 0");
    if (!(options.delta > 0.0)) throw std::invalid_argument("sinkhorn_maxcost: delta must be > 0");
    if (options.eta < 1) throw std::invalid_argument("sinkhorn_maxcost: eta must be >= 1");
    if (cost.rows() < 1 || cost.cols() < 1)
        throw std::invalid_argument("sinkhorn_maxcost: empty cost matrix");

    const auto start = std::chrono::steady_clock::now();
    const Index m = cost.rows();
    const Index n = cost.cols();
    const Vector r = Vector::Ones(m);
    const Vector s = Vector::Constant(n, static_cast<double>(m) / static_cast<double>(n));

    SinkhornResult result;
    SinkhornDiagnostics& diag = result.diagnostics;
    auto finish = [&] {
        diag.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now() - start);
    };
    auto record = [&](int iteration, double row_res, double col_res) {
        diag.iterations_used = iteration;
        diag.final_row_residual = row_res;
        diag.final_col_residual = col_res;
        if (iteration == 1) diag.first_max_residual = std::max(row_res, col_res);
        diag.converged = row_res < options.delta && col_res < options.delta;
    };

    TransportPlan plan;
    plan.row_target = r;
    plan.col_target = s;

    if (options.stabilized) {
        const Matrix a = cost.values / options.xi;
        if (!all_finite(a)) {
            diag.overflow = true;
            finish();
            return result;
        }
        const Vector log_r = r.array().log();
        const Vector log_s = s.array().log();
        Vector f = Vector::Zero(m);
        Vector g = Vector::Zero(n);
        Matrix pi(m, n);
        for (int it = 1; it <= options.eta; ++it) {
            g = log_s - column_log_sum_exp(a, f);
            f = log_r - row_log_sum_exp(a, g);
            pi = ((a.colwise() + f).rowwise() + g.transpose()).array().exp();
            const double row_res = (pi.rowwise().sum() - r).lpNorm<1>();
            const double col_res = (pi.colwise().sum().transpose() - s).lpNorm<1>();
            record(it, row_res, col_res);
            if (diag.converged) break;
        }
        if (!all_finite(pi)) {
            diag.overflow = true;
            diag.converged = false;
            finish();
            return result;
        }
        plan.values = std::move(pi);
        plan.log_u = std::move(f);
        plan.log_v = std::move(g);
    } else {
        const Matrix kernel = (cost.values / options.xi).array().exp();
        if (!all_finite(kernel)) {
            diag.overflow = true;
            finish();
            return result;
        }
        Vector u = Vector::Ones(m);
        Vector v(n);
        Vector kt_u = kernel.transpose() * u;
        for (int it = 1; it <= options.eta; ++it) {
            if (!safe_denominator(kt_u)) {
                diag.overflow = true;
                break;
            }
            v = s.cwiseQuotient(kt_u);
            const Vector k_v = kernel * v;
            if (!safe_denominator(k_v)) {
                diag.overflow = true;
                break;
            }
            u = r.cwiseQuotient(k_v);
            kt_u = kernel.transpose() * u;
            if (!all_finite(u) || !all_finite(v) || !all_finite(kt_u)) {
                diag.overflow = true;
                break;
            }
            const double row_res = (u.cwiseProduct(k_v) - r).lpNorm<1>();
            const double col_res = (v.cwiseProduct(kt_u) - s).lpNorm<1>();
            record(it, row_res, col_res);
            if (diag.converged) break;
        }
        if (diag.overflow) {
            diag.converged = false;
            finish();
            return result;
        }
        plan.values = u.asDiagonal() * kernel * v.asDiagonal();
        if (!all_finite(plan.values) || plan.values.minCoeff() <= 0.0) {
            diag.overflow = true;
            diag.converged = false;
            finish();
            return result;
        }
        plan.log_u = u.array().log();
        plan.log_v = v.array().log();
    }

    finish();
    result.plan = std::move(plan);
    return result;
}

}  // namespace ssr
