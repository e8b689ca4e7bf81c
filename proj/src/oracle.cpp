#include "ssr/oracle.hpp"

#include <limits>

namespace ssr {

namespace {

using Real = long double;
using RMatrix = MatrixX<Real>;
using RVector = VectorX<Real>;

constexpr Real kTargetResidual = 1e-12L;
constexpr int kMaxNewtonSteps = 500;

// Dual variables: x (m rows), y (n - 1 columns; the last column potential is pinned to 0
// to remove the constant-shift degeneracy). Plan: exp(a + x_i + y_j).
struct DualState {
    RVector x;
    RVector y;  // length n, y(n-1) == 0
};

RMatrix plan_of(const RMatrix& a, const DualState& st)
{
    return ((a.colwise() + st.x).rowwise() + st.y.transpose()).array().exp();
}

// Objective scaled by 1/xi: sum(plan) - sum(x) - (m/n) sum(y). Convex in (x, y).
Real objective(const RMatrix& a, const DualState& st, Real col_mass)
{
    const RMatrix p = plan_of(a, st);
    const Real total = p.sum();
    if (!std::isfinite(static_cast<double>(total))) return std::numeric_limits<Real>::infinity();
    return total - st.x.sum() - col_mass * st.y.sum();
}

Real marginal_residual(const RMatrix& a, const DualState& st, Real col_mass)
{
    const RMatrix p = plan_of(a, st);
    return (p.rowwise().sum().array() - 1.0L).abs().sum() + (p.colwise().sum().array() - col_mass).abs().sum();
}

}  // namespace

TransportPlan oracle_entropic_ot(const CostMatrix& cost, double xi)
{
    const Index m = cost.rows();
    const Index n = cost.cols();
    if (m < 1 || n < 1) throw std::invalid_argument("oracle_entropic_ot: empty cost matrix");
    if (m > kOracleMaxDim || n > kOracleMaxDim)
        throw std::invalid_argument("oracle_entropic_ot: dimensions exceed desk-scale cap");
    if (!(xi > 0.0)) throw std::invalid_argument("oracle_entropic_ot: xi must be > 0");

    const RMatrix a = cost.values.cast<Real>() / static_cast<Real>(xi);
    const Real col_mass = static_cast<Real>(m) / static_cast<Real>(n);
    const Index dim = m + n - 1;

    DualState st;
    st.x.resize(m);
    for (Index i = 0; i < m; ++i) st.x(i) = -log_sum_exp(a.row(i));
    st.y = RVector::Zero(n);

    Real residual = std::numeric_limits<Real>::infinity();
    for (int step = 0; step < kMaxNewtonSteps; ++step) {
        const RMatrix p = plan_of(a, st);
        const RVector rows = p.rowwise().sum();
        const RVector cols = p.colwise().sum().transpose();

        RVector grad(dim);
        grad.head(m) = rows.array() - 1.0L;
        grad.tail(n - 1) = cols.head(n - 1).array() - col_mass;
        residual = grad.head(m).lpNorm<1>() + (cols.array() - col_mass).abs().sum();
        if (residual <= kTargetResidual) break;

        RMatrix hess = RMatrix::Zero(dim, dim);
        hess.topLeftCorner(m, m) = rows.asDiagonal();
        if (n > 1) {
            hess.bottomRightCorner(n - 1, n - 1) = cols.head(n - 1).asDiagonal();
            hess.topRightCorner(m, n - 1) = p.leftCols(n - 1);
            hess.bottomLeftCorner(n - 1, m) = p.leftCols(n - 1).transpose();
        }
        const RVector dir = -hess.partialPivLu().solve(grad);

        // Backtracking (Armijo) on the dual objective. Close to the optimum the objective change
        // drops below working precision, so a step that shrinks the residual is also accepted.
        const Real f0 = objective(a, st, col_mass);
        const Real slope = grad.dot(dir);
        Real t = 1.0L;
        DualState next;
        for (int ls = 0; ls < 60; ++ls) {
            next.x = st.x + t * dir.head(m);
            next.y = st.y;
            next.y.head(n - 1) += t * dir.tail(n - 1);
            if (objective(a, next, col_mass) <= f0 + 1e-4L * t * slope) break;
            if (marginal_residual(a, next, col_mass) < 0.5L * residual) break;
            t *= 0.5L;
        }
        st = std::move(next);
    }
    if (!(residual <= kTargetResidual))
        throw std::runtime_error("oracle_entropic_ot: Newton iteration did not reach the target residual");

    TransportPlan plan;
    plan.values = plan_of(a, st).cast<double>();
    plan.row_target = Vector::Ones(m);
    plan.col_target = Vector::Constant(n, static_cast<double>(col_mass));
    plan.log_u = st.x.cast<double>();
    plan.log_v = st.y.cast<double>();
    return plan;
}

}  // namespace ssr
