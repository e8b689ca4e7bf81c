#pragma once

// Transport cost construction and the entropy-regularized max-cost Sinkhorn solver.

#include "ssr/numeric.hpp"

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace ssr {

enum class CostMode { Linear, Softmax };

const char* to_string(CostMode mode);
CostMode parse_cost_mode(const std::string& text);

/// m x n token-to-expert compatibility scores, S = X * W_g^T.
struct GatingScores {
    Matrix values;

    Index token_count() const { return values.rows(); }
    Index expert_count() const { return values.cols(); }
};

struct CostMatrix {
    Matrix values;
    CostMode mode = CostMode::Linear;
    bool noise_applied = false;
    double noise_scale = 0.0;  // alpha_noise
    double noise_std = 0.0;    // sigma

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

/// Positive plan with rows summing to 1 and columns summing to m/n.
///
/// `log_u` and `log_v` are the log-domain scalings, so that
/// values(i, j) == exp(log_u(i) + cost(i, j) / xi + log_v(j)).
struct TransportPlan {
    Matrix values;
    Vector row_target;
    Vector col_target;
    Vector log_u;
    Vector log_v;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

struct SinkhornDiagnostics {
    int iterations_used = 0;
    double final_row_residual = 0.0;
    double final_col_residual = 0.0;
    double first_max_residual = 0.0;  // max residual after iteration 1
    bool converged = false;
    bool overflow = false;
    std::chrono::nanoseconds wall_time{0};
};

struct SinkhornOptions {
    double xi = 0.5;
    double delta = 1e-4;
    int eta = 100;
    bool stabilized = true;
};

/// On overflow `plan` is empty and `diagnostics.overflow` is set.
struct SinkhornResult {
    std::optional<TransportPlan> plan;
    SinkhornDiagnostics diagnostics;
};

/// Thrown by routers when the naive solver overflows.
class SinkhornOverflow : public std::runtime_error {
public:
    explicit SinkhornOverflow(SinkhornDiagnostics diag)
        : std::runtime_error("sinkhorn overflow"), diagnostics_(diag) {}
    const SinkhornDiagnostics& diagnostics() const { return diagnostics_; }

private:
    SinkhornDiagnostics diagnostics_;
};

/// Linear mode copies the scores; Softmax mode applies a stabilized row-wise softmax.
/// Throws std::invalid_argument naming the first non-finite entry, or when n < 2.
CostMatrix build_cost(const GatingScores& scores, CostMode mode);

/// Returns cost + alpha_noise * eps with eps ~ N(0, sigma^2) i.i.d. drawn row-major from `rng`.
CostMatrix inject_noise(const CostMatrix& cost, double alpha_noise, double sigma, Rng& rng);

/// Entropy-regularized max-cost OT via Sinkhorn-Knopp on the kernel exp(C / xi),
/// with row target 1_m and column target (m/n) 1_n. Column scaling is updated first,
/// then row scaling, and the L1 marginal residuals are checked every iteration.
SinkhornResult sinkhorn_maxcost(const CostMatrix& cost, const SinkhornOptions& options);

/// L1 marginal violations (row, column) of a plan against its own targets.
std::pair<double, double> marginal_residuals(const TransportPlan& plan);

/// Uniform-target plan wrapper for externally constructed matrices (targets 1 and m/n).
TransportPlan make_plan(Matrix values);

/// Rebuilds the plan entries from the dual scalings and the cost; used to check the factorization.
Matrix reconstruct_plan(const TransportPlan& plan, const CostMatrix& cost, double xi);

}  // namespace ssr
