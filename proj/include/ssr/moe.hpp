#pragma once

// Desk-scale MoE block with manual backward pass, baseline regularizers,
// a synthetic clustered regression task and a plain SGD training loop.

#include "ssr/analysis.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ssr {

/// Two-layer MLP f(x) = W2 tanh(W1 x + b1) + b2, mapping R^d -> R^d.
struct Expert {
    Matrix w1;  // h x d
    Vector b1;  // h
    Matrix w2;  // d x h
    Vector b2;  // d

    Vector forward(const Eigen::Ref<const Vector>& x) const;
    static Expert random(Index d, Index h, Rng& rng);
    static Expert zeros(Index d, Index h);
};

struct MoEBlock {
    Matrix gate;                  // W_g, n x d
    std::vector<Expert> experts;  // n experts
    Matrix noise_weights;         // n x d, used only when noisy_gating is set
    bool noisy_gating = false;
    RouterConfig config;

    Index expert_count() const { return gate.rows(); }
    Index input_dim() const { return gate.cols(); }
    Index hidden_width() const { return experts.empty() ? 0 : experts.front().w1.rows(); }

    /// Random block; hidden width defaults to 2d. Gate entries ~ N(0, gate_std^2).
    static MoEBlock random(Index n, Index d, const RouterConfig& config, Rng& rng, double gate_std = 0.1,
                           Index hidden = 0);
    bool parameters_finite() const;
};

struct TokenBatch {
    Matrix x;                      // m x d
    std::optional<Matrix> targets;  // m x d

    Index token_count() const { return x.rows(); }
};

struct NoisyGating {
    GatingScores scores;  // S + eps .* softplus(z)
    Matrix eps;
    Matrix z;             // X * W_noise^T
};

double softplus(double z);

/// Trainable-noise gating baseline; eps is drawn row-major from `rng`.
NoisyGating noisy_gating(const GatingScores& scores, const Matrix& x, const Matrix& noise_weights, Rng& rng);
GatingScores noisy_gating_baseline(const GatingScores& scores, const Matrix& x, const Matrix& noise_weights,
                                   Rng& rng);

struct MoEForward {
    Matrix outputs;
    RoutingDecision decision;
    GatingScores scores;        // scores handed to the router
    GatingScores clean_scores;  // X * W_g^T before gating noise
    std::optional<NoisyGating> gating_noise;
    std::optional<SinkhornDiagnostics> sinkhorn;
};

/// Computes S = X W_g^T, routes with ssr_route and combines only the selected experts.
MoEForward moe_forward(const MoEBlock& block, const TokenBatch& batch, Rng& rng);

/// Same combination, but every expert is evaluated and multiplied by the dense weight matrix.
Matrix dense_combine(const MoEBlock& block, const Matrix& x, const RoutingDecision& decision);

struct ExpertGradient {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

struct MoEGradients {
    Matrix gate;
    std::vector<ExpertGradient> experts;
    Matrix noise_weights;
    Matrix scores;  // dL/dS for the routed scores
};

/// Backward pass for an upstream gradient dL/dY. The support of every token is held fixed.
/// On the Sinkhorn branch the routing weights are detached, so `gate` is exactly zero.
MoEGradients moe_backward(const MoEBlock& block, const TokenBatch& batch, const MoEForward& forward,
                          const Matrix& upstream);

/// Adds dL/dS (routed scores) into the gate and noise-weight gradients.
void accumulate_score_gradient(const TokenBatch& batch, const MoEForward& forward,
                               const Matrix& score_grad, MoEGradients& grads);

/// Load-balancing loss n * sum_j f_j q_j; f_j is the top-1 dispatch fraction,
/// q_j the batch-mean softmax gate probability.
double lb_aux_loss(const RoutingDecision& decision, const GatingScores& scores);
/// Gradient with respect to the scores; f_j is treated as constant.
Matrix lb_aux_loss_grad(const RoutingDecision& decision, const GatingScores& scores);

/// Router z-loss: mean over tokens of logsumexp(s_i)^2.
double z_loss(const GatingScores& scores);
Matrix z_loss_grad(const GatingScores& scores);

struct SyntheticOptions {
    int clusters = 8;
    Index d = 16;
    Index tokens = 4096;
    std::uint64_t seed = 0;
    double cluster_std = 0.25;
    double separation = 8.0;   // minimum distance between cluster means, in units of cluster_std
    double target_noise = 0.0;  // 0 gives exact per-cluster linear targets
};

struct SyntheticTask {
    TokenBatch batch;
    std::vector<int> labels;
    Matrix means;               // clusters x d
    std::vector<Matrix> maps;   // per-cluster d x d target maps
};

/// Tokens from Gaussian clusters; each cluster has its own linear target map.
SyntheticTask make_synthetic_task(const SyntheticOptions& options);

enum class Regularizer { None, LbLoss, ZLoss, NoisyGating };
const char* to_string(Regularizer reg);
Regularizer parse_regularizer(const std::string& text);

struct TrainOptions {
    int steps = 100;
    double learning_rate = 0.05;
    Regularizer regularizer = Regularizer::None;
    double coefficient = 0.0;
    Index batch_size = 64;  // 0 uses the whole task every step
    std::uint64_t seed = 0;
};

struct TrainRecord {
    int step = 0;
    double loss = 0.0;
    double aux_loss = 0.0;
    Branch branch = Branch::Softmax;
    LoadStats load;
    double step_ms = 0.0;
};

/// Raised when a step produces a non-finite loss or parameter, or the router overflows.
class TrainAborted : public std::runtime_error {
public:
    TrainAborted(int step, std::string reason, std::vector<TrainRecord> records);
    int step() const { return step_; }
    const std::string& reason() const { return reason_; }
    const std::vector<TrainRecord>& records() const { return records_; }

private:
    int step_;
    std::string reason_;
    std::vector<TrainRecord> records_;
};

double mse(const Matrix& outputs, const Matrix& targets);

/// Plain SGD on MSE + coefficient * regularizer. NoisyGating enables the trainable gate noise
/// and uses the load-balancing loss as its auxiliary term.
std::vector<TrainRecord> train(MoEBlock& block, const TokenBatch& task, const TrainOptions& options);

struct Evaluation {
    double loss = 0.0;
    LoadStats load;
};

/// Full-batch loss and load under the block's router in Inference mode.
Evaluation evaluate(const MoEBlock& block, const TokenBatch& task);

}  // namespace ssr
