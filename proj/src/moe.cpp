#include "ssr/moe.hpp"

#include <chrono>

namespace ssr {

Vector Expert::forward(const Eigen::Ref<const Vector>& x) const
{
    const Vector a = (w1 * x + b1).array().tanh();
    return w2 * a + b2;
}

Expert Expert::random(Index d, Index h, Rng& rng)
{
    Expert e;
    e.w1 = gaussian_matrix(h, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    e.b1 = Vector::Zero(h);
    e.w2 = gaussian_matrix(d, h, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    e.b2 = Vector::Zero(d);
    return e;
}

Expert Expert::zeros(Index d, Index h)
{
    return {Matrix::Zero(h, d), Vector::Zero(h), Matrix::Zero(d, h), Vector::Zero(d)};
}

MoEBlock MoEBlock::random(Index n, Index d, const RouterConfig& config, Rng& rng, double gate_std, Index hidden)
{
    if (n < 2) throw std::invalid_argument("MoEBlock: need at least 2 experts");
    if (d < 1) throw std::invalid_argument("MoEBlock: input dimension must be >= 1");
    validate(config, n);
    const Index h = hidden > 0 ? hidden : 2 * d;
    MoEBlock block;
    block.config = config;
    block.gate = gaussian_matrix(n, d, gate_std, rng);
    block.experts.reserve(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) block.experts.push_back(Expert::random(d, h, rng));
    block.noise_weights = Matrix::Zero(n, d);
    return block;
}

bool MoEBlock::parameters_finite() const
{
    if (!all_finite(gate) || !all_finite(noise_weights)) return false;
    for (const auto& e : experts)
        if (!all_finite(e.w1) || !all_finite(e.b1) || !all_finite(e.w2) || !all_finite(e.b2)) return false;
    return true;
}

double softplus(double z)
{
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

namespace {

double sigmoid(double z)
{
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

NoisyGating noisy_gating(const GatingScores& scores, const Matrix& x, const Matrix& noise_weights, Rng& rng)
{
    if (noise_weights.rows() != scores.expert_count() || noise_weights.cols() != x.cols())
        throw std::invalid_argument("noisy_gating: noise weights must be n x d");
    NoisyGating out;
    out.z = x * noise_weights.transpose();
    out.eps = gaussian_matrix(scores.token_count(), scores.expert_count(), 1.0, rng);
    out.scores.values = scores.values + out.eps.cwiseProduct(out.z.unaryExpr(&softplus));
    return out;
}

GatingScores noisy_gating_baseline(const GatingScores& scores, const Matrix& x, const Matrix& noise_weights,
                                   Rng& rng)
{
    return noisy_gating(scores, x, noise_weights, rng).scores;
}

MoEForward moe_forward(const MoEBlock& block, const TokenBatch& batch, Rng& rng)
{
    if (batch.x.cols() != block.input_dim())
        throw std::invalid_argument("moe_forward: token dimension does not match the gate");
    if (static_cast<Index>(block.experts.size()) != block.expert_count())
        throw std::invalid_argument("moe_forward: expert count does not match the gate");

    MoEForward fwd;
    fwd.clean_scores.values = batch.x * block.gate.transpose();
    fwd.scores = fwd.clean_scores;
    if (block.noisy_gating && block.config.mode == RouterMode::Train) {
        fwd.gating_noise = noisy_gating(fwd.clean_scores, batch.x, block.noise_weights, rng);
        fwd.scores = fwd.gating_noise->scores;
    }

    SsrOutcome routed = ssr_route_detailed(fwd.scores, block.config, rng);
    fwd.decision = std::move(routed.decision);
    if (routed.sinkhorn) fwd.sinkhorn = routed.sinkhorn->diagnostics;

    fwd.outputs = Matrix::Zero(batch.token_count(), block.input_dim());
    for (Index i = 0; i < batch.token_count(); ++i) {
        const auto& t = fwd.decision.tokens[static_cast<std::size_t>(i)];
        for (std::size_t r = 0; r < t.support.size(); ++r) {
            const auto& expert = block.experts[static_cast<std::size_t>(t.support[r])];
            fwd.outputs.row(i) += t.weights[r] * expert.forward(batch.x.row(i).transpose()).transpose();
        }
    }
    return fwd;
}

Matrix dense_combine(const MoEBlock& block, const Matrix& x, const RoutingDecision& decision)
{
    const Index n = block.expert_count();
    const Matrix w = decision.dense_weights(n);
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (Index j = 0; j < n; ++j) {
        Matrix fj(x.rows(), x.cols());
        for (Index i = 0; i < x.rows(); ++i)
            fj.row(i) = block.experts[static_cast<std::size_t>(j)].forward(x.row(i).transpose()).transpose();
        out += w.col(j).asDiagonal() * fj;
    }
    return out;
}

void accumulate_score_gradient(const TokenBatch& batch, const MoEForward& forward,
                               const Matrix& score_grad, MoEGradients& grads)
{
    grads.gate += score_grad.transpose() * batch.x;
    if (forward.gating_noise) {
        const auto& gn = *forward.gating_noise;
        const Matrix dz = score_grad.cwiseProduct(gn.eps).cwiseProduct(gn.z.unaryExpr(&sigmoid));
        grads.noise_weights += dz.transpose() * batch.x;
    }
}

MoEGradients moe_backward(const MoEBlock& block, const TokenBatch& batch, const MoEForward& forward,
                          const Matrix& upstream)
{
    const Index m = batch.token_count();
    const Index n = block.expert_count();
    const Index d = block.input_dim();
    if (forward.decision.token_count() != m || upstream.rows() != m || upstream.cols() != d)
        throw std::invalid_argument("moe_backward: decision or upstream gradient does not match the batch");

    MoEGradients grads;
    grads.gate = Matrix::Zero(n, d);
    grads.noise_weights = Matrix::Zero(block.noise_weights.rows(), block.noise_weights.cols());
    grads.scores = Matrix::Zero(m, n);
    grads.experts.reserve(block.experts.size());
    for (const auto& e : block.experts)
        grads.experts.push_back({Matrix::Zero(e.w1.rows(), e.w1.cols()), Vector::Zero(e.b1.size()),
                                 Matrix::Zero(e.w2.rows(), e.w2.cols()), Vector::Zero(e.b2.size())});

    const bool softmax_branch = forward.decision.branch == Branch::Softmax;
    for (Index i = 0; i < m; ++i) {
        const auto& t = forward.decision.tokens[static_cast<std::size_t>(i)];
        const Vector x = batch.x.row(i).transpose();
        const Vector g = upstream.row(i).transpose();
        std::vector<double> dweight(t.support.size());
        for (std::size_t r = 0; r < t.support.size(); ++r) {
            const auto j = static_cast<std::size_t>(t.support[r]);
            const Expert& e = block.experts[j];
            ExpertGradient& eg = grads.experts[j];
            const Vector a = (e.w1 * x + e.b1).array().tanh();
            const Vector f = e.w2 * a + e.b2;
            dweight[r] = g.dot(f);

            const Vector gy = t.weights[r] * g;
            eg.w2.noalias() += gy * a.transpose();
            eg.b2 += gy;
            const Vector pre = (e.w2.transpose() * gy).cwiseProduct((1.0 - a.array().square()).matrix());
            eg.w1.noalias() += pre * x.transpose();
            eg.b1 += pre;
        }
        if (softmax_branch) {
            double mean = 0.0;
            for (std::size_t r = 0; r < t.support.size(); ++r) mean += t.weights[r] * dweight[r];
            for (std::size_t r = 0; r < t.support.size(); ++r)
                grads.scores(i, t.support[r]) = t.weights[r] * (dweight[r] - mean);
        }
    }
    if (softmax_branch) accumulate_score_gradient(batch, forward, grads.scores, grads);
    return grads;
}

namespace {

Vector dispatch_fractions(const RoutingDecision& decision, Index n)
{
    Vector f = Vector::Zero(n);
    for (Index j : decision.top1()) f(j) += 1.0;
    return f / static_cast<double>(std::max<Index>(decision.token_count(), 1));
}

}  // namespace

double lb_aux_loss(const RoutingDecision& decision, const GatingScores& scores)
{
    const Index n = scores.expert_count();
    const Vector f = dispatch_fractions(decision, n);
    const Vector q = row_softmax(scores.values).colwise().mean().transpose();
    return static_cast<double>(n) * f.dot(q);
}

Matrix lb_aux_loss_grad(const RoutingDecision& decision, const GatingScores& scores)
{
    const Index m = scores.token_count();
    const Index n = scores.expert_count();
    const Vector f = dispatch_fractions(decision, n);
    const Matrix p = row_softmax(scores.values);
    const double scale = static_cast<double>(n) / static_cast<double>(m);
    Matrix grad(m, n);
    for (Index i = 0; i < m; ++i) {
        const double fp = p.row(i).dot(f.transpose());
        grad.row(i) = scale * p.row(i).cwiseProduct((f.transpose().array() - fp).matrix());
    }
    return grad;
}

double z_loss(const GatingScores& scores)
{
    double total = 0.0;
    for (Index i = 0; i < scores.token_count(); ++i) {
        const double lse = log_sum_exp(scores.values.row(i));
        total += lse * lse;
    }
    return total / static_cast<double>(scores.token_count());
}

Matrix z_loss_grad(const GatingScores& scores)
{
    const Index m = scores.token_count();
    const Matrix p = row_softmax(scores.values);
    Matrix grad(m, scores.expert_count());
    for (Index i = 0; i < m; ++i)
        grad.row(i) = (2.0 / static_cast<double>(m)) * log_sum_exp(scores.values.row(i)) * p.row(i);
    return grad;
}

SyntheticTask make_synthetic_task(const SyntheticOptions& options)
{
    if (options.clusters < 2) throw std::invalid_argument("make_synthetic_task: need at least 2 clusters");
    if (options.d < 1 || options.tokens < 1) throw std::invalid_argument("make_synthetic_task: empty task");
    Rng rng(options.seed);
    const Index c = options.clusters;
    const Index d = options.d;
    const double min_dist = options.separation * options.cluster_std;

    SyntheticTask task;
    if (c <= d) {
        // Orthonormal directions at radius min_dist / sqrt 2 put every pair exactly min_dist apart.
        const Matrix q = gaussian_matrix(d, d, 1.0, rng).householderQr().householderQ();
        task.means = (min_dist / std::sqrt(2.0)) * q.leftCols(c).transpose();
    } else {
        double radius = min_dist;
        for (;;) {
            Matrix means = gaussian_matrix(c, d, 1.0, rng);
            for (Index i = 0; i < c; ++i) means.row(i) *= radius / means.row(i).norm();
            double closest = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < c; ++i)
                for (Index j = i + 1; j < c; ++j) closest = std::min(closest, (means.row(i) - means.row(j)).norm());
            if (closest >= min_dist) {
                task.means = means;
                break;
            }
            radius *= 1.05;
        }
    }
    for (Index i = 0; i < c; ++i)
        task.maps.push_back(gaussian_matrix(d, d, 1.0 / std::sqrt(static_cast<double>(d)), rng));

    std::uniform_int_distribution<int> pick(0, options.clusters - 1);
    task.batch.x.resize(options.tokens, d);
    Matrix targets(options.tokens, d);
    task.labels.resize(static_cast<std::size_t>(options.tokens));
    for (Index t = 0; t < options.tokens; ++t) {
        const int label = pick(rng);
        task.labels[static_cast<std::size_t>(t)] = label;
        const Matrix noise = gaussian_matrix(1, d, options.cluster_std, rng);
        task.batch.x.row(t) = task.means.row(label) + noise.row(0);
        targets.row(t) = (task.maps[static_cast<std::size_t>(label)] * task.batch.x.row(t).transpose()).transpose();
        if (options.target_noise > 0.0) targets.row(t) += gaussian_matrix(1, d, options.target_noise, rng).row(0);
    }
    task.batch.targets = std::move(targets);
    return task;
}

const char* to_string(Regularizer reg)
{
    switch (reg) {
    case Regularizer::None: return "none";
    case Regularizer::LbLoss: return "lb_loss";
    case Regularizer::ZLoss: return "z_loss";
    case Regularizer::NoisyGating: return "noisy_gating";
    }
    return "?";
}

Regularizer parse_regularizer(const std::string& text)
{
    if (text == "none") return Regularizer::None;
    if (text == "lb_loss") return Regularizer::LbLoss;
    if (text == "z_loss") return Regularizer::ZLoss;
    if (text == "noisy_gating") return Regularizer::NoisyGating;
    throw std::invalid_argument("unknown regularizer '" + text + "' (expected none|lb_loss|z_loss|noisy_gating)");
}

TrainAborted::TrainAborted(int step, std::string reason, std::vector<TrainRecord> records)
    : std::runtime_error("training aborted at step " + std::to_string(step) + ": " + reason),
      step_(step),
      reason_(std::move(reason)),
      records_(std::move(records))
{
}

double mse(const Matrix& outputs, const Matrix& targets)
{
    return (outputs - targets).squaredNorm() / static_cast<double>(outputs.size());
}

namespace {

void sgd_step(MoEBlock& block, const MoEGradients& grads, double lr)
{
    block.gate -= lr * grads.gate;
    if (block.noisy_gating) block.noise_weights -= lr * grads.noise_weights;
    for (std::size_t j = 0; j < block.experts.size(); ++j) {
        Expert& e = block.experts[j];
        const ExpertGradient& g = grads.experts[j];
        e.w1 -= lr * g.w1;
        e.b1 -= lr * g.b1;
        e.w2 -= lr * g.w2;
        e.b2 -= lr * g.b2;
    }
}

TokenBatch sample_batch(const TokenBatch& task, Index batch_size, Rng& rng)
{
    if (batch_size <= 0 || batch_size >= task.token_count()) return task;
    std::uniform_int_distribution<Index> pick(0, task.token_count() - 1);
    TokenBatch out;
    out.x.resize(batch_size, task.x.cols());
    Matrix targets(batch_size, task.x.cols());
    for (Index i = 0; i < batch_size; ++i) {
        const Index t = pick(rng);
        out.x.row(i) = task.x.row(t);
        targets.row(i) = task.targets->row(t);
    }
    out.targets = std::move(targets);
    return out;
}

}  // namespace

std::vector<TrainRecord> train(MoEBlock& block, const TokenBatch& task, const TrainOptions& options)
{
    if (options.steps < 1) throw std::invalid_argument("train: steps must be positive");
    if (!(options.learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate must be >= 0");
    if (!task.targets) throw std::invalid_argument("train: task has no targets");

    block.noisy_gating = options.regularizer == Regularizer::NoisyGating;
    if (block.noise_weights.rows() != block.expert_count() || block.noise_weights.cols() != block.input_dim())
        block.noise_weights = Matrix::Zero(block.expert_count(), block.input_dim());

    Rng rng(options.seed);
    std::vector<TrainRecord> records;
    records.reserve(static_cast<std::size_t>(options.steps));
    const Index n = block.expert_count();

    for (int step = 0; step < options.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        const TokenBatch batch = sample_batch(task, options.batch_size, rng);

        MoEForward fwd;
        try {
            fwd = moe_forward(block, batch, rng);
        } catch (const SinkhornOverflow&) {
            throw TrainAborted(step, "NaN", std::move(records));
        }
        const double loss = mse(fwd.outputs, *batch.targets);

        double aux = 0.0;
        Matrix aux_grad;
        switch (options.regularizer) {
        case Regularizer::None: break;
        case Regularizer::LbLoss:
        case Regularizer::NoisyGating:
            aux = lb_aux_loss(fwd.decision, fwd.scores);
            aux_grad = lb_aux_loss_grad(fwd.decision, fwd.scores);
            break;
        case Regularizer::ZLoss:
            aux = z_loss(fwd.scores);
            aux_grad = z_loss_grad(fwd.scores);
            break;
        }
        if (!std::isfinite(loss) || !std::isfinite(aux)) throw TrainAborted(step, "NaN", std::move(records));

        const Matrix upstream = (2.0 / static_cast<double>(fwd.outputs.size())) * (fwd.outputs - *batch.targets);
        MoEGradients grads = moe_backward(block, batch, fwd, upstream);
        if (aux_grad.size() > 0 && options.coefficient != 0.0)
            accumulate_score_gradient(batch, fwd, options.coefficient * aux_grad, grads);
        sgd_step(block, grads, options.learning_rate);
        if (!block.parameters_finite()) throw TrainAborted(step, "NaN", std::move(records));

        TrainRecord rec;
        rec.step = step;
        rec.loss = loss;
        rec.aux_loss = aux;
        rec.branch = fwd.decision.branch;
        rec.load = load_stats(fwd.decision, n);
        rec.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        records.push_back(std::move(rec));
    }
    return records;
}

Evaluation evaluate(const MoEBlock& block, const TokenBatch& task)
{
    MoEBlock frozen = block;
    frozen.config.mode = RouterMode::Inference;
    frozen.config.branch_override.reset();
    Rng unused(0);
    const MoEForward fwd = moe_forward(frozen, task, unused);
    Evaluation ev;
    ev.loss = task.targets ? mse(fwd.outputs, *task.targets) : 0.0;
    ev.load = load_stats(fwd.decision, block.expert_count());
    return ev;
}

}  // namespace ssr
