#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace ssr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Seeded random source passed explicitly to every stochastic operation.
using Rng = std::mt19937_64;

// log(sum(exp(x))) with the max-subtraction trick.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    const Scalar c = x.maxCoeff();
    if (!std::isfinite(static_cast<double>(c))) return c;
    return c + std::log((x.derived().array() - c).exp().sum());
}

// Row-wise softmax; every output row is a probability vector.
template <typename Derived>
MatrixX<typename Derived::Scalar> row_softmax(const Eigen::MatrixBase<Derived>& s)
{
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i) {
        const Scalar c = s.row(i).maxCoeff();
        auto e = (s.row(i).array() - c).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x)
{
    return x.derived().array().isFinite().all();
}

/// Matrix of i.i.d. N(0, sigma^2) draws, filled row-major so the stream order is layout-independent.
inline Matrix gaussian_matrix(Index rows, Index cols, double sigma, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
    return out;
}

inline Matrix uniform_matrix(Index rows, Index cols, double lo, double hi, Rng& rng)
{
    std::uniform_real_distribution<double> uni(lo, hi);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = uni(rng);
    return out;
}

}  // namespace ssr
