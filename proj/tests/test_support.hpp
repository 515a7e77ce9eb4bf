#pragma once

// Oracles for the unit tests. These use Eigen directly and never call into
// the bktrace kernels they are checking.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace bktrace::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = normal(gen);
    return M;
}

/// X X^T / cols for a Gaussian n x cols X: PSD, rank min(n, cols).
inline Eigen::MatrixXd random_psd(Eigen::Index n, std::uint64_t seed, Eigen::Index cols = -1)
{
    if (cols < 0) cols = n;
    const Eigen::MatrixXd X = random_matrix(n, cols, seed);
    return X * X.transpose() / static_cast<double>(cols);
}

/// Symmetric PSD matrix with a prescribed spectrum in a random basis.
inline Eigen::MatrixXd psd_with_spectrum(const Eigen::VectorXd& lambda, std::uint64_t seed)
{
    const Eigen::Index n = lambda.size();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, seed));
    const Eigen::MatrixXd U = qr.householderQ();
    Eigen::MatrixXd A = U * lambda.asDiagonal() * U.transpose();
    return (A + A.transpose()) / 2.0;
}

inline double dense_trace(const Eigen::MatrixXd& A) { return A.trace(); }

/// sum log(1 + lambda_i) from a dense eigensolve.
inline double dense_logdet_shifted(const Eigen::MatrixXd& A)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) acc += std::log1p(es.eigenvalues()(i));
    return acc;
}

/// Largest singular value by power iteration on M^T M.
inline double power_iteration_norm(const Eigen::MatrixXd& M, int iterations = 2000)
{
    Eigen::VectorXd v = Eigen::VectorXd::Ones(M.cols()).normalized();
    double sigma = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = M.transpose() * (M * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        sigma = std::sqrt(norm);
    }
    return sigma;
}

inline double rel(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace bktrace::testing
