#pragma once

// Dense kernels used by the sketches, estimators and bounds. Everything here
// is desk scale: the largest inputs are n x m bases with m in the hundreds.

#include "bktrace/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>

namespace bktrace {

template <typename Scalar>
struct ThinQR {
    Matrix<Scalar> Q; ///< n x m, orthonormal columns
    Matrix<Scalar> R; ///< m x m, upper triangular with nonnegative diagonal
};

/// Householder thin QR of an n x m matrix, n >= m.
///
/// Rank deficiency is not resolved: dependent columns show up as tiny
/// diagonal entries of R and the caller decides what to do with them.
template <typename Derived>
ThinQR<typename Derived::Scalar> thin_qr(const Eigen::MatrixBase<Derived>& M)
{
    using Scalar = typename Derived::Scalar;
    const Index n = M.rows();
    const Index m = M.cols();
    if (n < m) throw ShapeError("thin_qr: more columns than rows");

    Eigen::HouseholderQR<Matrix<Scalar>> qr(M.eval());
    ThinQR<Scalar> out;
    out.Q = qr.householderQ() * Matrix<Scalar>::Identity(n, m);
    out.R = qr.matrixQR().topRows(m).template triangularView<Eigen::Upper>();
    for (Index j = 0; j < m; ++j) {
        if (out.R(j, j) < Scalar(0)) {
            out.R.row(j) *= Scalar(-1);
            out.Q.col(j) *= Scalar(-1);
        }
    }
    return out;
}

template <typename Scalar>
struct SymEig {
    Vector<Scalar> values;  ///< ascending
    Matrix<Scalar> vectors; ///< columns are the matching orthonormal eigenvectors
};

/// Eigendecomposition of a symmetric matrix.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& S)
{
    using Scalar = typename Derived::Scalar;
    if (S.rows() != S.cols()) throw ShapeError("sym_eig: matrix is not square");
    const Matrix<Scalar> A = S.eval();
    if (A.size() > 0) {
        const Scalar scale = A.cwiseAbs().maxCoeff();
        const Scalar asym = (A - A.transpose()).cwiseAbs().maxCoeff();
        if (asym > Scalar(1e-8) * scale) throw ContractError("sym_eig: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(A);
    return {es.eigenvalues(), es.eigenvectors()};
}

/// (T + T^T) / 2
template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& T)
{
    return (T + T.transpose()) * typename Derived::Scalar(0.5);
}

/// log det(I + T) for symmetric positive semi-definite T, via the Cholesky
/// factor of I + T.
///
/// T is symmetrized first. A pivoted LDL^T of T rejects inputs with a pivot
/// below -1e-10 * max|T_ij|; smaller negative pivots are roundoff and accepted.
template <typename Derived>
typename Derived::Scalar logdet_shifted_cholesky(const Eigen::MatrixBase<Derived>& T)
{
    using Scalar = typename Derived::Scalar;
    if (T.rows() != T.cols()) throw ShapeError("logdet_shifted_cholesky: matrix is not square");
    const Index m = T.rows();
    if (m == 0) return Scalar(0);

    const Matrix<Scalar> S = symmetrized(T);
    const Scalar scale = S.cwiseAbs().maxCoeff();
    if (scale > Scalar(0)) {
        Eigen::LDLT<Matrix<Scalar>> ldlt(S);
        if (ldlt.vectorD().minCoeff() < Scalar(-1e-10) * scale)
            throw PsdError("logdet_shifted_cholesky: matrix is not positive semi-definite");
    }

    Eigen::LLT<Matrix<Scalar>> llt(Matrix<Scalar>::Identity(m, m) + S);
    if (llt.info() != Eigen::Success)
        throw PsdError("logdet_shifted_cholesky: Cholesky of I + T broke down");
    const auto L = llt.matrixLLT();
    Scalar acc(0);
    for (Index i = 0; i < m; ++i) acc += std::log(L(i, i));
    return Scalar(2) * acc;
}

/// Largest singular value, from the eigenvalues of the smaller Gram matrix.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& M)
{
    using Scalar = typename Derived::Scalar;
    if (M.size() == 0) return Scalar(0);
    Matrix<Scalar> gram;
    if (M.rows() >= M.cols())
        gram = M.transpose() * M;
    else
        gram = M * M.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram, Eigen::EigenvaluesOnly);
    const Scalar top = es.eigenvalues().maxCoeff();
    return top > Scalar(0) ? std::sqrt(top) : Scalar(0);
}

/// B * pinv(A) for a k x l matrix A of full row rank (k <= l).
///
/// Throws RankError when the smallest singular value of A falls below
/// 1e-12 times the largest.
template <typename DerivedA, typename DerivedB>
Matrix<typename DerivedA::Scalar> pinv_times(const Eigen::MatrixBase<DerivedA>& A,
                                             const Eigen::MatrixBase<DerivedB>& B)
{
    using Scalar = typename DerivedA::Scalar;
    const Index k = A.rows();
    const Index l = A.cols();
    if (k > l) throw ShapeError("pinv_times: A must have at least as many columns as rows");
    if (B.cols() != l) throw ShapeError("pinv_times: B and A must have the same number of columns");
    if (k == 0) return Matrix<Scalar>(B.rows(), 0);

    Eigen::JacobiSVD<Matrix<Scalar>> svd(A.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    const Scalar smax = sigma(0);
    if (!(smax > Scalar(0)) || sigma(k - 1) < Scalar(1e-12) * smax)
        throw RankError("pinv_times: matrix is numerically rank deficient");

    // pinv(A) = V diag(1/sigma) U^T
    const Matrix<Scalar> BV = B * svd.matrixV();
    return BV * sigma.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

} // namespace bktrace
