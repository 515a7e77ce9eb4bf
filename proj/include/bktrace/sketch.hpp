#pragma once

// Orthonormal bases for randomized subspace iteration (range of A^q Omega)
// and for the randomized block Krylov space (range of A Omega, ..., A^q Omega),
// and the compressions T = Q^T A Q built on them.

#include "bktrace/la_kernels.hpp"
#include "bktrace/linop.hpp"
#include "bktrace/random.hpp"
#include "bktrace/types.hpp"

#include <algorithm>
#include <cstdint>

namespace bktrace {

enum class Stabilization { idealized, stabilized };
enum class RankPolicy { error, deflate };
enum class Algorithm { krylov, subspace, hutchinson };

inline const char* to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::krylov: return "krylov";
    case Algorithm::subspace: return "subspace";
    case Algorithm::hutchinson: return "hutchinson";
    }
    return "?";
}

struct BasisOptions {
    Stabilization stabilization = Stabilization::stabilized;
    RankPolicy rank_policy = RankPolicy::deflate;
};

/// Parameters of one estimator run: target rank k, oversampling p (l = k + p
/// Gaussian probes), depth q, and the probe seed.
struct SketchConfig {
    Index k = 1;
    Index p = 0;
    Index q = 1;
    std::uint64_t seed = 0;
    BasisOptions options{};

    Index l() const { return k + p; }

    void validate(Index n) const
    {
        detail::require(k >= 1, "SketchConfig: k must be at least 1");
        detail::require(p >= 0, "SketchConfig: p must be nonnegative");
        detail::require(q >= 1, "SketchConfig: q must be at least 1");
        detail::require(l() <= n, "SketchConfig: l = k + p must not exceed n");
    }
};

template <typename Scalar>
struct CompressionResult {
    Matrix<Scalar> Q; ///< n x m orthonormal basis
    Matrix<Scalar> T; ///< m x m, Q^T A Q symmetrized
    Index m = 0;
    bool deflated = false;
};

/// Relative column-norm threshold below which a candidate basis vector is
/// treated as dependent.
inline constexpr double deflation_tolerance = 1e-10;

namespace detail {

/// Orthonormalizes `block` against basis.leftCols(m) and appends the
/// surviving columns to `basis`, returning how many were appended.
///
/// Block classical Gram-Schmidt is applied twice against the existing basis,
/// then each column is orthogonalized (twice) against the columns accepted
/// from this block. A column whose remaining norm is at most
/// deflation_tolerance times the largest input column norm is dropped.
template <typename Scalar>
Index append_orthonormal(Matrix<Scalar>& basis, Index& m, Matrix<Scalar> block, bool& deflated)
{
    const Index n = basis.rows();
    const Scalar reference = block.size() > 0 ? block.colwise().norm().maxCoeff() : Scalar(0);
    const Scalar cutoff = Scalar(deflation_tolerance) * reference;

    if (m > 0) {
        const auto existing = basis.leftCols(m);
        for (int pass = 0; pass < 2; ++pass) block.noalias() -= existing * (existing.transpose() * block);
    }

    const Index first = m;
    for (Index j = 0; j < block.cols(); ++j) {
        Vector<Scalar> v = block.col(j);
        if (m > first) {
            const auto fresh = basis.middleCols(first, m - first);
            for (int pass = 0; pass < 2; ++pass) v.noalias() -= fresh * (fresh.transpose() * v);
        }
        const Scalar norm = v.norm();
        if (!(norm > cutoff) || m >= n) {
            deflated = true;
            continue;
        }
        if (m >= basis.cols()) basis.conservativeResize(Eigen::NoChange, std::max<Index>(2 * basis.cols(), m + 1));
        basis.col(m++) = v / norm;
    }
    return m - first;
}

/// Householder QR of K, dropping columns whose R diagonal is at most
/// deflation_tolerance times the largest norm among the K columns of the same
/// block of `block_width`.
template <typename Scalar>
Matrix<Scalar> qr_basis_with_deflation(const Matrix<Scalar>& K, Index block_width, bool& deflated)
{
    const Index n = K.rows();
    if (K.cols() > n) {
        Matrix<Scalar> basis(n, std::min(K.cols(), n));
        Index m = 0;
        for (Index start = 0; start < K.cols(); start += block_width) {
            const Index width = std::min(block_width, K.cols() - start);
            append_orthonormal<Scalar>(basis, m, K.middleCols(start, width), deflated);
        }
        return basis.leftCols(m);
    }

    const auto qr = thin_qr(K);
    const Vector<Scalar> norms = K.colwise().norm().transpose();
    Matrix<Scalar> Q(n, K.cols());
    Index m = 0;
    for (Index j = 0; j < K.cols(); ++j) {
        const Index start = (j / block_width) * block_width;
        const Index width = std::min(block_width, K.cols() - start);
        const Scalar reference = norms.segment(start, width).maxCoeff();
        if (qr.R(j, j) > Scalar(deflation_tolerance) * reference)
            Q.col(m++) = qr.Q.col(j);
        else
            deflated = true;
    }
    return Q.leftCols(m);
}

template <typename Scalar>
CompressionResult<Scalar> compress(const HermitianOperator<Scalar>& A, Matrix<Scalar> Q, bool deflated,
                                   RankPolicy policy)
{
    if (deflated && policy == RankPolicy::error)
        throw RankError("basis construction: sample space is rank deficient");
    CompressionResult<Scalar> out;
    out.m = Q.cols();
    out.deflated = deflated;
    if (out.m > 0) {
        const Matrix<Scalar> AQ = A.apply(Q);
        out.T = symmetrized(Matrix<Scalar>(Q.transpose() * AQ));
    } else {
        out.T.resize(0, 0);
    }
    out.Q = std::move(Q);
    return out;
}

template <typename Scalar>
void check_probe(const HermitianOperator<Scalar>& A, const Matrix<Scalar>& omega, Index q)
{
    if (omega.rows() != A.rows()) throw ShapeError("sketch: probe rows must equal operator order");
    if (omega.cols() < 1) throw ParameterError("sketch: probe needs at least one column");
    if (q < 1) throw ParameterError("sketch: q must be at least 1");
}

} // namespace detail

/// Randomized subspace iteration: Q spans range(A^q Omega), T = Q^T A Q.
///
/// The stabilized mode re-orthonormalizes after every product with A.
template <typename Scalar>
CompressionResult<Scalar> subspace_iteration_basis(const HermitianOperator<Scalar>& A,
                                                   const Matrix<Scalar>& omega, Index q,
                                                   BasisOptions options = {})
{
    detail::check_probe(A, omega, q);
    const Index n = A.rows();
    const Index l = omega.cols();
    bool deflated = false;

    if (options.stabilization == Stabilization::idealized) {
        Matrix<Scalar> Y = omega;
        for (Index i = 0; i < q; ++i) Y = A.apply(Y);
        Matrix<Scalar> Q = detail::qr_basis_with_deflation<Scalar>(Y, l, deflated);
        return detail::compress(A, std::move(Q), deflated, options.rank_policy);
    }

    Matrix<Scalar> Q(n, 0);
    Matrix<Scalar> current = omega;
    for (Index i = 0; i < q; ++i) {
        Matrix<Scalar> basis(n, std::min(l, n));
        Index m = 0;
        detail::append_orthonormal<Scalar>(basis, m, A.apply(current), deflated);
        Q = basis.leftCols(m);
        if (m == 0) break;
        current = Q;
    }
    return detail::compress(A, std::move(Q), deflated, options.rank_policy);
}

/// Randomized block Krylov space: Q spans K_q = range(A Omega, ..., A^q Omega),
/// T = Q^T A Q; m = q l when the space has full dimension.
///
/// The stabilized mode multiplies the most recent orthonormal block by A and
/// orthogonalizes the product against the accumulated basis, which spans the
/// same space in exact arithmetic. The idealized mode forms K_q explicitly and
/// takes one thin QR.
template <typename Scalar>
CompressionResult<Scalar> block_krylov_basis(const HermitianOperator<Scalar>& A, const Matrix<Scalar>& omega,
                                             Index q, BasisOptions options = {})
{
    detail::check_probe(A, omega, q);
    const Index n = A.rows();
    const Index l = omega.cols();
    bool deflated = false;

    if (options.stabilization == Stabilization::idealized) {
        Matrix<Scalar> K(n, q * l);
        Matrix<Scalar> power = omega;
        for (Index i = 0; i < q; ++i) {
            power = A.apply(power);
            K.middleCols(i * l, l) = power;
        }
        Matrix<Scalar> Q = detail::qr_basis_with_deflation<Scalar>(K, l, deflated);
        return detail::compress(A, std::move(Q), deflated, options.rank_policy);
    }

    Matrix<Scalar> basis(n, std::min(q * l, n));
    Index m = 0;
    Matrix<Scalar> current = omega;
    for (Index i = 0; i < q; ++i) {
        const Index start = m;
        const Index added = detail::append_orthonormal<Scalar>(basis, m, A.apply(current), deflated);
        // Nothing new: K_i is invariant under A and later blocks add nothing.
        if (added == 0) break;
        current = basis.middleCols(start, added);
    }
    return detail::compress(A, Matrix<Scalar>(basis.leftCols(m)), deflated, options.rank_policy);
}

/// Draws the probe for `config` and builds the basis of the requested algorithm.
template <typename Scalar>
CompressionResult<Scalar> sketch(const HermitianOperator<Scalar>& A, const SketchConfig& config,
                                 Algorithm algorithm)
{
    config.validate(A.rows());
    const Matrix<Scalar> omega = gaussian_matrix<Scalar>(A.rows(), config.l(), config.seed);
    switch (algorithm) {
    case Algorithm::krylov: return block_krylov_basis(A, omega, config.q, config.options);
    case Algorithm::subspace: return subspace_iteration_basis(A, omega, config.q, config.options);
    case Algorithm::hutchinson: break;
    }
    throw ParameterError("sketch: algorithm does not build a basis");
}

} // namespace bktrace
