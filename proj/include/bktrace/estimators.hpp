#pragma once

#include "bktrace/la_kernels.hpp"
#include "bktrace/linop.hpp"
#include "bktrace/random.hpp"
#include "bktrace/sketch.hpp"
#include "bktrace/types.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace bktrace {

struct EstimateRecord {
    double trace_estimate = 0.0;
    double logdet_estimate = 0.0;
    SketchConfig config{};
    Algorithm algorithm = Algorithm::krylov;
    Index m_effective = 0;
    bool deflated = false;
};

/// Tr(A) ~ Tr(T) and log det(I + A) ~ log det(I + T).
template <typename Scalar>
EstimateRecord estimate_from_compression(const CompressionResult<Scalar>& result, const SketchConfig& config = {},
                                         Algorithm algorithm = Algorithm::krylov)
{
    EstimateRecord rec;
    rec.trace_estimate = static_cast<double>(result.T.trace());
    rec.logdet_estimate = static_cast<double>(logdet_shifted_cholesky(result.T));
    rec.config = config;
    rec.algorithm = algorithm;
    rec.m_effective = result.m;
    rec.deflated = result.deflated;
    return rec;
}

/// Hutchinson's estimator (1/N) sum_i c_i^T A c_i with Rademacher probes.
///
/// Probes are applied `chunk` at a time; sample i always uses the same probe
/// and the per-sample values are summed in sample order, so the result does
/// not depend on `chunk`.
template <typename Scalar>
Scalar hutchinson_trace(const HermitianOperator<Scalar>& A, Index samples, std::uint64_t seed, Index chunk = 64)
{
    detail::require(samples >= 1, "hutchinson_trace: need at least one sample");
    detail::require(chunk >= 1, "hutchinson_trace: chunk must be positive");
    const Index n = A.rows();
    std::vector<Scalar> quad(static_cast<std::size_t>(samples));
    for (Index start = 0; start < samples; start += chunk) {
        const Index width = std::min(chunk, samples - start);
        Matrix<Scalar> C(n, width);
        for (Index j = 0; j < width; ++j)
            C.col(j) = rademacher_vector<Scalar>(n, seed, static_cast<std::uint64_t>(start + j));
        const Matrix<Scalar> AC = A.apply(C);
        for (Index j = 0; j < width; ++j) quad[static_cast<std::size_t>(start + j)] = C.col(j).dot(AC.col(j));
    }
    Scalar acc(0);
    for (const Scalar v : quad) acc += v;
    return acc / static_cast<Scalar>(samples);
}

struct RelativeErrors {
    double trace = 0.0;  ///< (Tr(A) - Tr(T)) / Tr(A)
    double logdet = 0.0; ///< (logdet(I+A) - logdet(I+T)) / logdet(I+A)
};

inline RelativeErrors relative_errors(double exact_trace, double exact_logdet, const EstimateRecord& rec)
{
    if (!(exact_trace > 0.0) || !(exact_logdet > 0.0))
        throw ParameterError("relative_errors: exact references must be positive");
    return {(exact_trace - rec.trace_estimate) / exact_trace, (exact_logdet - rec.logdet_estimate) / exact_logdet};
}

/// Omega expressed in the eigenbasis, split at k: omega1 = U_1^T Omega (k x l),
/// omega2 = U_2^T Omega.
///
/// When the model stores only its r < n nonzero-eigenvalue eigenvectors,
/// omega2 is the Gram-equivalent block [U_{k+1..r}^T Omega; R] with R from a
/// QR of the part of Omega orthogonal to the stored eigenvectors. It has the
/// same omega2^T omega2 as the full U_2^T Omega, so every norm of
/// omega2 * X is preserved.
template <typename Scalar>
struct SpectralSplit {
    Matrix<Scalar> omega1;
    Matrix<Scalar> omega2;
    Index k = 0;
    bool compressed_tail = false;
};

template <typename Scalar>
SpectralSplit<Scalar> spectral_split(const SpectralModel<Scalar>& model, const Matrix<Scalar>& omega, Index k)
{
    const Index n = model.n();
    const Index l = omega.cols();
    if (omega.rows() != n) throw ShapeError("spectral_split: probe rows must equal operator order");
    detail::require(k >= 1 && k < n, "spectral_split: need 1 <= k < n");
    detail::require(k <= l, "spectral_split: need k <= l");
    if (!model.has_basis()) throw ParameterError("spectral_split: model has no eigenvectors");

    SpectralSplit<Scalar> split;
    split.k = k;
    if (model.basis_kind == SpectralModel<Scalar>::Basis::identity) {
        split.omega1 = omega.topRows(k);
        split.omega2 = omega.bottomRows(n - k);
    } else {
        const Index r = model.basis.cols();
        if (k > r) throw ParameterError("spectral_split: k exceeds the number of stored eigenvectors");
        const Matrix<Scalar> coords = model.basis.transpose() * omega;
        split.omega1 = coords.topRows(k);
        if (r == n) {
            split.omega2 = coords.bottomRows(n - k);
        } else {
            const Matrix<Scalar> outside = omega - model.basis * coords;
            const Index tail_rows = std::min(l, n - r);
            Matrix<Scalar> R = Matrix<Scalar>::Zero(tail_rows, l);
            if (tail_rows == l) {
                R = thin_qr(outside).R;
            } else {
                Eigen::HouseholderQR<Matrix<Scalar>> qr(outside);
                R = qr.matrixQR().topRows(tail_rows).template triangularView<Eigen::Upper>();
            }
            split.omega2.resize(r - k + tail_rows, l);
            split.omega2 << coords.bottomRows(r - k), R;
            split.compressed_tail = true;
        }
    }

    Eigen::JacobiSVD<Matrix<Scalar>> svd(split.omega1);
    const auto& sigma = svd.singularValues();
    if (!(sigma(0) > Scalar(0)) || sigma(k - 1) < Scalar(1e-12) * sigma(0))
        throw RankError("spectral_split: U_1^T Omega does not have full row rank");
    return split;
}

/// || omega2 * pinv(omega1) ||_2
template <typename Scalar>
Scalar interaction_norm(const SpectralSplit<Scalar>& split)
{
    return spectral_norm(pinv_times(split.omega1, split.omega2));
}

} // namespace bktrace
