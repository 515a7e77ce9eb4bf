#pragma once

#include "bktrace/la_kernels.hpp"
#include "bktrace/random.hpp"
#include "bktrace/types.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace bktrace {

/// Matrix-free symmetric positive semi-definite operator, accessed only
/// through block products Y = A X.
///
/// Implementations are immutable after construction; apply() may be called
/// concurrently.
template <typename Scalar>
class HermitianOperator {
public:
    virtual ~HermitianOperator() = default;

    virtual Index rows() const = 0;
    virtual Matrix<Scalar> apply(const Eigen::Ref<const Matrix<Scalar>>& X) const = 0;
};

template <typename Scalar>
class DiagonalOperator final : public HermitianOperator<Scalar> {
public:
    explicit DiagonalOperator(Vector<Scalar> diagonal) : diagonal_(std::move(diagonal)) {}

    Index rows() const override { return diagonal_.size(); }

    Matrix<Scalar> apply(const Eigen::Ref<const Matrix<Scalar>>& X) const override
    {
        if (X.rows() != rows()) throw ShapeError("DiagonalOperator::apply: row mismatch");
        return diagonal_.asDiagonal() * X;
    }

    const Vector<Scalar>& diagonal() const { return diagonal_; }

private:
    Vector<Scalar> diagonal_;
};

template <typename Scalar>
class DenseOperator final : public HermitianOperator<Scalar> {
public:
    explicit DenseOperator(Matrix<Scalar> A) : A_(std::move(A))
    {
        if (A_.rows() != A_.cols()) throw ShapeError("DenseOperator: matrix is not square");
    }

    Index rows() const override { return A_.rows(); }

    Matrix<Scalar> apply(const Eigen::Ref<const Matrix<Scalar>>& X) const override
    {
        if (X.rows() != rows()) throw ShapeError("DenseOperator::apply: row mismatch");
        return A_ * X;
    }

    const Matrix<Scalar>& matrix() const { return A_; }

private:
    Matrix<Scalar> A_;
};

/// A = X diag(c) X^T with sparse X (n x r). One block product costs
/// O(nnz(X) * s) for s columns.
template <typename Scalar>
class FactoredLowRankOperator final : public HermitianOperator<Scalar> {
public:
    using Sparse = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

    FactoredLowRankOperator(Sparse factor, Vector<Scalar> coefficients)
        : factor_(std::move(factor)), coefficients_(std::move(coefficients))
    {
        if (factor_.cols() != coefficients_.size())
            throw ShapeError("FactoredLowRankOperator: coefficient count must equal factor columns");
        if (coefficients_.size() > 0 && coefficients_.minCoeff() < Scalar(0))
            throw ParameterError("FactoredLowRankOperator: coefficients must be nonnegative");
        factor_.makeCompressed();
    }

    Index rows() const override { return factor_.rows(); }

    Matrix<Scalar> apply(const Eigen::Ref<const Matrix<Scalar>>& X) const override
    {
        if (X.rows() != rows()) throw ShapeError("FactoredLowRankOperator::apply: row mismatch");
        Matrix<Scalar> small = factor_.transpose() * X;
        small = coefficients_.asDiagonal() * small;
        return factor_ * small;
    }

    const Sparse& factor() const { return factor_; }
    const Vector<Scalar>& coefficients() const { return coefficients_; }

    /// sum_j c_j ||x_j||^2
    Scalar trace() const
    {
        Scalar acc(0);
        for (Index j = 0; j < factor_.cols(); ++j) acc += coefficients_(j) * factor_.col(j).squaredNorm();
        return acc;
    }

    /// C^{1/2} X^T X C^{1/2}; its eigenvalues are the nonzero eigenvalues of A.
    Matrix<Scalar> gram() const
    {
        const Matrix<Scalar> xtx = Matrix<Scalar>(factor_.transpose() * factor_);
        const Vector<Scalar> root = coefficients_.cwiseSqrt();
        return root.asDiagonal() * xtx * root.asDiagonal();
    }

    Matrix<Scalar> dense() const
    {
        const Matrix<Scalar> X = Matrix<Scalar>(factor_);
        return X * coefficients_.asDiagonal() * X.transpose();
    }

private:
    Sparse factor_;
    Vector<Scalar> coefficients_;
};

/// Known spectrum of a test operator.
///
/// `eigenvalues` holds all n eigenvalues, nonincreasing. The basis, when
/// present, is either the identity (diagonal operators) or the leading
/// `basis.cols()` eigenvectors; eigenvalues past that column count are zero.
template <typename Scalar>
struct SpectralModel {
    enum class Basis { none, identity, leading };

    Vector<Scalar> eigenvalues;
    Basis basis_kind = Basis::none;
    Matrix<Scalar> basis;

    Index n() const { return eigenvalues.size(); }
    bool has_basis() const { return basis_kind != Basis::none; }

    /// U_1^T X where U_1 holds the leading k eigenvectors.
    Matrix<Scalar> project_leading(const Eigen::Ref<const Matrix<Scalar>>& X, Index k) const
    {
        switch (basis_kind) {
        case Basis::identity: return X.topRows(k);
        case Basis::leading:
            if (k > basis.cols()) throw ParameterError("SpectralModel: k exceeds stored eigenvectors");
            return basis.leftCols(k).transpose() * X;
        case Basis::none: break;
        }
        throw ParameterError("SpectralModel: no eigenvectors available");
    }

    void validate() const
    {
        for (Index i = 0; i < n(); ++i) {
            if (!(eigenvalues(i) >= Scalar(0))) throw ContractError("SpectralModel: negative eigenvalue");
            if (i > 0 && eigenvalues(i) > eigenvalues(i - 1))
                throw ContractError("SpectralModel: eigenvalues must be nonincreasing");
        }
        if (basis_kind == Basis::leading) {
            if (basis.rows() != n() || basis.cols() > n())
                throw ShapeError("SpectralModel: basis shape does not match the spectrum");
            for (Index i = basis.cols(); i < n(); ++i)
                if (eigenvalues(i) != Scalar(0))
                    throw ContractError("SpectralModel: eigenvalues beyond the stored basis must be zero");
        }
    }
};

template <typename Scalar>
Scalar exact_trace(const SpectralModel<Scalar>& model)
{
    return model.eigenvalues.sum();
}

/// log det(I + A) = sum_i log(1 + lambda_i)
template <typename Scalar>
Scalar exact_logdet_shifted(const SpectralModel<Scalar>& model)
{
    Scalar acc(0);
    for (Index i = 0; i < model.n(); ++i) acc += std::log1p(model.eigenvalues(i));
    return acc;
}

struct GeometricDecaySpec {
    Index n = 1280;
    double lambda1 = 100.0;
    double tau = 0.9;
};

template <typename Scalar>
struct DiagonalProblem {
    DiagonalOperator<Scalar> op;
    SpectralModel<Scalar> model;
};

/// Diagonal operator with eigenvalues lambda_{j+1} = tau^j lambda_1.
template <typename Scalar = double>
DiagonalProblem<Scalar> make_diagonal_operator(const GeometricDecaySpec& spec)
{
    detail::require(spec.n >= 1, "make_diagonal_operator: n must be positive");
    detail::require(spec.tau > 0.0 && spec.tau < 1.0, "make_diagonal_operator: tau must lie in (0, 1)");
    detail::require(spec.lambda1 > 0.0, "make_diagonal_operator: lambda1 must be positive");

    Vector<Scalar> lambda(spec.n);
    for (Index j = 0; j < spec.n; ++j)
        lambda(j) = static_cast<Scalar>(spec.lambda1 * std::pow(spec.tau, static_cast<double>(j)));

    SpectralModel<Scalar> model;
    model.eigenvalues = lambda;
    model.basis_kind = SpectralModel<Scalar>::Basis::identity;
    return {DiagonalOperator<Scalar>(std::move(lambda)), std::move(model)};
}

struct SparseLowRankSpec {
    Index n = 20000;
    double h = 10.0;
    double l_coef = 1.0;
    double density = 0.025;
    Index r_high = 40;
    Index r_total = 300;
    std::uint64_t seed = 0;
};

struct ExactRefs {
    double trace = 0.0;
    double logdet = 0.0;
};

template <typename Scalar>
struct FactoredProblem {
    FactoredLowRankOperator<Scalar> op;
    ExactRefs refs;
    /// All n eigenvalues (the nonzero ones from the Gram matrix, padded with
    /// zeros). No basis; see with_eigenvectors().
    SpectralModel<Scalar> model;
};

/// Wraps an explicit factorization A = X diag(c) X^T and computes its exact
/// references from the r x r Gram eigenproblem.
template <typename Scalar>
FactoredProblem<Scalar> make_factored_operator(typename FactoredLowRankOperator<Scalar>::Sparse X,
                                               Vector<Scalar> c)
{
    FactoredLowRankOperator<Scalar> op(std::move(X), std::move(c));
    const Index n = op.rows();
    const Index r = op.factor().cols();
    if (r > n) throw ParameterError("make_factored_operator: rank exceeds order");

    Vector<Scalar> lambda = Vector<Scalar>::Zero(n);
    if (r > 0) {
        const Vector<Scalar> g = sym_eig(op.gram()).values;
        for (Index i = 0; i < r; ++i) lambda(i) = std::max(g(r - 1 - i), Scalar(0));
    }

    SpectralModel<Scalar> model;
    model.eigenvalues = std::move(lambda);

    ExactRefs refs;
    refs.trace = static_cast<double>(op.trace());
    refs.logdet = static_cast<double>(exact_logdet_shifted(model));
    return {std::move(op), refs, std::move(model)};
}

/// A = sum_{j<=r_high} (h/j^2) x_j x_j^T + sum_{r_high<j<=r_total} (l_coef/j^2) x_j x_j^T
/// with sparse nonnegative x_j.
///
/// Each x_j has ceil(density * n) nonzeros at distinct uniformly random
/// positions with values uniform on (0, 1).
template <typename Scalar = double>
FactoredProblem<Scalar> make_sparse_lowrank_operator(const SparseLowRankSpec& spec)
{
    detail::require(spec.n >= 1, "make_sparse_lowrank_operator: n must be positive");
    detail::require(spec.r_total >= 0 && spec.r_high >= 0 && spec.r_high <= spec.r_total,
                    "make_sparse_lowrank_operator: need 0 <= r_high <= r_total");
    detail::require(spec.r_total <= spec.n, "make_sparse_lowrank_operator: r_total must not exceed n");
    detail::require(spec.density > 0.0 && spec.density <= 1.0,
                    "make_sparse_lowrank_operator: density must lie in (0, 1]");
    detail::require(spec.h >= 0.0 && spec.l_coef >= 0.0,
                    "make_sparse_lowrank_operator: coefficients must be nonnegative");

    const auto per_column = static_cast<Index>(std::ceil(spec.density * static_cast<double>(spec.n)));
    Rng rng(spec.seed);

    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(per_column * spec.r_total));
    std::vector<Index> rows;
    std::vector<double> values;
    for (Index j = 0; j < spec.r_total; ++j) {
        bool nonzero = false;
        while (!nonzero) {
            // Floyd's algorithm for a uniform subset of size per_column.
            std::unordered_set<Index> chosen;
            rows.clear();
            values.clear();
            for (Index t = spec.n - per_column; t < spec.n; ++t) {
                auto candidate = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(t + 1)));
                if (chosen.count(candidate)) candidate = t;
                chosen.insert(candidate);
                rows.push_back(candidate);
            }
            for (std::size_t i = 0; i < rows.size(); ++i) {
                values.push_back(rng.uniform_open());
                nonzero = nonzero || values.back() != 0.0;
            }
        }
        for (std::size_t i = 0; i < rows.size(); ++i)
            triplets.emplace_back(rows[i], j, static_cast<Scalar>(values[i]));
    }

    typename FactoredLowRankOperator<Scalar>::Sparse X(spec.n, spec.r_total);
    X.setFromTriplets(triplets.begin(), triplets.end());

    Vector<Scalar> c(spec.r_total);
    for (Index j = 0; j < spec.r_total; ++j) {
        const double jj = static_cast<double>(j + 1);
        c(j) = static_cast<Scalar>((j < spec.r_high ? spec.h : spec.l_coef) / (jj * jj));
    }
    return make_factored_operator<Scalar>(std::move(X), std::move(c));
}

/// Adds the leading eigenvectors of a factored operator to its model:
/// with B = X C^{1/2} and B^T B = V diag(g) V^T, u_i = B v_i / sqrt(g_i).
template <typename Scalar>
SpectralModel<Scalar> with_eigenvectors(const FactoredLowRankOperator<Scalar>& op,
                                        SpectralModel<Scalar> model)
{
    const Index r = op.factor().cols();
    const auto eig = sym_eig(op.gram());
    const Scalar top = r > 0 ? eig.values(r - 1) : Scalar(0);

    Index rank = 0;
    while (rank < r && eig.values(r - 1 - rank) > Scalar(1e-12) * top) ++rank;

    Matrix<Scalar> V(r, rank);
    Vector<Scalar> inv_root(rank);
    for (Index i = 0; i < rank; ++i) {
        V.col(i) = eig.vectors.col(r - 1 - i);
        inv_root(i) = Scalar(1) / std::sqrt(eig.values(r - 1 - i));
    }
    const Matrix<Scalar> CV = op.coefficients().cwiseSqrt().asDiagonal() * V;
    Matrix<Scalar> U = op.factor() * CV;
    U = U * inv_root.asDiagonal();

    for (Index i = rank; i < model.n(); ++i) model.eigenvalues(i) = Scalar(0);
    model.basis = std::move(U);
    model.basis_kind = SpectralModel<Scalar>::Basis::leading;
    return model;
}

template <typename Scalar>
struct DenseProblem {
    DenseOperator<Scalar> op;
    SpectralModel<Scalar> model;
};

/// Dense symmetric PSD matrix with its full eigendecomposition.
/// Eigenvalues below -1e-8 * max|lambda| reject the input; smaller negative
/// ones are clamped to zero.
template <typename Scalar>
DenseProblem<Scalar> make_dense_operator(Matrix<Scalar> A)
{
    const auto eig = sym_eig(A);
    const Index n = A.rows();
    SpectralModel<Scalar> model;
    model.eigenvalues.resize(n);
    model.basis.resize(n, n);
    const Scalar scale = n > 0 ? eig.values.cwiseAbs().maxCoeff() : Scalar(0);
    for (Index i = 0; i < n; ++i) {
        const Scalar value = eig.values(n - 1 - i);
        if (value < Scalar(-1e-8) * scale) throw InputError("make_dense_operator: matrix is not positive semi-definite");
        model.eigenvalues(i) = std::max(value, Scalar(0));
        model.basis.col(i) = eig.vectors.col(n - 1 - i);
    }
    model.basis_kind = SpectralModel<Scalar>::Basis::leading;
    return {DenseOperator<Scalar>(symmetrized(A)), std::move(model)};
}

/// Reads a whitespace-delimited dense matrix: first the order n, then the
/// n*n entries in row-major order. A positive `max_order` rejects larger n
/// before any entry is read.
inline MatrixXd read_dense_matrix(const std::string& path, Index max_order = 0)
{
    std::ifstream in(path);
    if (!in) throw InputError("read_dense_matrix: cannot open " + path);
    long long n = 0;
    if (!(in >> n) || n < 1) throw InputError("read_dense_matrix: missing or invalid order in " + path);
    if (max_order > 0 && n > max_order)
        throw InputError("read_dense_matrix: order " + std::to_string(n) + " exceeds " + std::to_string(max_order));
    MatrixXd A(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (!(in >> A(i, j))) throw InputError("read_dense_matrix: too few entries in " + path);
    double extra = 0.0;
    if (in >> extra) throw InputError("read_dense_matrix: trailing data in " + path);
    if (!A.allFinite()) throw InputError("read_dense_matrix: non-finite entry in " + path);
    return A;
}

} // namespace bktrace
