#pragma once

// A-priori and structural error bounds for the block Krylov trace and
// log-determinant estimators, and the subspace-iteration baselines they are
// compared against.
//
// Gap factors multiply very small Chebyshev terms by large constants, so they
// are combined in log scale and exponentiated once.

#include "bktrace/estimators.hpp"
#include "bktrace/la_kernels.hpp"
#include "bktrace/linop.hpp"
#include "bktrace/types.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace bktrace {

/// Chebyshev polynomial of the first kind, T_q(x).
inline double chebyshev_T(int q, double x)
{
    detail::require(q >= 0, "chebyshev_T: degree must be nonnegative");
    if (x < -1.0) return (q % 2 == 0 ? 1.0 : -1.0) * chebyshev_T(q, -x);
    if (x <= 1.0) return std::cos(q * std::acos(x));
    // ((x + s)^q + (x - s)^q) / 2 with x - s = 1 / (x + s)
    const double s = std::sqrt((x - 1.0) * (x + 1.0));
    const double a = x + s;
    return 0.5 * (std::pow(a, q) + std::pow(a, -q));
}

/// log T_q(x) for x >= 1; finite wherever x is.
inline double log_chebyshev_T(int q, double x)
{
    detail::require(q >= 0, "log_chebyshev_T: degree must be nonnegative");
    if (!(x >= 1.0)) throw ParameterError("log_chebyshev_T: argument must be at least 1");
    if (q == 0) return 0.0;
    // log(x + sqrt(x^2 - 1)), accurate near x = 1
    const double log_a = std::isinf(x) ? x : std::log1p((x - 1.0) + std::sqrt((x - 1.0) * (x + 1.0)));
    return q * log_a + std::log1p(std::exp(-2.0 * q * log_a)) - std::numbers::ln2;
}

namespace detail {

inline void require_chebyshev_args(int q, double gamma)
{
    require(q >= 1, "chebyshev gap term: q must be at least 1");
    if (!(gamma >= 1.0)) throw ParameterError("chebyshev gap term: gamma must be at least 1 (no spectral gap)");
}

} // namespace detail

/// T_{q-1}(gamma)^{-1}
inline double chebyshev_T_inv(int q, double gamma)
{
    detail::require_chebyshev_args(q, gamma);
    return std::exp(-log_chebyshev_T(q - 1, gamma));
}

/// T_{q-1}(gamma)^{-2}. Evaluated in log scale: never overflows, and
/// underflows only where the true value is below the double range.
inline double chebyshev_T_inv_sq(int q, double gamma)
{
    detail::require_chebyshev_args(q, gamma);
    return std::exp(-2.0 * log_chebyshev_T(q - 1, gamma));
}

/// Eigenvalues on either side of the split at k and the derived Chebyshev
/// argument gamma = (2 lambda_k - lambda_{k+1}) / lambda_{k+1}.
struct GapData {
    double lambda_k = 1.0;
    double lambda_k1 = 0.0;
    double gamma = std::numeric_limits<double>::infinity();
    double ratio = 0.0; ///< lambda_{k+1} / lambda_k
};

inline GapData make_gap(double lambda_k, double lambda_k1)
{
    if (!(lambda_k > lambda_k1) || !(lambda_k1 >= 0.0))
        throw ParameterError("make_gap: need lambda_k > lambda_{k+1} >= 0");
    GapData g;
    g.lambda_k = lambda_k;
    g.lambda_k1 = lambda_k1;
    g.ratio = lambda_k1 / lambda_k;
    g.gamma = lambda_k1 > 0.0 ? (2.0 * lambda_k - lambda_k1) / lambda_k1 : std::numeric_limits<double>::infinity();
    return g;
}

/// Gap at the split k (1-based: lambda_k is eigenvalues(k - 1)).
template <typename Scalar>
GapData gap_at(const SpectralModel<Scalar>& model, Index k)
{
    detail::require(k >= 1 && k < model.n(), "gap_at: need 1 <= k < n");
    return make_gap(static_cast<double>(model.eigenvalues(k - 1)), static_cast<double>(model.eigenvalues(k)));
}

/// The filter polynomial f(x) = T_{q-1}((2x - lambda_{k+1}) / lambda_{k+1}) / T_{q-1}(gamma).
/// It is at least 1 on [lambda_k, inf) and bounded by T_{q-1}(gamma)^{-1}
/// in magnitude on [0, lambda_{k+1}].
inline double chebyshev_filter(double x, const GapData& gap, int q)
{
    detail::require_chebyshev_args(q, gap.gamma);
    if (!(gap.lambda_k1 > 0.0)) throw ParameterError("chebyshev_filter: needs lambda_{k+1} > 0");
    const double arg = (2.0 * x - gap.lambda_k1) / gap.lambda_k1;
    if (arg >= 1.0) return std::exp(log_chebyshev_T(q - 1, arg) - log_chebyshev_T(q - 1, gap.gamma));
    return chebyshev_T(q - 1, arg) * chebyshev_T_inv(q, gap.gamma);
}

namespace detail {

inline void require_constant_args(Index n, Index k, Index p, Index l)
{
    require(p >= 2, "bound constant: p must be at least 2");
    require(k >= 1, "bound constant: k must be at least 1");
    require(l == k + p, "bound constant: l must equal k + p");
    require(l <= n, "bound constant: k + p must not exceed n");
}

inline double mu(Index n, Index k, Index l)
{
    return std::sqrt(static_cast<double>(n - k)) + std::sqrt(static_cast<double>(l));
}

} // namespace detail

/// Expectation-bound constant
/// C_ge = (p+1)/(p-1) (mu + sqrt 2)^2 (1/(2 pi (p+1)))^{1/(p+1)} (e sqrt(l)/(p+1))^2,
/// mu = sqrt(n-k) + sqrt(l).
inline double constant_Cge(Index n, Index k, Index p, Index l)
{
    detail::require_constant_args(n, k, p, l);
    const double pp = static_cast<double>(p);
    const double m = detail::mu(n, k, l);
    const double lead = (pp + 1.0) / (pp - 1.0) * (m + std::numbers::sqrt2) * (m + std::numbers::sqrt2);
    const double root = std::pow(1.0 / (2.0 * std::numbers::pi * (pp + 1.0)), 1.0 / (pp + 1.0));
    const double tail = std::numbers::e * std::sqrt(static_cast<double>(l)) / (pp + 1.0);
    return lead * root * tail * tail;
}

/// Concentration-bound constant
/// C_g = (mu + sqrt(2 ln(2/delta)))^2 (2/delta)^{2/(p+1)} (e sqrt(l)/(p+1))^2.
inline double constant_Cg(Index n, Index k, Index p, Index l, double delta)
{
    detail::require_constant_args(n, k, p, l);
    if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("constant_Cg: delta must lie in (0, 1]");
    const double pp = static_cast<double>(p);
    const double shift = detail::mu(n, k, l) + std::sqrt(2.0 * std::log(2.0 / delta));
    const double tail = std::numbers::e * std::sqrt(static_cast<double>(l)) / (pp + 1.0);
    return shift * shift * std::pow(2.0 / delta, 2.0 / (pp + 1.0)) * tail * tail;
}

/// (lambda_{k+1}/lambda_k) T_{q-1}^{-2}(gamma) C
inline double krylov_gap_factor(const GapData& gap, int q, double constant)
{
    if (gap.ratio == 0.0) return 0.0;
    detail::require_chebyshev_args(q, gap.gamma);
    return std::exp(std::log(gap.ratio) - 2.0 * log_chebyshev_T(q - 1, gap.gamma) + std::log(constant));
}

/// (lambda_{k+1}/lambda_k)^{2q-1} C
inline double subspace_gap_factor(const GapData& gap, int q, double constant)
{
    detail::require(q >= 1, "subspace_gap_factor: q must be at least 1");
    if (gap.ratio == 0.0) return 0.0;
    return std::exp((2.0 * q - 1.0) * std::log(gap.ratio) + std::log(constant));
}

/// Tr(Lambda_2) and log det(I + Lambda_2) for the eigenvalues past k.
struct TailTerms {
    double trace = 0.0;
    double logdet = 0.0;
};

template <typename Scalar>
TailTerms tail_terms(const SpectralModel<Scalar>& model, Index k)
{
    TailTerms t;
    for (Index i = k; i < model.n(); ++i) {
        const double v = static_cast<double>(model.eigenvalues(i));
        t.trace += v;
        t.logdet += std::log1p(v);
    }
    return t;
}

/// log det(I + c Lambda_2) + log det(I + Lambda_2)
template <typename Scalar>
double scaled_tail_logdet(const SpectralModel<Scalar>& model, Index k, double c)
{
    double acc = 0.0;
    for (Index i = k; i < model.n(); ++i) {
        const double v = static_cast<double>(model.eigenvalues(i));
        acc += std::log1p(c * v) + std::log1p(v);
    }
    return acc;
}

struct BoundPair {
    double trace = 0.0;
    double logdet = 0.0;
    double factor = 0.0; ///< the gap factor multiplying the tail
};

namespace detail {

template <typename Scalar>
BoundPair from_factor(const SpectralModel<Scalar>& model, Index k, double factor)
{
    const TailTerms tail = tail_terms(model, k);
    return {(1.0 + factor) * tail.trace, scaled_tail_logdet(model, k, factor), factor};
}

} // namespace detail

/// Bounds on E[Tr(A) - Tr(T)] and E[logdet(I+A) - logdet(I+T)] for the block
/// Krylov compression.
template <typename Scalar>
BoundPair expectation_bounds(const SpectralModel<Scalar>& model, Index k, Index p, int q)
{
    const GapData gap = gap_at(model, k);
    const double c = constant_Cge(model.n(), k, p, k + p);
    return detail::from_factor(model, k, krylov_gap_factor(gap, q, c));
}

/// Bounds holding with probability at least 1 - delta for the block Krylov
/// compression.
template <typename Scalar>
BoundPair concentration_bounds(const SpectralModel<Scalar>& model, Index k, Index p, int q, double delta)
{
    const GapData gap = gap_at(model, k);
    const double c = constant_Cg(model.n(), k, p, k + p, delta);
    return detail::from_factor(model, k, krylov_gap_factor(gap, q, c));
}

struct BaselineBounds {
    BoundPair expectation;
    BoundPair concentration;
    Index p_effective = 0;
    Index l_effective = 0;
};

/// Subspace-iteration bounds. With `substitute`, the constants are evaluated
/// at p' = q l - k and l' = q l, i.e. as if the compression had the Krylov
/// dimension.
template <typename Scalar>
BaselineBounds baseline_bounds(const SpectralModel<Scalar>& model, Index k, Index p, int q, double delta,
                               bool substitute)
{
    const GapData gap = gap_at(model, k);
    BaselineBounds out;
    out.l_effective = substitute ? q * (k + p) : k + p;
    out.p_effective = out.l_effective - k;
    const Index n = model.n();
    const double ce = constant_Cge(n, k, out.p_effective, out.l_effective);
    const double cg = constant_Cg(n, k, out.p_effective, out.l_effective, delta);
    out.expectation = detail::from_factor(model, k, subspace_gap_factor(gap, q, ce));
    out.concentration = detail::from_factor(model, k, subspace_gap_factor(gap, q, cg));
    return out;
}

/// Per-sample bounds for a fixed probe, driven by w = ||omega2 pinv(omega1)||_2.
struct StructuralBounds {
    double interaction = 0.0;         ///< w
    double trace_loose = 0.0;         ///< (1 + t w) Tr(Lambda_2)
    std::optional<double> trace_tight; ///< (1 + ratio t^2 w^2) Tr(Lambda_2), when 0 < w <= T_{q-1}(gamma) / ratio
    double logdet = 0.0;              ///< logdet(I + eta Lambda_2) + logdet(I + Lambda_2)
    double eta = 0.0;                 ///< ratio t^2 w^2
};

template <typename Scalar>
StructuralBounds structural_bounds_from_norm(const SpectralModel<Scalar>& model, Index k, int q, double w)
{
    const GapData gap = gap_at(model, k);
    const TailTerms tail = tail_terms(model, k);
    StructuralBounds out;
    out.interaction = w;
    if (gap.ratio == 0.0) {
        // Rank-k operator: the Krylov space captures it exactly.
        out.trace_loose = 0.0;
        out.logdet = 0.0;
        return out;
    }
    detail::require_chebyshev_args(q, gap.gamma);
    const double log_cheb = log_chebyshev_T(q - 1, gap.gamma);
    const double t = std::exp(-log_cheb);
    out.trace_loose = (1.0 + t * w) * tail.trace;
    out.eta = w > 0.0 ? std::exp(std::log(gap.ratio) - 2.0 * log_cheb + 2.0 * std::log(w)) : 0.0;
    if (w > 0.0 && std::log(w) <= log_cheb - std::log(gap.ratio)) out.trace_tight = (1.0 + out.eta) * tail.trace;
    out.logdet = scaled_tail_logdet(model, k, out.eta);
    return out;
}

template <typename Scalar>
StructuralBounds structural_bounds(const SpectralModel<Scalar>& model, const SpectralSplit<Scalar>& split, int q)
{
    return structural_bounds_from_norm(model, split.k, q, static_cast<double>(interaction_norm(split)));
}

/// Every bound for one (k, p, q, delta) configuration; the structural fields
/// are filled only when a spectral split is supplied.
struct BoundReport {
    double trace_expectation = 0.0;
    double trace_concentration = 0.0;
    double logdet_expectation = 0.0;
    double logdet_concentration = 0.0;
    double trace_expectation_baseline = 0.0;
    double trace_concentration_baseline = 0.0;
    double logdet_expectation_baseline = 0.0;
    double logdet_concentration_baseline = 0.0;
    std::optional<double> structural_trace_loose;
    std::optional<double> structural_trace_tight;
    std::optional<double> structural_logdet;
    double tail_trace = 0.0;
    double tail_logdet = 0.0;
    double delta = 0.0;
    double eta = 0.0;
};

/// Baselines use the substituted constants (p' = q l - k) when q l <= n and
/// the plain ones otherwise.
template <typename Scalar>
BoundReport bound_report(const SpectralModel<Scalar>& model, Index k, Index p, int q, double delta,
                         const SpectralSplit<Scalar>* split = nullptr)
{
    BoundReport r;
    r.delta = delta;
    const TailTerms tail = tail_terms(model, k);
    r.tail_trace = tail.trace;
    r.tail_logdet = tail.logdet;

    const BoundPair e = expectation_bounds(model, k, p, q);
    const BoundPair c = concentration_bounds(model, k, p, q, delta);
    r.trace_expectation = e.trace;
    r.logdet_expectation = e.logdet;
    r.trace_concentration = c.trace;
    r.logdet_concentration = c.logdet;

    const bool substitute = q * (k + p) <= model.n();
    const BaselineBounds b = baseline_bounds(model, k, p, q, delta, substitute);
    r.trace_expectation_baseline = b.expectation.trace;
    r.logdet_expectation_baseline = b.expectation.logdet;
    r.trace_concentration_baseline = b.concentration.trace;
    r.logdet_concentration_baseline = b.concentration.logdet;

    if (split) {
        const StructuralBounds s = structural_bounds(model, *split, q);
        r.structural_trace_loose = s.trace_loose;
        r.structural_trace_tight = s.trace_tight;
        r.structural_logdet = s.logdet;
        r.eta = s.eta;
    }
    return r;
}

} // namespace bktrace
