// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "bktrace/experiments.hpp"
#include "test_support.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

using namespace bktrace;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

/// Rounds to `digits` significant figures.
double round_sig(double v, int digits)
{
    if (v == 0.0) return 0.0;
    const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
    return std::round(v * scale) / scale;
}

std::vector<Index> grid(Index lo, Index hi, Index step)
{
    std::vector<Index> out;
    for (Index k = lo; k <= hi; k += step) out.push_back(k);
    return out;
}

ExperimentConfig small_family(double tau, std::vector<Index> ks, std::vector<int> qs, Index trials)
{
    ExperimentConfig c;
    c.small.tau = tau;
    c.k_grid = std::move(ks);
    c.p = 20;
    c.q_list = std::move(qs);
    c.trials = trials;
    c.base_seed = 2024;
    return c;
}

/// Count of (k, q, trial) points where the Krylov estimates fall below the
/// subspace-iteration estimates by more than 1e-9.
std::size_t dominance_failures(const std::vector<RunRecord>& rows, std::size_t& points)
{
    std::map<std::tuple<Index, int, Index>, std::array<const RunRecord*, 2>> pairs;
    for (const auto& r : rows) pairs[{r.k, r.q, r.trial}][r.algorithm == Algorithm::krylov ? 0 : 1] = &r;
    std::size_t failures = 0;
    points = 0;
    for (const auto& [key, pr] : pairs) {
        if (!pr[0] || !pr[1]) {
            ++failures;
            continue;
        }
        ++points;
        if (pr[0]->trace_est < pr[1]->trace_est - 1e-9 || pr[0]->logdet_est < pr[1]->logdet_est - 1e-9) ++failures;
    }
    return failures;
}

Outcome table1_regression()
{
    const std::array<std::array<double, 3>, 4> published{{
        {4.2541e-05, 6.9946e-09, 1.1500e-12},
        {1.4266e-04, 2.4408e-07, 4.7055e-10},
        {1.4210e-04, 2.3363e-08, 3.8414e-12},
        {1.7747e-04, 2.8924e-07, 5.4284e-10},
    }};
    const auto start = Clock::now();
    const Table1 t = run_table1();
    const double elapsed = seconds_since(start);
    int matched = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double v = t.values[i][j];
            matched += round_sig(v, 4) == round_sig(published[i][j], 4);
            worst = std::max(worst, testing::rel(v, published[i][j]));
        }
    return {matched == 12 && elapsed < 1.0,
            format("%d/12 values match, max rel err %.2e, %.3f s", matched, worst, elapsed)};
}

Outcome exactness_oracle()
{
    const auto start = Clock::now();
    double worst = 0.0;
    int cases = 0;
    std::mt19937_64 gen(99);
    for (int c = 0; c < 20; ++c) {
        const Index n = std::uniform_int_distribution<Index>(5, 30)(gen);
        const Index k = std::uniform_int_distribution<Index>(1, n / 2)(gen);
        const Index p = std::uniform_int_distribution<Index>(0, n - k)(gen);
        const Index l = k + p;
        const Index q = (n + l - 1) / l;
        // Every fourth matrix is rank deficient so the Krylov basis deflates.
        const Index cols = c % 4 == 3 ? std::max<Index>(1, n / 3) : n;
        const MatrixXd A = testing::random_psd(n, 1000 + static_cast<std::uint64_t>(c), cols);
        const double tr = testing::dense_trace(A);
        const double ld = testing::dense_logdet_shifted(A);

        const auto problem = make_dense_operator<double>(A);
        SketchConfig sc;
        sc.k = k;
        sc.p = p;
        sc.q = q;
        sc.seed = static_cast<std::uint64_t>(c);
        const EstimateRecord est = estimate_from_compression(sketch(problem.op, sc, Algorithm::krylov), sc);
        const RelativeErrors e = relative_errors(tr, ld, est);
        worst = std::max({worst, std::abs(e.trace), std::abs(e.logdet)});
        ++cases;
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-9 && elapsed < 5.0, format("%d matrices, max |delta| %.2e, %.3f s", cases, worst, elapsed)};
}

Outcome dominance()
{
    const auto start = Clock::now();
    const auto rows = run_small(small_family(0.92, grid(10, 120, 10), {3}, 20));
    const double elapsed = seconds_since(start);
    std::size_t points = 0;
    const std::size_t failures = dominance_failures(rows, points);
    return {failures == 0 && points == 240 && elapsed < 60.0,
            format("%zu/%zu trials dominated, %.1f s", points - failures, points, elapsed)};
}

Outcome monotonicity()
{
    auto c = small_family(0.92, grid(10, 120, 10), {1, 2, 3, 4, 5}, 20);
    c.run_subspace = false;
    const auto rows = run_small(c);
    std::map<std::pair<Index, Index>, std::map<int, double>> traces;
    for (const auto& r : rows) traces[{r.k, r.trial}][r.q] = r.trace_est;
    std::size_t good = 0;
    for (const auto& [key, by_q] : traces) {
        bool ok = by_q.size() == 5;
        double prev = -1.0;
        for (const auto& [q, t] : by_q) {
            ok = ok && t >= prev - 1e-9;
            prev = t;
        }
        good += ok;
    }
    return {good == traces.size() && good == 240, format("%zu/%zu trials nondecreasing over q = 1..5", good, traces.size())};
}

Outcome structural_validity()
{
    auto c = small_family(0.9, {40}, {3}, 100);
    c.emit_bounds = true;
    c.run_subspace = false;
    const auto rows = run_small(c);
    std::size_t loose_ok = 0, tight_ok = 0, tight_checked = 0, logdet_ok = 0, missing = 0;
    for (const auto& r : rows) {
        const double gap_t = r.trace_exact - r.trace_est;
        const double gap_l = r.logdet_exact - r.logdet_est;
        if (!r.trace_loose || !r.logdet_structural) {
            ++missing;
            continue;
        }
        loose_ok += gap_t <= *r.trace_loose * (1 + 1e-9);
        logdet_ok += gap_l <= *r.logdet_structural * (1 + 1e-9);
        if (r.trace_tight) {
            ++tight_checked;
            tight_ok += gap_t <= *r.trace_tight * (1 + 1e-9);
        }
    }
    const std::size_t n = rows.size();
    return {n == 100 && missing == 0 && loose_ok == n && logdet_ok == n && tight_ok == tight_checked,
            format("loose %zu/%zu, tight %zu/%zu (condition held), logdet %zu/%zu", loose_ok, n, tight_ok,
                   tight_checked, logdet_ok, n)};
}

Outcome concentration_calibration()
{
    const auto start = Clock::now();
    auto c = small_family(0.9, {40}, {3}, 200);
    c.delta = 0.1;
    c.emit_bounds = true;
    c.run_subspace = false;
    const auto rows = run_small(c);
    const double elapsed = seconds_since(start);
    std::size_t violations = 0, counted = 0;
    for (const auto& r : rows) {
        if (!r.trace_concentration) continue;
        ++counted;
        violations += r.trace_exact - r.trace_est > *r.trace_concentration;
    }
    const double rate = counted ? static_cast<double>(violations) / static_cast<double>(counted) : 1.0;
    const double limit = 0.1 + 3.0 * std::sqrt(0.1 * 0.9 / 200.0);
    return {counted == 200 && rate <= limit && elapsed < 120.0,
            format("violation rate %.3f (limit %.3f), %.1f s", rate, limit, elapsed)};
}

Outcome gap_trend()
{
    std::vector<double> means;
    std::string detail = "mean delta_t:";
    for (const double tau : {0.98, 0.94, 0.90, 0.86}) {
        auto c = small_family(tau, {40}, {3}, 20);
        c.run_subspace = false;
        const auto rows = run_small(c);
        double sum = 0.0;
        for (const auto& r : rows) sum += r.delta_t;
        means.push_back(sum / static_cast<double>(rows.size()));
        detail += format(" %.3e@%.2f", means.back(), tau);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < means.size(); ++i) decreasing = decreasing && means[i] < means[i - 1];
    return {decreasing, detail};
}

Outcome medium_pipeline()
{
    // Reduced order against a dense assembly of the same operator.
    ExperimentConfig c;
    c.family = Family::medium;
    c.medium.n = 500;
    c.medium.seed = 8;
    c.k_grid = {10, 40};
    c.p = 20;
    c.q_list = {3};
    c.trials = 3;
    const auto factored = run_medium(c);
    const auto problem = make_sparse_lowrank_operator<double>(c.medium);
    const MatrixXd A = problem.op.dense();
    const ExactRefs dense_refs{testing::dense_trace(A), testing::dense_logdet_shifted(A)};
    const auto dense = run_sweep(DenseOperator<double>(A), problem.model, dense_refs, c, RunRecord{});
    double worst = 0.0;
    bool same_shape = factored.size() == dense.size();
    for (std::size_t i = 0; same_shape && i < factored.size(); ++i)
        worst = std::max({worst, testing::rel(factored[i].trace_exact, dense[i].trace_exact),
                          testing::rel(factored[i].logdet_exact, dense[i].logdet_exact),
                          testing::rel(factored[i].trace_est, dense[i].trace_est),
                          testing::rel(factored[i].logdet_est, dense[i].logdet_est)});

    // Full order.
    c.medium = SparseLowRankSpec{};
    c.k_grid = {40};
    c.trials = 5;
    const auto start = Clock::now();
    const auto full = run_medium(c);
    const double elapsed = seconds_since(start);
    std::size_t points = 0;
    const std::size_t failures = dominance_failures(full, points);

    return {same_shape && worst <= 1e-9 && failures == 0 && points == 5 && elapsed < 300.0,
            format("n=500 max rel diff %.2e; n=20000 %zu/%zu dominated in %.1f s", worst, points - failures, points,
                   elapsed)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"table1 regression", table1_regression},
        {"exactness oracle", exactness_oracle},
        {"krylov dominance", dominance},
        {"monotonicity in q", monotonicity},
        {"structural bound validity", structural_validity},
        {"concentration calibration", concentration_calibration},
        {"gap trend", gap_trend},
        {"medium pipeline", medium_pipeline},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
