#include "bktrace/experiments.hpp"

#include "bktrace/estimators.hpp"
#include "bktrace/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace bktrace {

const char* to_string(Family f)
{
    switch (f) {
    case Family::small: return "small";
    case Family::medium: return "medium";
    case Family::table1: return "table1";
    case Family::dense_file: return "dense";
    }
    return "?";
}

void ExperimentConfig::validate() const
{
    detail::require(!k_grid.empty(), "ExperimentConfig: k grid is empty");
    detail::require(!q_list.empty(), "ExperimentConfig: q list is empty");
    detail::require(trials >= 1, "ExperimentConfig: trials must be at least 1");
    detail::require(p >= 0, "ExperimentConfig: p must be nonnegative");
    detail::require(run_krylov || run_subspace, "ExperimentConfig: no algorithm selected");
    detail::require(delta > 0.0 && delta <= 1.0, "ExperimentConfig: delta must lie in (0, 1]");
    for (const Index k : k_grid) detail::require(k >= 1, "ExperimentConfig: k must be at least 1");
    for (const int q : q_list) detail::require(q >= 1, "ExperimentConfig: q must be at least 1");
}

bool RunRecord::structural_bounds_hold() const
{
    const auto within = [](double observed, const std::optional<double>& bound) {
        return !bound || observed <= *bound + 1e-9 * std::abs(*bound);
    };
    const double trace_gap = trace_exact - trace_est;
    const double logdet_gap = logdet_exact - logdet_est;
    return within(trace_gap, trace_loose) && within(trace_gap, trace_tight) && within(logdet_gap, logdet_structural);
}

Table1 run_table1(double delta)
{
    constexpr Index n = 3000;
    constexpr Index k = 30;
    constexpr Index p = 10;
    constexpr Index l = k + p;
    const GapData gap = make_gap(20.0, 1.0);

    Table1 t;
    for (std::size_t j = 0; j < t.q.size(); ++j) {
        const int q = t.q[j];
        const Index lq = q * l;
        const Index pq = lq - k;
        t.values[0][j] = krylov_gap_factor(gap, q, constant_Cge(n, k, p, l));
        t.values[1][j] = subspace_gap_factor(gap, q, constant_Cge(n, k, pq, lq));
        t.values[2][j] = krylov_gap_factor(gap, q, constant_Cg(n, k, p, l, delta));
        t.values[3][j] = subspace_gap_factor(gap, q, constant_Cg(n, k, pq, lq, delta));
    }
    return t;
}

std::string format_table1(const Table1& table)
{
    std::ostringstream os;
    char buf[64];
    os << "term";
    for (const int q : table.q) os << ",q=" << q;
    os << '\n';
    for (std::size_t i = 0; i < table.values.size(); ++i) {
        os << Table1::row_names[i];
        for (const double v : table.values[i]) {
            std::snprintf(buf, sizeof buf, "%.6e", v);
            os << ',' << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<Index> default_k_grid(Family family)
{
    const Index top = family == Family::medium ? 100 : 120;
    std::vector<Index> grid;
    for (Index k = 10; k <= top; k += 10) grid.push_back(k);
    return grid;
}

namespace {

struct Task {
    Index k;
    Index trial;
};

/// Runs `work(i)` for i in [0, count) on a small pool; rethrows the first error.
template <typename Work>
void parallel_for(std::size_t count, unsigned threads, Work&& work)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

template <typename F>
auto optional_bound(F&& f) -> std::optional<decltype(f())>
{
    try {
        return f();
    } catch (const ParameterError&) {
        return std::nullopt;
    } catch (const RankError&) {
        return std::nullopt;
    }
}

} // namespace

std::vector<RunRecord> run_sweep(const HermitianOperator<double>& op, const SpectralModel<double>& model,
                                 const ExactRefs& refs, const ExperimentConfig& config, const RunRecord& prototype)
{
    config.validate();
    const Index n = op.rows();
    for (const Index k : config.k_grid)
        if (k + config.p > n) throw ParameterError("run_sweep: k + p exceeds the operator order");

    std::vector<Task> tasks;
    for (const Index k : config.k_grid)
        for (Index trial = 0; trial < config.trials; ++trial) tasks.push_back({k, trial});

    std::vector<std::vector<RunRecord>> slots(tasks.size());
    parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
        const Task task = tasks[i];
        const Index k = task.k;
        const Index l = k + config.p;
        const std::uint64_t seed = trial_seed(config.base_seed, static_cast<std::uint64_t>(task.trial));
        const MatrixXd omega = gaussian_matrix<double>(n, l, seed);

        std::optional<SpectralSplit<double>> split;
        if (config.emit_bounds && model.has_basis() && k < n)
            split = optional_bound([&] { return spectral_split(model, omega, k); });

        auto& out = slots[i];
        for (const int q : config.q_list) {
            SketchConfig sc;
            sc.k = k;
            sc.p = config.p;
            sc.q = q;
            sc.seed = seed;
            sc.options.stabilization = config.stabilization;

            std::optional<StructuralBounds> structural;
            std::optional<BoundPair> expectation, concentration;
            std::optional<BaselineBounds> baseline;
            std::optional<TailTerms> tail;
            if (config.emit_bounds && k < n) {
                tail = tail_terms(model, k);
                if (split) structural = optional_bound([&] { return structural_bounds(model, *split, q); });
                expectation = optional_bound([&] { return expectation_bounds(model, k, config.p, q); });
                concentration = optional_bound([&] { return concentration_bounds(model, k, config.p, q, config.delta); });
                baseline = optional_bound([&] { return baseline_bounds(model, k, config.p, q, config.delta, false); });
            }

            const auto emit = [&](Algorithm algorithm, const CompressionResult<double>& result) {
                const EstimateRecord est = estimate_from_compression(result, sc, algorithm);
                const RelativeErrors rel = relative_errors(refs.trace, refs.logdet, est);
                RunRecord r = prototype;
                r.n = n;
                r.k = k;
                r.l = l;
                r.p = config.p;
                r.q = q;
                r.trial = task.trial;
                r.seed = seed;
                r.algorithm = algorithm;
                r.m_effective = est.m_effective;
                r.deflated = est.deflated;
                r.trace_exact = refs.trace;
                r.trace_est = est.trace_estimate;
                r.delta_t = rel.trace;
                r.logdet_exact = refs.logdet;
                r.logdet_est = est.logdet_estimate;
                r.delta_l = rel.logdet;
                if (tail) {
                    r.tail_trace = tail->trace;
                    r.tail_logdet = tail->logdet;
                }
                if (algorithm == Algorithm::krylov) {
                    if (structural) {
                        r.trace_loose = structural->trace_loose;
                        r.trace_tight = structural->trace_tight;
                        r.logdet_structural = structural->logdet;
                    }
                    if (expectation) {
                        r.trace_expectation = expectation->trace;
                        r.logdet_expectation = expectation->logdet;
                    }
                    if (concentration) {
                        r.trace_concentration = concentration->trace;
                        r.logdet_concentration = concentration->logdet;
                    }
                } else if (baseline) {
                    r.trace_expectation = baseline->expectation.trace;
                    r.logdet_expectation = baseline->expectation.logdet;
                    r.trace_concentration = baseline->concentration.trace;
                    r.logdet_concentration = baseline->concentration.logdet;
                }
                out.push_back(std::move(r));
            };

            if (config.run_krylov) emit(Algorithm::krylov, block_krylov_basis(op, omega, q, sc.options));
            if (config.run_subspace) emit(Algorithm::subspace, subspace_iteration_basis(op, omega, q, sc.options));
        }
    });

    std::vector<RunRecord> records;
    for (auto& slot : slots)
        for (auto& r : slot) records.push_back(std::move(r));
    std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::make_tuple(a.k, a.q, a.trial, static_cast<int>(a.algorithm))
             < std::make_tuple(b.k, b.q, b.trial, static_cast<int>(b.algorithm));
    });
    return records;
}

std::vector<RunRecord> run_small(const ExperimentConfig& config)
{
    const auto problem = make_diagonal_operator<double>(config.small);
    const ExactRefs refs{exact_trace(problem.model), exact_logdet_shifted(problem.model)};
    RunRecord prototype;
    prototype.family = to_string(Family::small);
    prototype.tau = config.small.tau;
    return run_sweep(problem.op, problem.model, refs, config, prototype);
}

std::vector<RunRecord> run_medium(const ExperimentConfig& config)
{
    auto problem = make_sparse_lowrank_operator<double>(config.medium);
    const SpectralModel<double> model =
        config.emit_bounds ? with_eigenvectors(problem.op, problem.model) : problem.model;
    RunRecord prototype;
    prototype.family = to_string(Family::medium);
    prototype.h = config.medium.h;
    prototype.l_coef = config.medium.l_coef;
    return run_sweep(problem.op, model, problem.refs, config, prototype);
}

std::vector<RunRecord> run_dense_file(const std::string& path, const ExperimentConfig& config)
{
    MatrixXd A = read_dense_matrix(path, 2000);
    const auto problem = make_dense_operator<double>(std::move(A));
    const ExactRefs refs{exact_trace(problem.model), exact_logdet_shifted(problem.model)};
    RunRecord prototype;
    prototype.family = to_string(Family::dense_file);
    return run_sweep(problem.op, problem.model, refs, config, prototype);
}

namespace {

std::string number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string number(const std::optional<double>& v)
{
    return v ? number(*v) : std::string();
}

} // namespace

std::vector<std::string> csv_header(bool emit_bounds)
{
    std::vector<std::string> h{"family",    "n",        "k",           "l",         "p",          "q",
                               "tau",       "h",        "lcoef",       "trial",     "seed",       "algorithm",
                               "m_effective", "deflated", "trace_exact", "trace_est", "delta_t",   "logdet_exact",
                               "logdet_est", "delta_l"};
    if (emit_bounds) {
        for (const char* name : {"trace_loose", "trace_tight", "logdet_structural", "trace_expectation",
                                 "trace_concentration", "logdet_expectation", "logdet_concentration", "tail_trace",
                                 "tail_logdet"})
            h.emplace_back(name);
    }
    return h;
}

void write_csv(std::ostream& os, const std::vector<RunRecord>& records, bool emit_bounds, const std::string& comment)
{
    if (!comment.empty()) os << "# " << comment << '\n';
    const auto header = csv_header(emit_bounds);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const RunRecord& r : records) {
        os << r.family << ',' << r.n << ',' << r.k << ',' << r.l << ',' << r.p << ',' << r.q << ','
           << number(r.tau) << ',' << number(r.h) << ',' << number(r.l_coef) << ',' << r.trial << ',' << r.seed
           << ',' << to_string(r.algorithm) << ',' << r.m_effective << ',' << (r.deflated ? 1 : 0) << ','
           << number(r.trace_exact) << ',' << number(r.trace_est) << ',' << number(r.delta_t) << ','
           << number(r.logdet_exact) << ',' << number(r.logdet_est) << ',' << number(r.delta_l);
        if (emit_bounds) {
            for (const auto* v : {&r.trace_loose, &r.trace_tight, &r.logdet_structural, &r.trace_expectation,
                                  &r.trace_concentration, &r.logdet_expectation, &r.logdet_concentration,
                                  &r.tail_trace, &r.tail_logdet})
                os << ',' << number(*v);
        }
        os << '\n';
    }
}

void write_gnuplot(std::ostream& os, const std::vector<RunRecord>& records)
{
    struct Sum {
        double t = 0.0, l = 0.0;
        int count = 0;
    };
    std::map<std::pair<int, int>, std::map<Index, Sum>> groups;
    for (const RunRecord& r : records) {
        Sum& s = groups[{static_cast<int>(r.algorithm), r.q}][r.l];
        s.t += r.delta_t;
        s.l += r.delta_l;
        ++s.count;
    }
    bool first = true;
    for (const auto& [key, rows] : groups) {
        if (!first) os << "\n\n";
        first = false;
        os << "# algorithm=" << to_string(static_cast<Algorithm>(key.first)) << " q=" << key.second << '\n';
        os << "# l mean_delta_t mean_delta_l\n";
        for (const auto& [l, s] : rows) os << l << ' ' << number(s.t / s.count) << ' ' << number(s.l / s.count) << '\n';
    }
}

std::vector<HutchinsonRecord> run_hutchinson(const GeometricDecaySpec& spec, const std::vector<Index>& samples,
                                             Index trials, std::uint64_t base_seed)
{
    detail::require(!samples.empty(), "run_hutchinson: sample list is empty");
    detail::require(trials >= 1, "run_hutchinson: trials must be at least 1");
    const auto problem = make_diagonal_operator<double>(spec);
    const double exact = exact_trace(problem.model);
    std::vector<HutchinsonRecord> out;
    for (const Index N : samples) {
        for (Index trial = 0; trial < trials; ++trial) {
            HutchinsonRecord r;
            r.n = spec.n;
            r.tau = spec.tau;
            r.samples = N;
            r.trial = trial;
            r.seed = trial_seed(base_seed, static_cast<std::uint64_t>(trial));
            r.trace_exact = exact;
            r.trace_est = hutchinson_trace(problem.op, N, r.seed);
            r.delta_t = (exact - r.trace_est) / exact;
            out.push_back(r);
        }
    }
    return out;
}

void write_hutchinson_csv(std::ostream& os, const std::vector<HutchinsonRecord>& records, const std::string& comment)
{
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "family,n,tau,samples,trial,seed,algorithm,trace_exact,trace_est,delta_t\n";
    for (const auto& r : records)
        os << "small," << r.n << ',' << number(r.tau) << ',' << r.samples << ',' << r.trial << ',' << r.seed
           << ",hutchinson," << number(r.trace_exact) << ',' << number(r.trace_est) << ',' << number(r.delta_t)
           << '\n';
}

} // namespace bktrace
