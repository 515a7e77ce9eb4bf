#pragma once

#include "bktrace/bounds.hpp"
#include "bktrace/linop.hpp"
#include "bktrace/sketch.hpp"
#include "bktrace/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bktrace {

enum class Family { small, medium, table1, dense_file };

const char* to_string(Family f);

struct ExperimentConfig {
    Family family = Family::small;
    GeometricDecaySpec small{};
    SparseLowRankSpec medium{};
    std::string dense_path;

    std::vector<Index> k_grid;
    Index p = 20;
    std::vector<int> q_list{3};
    Index trials = 20;
    std::uint64_t base_seed = 0;
    double delta = 0.01;
    bool emit_bounds = false;
    bool run_krylov = true;
    bool run_subspace = true;
    Stabilization stabilization = Stabilization::stabilized;
    /// Worker threads; 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;

    void validate() const;
};

/// One CSV row.
struct RunRecord {
    std::string family;
    Index n = 0;
    Index k = 0;
    Index l = 0;
    Index p = 0;
    int q = 0;
    std::optional<double> tau;
    std::optional<double> h;
    std::optional<double> l_coef;
    Index trial = 0;
    std::uint64_t seed = 0;
    Algorithm algorithm = Algorithm::krylov;
    Index m_effective = 0;
    bool deflated = false;
    double trace_exact = 0.0;
    double trace_est = 0.0;
    double delta_t = 0.0;
    double logdet_exact = 0.0;
    double logdet_est = 0.0;
    double delta_l = 0.0;

    // Structural bounds: block Krylov rows only.
    std::optional<double> trace_loose;
    std::optional<double> trace_tight;
    std::optional<double> logdet_structural;
    // Expectation and concentration bounds for the row's own algorithm; subspace rows carry the
    // subspace-iteration bounds at their own p.
    std::optional<double> trace_expectation;
    std::optional<double> trace_concentration;
    std::optional<double> logdet_expectation;
    std::optional<double> logdet_concentration;
    std::optional<double> tail_trace;
    std::optional<double> tail_logdet;

    /// Observed gaps are within every structural bound present (relative slack 1e-9).
    bool structural_bounds_hold() const;
};

/// Gap factors compared in the bound tables: n = 3000, k = 30, p = 10,
/// lambda_k / lambda_{k+1} = 20, q = 3, 4, 5.
struct Table1 {
    std::array<int, 3> q{3, 4, 5};
    /// Rows: Krylov expectation, substituted subspace expectation,
    /// Krylov concentration, substituted subspace concentration.
    std::array<std::array<double, 3>, 4> values{};
    static constexpr std::array<const char*, 4> row_names{
        "krylov_expectation", "subspace_expectation_substituted", "krylov_concentration",
        "subspace_concentration_substituted"};
};

Table1 run_table1(double delta = 0.01);
std::string format_table1(const Table1& table);

std::vector<RunRecord> run_small(const ExperimentConfig& config);
std::vector<RunRecord> run_medium(const ExperimentConfig& config);
std::vector<RunRecord> run_dense_file(const std::string& path, const ExperimentConfig& config);

/// Sweep driver shared by the families. `model` needs a basis only when
/// structural bounds are requested.
std::vector<RunRecord> run_sweep(const HermitianOperator<double>& op, const SpectralModel<double>& model,
                                 const ExactRefs& refs, const ExperimentConfig& config, const RunRecord& prototype);

std::vector<std::string> csv_header(bool emit_bounds);
/// Writes the header row and records; numbers carry 17 significant digits.
/// A nonempty `comment` is written first as a '#' line.
void write_csv(std::ostream& os, const std::vector<RunRecord>& records, bool emit_bounds,
               const std::string& comment = {});
/// Per-(algorithm, q) blocks of "l mean_delta_t mean_delta_l", separated by
/// two blank lines for gnuplot's `index`.
void write_gnuplot(std::ostream& os, const std::vector<RunRecord>& records);

struct HutchinsonRecord {
    Index n = 0;
    double tau = 0.0;
    Index samples = 0;
    Index trial = 0;
    std::uint64_t seed = 0;
    double trace_exact = 0.0;
    double trace_est = 0.0;
    double delta_t = 0.0;
};

std::vector<HutchinsonRecord> run_hutchinson(const GeometricDecaySpec& spec, const std::vector<Index>& samples,
                                             Index trials, std::uint64_t base_seed);
void write_hutchinson_csv(std::ostream& os, const std::vector<HutchinsonRecord>& records,
                          const std::string& comment = {});

/// Default k grids: small {10, 20, ..., 120}; medium {10, 20, ..., 100}.
std::vector<Index> default_k_grid(Family family);

} // namespace bktrace
