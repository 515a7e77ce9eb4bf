// bktrace command line: bound tables and estimator sweeps written as CSV.

#include "bktrace/experiments.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using bktrace::Index;

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        try {
            if (colon == std::string::npos) {
                out.push_back(static_cast<T>(std::stoll(item)));
            } else {
                const long long lo = std::stoll(item.substr(0, colon));
                const long long hi = std::stoll(item.substr(colon + 1));
                for (long long v = lo; v <= hi; ++v) out.push_back(static_cast<T>(v));
            }
        } catch (const std::exception&) {
            throw bktrace::InputError(std::string("cannot parse ") + what + " list '" + text + "'");
        }
    }
    if (out.empty()) throw bktrace::InputError(std::string("empty ") + what + " list");
    return out;
}

/// Reads key=value lines ('#' starts a comment) into "--key value" tokens.
std::vector<std::string> config_tokens(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw bktrace::InputError("cannot open config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw bktrace::InputError("config line without '=': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value == "true" || value == "false") {
            if (value == "true") tokens.push_back("--" + key);
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(value);
        }
    }
    return tokens;
}

std::string timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

struct SweepOptions {
    std::string k_list;
    Index kmin = 0, kmax = 0, kstep = 10;
    Index p = 20;
    std::string q = "3";
    Index trials = 20;
    std::uint64_t seed = 0;
    double delta = 0.01;
    bool bounds = false;
    bool gnuplot = false;
    bool idealized = false;
    std::string algorithms = "krylov,subspace";
    unsigned threads = 0;
    std::string out;
};

void add_sweep_options(CLI::App* app, SweepOptions& o)
{
    app->add_option("--k", o.k_list, "Target ranks, e.g. 10,20,40 or 10:12");
    app->add_option("--kmin", o.kmin, "Smallest target rank of the grid");
    app->add_option("--kmax", o.kmax, "Largest target rank of the grid");
    app->add_option("--kstep", o.kstep, "Grid step")->check(CLI::PositiveNumber);
    app->add_option("--p", o.p, "Oversampling");
    app->add_option("--q", o.q, "Depths, e.g. 3 or 1,2,3 or 1:5");
    app->add_option("--trials", o.trials, "Independent probes per grid point")->check(CLI::PositiveNumber);
    app->add_option("--seed", o.seed, "Base seed; trial t uses seed + t");
    app->add_option("--delta", o.delta, "Failure probability for concentration bounds");
    app->add_flag("--bounds", o.bounds, "Emit bound columns");
    app->add_flag("--gnuplot", o.gnuplot, "Also write mean errors as gnuplot data blocks");
    app->add_flag("--idealized", o.idealized, "Use the unstabilized basis constructions");
    app->add_option("--algorithms", o.algorithms, "krylov, subspace or both");
    app->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
    app->add_option("--out", o.out, "CSV output file (default stdout)");
}

bktrace::ExperimentConfig sweep_config(bktrace::Family family, const SweepOptions& o)
{
    bktrace::ExperimentConfig c;
    c.family = family;
    if (!o.k_list.empty()) {
        c.k_grid = parse_list<Index>(o.k_list, "k");
    } else if (o.kmin > 0 || o.kmax > 0) {
        const Index lo = o.kmin > 0 ? o.kmin : o.kstep;
        const Index hi = o.kmax > 0 ? o.kmax : lo;
        for (Index k = lo; k <= hi; k += o.kstep) c.k_grid.push_back(k);
    } else {
        c.k_grid = bktrace::default_k_grid(family);
    }
    c.p = o.p;
    c.q_list = parse_list<int>(o.q, "q");
    c.trials = o.trials;
    c.base_seed = o.seed;
    c.delta = o.delta;
    c.emit_bounds = o.bounds;
    c.stabilization = o.idealized ? bktrace::Stabilization::idealized : bktrace::Stabilization::stabilized;
    const auto algs = o.algorithms;
    c.run_krylov = algs.find("krylov") != std::string::npos;
    c.run_subspace = algs.find("subspace") != std::string::npos;
    c.threads = o.threads;
    return c;
}

void emit(const std::vector<bktrace::RunRecord>& records, const SweepOptions& o, const std::string& command)
{
    const std::string comment = "bktrace " + command + " generated " + timestamp();
    if (o.out.empty()) {
        bktrace::write_csv(std::cout, records, o.bounds, comment);
    } else {
        std::ofstream file(o.out);
        if (!file) throw bktrace::InputError("cannot write " + o.out);
        bktrace::write_csv(file, records, o.bounds, comment);
    }
    if (o.gnuplot) {
        if (o.out.empty()) {
            std::cout << "\n\n";
            bktrace::write_gnuplot(std::cout, records);
        } else {
            std::ofstream file(o.out + ".dat");
            bktrace::write_gnuplot(file, records);
        }
    }

    std::size_t deflated = 0, violations = 0;
    for (const auto& r : records) {
        deflated += r.deflated;
        violations += !r.structural_bounds_hold();
    }
    std::cerr << records.size() << " rows, " << deflated << " deflated";
    if (o.bounds) std::cerr << ", " << violations << " structural bound violations";
    std::cerr << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Randomized block Krylov trace and log-determinant estimation"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key=value file; command-line flags override it");

    double table_delta = 0.01;
    auto* table = app.add_subcommand("table1", "Gap factors of the bound comparison table");
    table->add_option("--delta", table_delta, "Failure probability");

    SweepOptions small_opts;
    bktrace::GeometricDecaySpec small_spec;
    auto* small = app.add_subcommand("small", "Diagonal family lambda_{j+1} = tau^j lambda_1");
    small->add_option("--tau", small_spec.tau, "Decay ratio in (0, 1)");
    small->add_option("--lambda1", small_spec.lambda1, "Leading eigenvalue");
    small->add_option("--n", small_spec.n, "Order");
    add_sweep_options(small, small_opts);

    SweepOptions medium_opts;
    bktrace::SparseLowRankSpec medium_spec;
    std::uint64_t matrix_seed = 0;
    auto* medium = app.add_subcommand("medium", "Sparse low-rank family sum_j c_j x_j x_j^T");
    // --h is the coefficient, so help is long-form only here.
    medium->set_help_flag("--help", "Print this help message and exit");
    medium->add_option("--h", medium_spec.h, "Coefficient of the first 40 terms");
    medium->add_option("--lcoef", medium_spec.l_coef, "Coefficient of the remaining terms");
    medium->add_option("--n", medium_spec.n, "Order");
    medium->add_option("--density", medium_spec.density, "Density of each sparse vector");
    auto* matrix_seed_opt = medium->add_option("--matrix-seed", matrix_seed, "Seed of the sparse vectors (default: --seed)");
    add_sweep_options(medium, medium_opts);

    SweepOptions dense_opts;
    std::string dense_file;
    auto* dense = app.add_subcommand("dense", "Dense symmetric PSD matrix from a text file");
    dense->add_option("--file", dense_file, "First the order n, then n*n row-major entries")->required();
    add_sweep_options(dense, dense_opts);

    bktrace::GeometricDecaySpec hutch_spec;
    std::string hutch_samples = "100,1000";
    Index hutch_trials = 20;
    std::uint64_t hutch_seed = 0;
    std::string hutch_out;
    auto* hutch = app.add_subcommand("hutch", "Hutchinson baseline on the diagonal family");
    hutch->add_option("--tau", hutch_spec.tau, "Decay ratio in (0, 1)");
    hutch->add_option("--lambda1", hutch_spec.lambda1, "Leading eigenvalue");
    hutch->add_option("--n", hutch_spec.n, "Order");
    hutch->add_option("--samples", hutch_samples, "Sample counts, e.g. 10,100,1000");
    hutch->add_option("--trials", hutch_trials, "Independent runs per sample count")->check(CLI::PositiveNumber);
    hutch->add_option("--seed", hutch_seed, "Base seed");
    hutch->add_option("--out", hutch_out, "CSV output file (default stdout)");

    // Splice "--config FILE" in as flags placed before the user's own flags,
    // right after the subcommand name.
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            std::size_t width = 0;
            if (args[i] == "--config" && i + 1 < args.size()) {
                path = args[i + 1];
                width = 2;
            } else if (args[i].rfind("--config=", 0) == 0) {
                path = args[i].substr(9);
                width = 1;
            }
            if (width == 0) continue;
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i + width));
            const std::set<std::string> names{"table1", "small", "medium", "dense", "hutch"};
            std::size_t at = 0;
            while (at < args.size() && !names.count(args[at])) ++at;
            const auto tokens = config_tokens(path);
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(std::min(at + 1, args.size())), tokens.begin(),
                        tokens.end());
            break;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*table) {
            std::cout << bktrace::format_table1(bktrace::run_table1(table_delta));
        } else if (*small) {
            auto config = sweep_config(bktrace::Family::small, small_opts);
            config.small = small_spec;
            emit(bktrace::run_small(config), small_opts, "small");
        } else if (*medium) {
            auto config = sweep_config(bktrace::Family::medium, medium_opts);
            config.medium = medium_spec;
            config.medium.seed = matrix_seed_opt->count() ? matrix_seed : medium_opts.seed;
            emit(bktrace::run_medium(config), medium_opts, "medium");
        } else if (*dense) {
            auto config = sweep_config(bktrace::Family::dense_file, dense_opts);
            if (dense_opts.k_list.empty() && dense_opts.kmin == 0 && dense_opts.kmax == 0)
                throw bktrace::InputError("dense: give --k or --kmin/--kmax");
            emit(bktrace::run_dense_file(dense_file, config), dense_opts, "dense");
        } else if (*hutch) {
            const auto samples = parse_list<Index>(hutch_samples, "samples");
            const auto records = bktrace::run_hutchinson(hutch_spec, samples, hutch_trials, hutch_seed);
            const std::string comment = "bktrace hutch generated " + timestamp();
            if (hutch_out.empty()) {
                bktrace::write_hutchinson_csv(std::cout, records, comment);
            } else {
                std::ofstream file(hutch_out);
                if (!file) throw bktrace::InputError("cannot write " + hutch_out);
                bktrace::write_hutchinson_csv(file, records, comment);
            }
        }
    } catch (const bktrace::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
