#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef BKTRACE_CLI_PATH
#error "BKTRACE_CLI_PATH must name the CLI binary"
#endif

namespace {

int run(const std::string& args)
{
    const std::string command = std::string(BKTRACE_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string without_first_line(const std::string& text) { return text.substr(text.find('\n') + 1); }

} // namespace

TEST_CASE("table1 subcommand")
{
    REQUIRE(run("table1 > cli_table1.txt") == 0);
    const std::string text = slurp("cli_table1.txt");
    CHECK(text.find("4.254094e-05") != std::string::npos);
    CHECK(text.find("5.428350e-10") != std::string::npos);
    std::remove("cli_table1.txt");
}

TEST_CASE("small subcommand writes reproducible CSV")
{
    const std::string args = "small --n 200 --tau 0.9 --k 10,20 --p 5 --q 1:2 --trials 2 --seed 3 --bounds";
    REQUIRE(run(args + " --out cli_a.csv") == 0);
    REQUIRE(run(args + " --out cli_b.csv") == 0);
    const std::string a = slurp("cli_a.csv");
    CHECK(a.rfind("# bktrace small generated ", 0) == 0);
    CHECK(without_first_line(a) == without_first_line(slurp("cli_b.csv")));
    // header + 2 k * 2 q * 2 trials * 2 algorithms
    CHECK(std::count(a.begin(), a.end(), '\n') == 2 + 16);
    std::remove("cli_a.csv");
    std::remove("cli_b.csv");
}

TEST_CASE("config file values are overridden by flags")
{
    {
        std::ofstream cfg("cli_config.txt");
        cfg << "# sweep\nn = 150\ntau=0.8\nk=10\np=5\nq=2\ntrials=1\nbounds=true\nout=cli_cfg.csv\n";
    }
    REQUIRE(run("small --config cli_config.txt --trials 2") == 0);
    const std::string csv = slurp("cli_cfg.csv");
    CHECK(csv.find("trace_loose") != std::string::npos);
    CHECK(csv.find("small,150,10,15,5,2,0.80000000000000004") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 4);
    std::remove("cli_config.txt");
    std::remove("cli_cfg.csv");
}

TEST_CASE("dense, medium and hutch subcommands")
{
    {
        std::ofstream m("cli_dense.txt");
        m << "3\n2 1 0\n1 2 0\n0 0 1\n";
    }
    CHECK(run("dense --file cli_dense.txt --k 1 --p 1 --q 1 --trials 1 --out cli_dense.csv") == 0);
    CHECK(slurp("cli_dense.csv").find("dense,3,1,2,1,1") != std::string::npos);
    CHECK(run("dense --file cli_dense.txt --trials 1") != 0);
    CHECK(run("dense --file missing.txt --k 1") != 0);

    CHECK(run("medium --n 400 --h 10 --k 10 --p 5 --q 2 --trials 1 --seed 1 --out cli_medium.csv") == 0);
    CHECK(slurp("cli_medium.csv").find("medium,400,10,15,5,2,,10,1,") != std::string::npos);

    CHECK(run("hutch --n 100 --samples 10,20 --trials 2 --out cli_hutch.csv") == 0);
    const std::string h = slurp("cli_hutch.csv");
    CHECK(std::count(h.begin(), h.end(), '\n') == 2 + 4);

    for (const char* f : {"cli_dense.txt", "cli_dense.csv", "cli_medium.csv", "cli_hutch.csv"}) std::remove(f);
}

TEST_CASE("gnuplot flag writes a companion data file")
{
    REQUIRE(run("small --n 100 --k 5 --p 2 --q 1,2 --trials 1 --gnuplot --out cli_g.csv") == 0);
    CHECK(slurp("cli_g.csv.dat").find("# algorithm=krylov q=2") != std::string::npos);
    std::remove("cli_g.csv");
    std::remove("cli_g.csv.dat");
}

TEST_CASE("invalid arguments fail")
{
    CHECK(run("small --tau 1.5 --n 100 --k 5 --trials 1") != 0);
    CHECK(run("") != 0);
    CHECK(run("small --n 100 --k 5 --q x") != 0);
}
