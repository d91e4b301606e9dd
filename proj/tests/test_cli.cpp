#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "commands.hpp"

#include "twoscale/event_data.hpp"
#include "twoscale/io.hpp"
#include "twoscale/simulation.hpp"
#include "twoscale/solver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace twoscale;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("twoscale_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

fs::path write_cohort(const fs::path& dir, const SubjectCohort& c) {
    const fs::path p = dir / "subjects.csv";
    std::ofstream f(p);
    write_subjects(f, c);
    return p;
}

}  // namespace

TEST_CASE("estimate without bootstrap equals the library fit") {
    const auto dir = scratch("estimate");
    Scenario sc;
    const auto cohort = simulate_cohort(150, sc, 31);
    const auto input = write_cohort(dir, cohort);
    const auto out = dir / "out";
    REQUIRE(run({"estimate", "--input", input.string(), "--boot", "0", "--tmax", "5", "--a0", "0", "--amax", "35",
                 "--out", out.string()}) == cli::kOk);

    std::ifstream back(input);
    CohortSchema schema;
    schema.t_max = 5.0;
    schema.a0 = 0.0;
    schema.a_max = 35.0;
    const auto parsed = parse_subjects(back, schema);
    const auto fit = fit_model(parsed, sc.grid(), {});
    std::ostringstream expect;
    write_step_csv(expect, fit.theta, "estimate");
    CHECK(slurp(out / "estimates.csv") == expect.str());
    CHECK(fs::exists(out / "marginal.csv"));
    CHECK(fs::exists(out / "solve_report.txt"));
    CHECK(fs::exists(out / "meta.json"));
    CHECK(slurp(out / "solve_report.txt").find("constraint_residual=0") != std::string::npos);

    // replay reproduces every output byte for byte
    const auto first = slurp(out / "estimates.csv");
    const auto marg = slurp(out / "marginal.csv");
    REQUIRE(run({"replay", (out / "meta.json").string()}) == cli::kOk);
    CHECK(slurp(out / "estimates.csv") == first);
    CHECK(slurp(out / "marginal.csv") == marg);

    // with bootstrap, any thread count gives the same file
    const auto o1 = dir / "b1", o2 = dir / "b2";
    REQUIRE(run({"estimate", "--input", input.string(), "--boot", "20", "--threads", "1", "--out", o1.string(),
                 "--dump-operator"}) == cli::kOk);
    REQUIRE(run({"estimate", "--input", input.string(), "--boot", "20", "--threads", "3", "--out", o2.string()}) ==
            cli::kOk);
    CHECK(slurp(o1 / "estimates.csv") == slurp(o2 / "estimates.csv"));
    const auto bin = fs::file_size(o1 / "operator.bin");
    CHECK(bin == 8 * (8 + 200 * 200));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    CHECK(run({"estimate", "--input", (dir / "missing.csv").string(), "--out", (dir / "o").string()}) ==
          cli::kIoError);

    {
        std::ofstream f(dir / "bad.csv");
        f << "id,entry_age,exit_time,event,x1\n1,1.0,zero,1,1\n";
    }
    CHECK(run({"estimate", "--input", (dir / "bad.csv").string(), "--out", (dir / "o").string()}) ==
          cli::kParseError);
    CHECK(run({"estimate", "--no-such-flag"}) == cli::kParseError);
    CHECK(run({"frobnicate"}) == cli::kParseError);

    // every subject enters at age 0: the two time scales coincide
    {
        std::ofstream f(dir / "same.csv");
        f << "id,entry_age,exit_time,event,x1\n";
        for (int i = 1; i <= 40; ++i) f << i << ",0," << 0.1 * i << ',' << (i % 3 ? 1 : 0) << ",1\n";
    }
    CHECK(run({"estimate", "--input", (dir / "same.csv").string(), "--grid-time", "21", "--grid-age", "21",
               "--tmax", "4", "--a0", "0", "--amax", "4", "--boot", "0", "--out", (dir / "o").string()}) ==
          cli::kIdentificationError);
}

TEST_CASE("predict") {
    const auto dir = scratch("predict");
    Scenario sc;
    const auto input = write_cohort(dir, simulate_cohort(200, sc, 8));
    const auto out = dir / "p";
    REQUIRE(run({"predict", "--input", input.string(), "--tmax", "5", "--a0", "0", "--amax", "35", "--ages", "0",
                 "10", "25.5", "--boot", "30", "--out", out.string()}) == cli::kOk);
    int files = 0;
    for (const auto& e : fs::directory_iterator(out)) files += e.path().extension() == ".csv";
    CHECK(files == 3);

    CHECK(run({"predict", "--input", input.string(), "--tmax", "5", "--a0", "0", "--amax", "35", "--ages", "31",
               "--boot", "0", "--out", (dir / "bad").string()}) == cli::kIoError);
    CHECK_FALSE(fs::exists(dir / "bad" / "survival_31.csv"));

    // from a stored estimate file: S = exp(-(A(t) + B(a + t) - B(a)))
    const auto est = dir / "e";
    REQUIRE(run({"estimate", "--input", input.string(), "--tmax", "5", "--a0", "0", "--amax", "35", "--boot", "0",
                 "--out", est.string()}) == cli::kOk);
    REQUIRE(run({"predict", "--estimates", (est / "estimates.csv").string(), "--ages", "10", "--out",
                 (dir / "q").string()}) == cli::kOk);
    std::ifstream ein(est / "estimates.csv");
    const auto theta = read_step_csv(ein);
    std::ifstream sin(dir / "q" / "survival_10.csv");
    std::string line;
    std::getline(sin, line);
    int rows = 0;
    while (std::getline(sin, line)) {
        std::istringstream ls(line);
        std::string t, s;
        std::getline(ls, t, ',');
        std::getline(ls, s, ',');
        const double tt = std::stod(t);
        const double lam = step_eval(theta.A, tt)[0] + step_eval(theta.B, 10.0 + tt)[0] - step_eval(theta.B, 10.0)[0];
        CHECK(std::stod(s) == doctest::Approx(std::exp(-lam)).epsilon(1e-12));
        ++rows;
    }
    CHECK(rows == 100);
}

TEST_CASE("simulate") {
    const auto dir = scratch("simulate");
    const auto a = dir / "a", b = dir / "b";
    REQUIRE(run({"simulate", "--table", "bias", "--n", "100", "--reps", "3", "--seed", "4", "--out", a.string()}) ==
            cli::kOk);
    REQUIRE(run({"simulate", "--table", "bias", "--n", "100", "--reps", "3", "--seed", "4", "--threads", "2",
                 "--out", b.string()}) == cli::kOk);
    CHECK(slurp(a / "table1.csv") == slurp(b / "table1.csv"));
    CHECK(slurp(a / "table1.csv").rfind("axis,point,n,bias", 0) == 0);

    const auto c = dir / "c";
    REQUIRE(run({"simulate", "--table", "coverage", "--n", "100", "--reps", "3", "--boot", "10", "--out",
                 c.string()}) == cli::kOk);
    std::ifstream t2(c / "table2.csv");
    std::string header, line;
    std::getline(t2, header);
    const auto cols = [&] {
        std::vector<std::string> out;
        std::istringstream s(header);
        for (std::string f; std::getline(s, f, ',');) out.push_back(f);
        return out;
    }();
    const auto cov = std::find(cols.begin(), cols.end(), "coverage") - cols.begin();
    REQUIRE(cov < static_cast<long>(cols.size()));
    while (std::getline(t2, line)) {
        std::vector<std::string> f;
        std::istringstream s(line);
        for (std::string x; std::getline(s, x, ',');) f.push_back(x);
        const double v = std::stod(f[static_cast<std::size_t>(cov)]);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(fs::exists(c / "table3.csv"));
    CHECK(slurp(c / "meta.json").find("scenario_hash") != std::string::npos);
}
