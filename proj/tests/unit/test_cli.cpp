#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "qv/campaign.hpp"
#include "qv/cli.hpp"
#include "qv/currents.hpp"
#include "qv/error.hpp"

using namespace qv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("qv_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int tool(std::vector<std::string> args, std::string* stdout_text = nullptr) {
    args.insert(args.begin(), "qvtool");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::main(int(argv.size()), argv.data(), out, err);
    if (stdout_text) *stdout_text = out.str() + err.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        out.push_back(cells);
    }
    return out;
}

const std::string* csv_of(const campaign::Report& r, const std::string& suite) {
    for (const auto& [s, body] : r.csv)
        if (s == suite) return &body;
    return nullptr;
}

}  // namespace

TEST_CASE("metric-bench with seed 7 passes every oracle comparison") {
    fs::path dir = scratch("metric");
    std::string text;
    CHECK(tool({"metric-bench", "--seed", "7", "--out", dir.string()}, &text) == 0);
    CHECK(text.find("FAIL") == std::string::npos);
    std::string summary = slurp(dir / "summary.txt");
    CHECK(summary.find("result PASS") != std::string::npos);
    auto oracle = rows(slurp(dir / "oracle.csv"));
    CHECK(oracle.size() == 15);  // Q = 2..6, n = 1..3
    for (const auto& r : oracle) {
        CHECK(std::stod(r[3]) <= 1e-12);
        CHECK(std::stod(r[4]) <= 1e-12);
    }
}

TEST_CASE("current-analyze on flat sheets gives an all-zero excess report") {
    campaign::Config c;
    c.current.fixtures = {"flat"};
    auto r = campaign::run("current-analyze", c, {"excess"});
    CHECK(!r.failed());
    const std::string* body = csv_of(r, "excess");
    REQUIRE(body);
    auto rs = rows(*body);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0][0] == "flat");
    CHECK(rs[0][1] == "2");
    for (int col : {3, 4, 5, 6}) CHECK(std::stod(rs[0][col]) == 0.0);
    // A single current also gets the per-cell table.
    const std::string* cells = csv_of(r, "excess_cells");
    REQUIRE(cells);
    for (const auto& row : rows(*cells))
        for (int col : {5, 6, 7}) CHECK(std::stod(row[col]) == 0.0);
}

TEST_CASE("rho-star-verify slope on (2, 1)") {
    campaign::Config c;
    auto r = campaign::run("rho-star-verify", c, {"slope"});
    CHECK(r.constant("slope.exponent") >= 0.25 - 0.05);
    const auto* a = r.find("slope", "exponent");
    REQUIRE(a);
    CHECK(a->pass);
    CHECK(rows(*csv_of(r, "slope")).size() == 4);
}

TEST_CASE("identical configs give byte-identical CSVs; the seed changes the draws") {
    campaign::Config c;
    c.current.random_fields = 3;
    c.current.fixtures = {"random"};
    auto a = campaign::run("current-analyze", c, {"excess", "bv"});
    auto b = campaign::run("current-analyze", c, {"excess", "bv"});
    REQUIRE(a.csv.size() == b.csv.size());
    for (std::size_t i = 0; i < a.csv.size(); ++i) CHECK(a.csv[i] == b.csv[i]);
    CHECK(a.summary() == b.summary());
    c.seed = 8;
    auto d = campaign::run("current-analyze", c, {"excess"});
    CHECK(*csv_of(d, "excess") != *csv_of(a, "excess"));

    fs::path d1 = scratch("det1"), d2 = scratch("det2");
    CHECK(tool({"metric-bench", "--pairs", "40", "--axiom_samples", "200", "--out", d1.string()}) == 0);
    CHECK(tool({"metric-bench", "--pairs", "40", "--axiom_samples", "200", "--out", d2.string()}) == 0);
    for (const char* f : {"oracle.csv", "axioms.csv", "summary.txt"}) CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("config file round-trips through its text form") {
    fs::path dir = scratch("config");
    {
        std::ofstream(dir / "default.ini") << cli::default_config();
    }
    CHECK(cli::default_config().find("[current-analyze]") != std::string::npos);
    for (const auto& cmd : campaign::commands()) CHECK(cli::load_config((dir / "default.ini").string(), cmd) == campaign::Config{});

    {
        std::ofstream f(dir / "custom.ini");
        f << "seed=11\n\n[metric-bench]\nqs=[2,4]\npairs=3\n\n[current-analyze]\ntaylor_eps=[0.4,0.2]\nfixtures=[flat]\n";
    }
    auto c = cli::load_config((dir / "custom.ini").string(), "metric-bench");
    CHECK(c.seed == 11);
    CHECK(c.metric.qs == std::vector<int>{2, 4});
    CHECK(c.metric.pairs == 3);
    CHECK(c.current.taylor_eps == std::vector<double>{0.4, 0.2});
    CHECK(c.current.fixtures == std::vector<std::string>{"flat"});
    CHECK(c.metric.ns == campaign::MetricBenchConfig{}.ns);

    {
        std::ofstream(dir / "bad.ini") << "[metric-bench]\nno_such_key=1\n";
    }
    CHECK_THROWS_AS(cli::load_config((dir / "bad.ini").string(), "metric-bench"), InvalidInput);
    CHECK_THROWS_AS(cli::load_config((dir / "missing.ini").string(), "metric-bench"), InvalidInput);

    // --seed on the command line overrides the file.
    fs::path out = scratch("config_out");
    std::string text;
    CHECK(tool({"--config", (dir / "custom.ini").string(), "metric-bench", "--seed", "5", "--out", out.string()}, &text) == 0);
    CHECK(text.find("seed 5") != std::string::npos);
    CHECK(rows(slurp(out / "oracle.csv")).size() == 6);
}

TEST_CASE("bad arguments and missing inputs exit with status 2") {
    fs::path out = scratch("bad");
    CHECK(tool({"metric-bench", "--suite", "oracle,nope", "--out", out.string()}) == 2);
    CHECK(tool({"no-such-command"}) == 2);
    CHECK(tool({"current-analyze", "--input", (out / "missing.json").string(), "--out", out.string()}) == 2);
    CHECK(tool({"report", "--input", (out / "missing").string(), "--out", out.string()}) == 2);
    CHECK(tool({"metric-bench", "--pairs", "0", "--out", out.string()}) == 2);
    CHECK(tool({"current-analyze", "--grid", "12", "--out", out.string()}) == 2);
    CHECK_THROWS_AS(campaign::suites("nope"), InvalidInput);
}

TEST_CASE("a failed assertion exits 1 and still writes the report") {
    fs::path out = scratch("fail");
    CHECK(tool({"current-analyze", "--suite", "taylor", "--taylor_slope", "5", "--out", out.string()}) == 1);
    CHECK(slurp(out / "summary.txt").find("FAIL taylor slope") != std::string::npos);
    CHECK(slurp(out / "summary.txt").find("result FAIL") != std::string::npos);
    CHECK(rows(slurp(out / "taylor.csv")).size() == 15);
}

TEST_CASE("--strict turns warnings into failures") {
    fs::path out = scratch("strict");
    std::vector<std::string> args = {"rho-star-verify", "--suite", "coincidence", "--min_tube_hits", "100000",
                                     "--out", out.string()};
    CHECK(tool(args) == 0);
    CHECK(slurp(out / "summary.txt").find("warning coincidence") != std::string::npos);
    args.push_back("--strict");
    CHECK(tool(args) == 1);
}

TEST_CASE("current-analyze reads a current file") {
    fs::path dir = scratch("input");
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 8, 8);
    Mat a(1, 2);
    a << 0.5, 0.0;
    {
        std::ofstream(dir / "tilt.json") << fixtures::tilted_sheet(g, a).to_json().dump();
    }
    fs::path out = dir / "out";
    CHECK(tool({"current-analyze", "--input", (dir / "tilt.json").string(), "--grid", "8", "--suite", "excess,ve,bv",
                "--out", out.string()}) == 0);
    auto ex = rows(slurp(out / "excess.csv"));
    REQUIRE(ex.size() == 1);
    CHECK(ex[0][0] == "tilt");
    // |base| (sqrt(1 + 1/4) - 1) / |base|
    CHECK(std::stod(ex[0][3]) == doctest::Approx(std::sqrt(1.25) - 1).epsilon(1e-12));
    CHECK(fs::exists(out / "excess_cells.csv"));
    CHECK(fs::exists(out / "bv.csv"));

    {
        std::ofstream(dir / "broken.json") << "{ not json";
    }
    CHECK(tool({"current-analyze", "--input", (dir / "broken.json").string(), "--out", out.string()}) == 2);
}

TEST_CASE("report aggregates earlier outputs and propagates failures") {
    fs::path dir = scratch("report");
    CHECK(tool({"metric-bench", "--pairs", "10", "--axiom_samples", "30", "--out", (dir / "in" / "metric").string()}) == 0);
    std::string text;
    CHECK(tool({"report", "--input", (dir / "in").string(), "--out", (dir / "agg").string()}, &text) == 0);
    auto idx = rows(slurp(dir / "agg" / "index.csv"));
    REQUIRE(idx.size() == 2);
    CHECK(idx[0][0] == "metric/axioms.csv");
    CHECK(idx[1][0] == "metric/oracle.csv");
    CHECK(idx[1][1] == "15");
    CHECK(text.find("PASS metric/oracle g_q2_n1") != std::string::npos);

    CHECK(tool({"current-analyze", "--suite", "taylor", "--taylor_slope", "5", "--out", (dir / "in" / "bad").string()}) == 1);
    CHECK(tool({"report", "--input", (dir / "in").string(), "--out", (dir / "agg2").string()}) == 1);
}
