#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qv::campaign {

// Per-subcommand parameters. Every random draw is derived from Config::seed.

struct MetricBenchConfig {
    std::vector<int> qs{2, 3, 4, 5, 6};
    std::vector<int> ns{1, 2, 3};
    int pairs = 500;            // per (q, n), oracle suite
    int axiom_samples = 10000;  // triples, axioms suite

    bool operator==(const MetricBenchConfig&) const = default;
};

struct EmbedConfig {
    int lip_pairs = 10000;       // split evenly over the specs
    int decode_points = 1000;
    int face_samples = 10000;    // on the (2, 1) lattice

    bool operator==(const EmbedConfig&) const = default;
};

struct RhoStarConfig {
    int q = 2, n = 1;
    std::vector<double> mus{0.2, 0.1, 0.05, 0.025};
    int sup_samples = 400;
    double slope_margin = 0.05;
    double tube_mu = 0.05;
    int tube_samples = 400;
    int min_tube_hits = 20;
    double energy_mu = 0.1;
    int calibration_samples = 200;
    int energy_fields = 20;
    int energy_grid = 12;

    bool operator==(const RhoStarConfig&) const = default;
};

struct DirichletConfig {
    std::vector<int> resolutions{16, 32, 64};
    double energy_tolerance = 0.05;  // relative to 2 pi at the finest grid
    double s = 1.5, p = 3.0;
    double inner_radius = 0.5;
    double stability = 2.0;  // max / min ratio across resolutions

    bool operator==(const DirichletConfig&) const = default;
};

struct CurrentConfig {
    std::string input;  // current JSON; empty selects the fixtures
    std::vector<std::string> fixtures{"flat", "tilted", "reversed", "random"};
    std::vector<double> box{-1, -1, 1, 1};
    int grid = 16;
    int random_fields = 50;
    double bv_margin = 0.1;
    double taylor_c = 2.0;
    std::vector<double> taylor_eps{0.2, 0.1, 0.05};
    int taylor_grid = 32;
    double taylor_slope = 2.0, taylor_slope_tolerance = 0.1;
    std::vector<int> stokes_resolutions{16, 32, 64};
    double stokes_order = 1.0, stokes_max_residual = 1e-3;
    std::vector<double> scan_ps{1.0, 1.5, 2.0, 3.0};
    double scan_sigma = 0.5;

    bool operator==(const CurrentConfig&) const = default;
};

struct LipschitzConfig {
    int grid = 128;
    double radius = 4.0;
    double height = 0.03;
    double tilt = 0.005;
    std::vector<double> at{0.3, 0.2};
    std::vector<double> etas{0.1, 0.05};
    double lip_c = 1.0;
    double margin = 0.1;

    bool operator==(const LipschitzConfig&) const = default;
};

struct CompetitorConfig {
    int grid = 40;
    double radius = 2.0;
    std::vector<double> mus{0.2, 0.1};
    double eps = 0.2;

    bool operator==(const CompetitorConfig&) const = default;
};

struct ReportConfig {
    std::string input;  // directory of earlier campaign outputs

    bool operator==(const ReportConfig&) const = default;
};

struct Config {
    std::uint64_t seed = 7;
    MetricBenchConfig metric;
    EmbedConfig embed;
    RhoStarConfig rho;
    DirichletConfig dirichlet;
    CurrentConfig current;
    LipschitzConfig lipschitz;
    CompetitorConfig competitor;
    ReportConfig report;

    bool operator==(const Config&) const = default;
};

struct Assertion {
    std::string suite, name;
    bool pass = false;
    double value = 0.0, bound = 0.0;
};

struct Report {
    std::string command;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> csv;  // suite -> body
    std::vector<Assertion> assertions;
    std::vector<std::pair<std::string, double>> constants;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, double>> seconds;  // wall time per suite

    bool failed() const;
    bool ok(bool strict) const { return !failed() && (!strict || warnings.empty()); }
    const Assertion* find(const std::string& suite, const std::string& name) const;
    double constant(const std::string& name) const;  // NaN when absent
    std::string summary(bool strict = false) const;
};

const std::vector<std::string>& commands();
const std::vector<std::string>& suites(const std::string& command);

// Throws InvalidInput for an unknown command or suite and for bad
// parameters; missing input files throw InvalidInput too. An empty suite
// list selects all suites of the command.
Report run(const std::string& command, const Config& config,
           const std::vector<std::string>& selected = {});

// <dir>/<suite>.csv per suite, summary.txt, timing.txt.
void write(const Report& report, const std::string& dir, bool strict = false);

// Derived stream seed for a named draw.
std::uint64_t stream(std::uint64_t seed, const std::string& tag);

}  // namespace qv::campaign
