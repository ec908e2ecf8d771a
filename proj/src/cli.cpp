#include "qv/cli.hpp"

#include <CLI11.hpp>
#include <map>
#include <ostream>
#include <sstream>

#include "qv/campaign.hpp"
#include "qv/error.hpp"

namespace qv::cli {

namespace {

using campaign::Config;

struct Invocation {
    std::string out = "qv_out";
    std::vector<std::string> suites;
    bool strict = false;
};

std::string suite_list(const std::string& cmd) {
    std::string s;
    for (const auto& n : campaign::suites(cmd)) s += (s.empty() ? "" : ", ") + n;
    return "Suites: " + s + ".";
}

CLI::App* sub(CLI::App& app, const std::string& name, const std::string& what) {
    return app.add_subcommand(name, what + " " + suite_list(name));
}

// Options mirror the fields of campaign::Config; config files use the same
// names under a [subcommand] section.
void build(CLI::App& app, Config& c, Invocation& inv) {
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "INI config file: top-level keys, then one [subcommand] section each");
    app.add_option("--seed", c.seed, "Seed for every random draw");
    app.add_option("--out", inv.out, "Output directory");
    app.add_option("--suite", inv.suites, "Comma-separated suites to run (default: all)")->delimiter(',');
    app.add_flag("--strict", inv.strict, "Treat warnings as failures");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1, 1);
    app.fallthrough();

    auto* m = sub(app, "metric-bench", "Assignment oracle and metric axioms.");
    m->add_option("--qs", c.metric.qs, "Q values");
    m->add_option("--ns", c.metric.ns, "n values");
    m->add_option("--pairs", c.metric.pairs, "Random pairs per (Q, n)");
    m->add_option("--axiom_samples", c.metric.axiom_samples, "Random triples");

    auto* e = sub(app, "embed-verify", "xi properties and the face lattice.");
    e->add_option("--lip_pairs", c.embed.lip_pairs, "Pairs for invariance and Lipschitz checks");
    e->add_option("--decode_points", c.embed.decode_points, "Decode round trips");
    e->add_option("--face_samples", c.embed.face_samples, "Samples for the face properties");

    auto* r = sub(app, "rho-star-verify", "Almost-projection sweeps.");
    r->add_option("--q", c.rho.q, "Q");
    r->add_option("--n", c.rho.n, "n");
    r->add_option("--mus", c.rho.mus, "mu sweep for the displacement exponent");
    r->add_option("--sup_samples", c.rho.sup_samples, "Samples per sup estimate");
    r->add_option("--slope_margin", c.rho.slope_margin, "Allowed shortfall of the exponent");
    r->add_option("--tube_mu", c.rho.tube_mu, "mu for the tube coincidence check");
    r->add_option("--tube_samples", c.rho.tube_samples, "Cone samples for the tube check");
    r->add_option("--min_tube_hits", c.rho.min_tube_hits, "Warn below this many tube hits");
    r->add_option("--energy_mu", c.rho.energy_mu, "mu for the energy inequality");
    r->add_option("--calibration_samples", c.rho.calibration_samples, "Samples for the frozen constants");
    r->add_option("--energy_fields", c.rho.energy_fields, "Random fields");
    r->add_option("--energy_grid", c.rho.energy_grid, "Grid size of the unit square");

    auto* d = sub(app, "dirichlet-min", "Branched minimizer and reverse Hoelder.");
    d->add_option("--resolutions", c.dirichlet.resolutions, "Disk grid sizes");
    d->add_option("--energy_tolerance", c.dirichlet.energy_tolerance, "Relative gap to 2 pi at the finest grid");
    d->add_option("--s", c.dirichlet.s, "Exponent s");
    d->add_option("--p", c.dirichlet.p, "Exponent p");
    d->add_option("--inner_radius", c.dirichlet.inner_radius, "Inner ball radius");
    d->add_option("--stability", c.dirichlet.stability, "Max/min ratio across grids");

    auto* k = sub(app, "current-analyze", "Excess, varifold excess, BV, Taylor and Stokes checks.");
    k->add_option("--input", c.current.input, "Current JSON file (default: fixtures)");
    k->add_option("--fixtures", c.current.fixtures, "flat, tilted, reversed, random");
    k->add_option("--box", c.current.box, "Base box x0 y0 x1 y1")->expected(4);
    k->add_option("--grid", c.current.grid, "Base squares per side (power of two)");
    k->add_option("--random_fields", c.current.random_fields, "Random 2-valued graphs");
    k->add_option("--bv_margin", c.current.bv_margin, "Discretization margin of the BV estimate");
    k->add_option("--taylor_c", c.current.taylor_c, "Frozen Taylor constant");
    k->add_option("--taylor_eps", c.current.taylor_eps, "Amplitude sweep");
    k->add_option("--taylor_grid", c.current.taylor_grid, "Taylor grid size");
    k->add_option("--taylor_slope", c.current.taylor_slope, "Expected log-log slope");
    k->add_option("--taylor_slope_tolerance", c.current.taylor_slope_tolerance, "Slope tolerance");
    k->add_option("--stokes_resolutions", c.current.stokes_resolutions, "Annulus grid sizes");
    k->add_option("--stokes_order", c.current.stokes_order, "Minimum observed order");
    k->add_option("--stokes_max_residual", c.current.stokes_max_residual, "Residual bound at 64 (or the finest)");
    k->add_option("--scan_ps", c.current.scan_ps, "Exponents of the integrability scan");
    k->add_option("--scan_sigma", c.current.scan_sigma, "sigma of the strong-estimate scan");

    auto* l = sub(app, "lipschitz-approx", "Lipschitz approximation of the spike current.");
    l->add_option("--grid", c.lipschitz.grid, "Squares across the ball");
    l->add_option("--radius", c.lipschitz.radius, "Ball radius (4s)");
    l->add_option("--height", c.lipschitz.height, "Spike height");
    l->add_option("--tilt", c.lipschitz.tilt, "Sheet slope");
    l->add_option("--at", c.lipschitz.at, "Spike location x y")->expected(2);
    l->add_option("--etas", c.lipschitz.etas, "eta sweep");
    l->add_option("--lip_c", c.lipschitz.lip_c, "Frozen constant in Lip(u) <= C sqrt(eta)");
    l->add_option("--margin", c.lipschitz.margin, "Margin of the covering bound");

    auto* p = sub(app, "competitor", "Competitor construction ledger.");
    p->add_option("--grid", c.competitor.grid, "Disk grid size");
    p->add_option("--radius", c.competitor.radius, "Disk radius");
    p->add_option("--mus", c.competitor.mus, "mu sweep");
    p->add_option("--eps", c.competitor.eps, "Mollification radius");

    auto* a = sub(app, "report", "Aggregate earlier outputs.");
    a->add_option("--input", c.report.input, "Directory of campaign outputs")->required();
}

}  // namespace

std::string default_config() {
    Config c;
    Invocation inv;
    CLI::App app("qvtool");
    build(app, c, inv);
    // CLI11 writes subcommand keys as "cmd.key"; regroup them into sections.
    std::istringstream in(app.config_to_str(true, false));
    std::string top, line, section;
    std::map<std::string, std::string> sections;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        auto eq = line.find('='), dot = line.find('.');
        if (line.rfind("suite=", 0) == 0) continue;  // empty list selects every suite
        if (dot == std::string::npos || dot > eq) {
            top += line + "\n";
            continue;
        }
        section = line.substr(0, dot);
        if (!sections.count(section)) order.push_back(section);
        sections[section] += line.substr(dot + 1) + "\n";
    }
    for (const auto& s : order) top += "\n[" + s + "]\n" + sections[s];
    return top;
}

campaign::Config load_config(const std::string& path, const std::string& command) {
    Config c;
    Invocation inv;
    CLI::App app("qvtool");
    build(app, c, inv);
    if (command == "report") app.get_subcommand("report")->get_option("--input")->required(false);
    const char* argv[] = {"qvtool", "--config", path.c_str(), command.c_str()};
    try {
        app.parse(4, argv);
    } catch (const CLI::ParseError& e) {
        throw InvalidInput("config " + path + ": " + e.what());
    }
    return c;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Config c;
    Invocation inv;
    CLI::App app("Campaigns over Q-valued maps, projections and currents.", "qvtool");
    build(app, c, inv);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        campaign::Report rep = campaign::run(cmd, c, inv.suites);
        campaign::write(rep, inv.out, inv.strict);
        out << rep.summary(inv.strict);
        return rep.ok(inv.strict) ? 0 : 1;
    } catch (const InvalidInput& e) {
        err << "qvtool: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "qvtool: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace qv::cli
