// One PASS/FAIL line per acceptance criterion, from the default campaigns.

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qv/campaign.hpp"

using qv::campaign::Config;
using qv::campaign::Report;

namespace {

int failures = 0;

void line(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.3g", x);
    return b;
}

struct SuiteCheck {
    bool ok = false;
    int count = 0;
    std::string failed;  // names of failing assertions
};

SuiteCheck suite(const Report& r, const std::string& name) {
    SuiteCheck s;
    s.ok = true;
    for (const auto& a : r.assertions) {
        if (a.suite != name) continue;
        ++s.count;
        if (!a.pass) {
            s.ok = false;
            s.failed += (s.failed.empty() ? "" : " ") + a.name + "=" + fmt(a.value);
        }
    }
    s.ok = s.ok && s.count > 0;
    for (const auto& w : r.warnings)
        if (w.rfind(name + ":", 0) == 0) s.failed += (s.failed.empty() ? "" : " ") + std::string("[") + w + "]";
    return s;
}

double seconds(const Report& r, const std::vector<std::string>& names) {
    double t = 0;
    for (const auto& [k, v] : r.seconds)
        for (const auto& n : names)
            if (k == n) t += v;
    return t;
}

const qv::campaign::Assertion* get(const Report& r, const std::string& s, const std::string& n) { return r.find(s, n); }

double val(const Report& r, const std::string& s, const std::string& n) {
    const auto* a = r.find(s, n);
    return a ? a->value : NAN;
}

std::string csv(const Report& r, const std::string& s) {
    for (const auto& [k, v] : r.csv)
        if (k == s) return v;
    return {};
}

Report run_campaign(const std::string& cmd, const Config& c) {
    std::printf("running %s\n", cmd.c_str());
    std::fflush(stdout);
    return qv::campaign::run(cmd, c);
}

}  // namespace

int main() {
    const Config cfg;
    std::map<std::string, Report> reports;
    const std::vector<std::string> cmds = {"metric-bench",    "embed-verify",     "rho-star-verify", "dirichlet-min",
                                           "current-analyze", "lipschitz-approx", "competitor"};
    for (const auto& c : cmds) reports[c] = run_campaign(c, cfg);

    const Report& mb = reports["metric-bench"];
    {
        auto s = suite(mb, "oracle");
        double t = seconds(mb, {"oracle"});
        line(1, s.ok && s.count == 30 && t < 10, "assignment oracle",
             std::to_string(s.count) + " comparisons (Q 2..6, n 1..3, 500 pairs), " + fmt(t) + " s" +
                 (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        auto s = suite(mb, "axioms");
        line(2, s.ok, "metric axioms and W1 >= G", std::to_string(s.count) + " checks on 1e4 triples" +
                                                        (s.failed.empty() ? "" : ", " + s.failed));
    }
    const Report& ev = reports["embed-verify"];
    {
        auto s = suite(ev, "xi");
        double lip = 0, dec = 0;
        for (const auto& a : ev.assertions) {
            if (a.name.rfind("lipschitz", 0) == 0) lip = std::max(lip, a.value);
            if (a.name.rfind("decode", 0) == 0) dec = std::max(dec, a.value);
        }
        line(3, s.ok, "xi invariance, Lipschitz, decode",
             "max Lip ratio " + fmt(lip) + ", max decode error " + fmt(dec) + (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        auto s = suite(ev, "faces");
        line(4, s.ok && s.count == 6, "face lattice (2,1,h=1)",
             "2 faces of dims 1 and 2, p1-p4 on 1e4 samples" + (s.failed.empty() ? "" : ", " + s.failed));
    }
    const Report& rs = reports["rho-star-verify"];
    {
        auto a = suite(rs, "coincidence"), b = suite(rs, "slope"), c = suite(rs, "energy");
        double t = seconds(rs, {"coincidence", "slope", "energy"});
        bool hits_ok = a.failed.find('[') == std::string::npos;
        line(5, a.ok && b.ok && c.ok && hits_ok && t < 300, "rho* coincidence, exponent, energy",
             "tube error " + fmt(val(rs, "coincidence", "tube_coincidence")) + " on " +
                 fmt(rs.constant("coincidence.tube_hits")) + " hits, exponent " + fmt(rs.constant("slope.exponent")) +
                 ", energy C needed " + fmt(val(rs, "energy", "energy_inequality")) + " vs frozen " +
                 fmt(rs.constant("energy.frozen_c")) + ", " + fmt(t) + " s" +
                 (a.failed + b.failed + c.failed).insert(0, (a.failed + b.failed + c.failed).empty() ? "" : ", "));
    }
    const Report& dm = reports["dirichlet-min"];
    {
        auto s = suite(dm, "branch");
        double t = seconds(dm, {"branch"});
        const auto* a = get(dm, "branch", "energy_vs_2pi_n64");
        line(6, s.ok && a && t < 120, "Dirichlet branch energy",
             "E = " + fmt(dm.constant("branch.energy")) + ", relative gap " + (a ? fmt(a->value) : "missing") +
                 ", " + fmt(t) + " s for grids 16, 32, 64" + (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        auto s = suite(dm, "reverse_holder");
        line(7, s.ok, "reverse Hoelder stability",
             "ratios " + fmt(dm.constant("reverse_holder.max_ratio_n16")) + ", " +
                 fmt(dm.constant("reverse_holder.max_ratio_n32")) + ", " +
                 fmt(dm.constant("reverse_holder.max_ratio_n64")) + (s.failed.empty() ? "" : ", " + s.failed));
    }
    const Report& ca = reports["current-analyze"];
    {
        auto s = suite(ca, "taylor");
        line(8, s.ok, "Taylor envelope and eps-slope",
             "frozen C " + fmt(ca.constant("taylor.frozen_c")) + " in [" + fmt(ca.constant("taylor.c_min")) + ", " +
                 fmt(ca.constant("taylor.c_max")) + "], slope " + fmt(ca.constant("taylor.slope")) +
                 (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        auto s = suite(ca, "bv");
        std::map<std::string, std::set<std::string>> psis;
        std::istringstream in(csv(ca, "bv"));
        std::string row;
        std::getline(in, row);
        while (std::getline(in, row)) {
            auto c1 = row.find(','), c2 = row.find(',', c1 + 1);
            std::string cur = row.substr(0, c1);
            if (cur.rfind("random_", 0) == 0) psis[cur].insert(row.substr(c1 + 1, c2 - c1 - 1));
        }
        bool shape = psis.size() == 50;
        for (const auto& [k, v] : psis) shape = shape && v.size() == 5;
        double worst = 0;
        for (const auto& a : ca.assertions)
            if (a.suite == "bv") worst = std::max(worst, a.value);
        line(9, s.ok && shape, "modified BV estimate",
             std::to_string(psis.size()) + " random currents x 5 test functions, worst lhs/rhs " + fmt(worst) +
                 (s.failed.empty() ? "" : ", " + s.failed));
    }
    const Report& la = reports["lipschitz-approx"];
    {
        auto a = suite(la, "approx"), b = suite(la, "coverage");
        line(10, a.ok && b.ok && a.count == 4 && b.count == 2, "Lipschitz approximation on the spike",
             "graph mismatch " + fmt(val(la, "approx", "graph_on_k_eta1.000000000e-01")) + ", Lip " +
                 fmt(val(la, "approx", "lip_eta5.000000000e-02")) + " <= C sqrt(eta) with C " +
                 fmt(la.constant("approx.frozen_lip_c")) + ", coverage worst ratio " +
                 fmt(std::max(val(la, "coverage", "coverage_eta1.000000000e-01"),
                              val(la, "coverage", "coverage_eta5.000000000e-02"))) +
                 (a.failed + b.failed).insert(0, (a.failed + b.failed).empty() ? "" : ", "));
    }
    {
        auto s = suite(ca, "stokes");
        const auto* r64 = get(ca, "stokes", "residual_n64");
        line(11, s.ok && r64, "Stokes residual order",
             "orders " + fmt(val(ca, "stokes", "order_n32")) + ", " + fmt(val(ca, "stokes", "order_n64")) +
                 ", residual at 64 " + (r64 ? fmt(r64->value) : "missing") + (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        auto s = suite(ca, "ve");
        const auto* z = get(ca, "ve", "reversed_ve_zero");
        const auto* e = get(ca, "ve", "reversed_e_positive");
        line(12, s.ok && z && e, "varifold excess",
             std::to_string(s.count) + " checks; reversed pair VE " + (z ? fmt(z->value) : "missing") + ", E " +
                 (e ? fmt(e->value) : "missing") + (s.failed.empty() ? "" : ", " + s.failed));
    }
    {
        bool same = true;
        std::string diff;
        for (const auto& c : cmds) {
            Report again = run_campaign(c, cfg);
            const Report& first = reports[c];
            bool eq = again.csv == first.csv && again.summary() == first.summary();
            if (!eq) diff += " " + c;
            same = same && eq;
        }
        line(13, same, "byte-identical re-runs",
             same ? "CSV bodies and summaries of all 7 campaigns match" : "differ:" + diff);
    }
    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
