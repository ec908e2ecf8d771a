#include "qv/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "qv/currents.hpp"
#include "qv/dirichlet.hpp"
#include "qv/embedding.hpp"
#include "qv/error.hpp"
#include "qv/projections.hpp"
#include "qv/qspace.hpp"

namespace fs = std::filesystem;

namespace qv::campaign {

namespace {

using Rng = std::mt19937_64;

std::string num(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.12e", x);
    return b;
}

std::string num9(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.9e", x);
    return b;
}

class Csv {
public:
    explicit Csv(std::string header) : body_(std::move(header) + "\n") {}
    template <class... T>
    void row(const T&... cells) {
        std::string line;
        ((line += cell(cells) + ","), ...);
        line.back() = '\n';
        body_ += line;
    }
    const std::string& str() const { return body_; }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double x) { return num(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    std::string body_;
};

void need(bool ok, const std::string& what) {
    if (!ok) throw InvalidInput("config: " + what);
}

struct Ctx {
    const Config& cfg;
    Report& rep;
    std::string suite;

    // Passes iff value <= bound.
    void at_most(const std::string& name, double value, double bound) {
        rep.assertions.push_back({suite, name, value <= bound, value, bound});
    }
    void at_least(const std::string& name, double value, double bound) {
        rep.assertions.push_back({suite, name, value >= bound, value, bound});
    }
    void constant(const std::string& name, double v) { rep.constants.push_back({suite + "." + name, v}); }
    void warn(const std::string& w) { rep.warnings.push_back(suite + ": " + w); }
    void csv(const Csv& c) { rep.csv.push_back({suite, c.str()}); }
    Rng rng(const std::string& tag) const { return Rng(stream(cfg.seed, suite + "/" + tag)); }
};

RhoStarOptions rho_options(const Ctx& x, const std::string& tag) {
    RhoStarOptions o;
    o.seed = stream(x.cfg.seed, tag);
    return o;
}

std::string qn(int q, int n) { return "q" + std::to_string(q) + "_n" + std::to_string(n); }

// ---------------------------------------------------------------------------
// metric-bench

// Exhaustive minimum over permutations, summed in row order.
double brute(const QPoint& a, const QPoint& b, bool squared) {
    std::vector<int> p(a.q());
    std::iota(p.begin(), p.end(), 0);
    double best = INFINITY;
    do {
        double s = 0.0;
        for (int i = 0; i < a.q(); ++i) {
            double d2 = (a.vec(i) - b.vec(p[i])).squaredNorm();
            s += squared ? d2 : std::sqrt(d2);
        }
        best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    return squared ? std::sqrt(best) : best;
}

// Every fourth point is rounded to a coarse lattice to force ties.
QPoint bench_point(int q, int n, Rng& rng, int k) {
    QPoint a = random_qpoint(q, n, 1.0, rng);
    if (k % 4 == 3) {
        std::vector<double> c = a.data();
        for (double& x : c) x = std::round(2 * x) / 2;
        a = QPoint(q, n, c);
    }
    return a;
}

void oracle_suite(Ctx& x) {
    const auto& c = x.cfg.metric;
    Csv csv("q,n,pairs,max_error_g,max_error_w1");
    for (int q : c.qs)
        for (int n : c.ns) {
            Rng rng = x.rng(qn(q, n));
            double eg = 0, ew = 0;
            for (int k = 0; k < c.pairs; ++k) {
                QPoint a = bench_point(q, n, rng, k), b = bench_point(q, n, rng, k);
                eg = std::max(eg, std::abs(metric_g(a, b) - brute(a, b, true)));
                ew = std::max(ew, std::abs(wasserstein1(a, b) - brute(a, b, false)));
            }
            csv.row(q, n, c.pairs, eg, ew);
            x.at_most("g_" + qn(q, n), eg, 1e-12);
            x.at_most("w1_" + qn(q, n), ew, 1e-12);
        }
    x.csv(csv);
}

void axioms_suite(Ctx& x) {
    const auto& c = x.cfg.metric;
    Rng rng = x.rng("triples");
    std::map<std::string, double> worst{{"identity", 0},  {"symmetry", 0},       {"triangle_g", 0},
                                        {"triangle_w1", 0}, {"w1_at_least_g", 0}, {"w1_at_most_sqrtq_g", 0}};
    for (int k = 0; k < c.axiom_samples; ++k) {
        int q = c.qs[k % c.qs.size()], n = c.ns[(k / c.qs.size()) % c.ns.size()];
        QPoint a = bench_point(q, n, rng, k), b = bench_point(q, n, rng, k), d = bench_point(q, n, rng, k);
        std::vector<int> perm(q);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        double gab = metric_g(a, b), gbd = metric_g(b, d), gad = metric_g(a, d);
        double wab = wasserstein1(a, b), wbd = wasserstein1(b, d), wad = wasserstein1(a, d);
        auto up = [&](const char* key, double v) { worst[key] = std::max(worst[key], v); };
        up("identity", std::max(metric_g(a, a.permuted(perm)), wasserstein1(a, a.permuted(perm))));
        up("symmetry", std::max(std::abs(gab - metric_g(b, a)), std::abs(wab - wasserstein1(b, a))));
        up("triangle_g", gad - gab - gbd);
        up("triangle_w1", wad - wab - wbd);
        up("w1_at_least_g", gab - wab);
        up("w1_at_most_sqrtq_g", wab - std::sqrt(double(q)) * gab);
    }
    Csv csv("check,samples,max_violation");
    for (const auto& [name, v] : worst) {
        csv.row(name, c.axiom_samples, v);
        x.at_most(name, v, 1e-9);
    }
    x.csv(csv);
}

// ---------------------------------------------------------------------------
// embed-verify

const std::vector<std::pair<int, int>> kXiSpecs = {{2, 1}, {3, 1}, {2, 2}, {3, 2}, {2, 3}};

void xi_suite(Ctx& x) {
    const auto& c = x.cfg.embed;
    Csv csv("q,n,N,pairs,perm_mismatches,max_lip_ratio,decode_points,max_decode_error");
    const int ns = int(kXiSpecs.size());
    for (auto [q, n] : kXiSpecs) {
        auto s = EmbeddingSpec::standard(q, n);
        Rng rng = x.rng(qn(q, n));
        int pairs = c.lip_pairs / ns, points = c.decode_points / ns, mism = 0;
        double lip = 0, dec = 0;
        for (int k = 0; k < pairs; ++k) {
            QPoint a = random_qpoint(q, n, 1.0, rng), b = random_qpoint(q, n, 1.0, rng);
            std::vector<int> perm(q);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            Vec x1 = xi(a, s), x2 = xi(a.permuted(perm), s);
            if (std::memcmp(x1.data(), x2.data(), sizeof(double) * x1.size()) != 0) ++mism;
            double g = metric_g(a, b);
            if (g > 0) lip = std::max(lip, (x1 - xi(b, s)).norm() / g);
        }
        for (int k = 0; k < points; ++k) {
            QPoint a = random_qpoint(q, n, 1.0, rng);
            dec = std::max(dec, metric_g(decode(xi(a, s), s), a));
        }
        csv.row(q, n, s.N(), pairs, mism, lip, points, dec);
        x.at_most("perm_invariance_" + qn(q, n), mism, 0);
        x.at_most("lipschitz_" + qn(q, n), lip, 1 + 1e-9);
        x.at_most("decode_" + qn(q, n), dec, 1e-6);
    }
    x.csv(csv);
}

std::string signature_str(const Signature& s) {
    std::string out;
    for (const auto& block : s) {
        if (!out.empty()) out += "|";
        for (std::size_t i = 0; i < block.size(); ++i) out += (i ? " " : "") + std::to_string(block[i]);
    }
    return out;
}

void faces_suite(Ctx& x) {
    const auto& c = x.cfg.embed;
    Csv csv("spec,h,N,face,dim,signature");
    std::vector<std::pair<std::string, EmbeddingSpec>> specs = {
        {"line_pair", EmbeddingSpec::custom(2, 1, {Vec::Ones(1)}, 1.0)},
        {"q2_n1", EmbeddingSpec::standard(2, 1)},
        {"q3_n1", EmbeddingSpec::standard(3, 1)},
        {"q2_n2", EmbeddingSpec::standard(2, 2)}};
    std::vector<ConeComplex> complexes;
    for (const auto& [name, s] : specs) {
        complexes.push_back(face_decomposition(s));
        for (const Face& f : complexes.back().faces())
            csv.row(name, s.h, s.N(), f.id, f.dim, signature_str(f.signature));
        x.constant("faces_" + name, double(complexes.back().faces().size()));
    }
    x.csv(csv);

    const ConeComplex& cx = complexes[0];
    const EmbeddingSpec& s = specs[0].second;
    std::set<int> dims;
    for (const Face& f : cx.faces()) dims.insert(f.dim);
    x.at_most("line_pair_face_count", std::abs(double(cx.faces().size()) - 2), 0);
    x.at_most("line_pair_dims_1_2", dims == std::set<int>{1, 2} ? 0 : 1, 0);

    Rng rng = x.rng("samples");
    int p1 = 0, p2 = 0, p3 = 0, p4 = 0;
    for (int k = 0; k < c.face_samples; ++k) {
        QPoint a = random_qpoint(2, 1, 1.0, rng);
        if (k % 3 == 0) a.point(1)[0] = a.point(0)[0];
        Vec w = xi(a, s);
        int id = face_of(w, cx);
        // (p1) the labelled signature names exactly the face found geometrically.
        int by_sig = cx.lookup(canonical_signature(signature_of(a, s, 1e-7 * w.norm())));
        if (by_sig != id || cx.distance_to_face(w, id) > 1e-9 * std::max(1.0, w.norm())) ++p1;
        // (p2) no other face of dimension <= dim F contains w.
        for (const Face& f : cx.faces())
            if (f.id != id && f.dim <= cx.face(id).dim && cx.distance_to_face(w, f.id) <= 0) ++p2;
        // (p3) cone property.
        for (double l : {0.25, 4.0})
            if (face_of(l * w, cx) != id) ++p3;
        // (p4) paths from open points onto a tie end on a lower face.
        if (cx.face(id).dim == cx.max_dim()) {
            QPoint b = a;
            b.point(1)[0] = b.point(0)[0];
            Vec wb = xi(b, s);
            if (cx.face(face_of(wb, cx)).dim >= cx.face(id).dim) ++p4;
            for (double t : {0.5, 0.9, 0.99})
                if (face_of((1 - t) * w + t * wb, cx) != id) ++p4;
        }
    }
    x.at_most("p1_unique_face", p1, 0);
    x.at_most("p2_disjoint", p2, 0);
    x.at_most("p3_cone", p3, 0);
    x.at_most("p4_boundary_lowers_dim", p4, 0);
}

// ---------------------------------------------------------------------------
// rho-star-verify

void coincidence_suite(Ctx& x) {
    const auto& c = x.cfg.rho;
    auto spec = EmbeddingSpec::standard(c.q, c.n);
    auto p = AlmostProjection::build(spec, c.tube_mu, rho_options(x, "rho/build"));
    const auto& cx = p.geometry().complex();
    Rng rng = x.rng("tube");
    Csv csv("sample,stage_dim,face,distance_to_face,error");
    int hits = 0;
    double worst = 0;
    for (int k = 0; k < c.tube_samples; ++k) {
        Vec y = random_cone_point(spec, rng, p.geometry().c(p.geometry().bottom()));
        int face = -1;
        int dim = p.active_stage(p.geometry().bottom(), y, &face);
        if (face < 0) continue;
        Vec proj;
        double d = cx.distance_to_face(y, face, &proj);
        if (d > p.mu() || p.geometry().lower_distance(y, dim) < 2 * p.geometry().c(dim - 1)) continue;
        ++hits;
        double err = (p.apply_on_cone(y) - proj).norm();
        worst = std::max(worst, err);
        csv.row(k, dim, face, d, err);
    }
    x.csv(csv);
    x.at_most("tube_coincidence", worst, 1e-8);
    x.constant("tube_hits", hits);
    if (hits < c.min_tube_hits) x.warn("only " + std::to_string(hits) + " tube samples");
}

void slope_suite(Ctx& x) {
    const auto& c = x.cfg.rho;
    auto spec = EmbeddingSpec::standard(c.q, c.n);
    std::vector<double> sups;
    Csv csv("mu,sup_displacement");
    for (double mu : c.mus) {
        auto p = AlmostProjection::build(spec, mu, rho_options(x, "rho/build"));
        sups.push_back(sup_displacement(p, c.sup_samples, stream(x.cfg.seed, "rho/sup")));
        csv.row(mu, sups.back());
    }
    x.csv(csv);
    double slope = loglog_slope(c.mus, sups);
    x.constant("exponent", slope);
    x.at_least("exponent", slope, std::pow(2.0, -c.n * c.q) - c.slope_margin);
}

void energy_suite(Ctx& x) {
    const auto& c = x.cfg.rho;
    auto p = AlmostProjection::build(EmbeddingSpec::standard(c.q, c.n), c.energy_mu,
                                     rho_options(x, "rho/build"));
    calibrate_constants(p, c.calibration_samples, stream(x.cfg.seed, "rho/calibrate"));
    Mesh mesh = Mesh::grid_box(c.energy_grid, c.energy_grid, 0, 0, 1, 1);
    auto rep = verify_energy_inequality(p, mesh,
                                        random_energy_fields(p, mesh, c.energy_fields, stream(x.cfg.seed, "rho/fields")));
    Csv csv("field,lhs,near,far,c_needed,holds");
    double need_c = 0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        csv.row(int(i), r.lhs, r.near, r.far, r.c_needed, r.holds);
        need_c = std::max(need_c, r.c_needed);
    }
    x.csv(csv);
    x.constant("frozen_c", rep.c);
    x.constant("global_c", p.constants.global);
    for (std::size_t k = 0; k < p.constants.stage.size(); ++k)
        x.constant("stage_c_" + std::to_string(p.geometry().bottom() + int(k)), p.constants.stage[k]);
    x.at_most("energy_inequality", need_c, rep.c);
}

// ---------------------------------------------------------------------------
// dirichlet-min

struct DirichletRuns {
    std::vector<std::pair<int, MinimizeResult>> runs;
};

DirichletRuns& dirichlet_runs(Ctx& x, std::map<std::string, std::shared_ptr<void>>& cache) {
    auto& slot = cache["dirichlet"];
    if (!slot) {
        auto runs = std::make_shared<DirichletRuns>();
        for (int n : x.cfg.dirichlet.resolutions) {
            auto m = std::make_shared<const Mesh>(Mesh::grid_disk(Point2(0, 0), 1.0, n));
            MinimizeOptions o;
            o.seed = stream(x.cfg.seed, "dirichlet/" + std::to_string(n));
            runs->runs.push_back({n, minimize_dirichlet(m, boundary_trace(*m, fixtures::branch), o)});
        }
        slot = runs;
    }
    return *static_cast<DirichletRuns*>(slot.get());
}

void branch_suite(Ctx& x, DirichletRuns& d) {
    const double two_pi = 2 * std::numbers::pi;
    Csv csv("n,vertices,energy,relative_error,converged,max_subgradient,restarts_improved");
    double err = INFINITY;
    for (const auto& [n, r] : d.runs) {
        err = std::abs(r.report.total - two_pi) / two_pi;
        double sub = r.report.trace.empty() ? 0.0 : r.report.trace.back().max_subgradient;
        csv.row(n, r.u.mesh->num_vertices(), r.report.total, err, r.report.converged, sub, r.restarts_improved);
        if (!r.report.converged) x.warn("minimizer at n=" + std::to_string(n) + " not converged");
    }
    x.csv(csv);
    x.constant("energy", d.runs.back().second.report.total);
    x.at_most("energy_vs_2pi_n" + std::to_string(d.runs.back().first), err, x.cfg.dirichlet.energy_tolerance);
}

void holder_suite(Ctx& x, DirichletRuns& d) {
    const auto& c = x.cfg.dirichlet;
    Csv csv("n,center_x,center_y,r,l2_mean,ls_mean,ratio");
    double lo = INFINITY, hi = 0;
    for (const auto& [n, r] : d.runs) {
        auto rep = reverse_holder_check(r.u, Point2(0, 0), c.inner_radius, c.s, c.p);
        for (const auto& b : rep.balls) csv.row(n, b.center.x(), b.center.y(), b.r, b.l2_mean, b.ls_mean, b.ratio);
        lo = std::min(lo, rep.max_ratio);
        hi = std::max(hi, rep.max_ratio);
        x.constant("max_ratio_n" + std::to_string(n), rep.max_ratio);
    }
    x.csv(csv);
    x.at_most("refinement_stability", lo > 0 ? hi / lo : INFINITY, c.stability);
}

// ---------------------------------------------------------------------------
// current-analyze

struct Named {
    std::string name;
    SimplicialCurrent t;
    bool graph = true;  // a Q-valued graph (BV and scans apply)
    bool reversed = false;
};

struct CurrentSet {
    BaseGrid grid;
    std::vector<Named> currents;
    std::map<std::string, ExcessField> excess;
};

CurrentSet& current_set(Ctx& x, std::map<std::string, std::shared_ptr<void>>& cache) {
    auto& slot = cache["currents"];
    if (!slot) {
        const auto& c = x.cfg.current;
        auto set = std::make_shared<CurrentSet>();
        set->grid = BaseGrid::box(c.box[0], c.box[1], c.box[2], c.box[3], c.grid, c.grid);
        const BaseGrid& g = set->grid;
        if (!c.input.empty()) {
            std::ifstream in(c.input);
            if (!in) throw InvalidInput("current-analyze: cannot read " + c.input);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw InvalidInput("current-analyze: " + c.input + ": " + e.what());
            }
            set->currents.push_back({fs::path(c.input).stem().string(), SimplicialCurrent::from_json(j)});
        } else {
            for (const std::string& f : c.fixtures) {
                if (f == "flat") {
                    set->currents.push_back({"flat", fixtures::flat_sheets(g, {Vec::Zero(1), Vec::Ones(1)})});
                } else if (f == "tilted") {
                    Mat a(1, 2);
                    a << 0.3, -0.2;
                    set->currents.push_back({"tilted", fixtures::tilted_sheet(g, a)});
                } else if (f == "reversed") {
                    set->currents.push_back({"reversed", fixtures::orientation_reversed_pair(g, 2, 1), false, true});
                } else if (f == "random") {
                    auto fs_ = fixtures::random_two_valued(g, c.random_fields, stream(x.cfg.seed, "current/random"));
                    for (std::size_t k = 0; k < fs_.size(); ++k)
                        set->currents.push_back({"random_" + std::to_string(k), graph_current(fs_[k])});
                }
            }
        }
        for (const Named& t : set->currents) set->excess.emplace(t.name, excess_field(t.t, g));
        slot = set;
    }
    return *static_cast<CurrentSet*>(slot.get());
}

void excess_suite(Ctx& x, CurrentSet& s) {
    Csv csv("current,q,mass,excess,max_delta,max_maximal,unstable_cells");
    for (const Named& t : s.currents) {
        const ExcessField& f = s.excess.at(t.name);
        double md = 0, mm = 0, m = 0;
        int unstable = 0;
        for (int k = 0; k < s.grid.size(); ++k) {
            if (!s.grid.kept[k]) continue;
            md = std::max(md, f.delta[k]);
            mm = std::max(mm, f.maximal[k]);
            m += f.mass[k];
            unstable += f.delta_unstable[k];
        }
        csv.row(t.name, f.q, m, f.excess, md, mm, unstable);
        x.at_least("nonnegative_" + t.name, f.excess, -1e-12 * std::max(1.0, m));
    }
    x.csv(csv);
    if (s.currents.size() == 1) x.rep.csv.push_back({"excess_cells", s.excess.at(s.currents[0].name).to_csv()});
}

void ve_suite(Ctx& x, CurrentSet& s) {
    Csv csv("current,ve,e,ratio");
    for (const Named& t : s.currents) {
        auto r = varifold_excess(t.t, s.grid);
        csv.row(t.name, r.ve, r.e, r.ratio());
        x.at_most("ve_le_2e_" + t.name, r.ve, 2 * r.e + 1e-12);
        if (t.reversed) {
            x.at_most("reversed_ve_zero", r.ve, 1e-12);
            x.at_least("reversed_e_positive", r.e, 1e-6);
        }
    }
    x.csv(csv);
}

void bv_suite(Ctx& x, CurrentSet& s) {
    const auto& c = x.cfg.current;
    Csv csv("current,psi,level,blocks,max_ratio,max_lhs,max_rhs,holds");
    double coarea = 0;
    for (const Named& t : s.currents) {
        if (!t.graph) continue;
        auto rep = bv_estimate_check(t.t, s.grid, standard_test_functions(t.t.fiber()), c.bv_margin);
        std::map<std::pair<std::string, int>, std::tuple<int, double, double, double, bool>> agg;
        for (const BvRow& r : rep.rows) {
            auto& [blocks, ratio, lhs, rhs, ok] = agg.try_emplace({r.psi, r.level}, 0, 0.0, 0.0, 0.0, true).first->second;
            ++blocks;
            if (r.rhs > 0) ratio = std::max(ratio, r.lhs / r.rhs);
            lhs = std::max(lhs, r.lhs);
            rhs = std::max(rhs, r.rhs);
            ok = ok && r.holds;
        }
        for (const auto& [key, v] : agg)
            csv.row(t.name, key.first, key.second, std::get<0>(v), std::get<1>(v), std::get<2>(v), std::get<3>(v),
                    std::get<4>(v));
        coarea = std::max(coarea, rep.coarea_disagreement);
        // Rows carry their own absolute slack; the flag is authoritative.
        x.rep.assertions.push_back({x.suite, "bv_" + t.name, rep.holds(), rep.worst_ratio, 1 + c.bv_margin});
    }
    x.csv(csv);
    x.constant("coarea_disagreement", coarea);
    if (coarea > 1e-3) x.warn("coarea and direct total variation differ by " + num9(coarea));
}

QPoint taylor_value(double eps, Point2 p) {
    Vec a(2), b(2);
    a << eps * std::sin(p.x() + 0.3 * p.y()) + 1, eps * p.y() * p.x();
    b << -1 + eps * p.x(), eps * std::cos(p.y());
    return QPoint::from_points({a, b});
}

void taylor_suite(Ctx& x) {
    const auto& c = x.cfg.current;
    auto mesh = std::make_shared<const Mesh>(Mesh::grid_box(c.taylor_grid, c.taylor_grid, -1, -1, 1, 1));
    Csv csv("eps,region,lip,e,dirichlet,rel_error,c_min,c_max");
    std::vector<double> eps, rel;
    double cmin = 0, cmax = INFINITY;
    for (double e : c.taylor_eps) {
        QField g = QField::from_function(mesh, [&](Point2 p) { return taylor_value(e, p); });
        auto rep = taylor_check(g, quadrant_regions(*mesh));
        for (const auto& r : rep.rows) csv.row(e, r.region, rep.lip, r.e, r.dirichlet, r.rel_error, r.c_min, r.c_max);
        cmin = std::max(cmin, rep.c_min());
        cmax = std::min(cmax, rep.c_max());
        eps.push_back(e);
        rel.push_back(rep.rows[0].rel_error);
        x.rep.assertions.push_back({x.suite, "envelope_eps" + num9(e), rep.holds(c.taylor_c), c.taylor_c, c.taylor_c});
    }
    x.csv(csv);
    double slope = loglog_slope(eps, rel);
    x.constant("frozen_c", c.taylor_c);
    x.constant("c_min", cmin);
    x.constant("c_max", cmax);
    x.constant("slope", slope);
    x.at_most("slope", std::abs(slope - c.taylor_slope), c.taylor_slope_tolerance);
}

PolyForm stokes_form() {
    PolyForm w(4, 1);
    w.add(1.0, {1, 0, 1, 0}, {1}).add(0.5, {0, 1, 0, 2}, {0}).add(-0.7, {0, 0, 1, 1}, {2}).add(0.3, {1, 1, 0, 0}, {3});
    return w;
}

void stokes_suite(Ctx& x) {
    const auto& c = x.cfg.current;
    const PolyForm w = stokes_form();
    Csv csv("n,residual,order");
    double prev = 0, closed = 0;
    int prev_n = 0;
    for (int n : c.stokes_resolutions) {
        auto m = std::make_shared<const Mesh>(Mesh::grid_annulus(Point2(0, 0), 0.5, 1.0, n));
        QField f = QField::from_function(m, fixtures::branch);
        double r = graph_stokes_residual(f, fixtures::branch, w, 32);
        double order = prev > 0 ? std::log(prev / r) / std::log(double(n) / prev_n) : 0.0;
        csv.row(n, r, order);
        if (prev > 0) x.at_least("order_n" + std::to_string(n), order, c.stokes_order);
        if (n == 64 || n == c.stokes_resolutions.back()) x.at_most("residual_n" + std::to_string(n), r, c.stokes_max_residual);
        closed = std::max(closed, std::abs(stokes_check(graph_current(f), w)));
        prev = r;
        prev_n = n;
    }
    x.csv(csv);
    x.at_most("discrete_identity", closed, 1e-10);
}

void scans_suite(Ctx& x, CurrentSet& s) {
    const auto& c = x.cfg.current;
    Csv csv("current,scan,param,lhs,rhs,ratio");
    for (const Named& t : s.currents) {
        if (!t.graph) continue;
        const ExcessField& f = s.excess.at(t.name);
        auto hi = higher_integrability_scan(f, c.scan_ps);
        for (const auto& r : hi.rows) csv.row(t.name, "higher_integrability", r.p, r.lhs, std::pow(f.excess, r.p), r.ratio);
        auto st = strong_estimate_scan(f, c.scan_sigma);
        std::map<int, std::tuple<double, double, double>> lv;
        for (const auto& r : st.rows) {
            auto& [e, rhs, ratio] = lv[r.level];
            e = std::max(e, r.e);
            rhs = std::max(rhs, r.rhs);
            ratio = std::max(ratio, r.ratio);
        }
        for (const auto& [level, v] : lv)
            csv.row(t.name, "strong_estimate", double(level), std::get<0>(v), std::get<1>(v), std::get<2>(v));
        x.at_most("power_means_monotone_" + t.name, hi.monotone ? 0 : 1, 0);
        x.at_most("additivity_" + t.name, st.additivity_gap, 1e-12 * std::max(1.0, mass(t.t)));
    }
    x.csv(csv);
}

// ---------------------------------------------------------------------------
// lipschitz-approx

struct SpikeRuns {
    std::vector<LipschitzApprox> runs;
};

SpikeRuns& spike_runs(Ctx& x, std::map<std::string, std::shared_ptr<void>>& cache) {
    auto& slot = cache["spike"];
    if (!slot) {
        const auto& c = x.cfg.lipschitz;
        auto out = std::make_shared<SpikeRuns>();
        BaseGrid g = BaseGrid::ball(Point2(0, 0), c.radius, c.grid);
        auto t = graph_current(fixtures::spike_field(g, 2, c.height, Point2(c.at[0], c.at[1]), c.tilt));
        for (double eta : c.etas) out->runs.push_back(lipschitz_approximate(t, g, eta, c.margin));
        slot = out;
    }
    return *static_cast<SpikeRuns*>(slot.get());
}

void approx_suite(Ctx& x, SpikeRuns& s) {
    const auto& c = x.cfg.lipschitz;
    Csv csv("eta,excess,r0,k_cells,cells,lip,lip_over_sqrt_eta,w1_ratio,graph_mismatch,coverage_holds");
    for (const auto& la : s.runs) {
        const auto& r = la.report;
        csv.row(r.eta, r.excess, r.r0, r.k_cells, r.cells, r.lip, r.lip_over_sqrt_eta, r.w1_ratio, r.graph_mismatch,
                r.coverage_holds);
        std::string tag = "_eta" + num9(r.eta);
        x.at_most("graph_on_k" + tag, r.graph_mismatch, 1e-12);
        x.at_most("lip" + tag, r.lip, c.lip_c * std::sqrt(r.eta));
    }
    x.constant("frozen_lip_c", c.lip_c);
    x.csv(csv);
}

void coverage_suite(Ctx& x, SpikeRuns& s) {
    Csv csv("eta,r,lhs,rhs,holds");
    for (const auto& la : s.runs) {
        double worst = 0;
        for (const auto& row : la.report.coverage) {
            csv.row(la.report.eta, row.r, row.lhs, row.rhs, row.holds);
            if (row.rhs > 0) worst = std::max(worst, row.lhs / row.rhs);
            else if (row.lhs > 0) worst = INFINITY;
        }
        x.rep.assertions.push_back({x.suite, "coverage_eta" + num9(la.report.eta), la.report.coverage_holds, worst,
                                    1 + x.cfg.lipschitz.margin});
    }
    x.csv(csv);
}

// ---------------------------------------------------------------------------
// competitor

void ledger_suite(Ctx& x) {
    const auto& c = x.cfg.competitor;
    auto mesh = std::make_shared<const Mesh>(Mesh::grid_disk(Point2(0, 0), c.radius, c.grid));
    std::vector<std::pair<std::string, QField>> fields = {
        {"smooth", QField::from_function(mesh,
                                         [](Point2 p) {
                                             return QPoint::from_points({Vec::Constant(1, std::sin(p.x()) + 0.3 * p.y()),
                                                                         Vec::Constant(1, 0.5 * p.x() * p.x() - 0.2)});
                                         })},
        {"branch", QField::from_function(mesh, fixtures::branch)}};
    Csv csv("field,mu,eps,energy_f,energy_g,energy_inner,energy_mid,energy_outer,energy_f_inner,energy_f_mid,"
            "energy_f_outer,lip_f,lip_g,decode_residual,boundary_mismatch,l2_distance");
    for (const auto& [name, f] : fields)
        for (double mu : c.mus) {
            auto proj = AlmostProjection::build(EmbeddingSpec::standard(f.q, f.n), mu,
                                                rho_options(x, "competitor/build"));
            CompetitorOptions o;
            o.mu = mu;
            o.eps = c.eps;
            const auto r = build_competitor(f, proj, o).report;
            csv.row(name, mu, c.eps, r.energy_f, r.energy_g, r.energy_inner, r.energy_mid, r.energy_outer,
                    r.energy_f_inner, r.energy_f_mid, r.energy_f_outer, r.lip_f, r.lip_g, r.max_decode_residual,
                    r.boundary_mismatch, r.l2_distance);
            std::string tag = "_" + name + "_mu" + num9(mu);
            x.at_most("on_cone" + tag, r.max_decode_residual, 1e-6);
            x.at_most("boundary" + tag, r.boundary_mismatch, 1e-9);
            x.at_most("regions" + tag, r.energy_inner + r.energy_mid + r.energy_outer, r.energy_g + 1e-9);
        }
    x.csv(csv);
}

// ---------------------------------------------------------------------------
// report

void index_suite(Ctx& x) {
    const std::string& dir = x.cfg.report.input;
    if (dir.empty() || !fs::is_directory(dir)) throw InvalidInput("report: not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    Csv csv("file,rows,columns,header");
    int summaries = 0;
    for (const fs::path& p : files) {
        std::string rel = fs::relative(p, dir).generic_string();
        std::ifstream in(p);
        std::string line;
        if (p.extension() == ".csv") {
            std::string header;
            std::getline(in, header);
            int rows = 0;
            while (std::getline(in, line)) rows += !line.empty();
            int cols = header.empty() ? 0 : 1 + int(std::count(header.begin(), header.end(), ','));
            std::string quoted = "\"" + header + "\"";
            csv.row(rel, rows, cols, quoted);
        } else if (p.filename() == "summary.txt") {
            ++summaries;
            std::string where = fs::relative(p.parent_path(), dir).generic_string();
            while (std::getline(in, line)) {
                std::istringstream ls(line);
                std::string status, suite, name, value, bound;
                ls >> status >> suite >> name >> value >> bound;
                if (status != "PASS" && status != "FAIL") continue;
                auto field = [](const std::string& kv) {
                    auto eq = kv.find('=');
                    return eq == std::string::npos ? NAN : std::strtod(kv.c_str() + eq + 1, nullptr);
                };
                x.rep.assertions.push_back(
                    {where == "." ? suite : where + "/" + suite, name, status == "PASS", field(value), field(bound)});
            }
        }
    }
    x.csv(csv);
    x.constant("summaries", summaries);
    if (summaries == 0) x.warn("no summary.txt under " + dir);
}

// ---------------------------------------------------------------------------

void validate(const std::string& cmd, const Config& c) {
    if (cmd == "metric-bench") {
        need(!c.metric.qs.empty() && !c.metric.ns.empty(), "metric-bench.qs and ns must be nonempty");
        for (int q : c.metric.qs) need(q >= 1 && q <= 8, "metric-bench.qs in 1..8");
        for (int n : c.metric.ns) need(n >= 1, "metric-bench.ns >= 1");
        need(c.metric.pairs > 0 && c.metric.axiom_samples > 0, "metric-bench sample counts > 0");
    } else if (cmd == "embed-verify") {
        need(c.embed.lip_pairs > 0 && c.embed.decode_points > 0 && c.embed.face_samples > 0,
             "embed-verify sample counts > 0");
    } else if (cmd == "rho-star-verify") {
        const auto& r = c.rho;
        need(r.q >= 2 && r.n >= 1, "rho-star-verify needs q >= 2, n >= 1");
        need(r.mus.size() >= 2, "rho-star-verify.mus needs two values");
        for (double m : r.mus) need(m > 0 && m < 1, "rho-star-verify.mus in (0, 1)");
        need(r.tube_mu > 0 && r.energy_mu > 0, "rho-star-verify mu > 0");
        need(r.sup_samples > 0 && r.tube_samples > 0 && r.energy_fields > 0 && r.energy_grid >= 2 &&
                 r.calibration_samples > 0,
             "rho-star-verify sample counts > 0");
    } else if (cmd == "dirichlet-min") {
        need(!c.dirichlet.resolutions.empty(), "dirichlet-min.resolutions nonempty");
        for (int n : c.dirichlet.resolutions) need(n >= 4, "dirichlet-min.resolutions >= 4");
        need(c.dirichlet.s >= 1 && c.dirichlet.p >= 2, "dirichlet-min needs s >= 1, p >= 2");
    } else if (cmd == "current-analyze") {
        const auto& k = c.current;
        need(k.box.size() == 4 && k.box[2] > k.box[0] && k.box[3] > k.box[1], "current-analyze.box = x0 y0 x1 y1");
        need(k.grid >= 2 && (k.grid & (k.grid - 1)) == 0, "current-analyze.grid must be a power of two");
        need(k.random_fields >= 0, "current-analyze.random_fields >= 0");
        for (const auto& f : k.fixtures)
            need(f == "flat" || f == "tilted" || f == "reversed" || f == "random", "unknown fixture " + f);
        need(k.taylor_eps.size() >= 2 && k.taylor_grid >= 2, "current-analyze Taylor sweep needs two eps");
        need(k.stokes_resolutions.size() >= 1, "current-analyze.stokes_resolutions nonempty");
        need(k.taylor_c > 0 && k.bv_margin >= 0, "current-analyze constants must be positive");
    } else if (cmd == "lipschitz-approx") {
        const auto& l = c.lipschitz;
        need(l.grid >= 8 && l.radius > 0 && l.at.size() == 2, "lipschitz-approx grid, radius, at = x y");
        for (double e : l.etas) need(e > 0, "lipschitz-approx.etas > 0");
        need(l.lip_c > 0 && l.margin >= 0, "lipschitz-approx constants");
    } else if (cmd == "competitor") {
        need(c.competitor.grid >= 8 && c.competitor.radius > 0 && c.competitor.eps > 0, "competitor grid, radius, eps");
        for (double m : c.competitor.mus) need(m > 0 && m < 1, "competitor.mus in (0, 1)");
    }
}

void dispatch(Ctx& x, const std::string& name, std::map<std::string, std::shared_ptr<void>>& cache) {
    if (name == "oracle") oracle_suite(x);
    else if (name == "axioms") axioms_suite(x);
    else if (name == "xi") xi_suite(x);
    else if (name == "faces") faces_suite(x);
    else if (name == "coincidence") coincidence_suite(x);
    else if (name == "slope") slope_suite(x);
    else if (name == "energy") energy_suite(x);
    else if (name == "branch") branch_suite(x, dirichlet_runs(x, cache));
    else if (name == "reverse_holder") holder_suite(x, dirichlet_runs(x, cache));
    else if (name == "excess") excess_suite(x, current_set(x, cache));
    else if (name == "ve") ve_suite(x, current_set(x, cache));
    else if (name == "bv") bv_suite(x, current_set(x, cache));
    else if (name == "taylor") taylor_suite(x);
    else if (name == "stokes") stokes_suite(x);
    else if (name == "scans") scans_suite(x, current_set(x, cache));
    else if (name == "approx") approx_suite(x, spike_runs(x, cache));
    else if (name == "coverage") coverage_suite(x, spike_runs(x, cache));
    else if (name == "ledger") ledger_suite(x);
    else if (name == "index") index_suite(x);
}

}  // namespace

std::uint64_t stream(std::uint64_t seed, const std::string& tag) {
    // FNV-1a over the tag, mixed with the seed through splitmix64.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : tag) h = (h ^ ch) * 1099511628211ull;
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

bool Report::failed() const {
    return std::any_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return !a.pass; });
}

const Assertion* Report::find(const std::string& suite, const std::string& name) const {
    for (const auto& a : assertions)
        if (a.suite == suite && a.name == name) return &a;
    return nullptr;
}

double Report::constant(const std::string& name) const {
    for (const auto& [k, v] : constants)
        if (k == name) return v;
    return NAN;
}

std::string Report::summary(bool strict) const {
    std::string s = "command " + command + "\nseed " + std::to_string(seed) + "\n";
    for (const auto& a : assertions)
        s += std::string(a.pass ? "PASS " : "FAIL ") + a.suite + " " + a.name + " value=" + num9(a.value) +
             " bound=" + num9(a.bound) + "\n";
    for (const auto& [k, v] : constants) s += "constant " + k + " " + num9(v) + "\n";
    for (const auto& w : warnings) s += "warning " + w + "\n";
    s += std::string("result ") + (ok(strict) ? "PASS" : "FAIL") + "\n";
    return s;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c = {"metric-bench", "embed-verify",     "rho-star-verify", "dirichlet-min",
                                               "current-analyze", "lipschitz-approx", "competitor",      "report"};
    return c;
}

const std::vector<std::string>& suites(const std::string& command) {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"metric-bench", {"oracle", "axioms"}},
        {"embed-verify", {"xi", "faces"}},
        {"rho-star-verify", {"coincidence", "slope", "energy"}},
        {"dirichlet-min", {"branch", "reverse_holder"}},
        {"current-analyze", {"excess", "ve", "bv", "taylor", "stokes", "scans"}},
        {"lipschitz-approx", {"approx", "coverage"}},
        {"competitor", {"ledger"}},
        {"report", {"index"}}};
    auto it = s.find(command);
    if (it == s.end()) throw InvalidInput("unknown command: " + command);
    return it->second;
}

Report run(const std::string& command, const Config& config, const std::vector<std::string>& selected) {
    const auto& all = suites(command);
    for (const auto& s : selected)
        if (std::find(all.begin(), all.end(), s) == all.end())
            throw InvalidInput("unknown suite '" + s + "' for " + command);
    validate(command, config);

    Report rep;
    rep.command = command;
    rep.seed = config.seed;
    std::map<std::string, std::shared_ptr<void>> cache;
    for (const std::string& name : all) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
        Ctx x{config, rep, name};
        auto t0 = std::chrono::steady_clock::now();
        try {
            dispatch(x, name, cache);
        } catch (const InvalidInput&) {
            throw;
        } catch (const Error& e) {
            // Hypothesis or capability failures end the suite; later suites still run.
            rep.assertions.push_back({name, "completed", false, 0.0, 0.0});
            x.warn(e.what());
        }
        rep.seconds.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
    }
    return rep;
}

void write(const Report& report, const std::string& dir, bool strict) {
    fs::create_directories(dir);
    auto put = [&](const std::string& file, const std::string& body) {
        std::ofstream out(fs::path(dir) / file, std::ios::binary);
        if (!out) throw InvalidInput("cannot write " + (fs::path(dir) / file).string());
        out << body;
    };
    for (const auto& [suite, body] : report.csv) put(suite + ".csv", body);
    put("summary.txt", report.summary(strict));
    std::string t;
    for (const auto& [suite, s] : report.seconds) t += suite + " " + num9(s) + "\n";
    put("timing.txt", t);
}

}  // namespace qv::campaign
