#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qv/dirichlet.hpp"
#include "qv/error.hpp"

using namespace qv;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

Vec vec1(double a) { return Vec::Constant(1, a); }
Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

QPoint single(const Vec& a) { return QPoint::from_points({a}); }

// [[z^{1/2}]] + [[-z^{1/2}]]
QPoint branch(Point2 x) {
    auto s = std::sqrt(std::complex<double>(x.x(), x.y()));
    return QPoint::from_points({vec2(s.real(), s.imag()), vec2(-s.real(), -s.imag())});
}

MeshPtr share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

MeshPtr disk(int n, double r = 1.0) { return share(Mesh::grid_disk(Point2(0, 0), r, n)); }

// Exact integral of a quadratic over the mesh (edge-midpoint rule).
double integrate_quadratic(const Mesh& m, const std::function<double(Point2)>& f) {
    double s = 0;
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& t = m.cells()[c];
        const Point2 &a = m.vertices()[t[0]], &b = m.vertices()[t[1]], &d = m.vertices()[t[2]];
        s += m.cell_area()[c] * (f((a + b) / 2) + f((b + d) / 2) + f((a + d) / 2)) / 3;
    }
    return s;
}

}  // namespace

TEST_CASE("energy: constant and linear fields") {
    auto m = share(Mesh::grid_box(32, 32, 0, 0, 1, 1));
    QPoint c = QPoint::from_points({vec2(1, 2), vec2(-3, 0.5), vec2(1, 2)});
    auto e0 = dirichlet_energy(QField::from_function(m, [&](Point2) { return c; }));
    CHECK(e0.total == 0.0);

    Eigen::Matrix2d a;
    a << 1.5, -0.25, 0.75, 2.0;
    auto e = dirichlet_energy(QField::from_function(m, [&](Point2 x) { return single(a * x); }));
    CHECK(std::abs(e.total - a.squaredNorm()) <= 1e-6);
    double sum = 0;
    for (double x : e.cell_energy) sum += x;
    CHECK(std::abs(sum - e.total) <= 1e-10);
    // Constant gradient: every cell has density |A|^2.
    for (double d : e.density) CHECK(std::abs(d - a.squaredNorm()) <= 1e-9);
}

TEST_CASE("energy: equals the P1 energy of the embedded field on the line") {
    auto m = share(Mesh::grid_box(16, 16, -1, -1, 1, 1));
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int q = 1; q <= 3; ++q) {
        EmbeddingSpec spec = EmbeddingSpec::standard(q, 1);
        std::vector<double> c(3 * q);
        for (double& x : c) x = g(rng);
        QField u = QField::from_function(m, [&](Point2 x) {
            std::vector<Vec> p;
            for (int i = 0; i < q; ++i)
                p.push_back(vec1(c[3 * i] * x.x() + c[3 * i + 1] * std::sin(2 * x.y()) + c[3 * i + 2]));
            return QPoint::from_points(p);
        });
        VField w;
        for (const QPoint& p : u.values) w.push_back(xi(p, spec));
        double e = dirichlet_energy(u).total;
        CHECK(std::abs(e - p1_energy(*m, w)) <= 1e-9 * (1 + e));
    }
}

TEST_CASE("energy: smooth field converges at first order or better") {
    auto f = [](Point2 x) { return vec1(std::sin(2 * x.x()) * std::cos(x.y())); };
    // int_0^1 int_0^1 |grad|^2 for sin(2x) cos(y)
    const double exact = 4 * (0.5 + std::sin(4.0) / 8) * (0.5 + std::sin(2.0) / 4) +
                         (0.5 - std::sin(4.0) / 8) * (0.5 - std::sin(2.0) / 4);
    std::vector<double> hs, errs;
    for (int n : {8, 16, 32, 64}) {
        auto m = share(Mesh::grid_box(n, n, 0, 0, 1, 1));
        double e = dirichlet_energy(QField::from_function(m, [&](Point2 x) { return single(f(x)); })).total;
        hs.push_back(1.0 / n);
        errs.push_back(std::abs(e - exact));
    }
    CHECK(loglog_slope(hs, errs) >= 1.0);
}

TEST_CASE("energy: branched field approaches 2 pi") {
    double prev = INFINITY;
    for (int n : {16, 32, 64}) {
        double e = dirichlet_energy(QField::from_function(disk(n), branch)).total;
        double err = std::abs(e - kTwoPi) / kTwoPi;
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("minimize: constant boundary gives the constant map") {
    auto m = disk(16);
    QPoint a = QPoint::repeated(3, vec2(0.5, -1));
    auto r = minimize_dirichlet(m, boundary_trace(*m, [&](Point2) { return a; }));
    CHECK(r.report.total <= 1e-20);
    for (const QPoint& p : r.u.values) CHECK(metric_g(p, a) <= 1e-10);
}

TEST_CASE("minimize: harmonic boundary data") {
    // Re z^2 on [-1,1]^2: int |grad|^2 = int 4 r^2 = 32/3.
    auto re_z2 = [](Point2 x) { return single(vec1(x.x() * x.x() - x.y() * x.y())); };
    auto box = share(Mesh::grid_box(64, 64, -1, -1, 1, 1));
    auto r = minimize_dirichlet(box, boundary_trace(*box, re_z2));
    CHECK(std::abs(r.report.total - 32.0 / 3.0) <= 0.02 * 32.0 / 3.0);
    CHECK(r.report.converged);

    // On the staircase disk the harmonic energy is the integral over the mesh domain.
    auto m = disk(64);
    auto rd = minimize_dirichlet(m, boundary_trace(*m, re_z2));
    double exact = integrate_quadratic(*m, [](Point2 x) { return 4 * x.squaredNorm(); });
    CHECK(std::abs(rd.report.total - exact) <= 0.02 * exact);
}

TEST_CASE("minimize: branched boundary data") {
    auto m = disk(64);
    auto bd = boundary_trace(*m, branch);
    MinimizeOptions opts;
    auto r = minimize_dirichlet(m, bd, opts);
    CHECK(std::abs(r.report.total - kTwoPi) <= 0.05 * kTwoPi);
    CHECK(r.report.converged);
    const auto& tr = r.report.trace;
    REQUIRE(!tr.empty());
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i].energy <= tr[i - 1].energy);
    double tol = 1e-8 * (tr.front().energy + 1);
    CHECK(tr.back().max_subgradient <= tol);
    for (const auto& [v, p] : bd) CHECK(r.u.values[v].equals(p));
    // Every value stays inside the ball holding the boundary values.
    for (const QPoint& p : r.u.values)
        for (int i = 0; i < 2; ++i) CHECK(p.vec(i).norm() <= 1.0 + 1e-9);
    // A restart from the output does not move the energy.
    opts.restarts = 0;
    auto again = minimize_dirichlet_from(r.u, opts);
    CHECK(std::abs(again.report.total - r.report.total) <= tol);
}

TEST_CASE("minimize: missing boundary data") {
    auto m = disk(8);
    auto bd = boundary_trace(*m, branch);
    bd.erase(bd.begin());
    CHECK_THROWS_AS(minimize_dirichlet(m, bd), InvalidInput);
}

TEST_CASE("reverse Hoelder: constant gradient") {
    auto m = share(Mesh::grid_box(32, 32, -1, -1, 1, 1));
    Eigen::Matrix2d a;
    a << 1, 2, -0.5, 0.25;
    QField u = QField::from_function(m, [&](Point2 x) { return single(a * x); });
    const double p = 3;
    auto r = reverse_holder_check(u, Point2(0, 0), 0.5, 1.5, p);
    REQUIRE(r.balls.size() == 2);
    for (const auto& b : r.balls) CHECK(std::abs(b.ratio - 1.0) <= 1e-9);
    double inner = 0;
    for (int c = 0; c < m->num_cells(); ++c)
        if (m->centroid(c).norm() <= 0.5) inner += m->cell_area()[c];
    double expect = std::pow(inner, 1 / p) / std::sqrt(4.0);  // the gradient norm cancels
    CHECK(std::abs(r.lp_ratio - expect) <= 1e-9);

    CHECK_THROWS_AS(reverse_holder_check(u, Point2(0, 0), 0.5, 2.0, p), InvalidInput);
    CHECK_THROWS_AS(reverse_holder_check(u, Point2(0, 0), 0.5, 1.5, 2.0), InvalidInput);
    CHECK_THROWS_AS(reverse_holder_check(u, Point2(0, 0), 1.5, 1.5, p), InvalidInput);
}

TEST_CASE("reverse Hoelder: branched minimizer is refinement-stable") {
    std::vector<double> ratios;
    for (int n : {32, 64}) {
        auto m = disk(n);
        auto r = minimize_dirichlet(m, boundary_trace(*m, branch));
        auto rep = reverse_holder_check(r.u, Point2(0, 0), 0.5, 1.5, 3.0);
        CHECK(std::isfinite(rep.max_ratio));
        ratios.push_back(rep.max_ratio);
    }
    CHECK(std::max(ratios[0], ratios[1]) <= 2 * std::min(ratios[0], ratios[1]));

    // Control: a rough field gives a report, no bound asserted.
    auto m = disk(16);
    std::mt19937_64 rng(9);
    QField u(m, std::vector<QPoint>(m->num_vertices(), QPoint(2, 2)));
    for (auto& p : u.values) p = random_qpoint(2, 2, 1.0, rng);
    auto rep = reverse_holder_check(u, Point2(0, 0), 0.5, 1.5, 3.0);
    CHECK(rep.balls.size() == 2);
}

TEST_CASE("truncate: Lipschitz field below the level is unchanged") {
    auto m = share(Mesh::grid_box(16, 16, 0, 0, 1, 1));
    QField u = QField::from_function(m, [](Point2 x) {
        return QPoint::from_points({vec1(x.x()), vec1(1 - 0.5 * x.y())});
    });
    auto r = lipschitz_truncate(u, 2.0);
    CHECK(r.report.replaced == 0);
    for (int v = 0; v < m->num_vertices(); ++v) CHECK(r.u.values[v].equals(u.values[v]));
    CHECK_THROWS_AS(lipschitz_truncate(u, 0.0), InvalidInput);
}

TEST_CASE("truncate: spike removal") {
    auto m = share(Mesh::grid_box(32, 32, 0, 0, 1, 1));
    const double h = 1.0 / 32;
    auto base = [](Point2 x) {
        return QPoint::from_points({vec1(x.x() + 0.5 * x.y()), vec1(2 - x.y())});
    };
    QField clean = QField::from_function(m, base);
    QField u = clean;
    const int sv = m->grid()->vid(16, 16);
    u.values[sv].point(0)[0] += 1.0;
    const double level = 3.0;
    auto r = lipschitz_truncate(u, level);
    CHECK(r.report.replaced > 0);
    CHECK(metric_g(r.u.values[sv], clean.values[sv]) <= 0.1);
    CHECK(r.report.lip_out <= level);
    CHECK(r.report.energy_out < r.report.energy_in);
    for (int v = 0; v < m->num_vertices(); ++v) {
        if (r.replaced[v]) {
            CHECK((m->vertices()[v] - m->vertices()[sv]).norm() <= 4 * h);
        } else {
            CHECK(r.u.values[v].equals(u.values[v]));
        }
    }

    // On a constant background the spike is removed exactly.
    QPoint a = QPoint::from_points({vec1(0.25), vec1(1.0)});
    QField c(m, std::vector<QPoint>(m->num_vertices(), a));
    c.values[sv] = QPoint::from_points({vec1(0.25), vec1(2.0)});
    auto rc = lipschitz_truncate(c, 1.0);
    for (const QPoint& p : rc.u.values) CHECK(metric_g(p, a) <= 1e-9);
}

TEST_CASE("truncate: boundary-preserving variant reports the trace error") {
    auto m = share(Mesh::grid_box(16, 16, 0, 0, 1, 1));
    QPoint a = QPoint::from_points({vec1(0.0), vec1(1.0)});
    QField u(m, std::vector<QPoint>(m->num_vertices(), a));
    const int sv = m->grid()->vid(8, 0);
    u.values[sv] = QPoint::from_points({vec1(0.0), vec1(3.0)});
    auto free = lipschitz_truncate(u, 1.0);
    CHECK(free.replaced[sv]);
    CHECK(free.report.trace_error > 0);
    TruncationOptions keep;
    keep.preserve_boundary = true;
    auto kept = lipschitz_truncate(u, 1.0, keep);
    CHECK(!kept.replaced[sv]);
    CHECK(kept.report.trace_error == 0.0);
    for (int v = 0; v < m->num_vertices(); ++v)
        if (m->boundary()[v]) CHECK(kept.u.values[v].equals(u.values[v]));
}

TEST_CASE("interpolation: matching trace") {
    auto m = disk(32);
    QField f = QField::from_function(m, branch);
    for (double eps : {0.2, 0.1, 0.05}) {
        auto r = interpolate_annulus(f, boundary_trace(f), eps);
        const auto& rep = r.report;
        for (int v = 0; v < m->num_vertices(); ++v)
            if (m->boundary()[v]) CHECK(r.h.values[v].equals(f.values[v]));
        CHECK(rep.mismatch == 0.0);
        CHECK(rep.energy_h <= rep.energy_f + 2 * eps * rep.boundary_energy_f);
    }
    CHECK_THROWS_AS(interpolate_annulus(f, boundary_trace(f), 1.5), InvalidInput);
    BoundaryData wrong = boundary_trace(*m, [](Point2) { return QPoint::repeated(2, vec1(0)); });
    CHECK_THROWS_AS(interpolate_annulus(f, wrong, 0.1), InvalidInput);
}

TEST_CASE("interpolation: mismatched data, fitted constant") {
    // Frozen from an eps sweep on these fixtures (largest fit 0.88).
    const double c_frozen = 2.0, lip_c = 2.0;
    auto m = disk(32);
    auto rotate = [](Point2 x, double t) {
        return Point2(std::cos(t) * x.x() - std::sin(t) * x.y(), std::sin(t) * x.x() + std::cos(t) * x.y());
    };
    struct Case {
        QField f;
        BoundaryData g;
    };
    std::vector<Case> cases;
    cases.push_back({QField::from_function(m, branch),
                     boundary_trace(*m, [&](Point2 x) { return branch(rotate(x, 0.3)); })});
    cases.push_back({QField::from_function(m, [](Point2 x) { return single(vec2(x.x() + 0.5 * x.y(), -x.y())); }),
                     boundary_trace(*m, [](Point2 x) { return single(vec2(x.y(), x.x())); })});
    for (const auto& cs : cases)
        for (double eps : {0.2, 0.1, 0.05}) {
            auto r = interpolate_annulus(cs.f, cs.g, eps);
            const auto& rep = r.report;
            for (const auto& [v, p] : cs.g) CHECK(r.h.values[v].equals(p));
            CHECK(rep.energy_h <= rep.energy_f + eps * (rep.boundary_energy_g + rep.boundary_energy_f) +
                                      c_frozen * rep.mismatch / eps);
            CHECK(rep.lip_h <= lip_c * (rep.lip_f + rep.lip_g + rep.sup_mismatch / eps));
            CHECK(std::abs(rep.energy_h - dirichlet_energy(r.h).total) <= 1e-12 * rep.energy_h);
        }
}

TEST_CASE("mollify: constants, linear fields and the Fourier multiplier") {
    const int n = 64;
    const double h = 1.0 / n;
    auto m = share(Mesh::grid_box(n, n, 0, 0, 1, 1));
    VField c(m->num_vertices(), vec2(1.5, -2));
    for (const Vec& x : mollify(*m, c, 4 * h)) CHECK((x - vec2(1.5, -2)).norm() <= 1e-14);

    const double eps = 4 * h;
    VField lin;
    for (const Point2& x : m->vertices()) lin.push_back(vec2(2 * x.x() - x.y(), 0.5 * x.y() + 1));
    VField ml = mollify(*m, lin, eps);
    auto interior = [&](const Point2& x) {
        return x.x() >= eps && x.x() <= 1 - eps && x.y() >= eps && x.y() <= 1 - eps;
    };
    for (int v = 0; v < m->num_vertices(); ++v)
        if (interior(m->vertices()[v])) CHECK((ml[v] - lin[v]).norm() <= 1e-10);

    const double k = 6.0;
    VField s;
    for (const Point2& x : m->vertices()) s.push_back(vec1(std::sin(k * x.x())));
    // Discrete multiplier of the normalised kernel at frequency k.
    auto multiplier = [&](double e) {
        double num = 0, den = 0;
        for (int a = -int(std::ceil(e / h)); a <= int(std::ceil(e / h)); ++a) {
            double t = a * h / e, w = std::abs(t) >= 1 ? 0 : (1 - t * t) * (1 - t * t);
            num += w * std::cos(k * a * h);
            den += w;
        }
        return num / den;
    };
    double grad = std::sqrt(p1_energy(*m, s));
    for (double e : {2 * h, 4 * h, 8 * h}) {
        VField ms = mollify(*m, s, e);
        double mult = multiplier(e), err2 = 0;
        auto lumped_err = [&](int v) { return (ms[v] - s[v]).squaredNorm(); };
        for (int v = 0; v < m->num_vertices(); ++v) {
            const Point2& x = m->vertices()[v];
            if (x.x() >= e && x.x() <= 1 - e) CHECK(std::abs(ms[v][0] - mult * s[v][0]) <= 1e-12);
            err2 += h * h * lumped_err(v);
        }
        CHECK(std::sqrt(err2) <= e * grad);
    }
    CHECK_THROWS_AS(mollify(*m, s, 1.5 * h), InvalidInput);
}

TEST_CASE("competitor: constant map is reproduced") {
    auto m = disk(40, 2.0);
    auto proj = AlmostProjection::build(EmbeddingSpec::standard(2, 1), 0.1);
    QPoint a = QPoint::repeated(2, vec1(0.7));
    QField f(m, std::vector<QPoint>(m->num_vertices(), a));
    CompetitorOptions o;
    o.eps = 0.2;
    auto r = build_competitor(f, proj, o);
    for (const QPoint& p : r.g.values) CHECK(metric_g(p, a) <= 1e-9);
    CHECK(r.report.energy_g <= 1e-18);

    CompetitorOptions bad = o;
    bad.r2 = bad.r1;
    CHECK_THROWS_AS(build_competitor(f, proj, bad), InvalidInput);
    auto other = AlmostProjection::build(EmbeddingSpec::standard(2, 2), 0.1);
    CHECK_THROWS_AS(build_competitor(f, other, o), InvalidInput);
}

TEST_CASE("competitor: smooth two-sheet map, error shrinks with mu and eps") {
    auto m = disk(80, 2.0);
    QField f = QField::from_function(m, [](Point2 x) {
        return QPoint::from_points({vec1(std::sin(x.x()) + 0.3 * x.y()), vec1(0.5 * x.x() * x.x() - 0.2)});
    });
    double prev = INFINITY;
    for (double s : {0.2, 0.1, 0.05}) {
        auto proj = AlmostProjection::build(EmbeddingSpec::standard(2, 1), s);
        CompetitorOptions o;
        o.mu = s;
        o.eps = 2 * s;
        auto r = build_competitor(f, proj, o);
        CHECK(r.report.l2_distance < prev);
        prev = r.report.l2_distance;
        CHECK(r.report.boundary_mismatch <= 1e-9);
        CHECK(r.report.max_decode_residual <= 1e-6);
    }
}

TEST_CASE("competitor: branched map, Q-valued with the overhead split by region") {
    auto m = disk(40, 2.0);
    QField f = QField::from_function(m, branch);
    const EmbeddingSpec spec = EmbeddingSpec::standard(2, 2);
    std::vector<double> lips;
    for (double mu : {0.2, 0.1}) {
        auto proj = AlmostProjection::build(spec, mu);
        CompetitorOptions o;
        o.mu = mu;
        o.eps = 0.2;
        auto r = build_competitor(f, proj, o);
        const auto& rep = r.report;
        CHECK(rep.max_decode_residual <= 1e-6);
        for (const Vec& w : r.g_embedded) CHECK(distance_to_cone(w, spec) <= 1e-6);
        CHECK(rep.boundary_mismatch <= 1e-9);
        CHECK(rep.energy_inner + rep.energy_mid + rep.energy_outer <= rep.energy_g + 1e-9);
        CHECK(std::isfinite(rep.energy_g));
        lips.push_back(rep.lip_g);
    }
    CHECK(lips[1] <= lips[0]);
}
