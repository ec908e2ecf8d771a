#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qv/currents.hpp"
#include "qv/error.hpp"

using namespace qv;

namespace {

Vec vec1(double a) { return Vec::Constant(1, a); }

QPoint branch_point(Point2 x) { return fixtures::branch(x); }

// omega on R^4 used for the Stokes checks.
PolyForm test_one_form() {
    PolyForm w(4, 1);
    w.add(1.0, {1, 0, 1, 0}, {1}).add(0.5, {0, 1, 0, 2}, {0}).add(-0.7, {0, 0, 1, 1}, {2}).add(0.3, {1, 1, 0, 0}, {3});
    return w;
}

}  // namespace

TEST_CASE("simplicial current: volume, orientation, projector") {
    SimplicialCurrent t;
    t.ambient = 3;
    t.base = 2;
    t.dim = 2;
    Vec a(3), b(3), c(3);
    a << 0, 0, 0;
    b << 1, 0, 0;
    c << 0, 1, 1;
    t.cells.push_back({{a, b, c}, 1});
    CHECK(t.volume(0) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-14));
    Vec o = t.orientation(0);
    CHECK(o.norm() == doctest::Approx(1.0));
    // subsets (0,1), (0,2), (1,2): e1 = (1,0,0), e2 = (0,1,1)
    CHECK(o[0] == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(o[1] == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(o[2] == doctest::Approx(0.0));
    Mat p = t.tangent_projector(0);
    CHECK((p * p - p).norm() < 1e-14);
    CHECK(p.trace() == doctest::Approx(2.0));
    t.validate();
    auto back = SimplicialCurrent::from_json(t.to_json());
    CHECK(back.cells[0].v[2] == c);
    t.cells.push_back({{a, b, b}, 1});
    CHECK_THROWS_AS(t.validate(), InvalidInput);
}

TEST_CASE("graph current masses") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 8, 8);
    SUBCASE("flat sheets") {
        auto t = fixtures::flat_sheets(g, {vec1(0), vec1(1), vec1(2)});
        CHECK(mass(t) == doctest::Approx(12.0).epsilon(1e-13));
    }
    SUBCASE("coincident sheets merge") {
        auto t = fixtures::flat_sheets(g, {vec1(0.5), vec1(0.5)});
        CHECK(t.cells.size() == 128);
        for (const auto& c : t.cells) CHECK(c.theta == 2);
        CHECK(mass(t) == doctest::Approx(8.0).epsilon(1e-13));
    }
    SUBCASE("tilted sheet") {
        Mat a(2, 2);
        a << 0.3, -0.2, 0.1, 0.4;
        auto t = fixtures::tilted_sheet(g, a);
        double jac = std::sqrt((Mat::Identity(2, 2) + a.transpose() * a).determinant());
        CHECK(mass(t) == doctest::Approx(4 * jac).epsilon(1e-12));
    }
    SUBCASE("branch point inside a cell throws") {
        // Origin strictly inside a triangle.
        auto m = std::make_shared<Mesh>(Mesh::grid_box(3, 3, -1, -0.8, 1, 1.2));
        QField f = QField::from_function(m, branch_point);
        CHECK_THROWS_AS(graph_current(f), DomainError);
    }
}

TEST_CASE("boundaries and push-forwards") {
    auto m = std::make_shared<Mesh>(Mesh::grid_box(6, 4, 0, 0, 3, 2));
    SimplicialCurrent flat = flat_current(*m);
    SimplicialCurrent b = boundary(flat);
    CHECK(mass(b) == doctest::Approx(10.0).epsilon(1e-13));
    CHECK(boundary(b).cells.empty());

    QField f = QField::from_function(m, [](Point2 x) {
        return QPoint::from_points({vec1(std::sin(x.x()) + x.y()), vec1(3 + 0.2 * x.x() * x.y())});
    });
    // T_{f, Omega} is the graph current.
    CHECK(pushforward_mass(f, flat) == doctest::Approx(mass(graph_current(f))).epsilon(1e-12));
    // Boundary of the graph equals the push-forward of the boundary.
    SimplicialCurrent bg = boundary(graph_current(f));
    SimplicialCurrent pb = pushforward(f, b);
    CHECK(mass(bg) == doctest::Approx(mass(pb)).epsilon(1e-12));
    CHECK(bg.cells.size() == pb.cells.size());

    QField c = QField::from_function(m, [](Point2) { return QPoint::from_points({vec1(0), vec1(1)}); });
    CHECK(pushforward_mass(c, b) == doctest::Approx(20.0).epsilon(1e-13));
    CHECK_THROWS_AS(pushforward(c, graph_current(c)), InvalidInput);
}

TEST_CASE("polynomial forms") {
    SUBCASE("pairing against closed-form integrals") {
        SimplicialCurrent t;
        t.ambient = t.base = t.dim = 2;
        Vec a(2), b(2), c(2);
        a << 0, 0;
        b << 1, 0;
        c << 0, 1;
        t.cells.push_back({{a, b, c}, 1});
        PolyForm w(2, 2);
        w.add(1.0, {1, 0}, {0, 1});  // x dx^dy
        CHECK(pair(t, w) == doctest::Approx(1.0 / 6).epsilon(1e-14));
        PolyForm w2(2, 2);
        w2.add(1.0, {3, 2}, {0, 1});  // x^3 y^2: 3! 2! / 7! = 1/420
        CHECK(pair(t, w2) == doctest::Approx(1.0 / 420).epsilon(1e-13));
        t.cells[0].theta = -2;
        CHECK(pair(t, w) == doctest::Approx(-1.0 / 3).epsilon(1e-14));
    }
    SUBCASE("d d = 0") {
        PolyForm w(3, 0);
        w.add(2.0, {2, 1, 3}, {});
        PolyForm dd = w.d().d();
        Mat e = Mat::Random(3, 2);
        Vec x = Vec::Random(3);
        CHECK(std::abs(dd.eval(x, e)) < 1e-12);
    }
    SUBCASE("exterior derivative of a function") {
        PolyForm w(2, 0);
        w.add(1.0, {2, 1}, {});  // x^2 y
        PolyForm d = w.d();
        Mat e(2, 1);
        e << 0.3, -0.5;
        Vec x(2);
        x << 1.5, 2.0;
        CHECK(d.eval(x, e) == doctest::Approx(2 * 1.5 * 2.0 * 0.3 + 1.5 * 1.5 * -0.5));
    }
    SUBCASE("bad index sets") {
        PolyForm w(3, 2);
        CHECK_THROWS_AS(w.add(1.0, {0, 0, 0}, {1, 0}), InvalidInput);
        CHECK_THROWS_AS(w.add(1.0, {0, 0}, {0, 1}), InvalidInput);
    }
}

TEST_CASE("Stokes on graph currents") {
    auto m = std::make_shared<Mesh>(Mesh::grid_annulus(Point2(0, 0), 0.5, 1.0, 32));
    QField f = QField::from_function(m, branch_point);
    PolyForm w = test_one_form();
    SimplicialCurrent t = graph_current(f);
    CHECK(stokes_check(t, w) < 1e-12);

    double prev = 0;
    for (int n : {16, 32, 64}) {
        auto mn = std::make_shared<Mesh>(Mesh::grid_annulus(Point2(0, 0), 0.5, 1.0, n));
        double r = graph_stokes_residual(QField::from_function(mn, branch_point), branch_point, w);
        if (prev > 0) CHECK(std::log2(prev / r) >= 1.0);
        prev = r;
    }
    CHECK(prev <= 1e-3);
}

TEST_CASE("slices") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 4, 4);
    SUBCASE("flat sheets, on and off vertices") {
        auto t = fixtures::flat_sheets(g, {vec1(-1), vec1(2)});
        SliceIndex idx(t);
        for (Point2 x : {Point2(0.1, 0.2), Point2(0, 0), Point2(0.5, 0.25), Point2(1, 1)}) {
            Slice s = idx.slice(x);
            CHECK(s.total() == 2);
            CHECK(s.qpoint().equals(QPoint::from_points({vec1(-1), vec1(2)}), 1e-12));
        }
        CHECK(idx.slice(Point2(3, 3)).points.empty());
    }
    SUBCASE("tilted sheet") {
        Mat a(1, 2);
        a << 0.4, -0.3;
        auto t = fixtures::tilted_sheet(g, a);
        Point2 x(0.31, -0.47);
        Slice s = slice(t, x);
        REQUIRE(s.points.size() == 1);
        CHECK(s.points[0][0] == doctest::Approx((a * x)[0]).epsilon(1e-12));
    }
    SUBCASE("opposite orientations") {
        auto t = fixtures::orientation_reversed_pair(g, 2, 1);
        Slice s = slice(t, Point2(0.2, 0.1));
        CHECK(s.points.size() == 4);
        CHECK(s.total() == 2);
        CHECK_THROWS_AS(s.qpoint(), DomainError);
    }
}

TEST_CASE("excess field") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 8, 8);
    SUBCASE("flat sheets give zero everywhere") {
        ExcessField f = excess_field(fixtures::flat_sheets(g, {vec1(0), vec1(1)}), g);
        CHECK(f.q == 2);
        CHECK(f.excess == 0.0);
        for (int k = 0; k < g.size(); ++k) {
            CHECK(std::abs(f.e[k]) < 1e-15);
            CHECK(std::abs(f.maximal[k]) < 1e-13);
        }
    }
    SUBCASE("tilted sheet") {
        Mat a(1, 2);
        a << 0.3, 0.4;
        ExcessField f = excess_field(fixtures::tilted_sheet(g, a), g);
        double ex = std::sqrt(1 + 0.25) - 1;
        CHECK(f.excess == doctest::Approx(ex).epsilon(1e-12));
        for (int k = 0; k < g.size(); ++k) {
            CHECK(f.delta[k] == doctest::Approx(ex).epsilon(1e-10));
            CHECK(f.maximal[k] == doctest::Approx(ex).epsilon(1e-10));
            CHECK_FALSE(f.delta_unstable[k]);
        }
    }
    SUBCASE("coarser base grid than the current") {
        BaseGrid coarse = BaseGrid::box(-1, -1, 1, 1, 3, 3);
        Mat a(1, 2);
        a << 0.3, 0.4;
        ExcessField f = excess_field(fixtures::tilted_sheet(g, a), coarse);
        CHECK(f.excess == doctest::Approx(std::sqrt(1.25) - 1).epsilon(1e-10));
    }
    SUBCASE("projection hypothesis") {
        BaseGrid half = BaseGrid::box(-1, -1, 0, 1, 4, 8);
        auto t = fixtures::flat_sheets(half, {vec1(0)});
        CHECK_THROWS_AS(excess_field(t, g, 1), DomainError);
    }
    SUBCASE("csv") {
        ExcessField f = excess_field(fixtures::flat_sheets(g, {vec1(0)}), g);
        std::string csv = f.to_csv();
        CHECK(csv.rfind("i,j,x,y,mass,e,delta,maximal,unstable\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 65);
    }
}

TEST_CASE("maximal function and ball sums") {
    BaseGrid g = BaseGrid::ball(Point2(0, 0), 1.0, 16);
    std::vector<double> v(g.size(), 0.0);
    for (int k = 0; k < g.size(); ++k)
        if (g.kept[k]) v[k] = 0.5 * g.cell_area();
    auto m = maximal_function(g, v);
    for (int k = 0; k < g.size(); ++k)
        if (g.kept[k]) CHECK(m[k] == doctest::Approx(0.5));
    // Point mass: M at the spike square is the cell density.
    std::fill(v.begin(), v.end(), 0.0);
    int c = g.id(8, 8);
    v[c] = 1.0;
    m = maximal_function(g, v);
    CHECK(m[c] == doctest::Approx(1.0 / g.cell_area()));
    for (int k = 0; k < g.size(); ++k)
        if (g.kept[k]) CHECK(m[k] >= v[k] / g.cell_area());
    double s, a;
    ball_sum(g, v, c, 1.01 * g.h, &s, &a);
    CHECK(s == 1.0);
    CHECK(a == doctest::Approx(5 * g.cell_area()));
    CHECK(g.admits(Point2(0, 0), 1.0));
    CHECK_FALSE(g.admits(Point2(0.1, 0), 1.0));
}

TEST_CASE("varifold excess") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 16, 16);
    for (const QField& f : fixtures::random_two_valued(g, 6, 11)) {
        VarifoldReport r = varifold_excess(graph_current(f), g);
        CHECK(r.e > 0);
        CHECK(r.ve <= 2 * r.e);
    }
    Mat a(2, 2);
    a << 0.2, 0.1, -0.3, 0.05;
    VarifoldReport tilt = varifold_excess(fixtures::tilted_sheet(g, a), g);
    CHECK(tilt.ve <= tilt.e);
    VarifoldReport rev = varifold_excess(fixtures::orientation_reversed_pair(g, 2, 2), g);
    CHECK(rev.ve < 1e-20);
    CHECK(rev.e == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("modified BV estimate") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 16, 16);
    SUBCASE("flat sheets: zero variation") {
        auto t = fixtures::flat_sheets(g, {vec1(0), vec1(1)});
        BvReport r = bv_estimate_check(t, g, standard_test_functions(1));
        CHECK(r.holds());
        for (const auto& row : r.rows) CHECK(row.tv == 0.0);
    }
    SUBCASE("tilted sheet, coordinate test function") {
        Mat a(1, 2);
        a << 0.3, 0.1;
        BvReport r = bv_estimate_check(fixtures::tilted_sheet(g, a), g, {standard_test_functions(1)[0]});
        CHECK(r.holds());
        const BvRow& top = r.rows.back();
        CHECK(top.level == 4);
        CHECK(top.tv == doctest::Approx(4 * std::sqrt(0.1)).epsilon(1e-10));
    }
    SUBCASE("random two-valued currents") {
        for (const QField& f : fixtures::random_two_valued(g, 4, 5)) {
            BvReport r = bv_estimate_check(graph_current(f), g, standard_test_functions(f.n));
            CHECK(r.holds());
            CHECK(r.worst_ratio <= 1.1);
            CHECK(r.coarea_disagreement <= 0.01);
        }
    }
}

TEST_CASE("maximal measure covering") {
    BaseGrid g = BaseGrid::ball(Point2(0, 0), 4.0, 64);
    std::vector<double> mu(g.size(), 0.0);
    mu[g.id(36, 30)] = 0.005;
    mu[g.id(37, 30)] = 0.001;
    MaximalReport r = maximal_measure(g, mu, 0.05);
    CHECK(r.r0 < 0.2);
    CHECK(std::count(r.j_theta.begin(), r.j_theta.end(), 1) > 0);
    CHECK(r.holds());
    std::vector<double> big(g.size(), 1.0);
    CHECK_THROWS_AS(maximal_measure(g, big, 0.05), DomainError);
}

TEST_CASE("Lipschitz approximation on a spike") {
    BaseGrid g = BaseGrid::ball(Point2(0, 0), 4.0, 128);
    auto t = graph_current(fixtures::spike_field(g, 2, 0.03, Point2(0.3, 0.2), 0.005));
    for (double eta : {0.1, 0.05}) {
        LipschitzApprox la = lipschitz_approximate(t, g, eta);
        const auto& r = la.report;
        CHECK(r.r0 < 0.2);
        CHECK(r.k_cells < r.cells);
        CHECK(r.graph_mismatch == 0.0);
        CHECK(r.lip <= std::sqrt(eta));
        CHECK(r.coverage_holds);
        // The spike vertex is outside K and has been flattened.
        int v = la.u.mesh->locate(Point2(0.3125, 0.1875)) >= 0 ? 0 : -1;
        CHECK(v == 0);
        QPoint at = la.u.at(Point2(0.3125, 0.1875));
        CHECK(at.equals(QPoint::from_points({vec1(0.3125 * 0.005), vec1(1 + 0.3125 * 0.005)}), 1e-3));
    }
    auto steep = graph_current(fixtures::spike_field(g, 2, 0.03, Point2(0, 0), 0.2));
    CHECK_THROWS_AS(lipschitz_approximate(steep, g, 0.05), DomainError);
}

TEST_CASE("Taylor expansion of the graph mass") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 32, 32);
    auto field = [&](double eps) {
        return fixtures::field_on(g, [eps](Point2 x) {
            Vec a(2), b(2);
            a << eps * std::sin(x.x() + 0.3 * x.y()) + 1, eps * x.y() * x.x();
            b << -1 + eps * x.x(), eps * std::cos(x.y());
            return QPoint::from_points({a, b});
        });
    };
    SUBCASE("constant") {
        QField c = fixtures::field_on(g, [](Point2) { return QPoint::from_points({vec1(0), vec1(1)}); });
        TaylorReport r = taylor_check(c, quadrant_regions(*c.mesh));
        CHECK(r.lip == 0.0);
        for (const auto& row : r.rows) {
            CHECK(row.e == 0.0);
            CHECK(row.dirichlet == 0.0);
        }
    }
    SUBCASE("envelope and slope") {
        double prev = 0;
        for (double eps : {0.2, 0.1, 0.05}) {
            QField h = field(eps);
            TaylorReport r = taylor_check(h, quadrant_regions(*h.mesh));
            CHECK(r.holds(2.0));
            CHECK(r.c_max() >= 4.0);
            double rel = r.rows[0].rel_error;
            if (prev > 0) CHECK(std::abs(std::log2(prev / rel) - 2) <= 0.1);
            prev = rel;
        }
    }
    SUBCASE("Lip above one") {
        QField steep = fixtures::field_on(g, [](Point2 x) { return QPoint::from_points({vec1(2 * x.x()), vec1(5)}); });
        CHECK_THROWS_AS(taylor_check(steep, quadrant_regions(*steep.mesh)), DomainError);
    }
}

TEST_CASE("excess scans") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 16, 16);
    QField f = fixtures::random_two_valued(g, 1, 3)[0];
    ExcessField ex = excess_field(graph_current(f), g);
    HigherIntegrabilityReport hi = higher_integrability_scan(ex, {1, 1.5, 2, 3});
    CHECK(hi.rows.size() == 4);
    CHECK(hi.monotone);
    StrongEstimateReport st = strong_estimate_scan(ex, 0.25);
    CHECK(st.additivity_gap < 1e-12);
    CHECK_FALSE(st.rows.empty());
}

TEST_CASE("fixtures are deterministic") {
    BaseGrid g = BaseGrid::box(-1, -1, 1, 1, 8, 8);
    auto a = fixtures::random_two_valued(g, 3, 99), b = fixtures::random_two_valued(g, 3, 99);
    for (int i = 0; i < 3; ++i)
        for (std::size_t v = 0; v < a[i].values.size(); ++v) CHECK(a[i].values[v].data() == b[i].values[v].data());
    CHECK(a[0].n == 1);
    CHECK(a[1].n == 2);
}
