#include <complex>
#include <random>

#include "qv/currents.hpp"
#include "qv/error.hpp"

namespace qv::fixtures {

QField field_on(const BaseGrid& g, const std::function<QPoint(Point2)>& f) {
    return QField::from_function(std::make_shared<Mesh>(g.mesh()), f);
}

SimplicialCurrent flat_sheets(const BaseGrid& g, const std::vector<Vec>& heights) {
    if (heights.empty()) throw InvalidInput("flat_sheets: need at least one sheet");
    QPoint p = QPoint::from_points(heights);
    return graph_current(field_on(g, [&](Point2) { return p; }));
}

SimplicialCurrent tilted_sheet(const BaseGrid& g, const Mat& a) {
    if (a.cols() != 2) throw InvalidInput("tilted_sheet: A must be n x 2");
    return graph_current(field_on(g, [&](Point2 x) { return QPoint::from_points({Vec(a * x)}); }));
}

SimplicialCurrent orientation_reversed_pair(const BaseGrid& g, int q, int n) {
    if (q < 1 || n < 1) throw InvalidInput("orientation_reversed_pair: q, n >= 1");
    std::vector<Vec> hs;
    for (int k = 0; k < q; ++k) {
        Vec y = Vec::Zero(n);
        y[0] = -1.0 - k;
        hs.push_back(y);
    }
    SimplicialCurrent t = flat_sheets(g, hs);
    Mesh m = g.mesh();
    for (int sheet = 0; sheet < 2; ++sheet)
        for (const auto& tri : m.cells()) {
            SimplicialCurrent::Cell c;
            for (int v : tri) {
                Vec x = Vec::Zero(2 + n);
                x[0] = m.vertices()[v].x();
                x[1] = m.vertices()[v].y();
                x[2] = 1.0 + sheet;
                c.v.push_back(x);
            }
            c.theta = sheet == 0 ? 1 : -1;
            t.cells.push_back(std::move(c));
        }
    return t;
}

QPoint branch(Point2 x) {
    std::complex<double> w = std::sqrt(std::complex<double>(x.x(), x.y()));
    return QPoint(2, 2, {w.real(), w.imag(), -w.real(), -w.imag()});
}

QField spike_field(const BaseGrid& g, int q, double height, Point2 at, double tilt) {
    if (q < 1) throw InvalidInput("spike_field: q >= 1");
    auto mesh = std::make_shared<Mesh>(g.mesh());
    int best = 0;
    for (int v = 1; v < mesh->num_vertices(); ++v)
        if ((mesh->vertices()[v] - at).norm() < (mesh->vertices()[best] - at).norm()) best = v;
    std::vector<QPoint> vals;
    for (int v = 0; v < mesh->num_vertices(); ++v) {
        std::vector<double> c(q);
        for (int k = 0; k < q; ++k) c[k] = k + tilt * mesh->vertices()[v].x();
        if (v == best) c[0] += height;
        vals.emplace_back(q, 1, c);
    }
    return QField(mesh, std::move(vals));
}

std::vector<QField> random_two_valued(const BaseGrid& g, int count, std::uint64_t seed) {
    auto mesh = std::make_shared<Mesh>(g.mesh());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<QField> out;
    for (int k = 0; k < count; ++k) {
        const int n = 1 + k % 2;
        struct Sheet {
            Vec a;
            Mat b;
            Vec c;
            Point2 w;
            double phi;
        };
        std::vector<Sheet> sheets;
        for (int i = 0; i < 2; ++i) {
            Sheet s{Vec::Zero(n), Mat(n, 2), Vec(n), Point2(1.5 * u(rng), 1.5 * u(rng)), 3.0 * u(rng)};
            s.a[0] = 2.0 * i + 0.2 * u(rng);
            for (int r = 0; r < n; ++r) {
                if (r > 0) s.a[r] = 0.5 * u(rng);
                s.b(r, 0) = 0.3 * u(rng) / std::sqrt(double(n));
                s.b(r, 1) = 0.3 * u(rng) / std::sqrt(double(n));
                s.c[r] = 0.1 * (1 + u(rng)) / std::sqrt(double(n));
            }
            sheets.push_back(s);
        }
        std::vector<QPoint> vals;
        for (const Point2& x : mesh->vertices()) {
            std::vector<Vec> pts;
            for (const Sheet& s : sheets) pts.push_back(s.a + s.b * x + s.c * std::sin(s.w.dot(x) + s.phi));
            vals.push_back(QPoint::from_points(pts));
        }
        out.emplace_back(mesh, std::move(vals));
    }
    return out;
}

}  // namespace qv::fixtures
