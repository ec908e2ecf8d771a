#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include "field_util.hpp"
#include "qv/currents.hpp"
#include "qv/error.hpp"

namespace qv {

namespace {

using Poly = std::vector<Point2>;

// Sutherland-Hodgman against one axis-aligned half-plane.
Poly clip_half(const Poly& in, int axis, double bound, bool keep_below) {
    Poly out;
    auto inside = [&](const Point2& p) { return keep_below ? p[axis] <= bound : p[axis] >= bound; };
    for (std::size_t i = 0; i < in.size(); ++i) {
        const Point2& a = in[i];
        const Point2& b = in[(i + 1) % in.size()];
        bool ia = inside(a), ib = inside(b);
        if (ia) out.push_back(a);
        if (ia != ib) {
            double t = (bound - a[axis]) / (b[axis] - a[axis]);
            Point2 p = a + t * (b - a);
            p[axis] = bound;
            out.push_back(p);
        }
    }
    return out;
}

double poly_area(const Poly& p) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Point2& a = p[i];
        const Point2& b = p[(i + 1) % p.size()];
        s += a.x() * b.y() - a.y() * b.x();
    }
    return std::abs(s) / 2;
}

double clip_area(const Poly& tri, double xa, double ya, double xb, double yb) {
    Poly p = clip_half(tri, 0, xa, false);
    if (p.size() > 2) p = clip_half(p, 0, xb, true);
    if (p.size() > 2) p = clip_half(p, 1, ya, false);
    if (p.size() > 2) p = clip_half(p, 1, yb, true);
    return p.size() > 2 ? poly_area(p) : 0.0;
}

// Calls f(square, area) for every kept square the projected cell meets;
// vertical cells report their centroid square with area -1.
template <class F>
void for_each_square(const SimplicialCurrent::Cell& cell, const BaseGrid& g, double* signed_area, F f) {
    Poly tri;
    Point2 lo(INFINITY, INFINITY), hi(-INFINITY, -INFINITY), cen(0, 0);
    for (const Vec& v : cell.v) {
        tri.emplace_back(v[0], v[1]);
        lo = lo.cwiseMin(tri.back());
        hi = hi.cwiseMax(tri.back());
        cen += tri.back() / 3.0;
    }
    Point2 e1 = tri[1] - tri[0], e2 = tri[2] - tri[0];
    double det = e1.x() * e2.y() - e1.y() * e2.x();
    *signed_area = det / 2;
    if (std::abs(det) <= 1e-14 * std::max(e1.squaredNorm(), e2.squaredNorm())) {
        *signed_area = 0;
        int i = int(std::floor((cen.x() - g.x0) / g.h)), j = int(std::floor((cen.y() - g.y0) / g.h));
        if (i >= 0 && j >= 0 && i < g.nx && j < g.ny && g.kept[g.id(i, j)]) f(g.id(i, j), -1.0);
        return;
    }
    int i0 = std::max(0, int(std::floor((lo.x() - g.x0) / g.h)));
    int i1 = std::min(g.nx - 1, int(std::floor((hi.x() - g.x0) / g.h)));
    int j0 = std::max(0, int(std::floor((lo.y() - g.y0) / g.h)));
    int j1 = std::min(g.ny - 1, int(std::floor((hi.y() - g.y0) / g.h)));
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            int k = g.id(i, j);
            if (!g.kept[k]) continue;
            double xa = g.x0 + i * g.h, ya = g.y0 + j * g.h;
            double a = clip_area(tri, xa, ya, xa + g.h, ya + g.h);
            if (a > 0) f(k, a);
        }
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", x);
    return buf;
}

// Kept dyadic blocks: (level, i, j) with squares [i b, (i+1) b) x [j b, (j+1) b).
struct Block {
    int level, i, j;
};
std::vector<Block> dyadic_blocks(const BaseGrid& g) {
    std::vector<Block> out;
    for (int level = 0; (1 << level) <= std::min(g.nx, g.ny); ++level) {
        int b = 1 << level;
        for (int j = 0; (j + 1) * b <= g.ny; ++j)
            for (int i = 0; (i + 1) * b <= g.nx; ++i) {
                bool all = true;
                for (int jj = j * b; jj < (j + 1) * b && all; ++jj)
                    for (int ii = i * b; ii < (i + 1) * b && all; ++ii) all = g.kept[g.id(ii, jj)];
                if (all) out.push_back({level, i, j});
            }
    }
    return out;
}

template <class F>
double block_sum(const BaseGrid& g, const Block& bl, F f) {
    int b = 1 << bl.level;
    double s = 0;
    for (int jj = bl.j * b; jj < (bl.j + 1) * b; ++jj)
        for (int ii = bl.i * b; ii < (bl.i + 1) * b; ++ii) s += f(g.id(ii, jj));
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

BaseGrid BaseGrid::ball(Point2 center, double radius, int n) {
    if (!(radius > 0) || n < 1) throw InvalidInput("BaseGrid::ball: bad radius or resolution");
    BaseGrid g;
    g.nx = g.ny = n;
    g.x0 = center.x() - radius;
    g.y0 = center.y() - radius;
    g.h = 2 * radius / n;
    g.is_ball = true;
    g.center = center;
    g.radius = radius;
    Mesh m = g.mesh();
    g.kept.assign(g.size(), 0);
    for (int k = 0; k < g.size(); ++k) g.kept[k] = m.grid()->square[k] >= 0;
    if (std::count(g.kept.begin(), g.kept.end(), 1) == 0) throw InvalidInput("BaseGrid::ball: no square kept");
    return g;
}

BaseGrid BaseGrid::box(double x0, double y0, double x1, double y1, int nx, int ny) {
    if (nx < 1 || ny < 1 || !(x1 > x0)) throw InvalidInput("BaseGrid::box: bad extent");
    double h = (x1 - x0) / nx;
    if (std::abs((y1 - y0) / ny - h) > 1e-12 * h) throw InvalidInput("BaseGrid::box: squares required");
    BaseGrid g;
    g.nx = nx;
    g.ny = ny;
    g.x0 = x0;
    g.y0 = y0;
    g.h = h;
    g.center = Point2((x0 + x1) / 2, (y0 + y1) / 2);
    g.kept.assign(g.size(), 1);
    return g;
}

Point2 BaseGrid::cell_center(int c) const {
    return Point2(x0 + (c % nx + 0.5) * h, y0 + (c / nx + 0.5) * h);
}

double BaseGrid::area() const { return double(std::count(kept.begin(), kept.end(), 1)) * h * h; }

bool BaseGrid::admits(const Point2& x, double rho) const {
    const double slack = 1e-12 * h;
    if (is_ball) return (x - center).norm() + rho <= radius + slack;
    return x.x() - rho >= x0 - slack && x.y() - rho >= y0 - slack && x.x() + rho <= x0 + nx * h + slack &&
           x.y() + rho <= y0 + ny * h + slack;
}

Mesh BaseGrid::mesh() const {
    double x1 = x0 + nx * h, y1 = y0 + ny * h;
    if (!is_ball) return Mesh::grid_box(nx, ny, x0, y0, x1, y1);
    double eps = 1e-12 * radius;
    Point2 c = center;
    double r = radius;
    return Mesh::grid_region(nx, ny, x0, y0, x1, y1, [=](Point2 p) { return (p - c).norm() <= r + eps; });
}

void ball_sum(const BaseGrid& g, const std::vector<double>& values, int c, double rho, double* sum,
              double* area) {
    const int ci = c % g.nx, cj = c / g.nx;
    const double rr = rho / g.h;
    const int w = int(std::floor(rr + 1e-9));
    double s = 0, a = 0;
    for (int dj = -w; dj <= w; ++dj) {
        int j = cj + dj;
        if (j < 0 || j >= g.ny) continue;
        for (int di = -w; di <= w; ++di) {
            int i = ci + di;
            if (i < 0 || i >= g.nx || double(di * di + dj * dj) > rr * rr * (1 + 1e-12)) continue;
            int k = g.id(i, j);
            if (!g.kept[k]) continue;
            s += values[k];
            a += g.h * g.h;
        }
    }
    *sum = s;
    *area = a;
}

std::vector<double> maximal_function(const BaseGrid& g, const std::vector<double>& values) {
    if (int(values.size()) != g.size()) throw InvalidInput("maximal_function: one value per square");
    std::vector<double> m(g.size(), 0.0);
    // Row prefix sums of values and kept counts.
    std::vector<double> pv((g.nx + 1) * g.ny, 0.0), pk((g.nx + 1) * g.ny, 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            int k = g.id(i, j), p = j * (g.nx + 1) + i;
            pv[p + 1] = pv[p] + (g.kept[k] ? values[k] : 0.0);
            pk[p + 1] = pk[p] + (g.kept[k] ? 1.0 : 0.0);
        }
    for (int c = 0; c < g.size(); ++c) {
        if (!g.kept[c]) continue;
        const int ci = c % g.nx, cj = c / g.nx;
        const Point2 x = g.cell_center(c);
        double best = values[c] / (g.h * g.h);
        for (int jr = 0;; ++jr) {
            double rho = 0.5 * g.h * std::ldexp(1.0, jr);
            if (!g.admits(x, rho)) break;
            double rr = rho / g.h, s = 0, cnt = 0;
            int w = int(std::floor(rr + 1e-9));
            for (int dj = -w; dj <= w; ++dj) {
                int j = cj + dj;
                if (j < 0 || j >= g.ny) continue;
                double rem = rr * rr * (1 + 1e-12) - double(dj * dj);
                if (rem < 0) continue;
                int di = std::min(w, int(std::floor(std::sqrt(rem) + 1e-9)));
                while (di > 0 && double(di * di) > rem) --di;
                int ia = std::max(0, ci - di), ib = std::min(g.nx - 1, ci + di);
                int p = j * (g.nx + 1);
                s += pv[p + ib + 1] - pv[p + ia];
                cnt += pk[p + ib + 1] - pk[p + ia];
            }
            if (cnt > 0) best = std::max(best, s / (cnt * g.h * g.h));
        }
        m[c] = best;
    }
    return m;
}

// ---------------------------------------------------------------------------

double ExcessField::e_of(const std::vector<char>& cells) const {
    double s = 0;
    for (int k = 0; k < grid.size(); ++k)
        if (cells[k] && grid.kept[k]) s += e[k];
    return s;
}

double ExcessField::mass_of(const std::vector<char>& cells) const {
    double s = 0;
    for (int k = 0; k < grid.size(); ++k)
        if (cells[k] && grid.kept[k]) s += mass[k];
    return s;
}

std::string ExcessField::to_csv() const {
    std::string s = "i,j,x,y,mass,e,delta,maximal,unstable\n";
    for (int k = 0; k < grid.size(); ++k) {
        if (!grid.kept[k]) continue;
        Point2 c = grid.cell_center(k);
        s += std::to_string(k % grid.nx) + "," + std::to_string(k / grid.nx) + "," + fmt(c.x()) + "," +
             fmt(c.y()) + "," + fmt(mass[k]) + "," + fmt(e[k]) + "," + fmt(delta[k]) + "," + fmt(maximal[k]) +
             "," + (delta_unstable[k] ? "1" : "0") + "\n";
    }
    return s;
}

ExcessField excess_field(const SimplicialCurrent& t, const BaseGrid& grid, int q) {
    if (t.dim != 2 || t.base != 2) throw InvalidInput("excess_field: needs a 2-current over a plane");
    ExcessField f;
    f.grid = grid;
    const int ns = grid.size();
    f.mass.assign(ns, 0.0);
    std::vector<double> proj(ns, 0.0);
    for (int c = 0; c < int(t.cells.size()); ++c) {
        const auto& cell = t.cells[c];
        const double vol = std::abs(cell.theta) * t.volume(c);
        double sa = 0;
        for_each_square(cell, grid, &sa, [&](int k, double a) {
            if (a < 0) {
                f.mass[k] += vol;
                return;
            }
            f.mass[k] += vol * a / std::abs(sa);
            proj[k] += (sa > 0 ? 1 : -1) * cell.theta * a;
        });
    }
    const double h2 = grid.h * grid.h;
    if (q <= 0) {
        double total = 0;
        for (int k = 0; k < ns; ++k)
            if (grid.kept[k]) total += proj[k];
        q = int(std::lround(total / grid.area()));
        if (q < 1) throw DomainError("excess_field: projected multiplicity below 1");
    }
    f.q = q;
    for (int k = 0; k < ns; ++k)
        if (grid.kept[k] && std::abs(proj[k] - q * h2) > 1e-9 * h2)
            throw DomainError("excess_field: projection is not Q times the base at square " + std::to_string(k));
    f.e.assign(ns, 0.0);
    f.delta.assign(ns, 0.0);
    double total = 0;
    for (int k = 0; k < ns; ++k)
        if (grid.kept[k]) {
            f.e[k] = f.mass[k] - q * h2;
            f.delta[k] = f.e[k] / h2;
            total += f.e[k];
        }
    f.excess = total / grid.area();
    f.delta_unstable.assign(ns, 0);
    for (int k = 0; k < ns; ++k) {
        if (!grid.kept[k]) continue;
        int bi = (k % grid.nx) / 2 * 2, bj = (k / grid.nx) / 2 * 2;
        if (bi + 1 >= grid.nx || bj + 1 >= grid.ny) continue;
        double s = 0;
        bool full = true;
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                int kk = grid.id(bi + di, bj + dj);
                full = full && grid.kept[kk];
                s += f.e[kk];
            }
        if (!full) continue;
        double a = std::max(f.delta[k], 0.0), b = std::max(s / (4 * h2), 0.0);
        double hi = std::max(a, b), lo = std::min(a, b);
        f.delta_unstable[k] = hi > 1e-14 && hi > 2 * lo;
    }
    f.maximal = maximal_function(grid, f.e);
    return f;
}

VarifoldReport varifold_excess(const SimplicialCurrent& t, const BaseGrid& grid) {
    ExcessField f = excess_field(t, grid);
    Mat p0 = Mat::Zero(t.ambient, t.ambient);
    p0(0, 0) = p0(1, 1) = 1;
    double s = 0;
    for (int c = 0; c < int(t.cells.size()); ++c) {
        const auto& cell = t.cells[c];
        double sa = 0, inside = 0;
        bool vertical = false;
        for_each_square(cell, grid, &sa, [&](int, double a) {
            if (a < 0)
                vertical = true;
            else
                inside += a;
        });
        double frac = vertical ? 1.0 : (sa != 0 ? inside / std::abs(sa) : 0.0);
        if (frac <= 0) continue;
        Mat d = t.tangent_projector(c) - p0;
        double op = Eigen::SelfAdjointEigenSolver<Mat>(d, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
        s += frac * std::abs(cell.theta) * t.volume(c) * op * op;
    }
    VarifoldReport r;
    r.ve = s / (2 * grid.area());
    r.e = f.excess;
    return r;
}

// ---------------------------------------------------------------------------

std::vector<TestFunction> standard_test_functions(int n) {
    if (n < 1) throw InvalidInput("standard_test_functions: n >= 1");
    Vec u = Vec::Ones(n) / std::sqrt(double(n));
    Vec w = Vec::Zero(n);
    w[0] = 1;
    Vec c = Vec::Constant(n, 0.3);
    return {
        {"coordinate", [](const Vec& y) { return y[0]; }},
        {"capped_linear", [u](const Vec& y) { return std::clamp(u.dot(y), -0.5, 0.5); }},
        {"sine", [u](const Vec& y) { return 0.5 * std::sin(2 * u.dot(y)); }},
        {"radial", [c](const Vec& y) { return std::sqrt((y - c).squaredNorm() + 0.01); }},
        {"cosine_norm", [](const Vec& y) { return 0.5 * std::cos(2 * y.norm()); }},
    };
}

bool BvReport::holds() const {
    return std::all_of(rows.begin(), rows.end(), [](const BvRow& r) { return r.holds; });
}

BvReport bv_estimate_check(const SimplicialCurrent& t, const BaseGrid& g, const std::vector<TestFunction>& psis,
                           double margin, int sub) {
    if (sub < 1) throw InvalidInput("bv_estimate_check: sub >= 1");
    ExcessField field = excess_field(t, g);
    SliceIndex index(t);
    const int la = g.nx * sub + 1, lb = g.ny * sub + 1;
    const double hs = g.h / sub;
    std::vector<char> need(std::size_t(la) * lb, 0);
    for (int k = 0; k < g.size(); ++k) {
        if (!g.kept[k]) continue;
        int i = k % g.nx, j = k / g.nx;
        for (int b = j * sub; b <= (j + 1) * sub; ++b)
            for (int a = i * sub; a <= (i + 1) * sub; ++a) need[std::size_t(b) * la + a] = 1;
    }
    std::vector<Slice> slices(need.size());
    for (int b = 0; b < lb; ++b)
        for (int a = 0; a < la; ++a)
            if (need[std::size_t(b) * la + a])
                slices[std::size_t(b) * la + a] = index.slice(Point2(g.x0 + a * hs, g.y0 + b * hs));

    std::vector<Block> blocks = dyadic_blocks(g);
    int top = 0;
    for (const Block& bl : blocks) top = std::max(top, bl.level);

    BvReport rep;
    for (const TestFunction& psi : psis) {
        std::vector<double> phi(need.size(), 0.0);
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t p = 0; p < need.size(); ++p) {
            if (!need[p]) continue;
            double s = 0;
            for (std::size_t k = 0; k < slices[p].points.size(); ++k) s += slices[p].signs[k] * psi.f(slices[p].points[k]);
            phi[p] = s;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        const int levels = 4096;
        const double dt = hi > lo ? (hi - lo) / levels : 0.0;
        std::vector<double> tv(g.size(), 0.0), co(g.size(), 0.0);
        auto tri = [&](int k, double v0, double v1, double v2, double gx, double gy) {
            double grad = std::hypot(gx, gy), area = hs * hs / 2;
            tv[k] += grad * area;
            if (dt <= 0) return;
            double v[3] = {v0, v1, v2};
            std::sort(v, v + 3);
            if (v[2] <= v[0]) return;
            double lmax = 2 * area * grad / (v[2] - v[0]);
            int l0 = std::max(0, int(std::ceil((v[0] - lo) / dt - 0.5)));
            int l1 = std::min(levels - 1, int(std::floor((v[2] - lo) / dt - 0.5)));
            for (int l = l0; l <= l1; ++l) {
                double tl = lo + (l + 0.5) * dt, len = 0;
                if (tl <= v[0] || tl >= v[2]) continue;
                if (tl <= v[1])
                    len = v[1] > v[0] ? lmax * (tl - v[0]) / (v[1] - v[0]) : lmax;
                else
                    len = v[2] > v[1] ? lmax * (v[2] - tl) / (v[2] - v[1]) : lmax;
                co[k] += len * dt;
            }
        };
        for (int k = 0; k < g.size(); ++k) {
            if (!g.kept[k]) continue;
            int i = k % g.nx, j = k / g.nx;
            for (int b = j * sub; b < (j + 1) * sub; ++b)
                for (int a = i * sub; a < (i + 1) * sub; ++a) {
                    double f00 = phi[std::size_t(b) * la + a], f10 = phi[std::size_t(b) * la + a + 1];
                    double f01 = phi[std::size_t(b + 1) * la + a], f11 = phi[std::size_t(b + 1) * la + a + 1];
                    tri(k, f00, f10, f11, (f10 - f00) / hs, (f11 - f10) / hs);
                    tri(k, f00, f11, f01, (f11 - f01) / hs, (f01 - f00) / hs);
                }
        }
        for (const Block& bl : blocks) {
            BvRow r;
            r.level = bl.level;
            r.i = bl.i;
            r.j = bl.j;
            r.psi = psi.name;
            r.tv = block_sum(g, bl, [&](int k) { return tv[k]; });
            r.tv_coarea = block_sum(g, bl, [&](int k) { return co[k]; });
            r.e = block_sum(g, bl, [&](int k) { return field.e[k]; });
            r.mass = block_sum(g, bl, [&](int k) { return field.mass[k]; });
            r.lhs = r.tv * r.tv;
            r.rhs = 2 * std::max(r.e, 0.0) * r.mass;
            r.holds = r.lhs <= (1 + margin) * r.rhs + 1e-14 * r.mass * r.mass;
            if (r.rhs > 0) rep.worst_ratio = std::max(rep.worst_ratio, r.lhs / r.rhs);
            if (bl.level == top && r.tv > 0)
                rep.coarea_disagreement =
                    std::max(rep.coarea_disagreement, std::abs(r.tv - r.tv_coarea) / r.tv);
            rep.rows.push_back(std::move(r));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

bool MaximalReport::holds() const {
    return std::all_of(rows.begin(), rows.end(), [](const CoveringRow& r) { return r.holds; });
}

MaximalReport maximal_measure(const BaseGrid& g, const std::vector<double>& mu, double theta, double margin) {
    if (!g.is_ball) throw InvalidInput("maximal_measure: needs a ball base");
    if (!(theta > 0)) throw InvalidInput("maximal_measure: theta must be positive");
    if (int(mu.size()) != g.size()) throw InvalidInput("maximal_measure: one value per square");
    const double s = g.radius / 4, m = 2;
    double total = 0;
    for (int k = 0; k < g.size(); ++k) {
        if (!g.kept[k]) continue;
        if (mu[k] < 0) throw InvalidInput("maximal_measure: negative measure");
        total += mu[k];
    }
    MaximalReport rep;
    rep.r0 = std::sqrt(total / (std::numbers::pi * theta)) / s;
    if (!(rep.r0 < 0.2)) throw DomainError("maximal_measure: r0 >= 1/5");
    rep.maximal = maximal_function(g, mu);
    rep.j_theta.assign(g.size(), 0);
    auto dist = [&](int k) { return (g.cell_center(k) - g.center).norm(); };
    for (int k = 0; k < g.size(); ++k)
        rep.j_theta[k] = g.kept[k] && dist(k) <= 3 * s && rep.maximal[k] >= theta;
    for (double r : {s, 2 * s, 3 * s}) {
        CoveringRow row;
        row.r = r;
        double sub = 0;
        for (int k = 0; k < g.size(); ++k) {
            if (rep.j_theta[k] && dist(k) <= r) row.lhs += g.cell_area();
            if (g.kept[k] && dist(k) <= r + rep.r0 * s && rep.maximal[k] >= theta / std::pow(2.0, m)) sub += mu[k];
        }
        row.rhs = std::pow(5.0, m) / theta * sub;
        row.holds = row.lhs <= (1 + margin) * row.rhs;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

using TriKey = std::array<std::pair<double, double>, 3>;

std::pair<double, double> pkey(double x, double y) { return {x == 0.0 ? 0.0 : x, y == 0.0 ? 0.0 : y}; }

// Lifted copies of t over each projected triangle, vertices listed in the
// sorted projected order; one entry per unit of multiplicity, all positive.
std::map<TriKey, std::vector<std::array<Vec, 3>>> sheets_by_triangle(const SimplicialCurrent& t) {
    std::map<TriKey, std::vector<std::array<Vec, 3>>> out;
    std::map<TriKey, int> sign_ok;
    for (const auto& cell : t.cells) {
        std::array<int, 3> o = {0, 1, 2};
        std::array<std::pair<double, double>, 3> k;
        for (int i = 0; i < 3; ++i) k[i] = pkey(cell.v[i][0], cell.v[i][1]);
        std::sort(o.begin(), o.end(), [&](int a, int b) { return k[a] < k[b]; });
        TriKey key = {k[o[0]], k[o[1]], k[o[2]]};
        Point2 e1(cell.v[1][0] - cell.v[0][0], cell.v[1][1] - cell.v[0][1]);
        Point2 e2(cell.v[2][0] - cell.v[0][0], cell.v[2][1] - cell.v[0][1]);
        double det = e1.x() * e2.y() - e1.y() * e2.x();
        int sign = (det > 0 ? 1 : det < 0 ? -1 : 0) * (cell.theta > 0 ? 1 : -1);
        if (sign <= 0) {
            sign_ok[key] = 0;
            continue;
        }
        for (int r = 0; r < std::abs(cell.theta); ++r)
            out[key].push_back({cell.v[o[0]].tail(t.fiber()), cell.v[o[1]].tail(t.fiber()),
                                cell.v[o[2]].tail(t.fiber())});
    }
    for (const auto& [key, ok] : sign_ok)
        if (!ok) out[key].clear();
    return out;
}

TriKey tri_key(const Mesh& m, int c, std::array<int, 3>* order) {
    const auto& tri = m.cells()[c];
    std::array<std::pair<double, double>, 3> k;
    for (int i = 0; i < 3; ++i) k[i] = pkey(m.vertices()[tri[i]].x(), m.vertices()[tri[i]].y());
    std::array<int, 3> o = {0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return k[a] < k[b]; });
    *order = o;
    return {k[o[0]], k[o[1]], k[o[2]]};
}

}  // namespace

LipschitzApprox lipschitz_approximate(const SimplicialCurrent& t, const BaseGrid& g, double eta, double margin) {
    if (!g.is_ball) throw InvalidInput("lipschitz_approximate: needs a ball base");
    if (!(eta > 0)) throw InvalidInput("lipschitz_approximate: eta must be positive");
    LipschitzApprox out;
    out.field = excess_field(t, g);
    const ExcessField& f = out.field;
    const int q = f.q, n = t.fiber();
    const double s = g.radius / 4, m = 2;
    LipschitzApproxReport& rep = out.report;
    rep.eta = eta;
    rep.excess = f.excess;
    rep.r0 = 4 * std::pow(f.excess / eta, 1 / m);
    if (!(rep.r0 < 0.2)) throw DomainError("lipschitz_approximate: r0 >= 1/5");

    // Base squares of B_{3s}, on the same lattice.
    const double r3 = 3 * s, eps = 1e-12 * g.radius;
    const Point2 c = g.center;
    auto um = std::make_shared<Mesh>(Mesh::grid_region(g.nx, g.ny, g.x0, g.y0, g.x0 + g.nx * g.h, g.y0 + g.ny * g.h,
                                                       [=](Point2 p) { return (p - c).norm() <= r3 + eps; }));
    const Mesh::Grid& mg = *um->grid();
    out.k.assign(g.size(), 0);
    for (int k = 0; k < g.size(); ++k)
        if (mg.square[k] >= 0) {
            ++rep.cells;
            if (f.maximal[k] < eta) {
                out.k[k] = 1;
                ++rep.k_cells;
            }
        }
    if (rep.k_cells == 0) throw DomainError("lipschitz_approximate: K is empty");

    // Values on K: the slice of t at each vertex, read off the lifted cells
    // over the adjacent K triangles.
    auto lifted = sheets_by_triangle(t);
    const int nv = um->num_vertices();
    std::vector<QPoint> vals(nv);
    std::vector<char> known(nv, 0);
    std::vector<int> kcells;
    for (int k = 0; k < g.size(); ++k)
        if (out.k[k])
            for (int d = 0; d < 2; ++d) kcells.push_back(mg.square[k] + d);
    for (int cidx : kcells) {
        std::array<int, 3> o;
        TriKey key = tri_key(*um, cidx, &o);
        auto it = lifted.find(key);
        if (it == lifted.end() || int(it->second.size()) != q)
            throw DomainError("lipschitz_approximate: slice over K is not Q positive points (cell " +
                              std::to_string(cidx) + ")");
        for (int a = 0; a < 3; ++a) {
            int v = um->cells()[cidx][o[a]];
            if (known[v]) continue;
            std::vector<Vec> pts;
            for (const auto& sh : it->second) pts.push_back(sh[a]);
            vals[v] = QPoint::from_points(pts);
            known[v] = 1;
        }
    }
    // Extension to the rest of B_{3s}.
    EmbeddingSpec spec = EmbeddingSpec::standard(q, n);
    std::vector<Vec> w(nv);
    std::vector<char> filled = known;
    for (int v = 0; v < nv; ++v)
        if (known[v]) w[v] = xi(vals[v], spec);
    {
        double lam = 0;
        for (const auto& ed : um->edges())
            if (known[ed.a] && known[ed.b])
                lam = std::max(lam, (w[ed.a] - w[ed.b]).norm() / (um->vertices()[ed.a] - um->vertices()[ed.b]).norm());
        detail::lipschitz_fill(*um, filled, w, std::max(lam, 1e-12));
    }
    for (int v = 0; v < nv; ++v)
        if (!known[v]) vals[v] = decode_best(retract_rho(w[v], spec), spec).t;
    out.u = QField(um, std::move(vals));

    rep.lip = detail::edge_lipschitz(out.u);
    rep.lip_over_sqrt_eta = rep.lip / std::sqrt(eta);

    // W1 ratio over sampled pairs of K vertices.
    std::vector<int> kv;
    for (int v = 0; v < nv; ++v)
        if (known[v]) kv.push_back(v);
    std::mt19937_64 rng(12345);
    std::uniform_int_distribution<std::size_t> pick(0, kv.size() - 1);
    const int npairs = std::min<long>(4000, long(kv.size()) * long(kv.size() - 1) / 2);
    for (int p = 0; p < npairs; ++p) {
        int a = kv[pick(rng)], b = kv[pick(rng)];
        if (a == b) continue;
        double d = (um->vertices()[a] - um->vertices()[b]).norm();
        rep.w1_ratio = std::max(rep.w1_ratio, wasserstein1(out.u.values[a], out.u.values[b]) / (std::sqrt(eta) * d));
    }

    // gr(u|K) against t, triangle by triangle.
    for (int cidx : kcells) {
        std::array<int, 3> o;
        TriKey key = tri_key(*um, cidx, &o);
        const auto& sheets = lifted.at(key);
        const auto& tri = um->cells()[cidx];
        std::vector<int> sb, sc;
        const QPoint &a = out.u.values[tri[o[0]]], &b = out.u.values[tri[o[1]]], &d = out.u.values[tri[o[2]]];
        if (!cell_sheets(a, b, d, sb, sc)) {
            rep.graph_mismatch = INFINITY;
            continue;
        }
        std::vector<char> used(sheets.size(), 0);
        for (int i = 0; i < q; ++i) {
            Vec va = a.vec(i), vb = b.vec(sb[i]), vc = d.vec(sc[i]);
            double best = INFINITY;
            int arg = -1;
            for (std::size_t k = 0; k < sheets.size(); ++k) {
                if (used[k]) continue;
                double gap = std::max({(va - sheets[k][0]).norm(), (vb - sheets[k][1]).norm(), (vc - sheets[k][2]).norm()});
                if (gap < best) best = gap, arg = int(k);
            }
            used[arg] = 1;
            rep.graph_mismatch = std::max(rep.graph_mismatch, best);
        }
    }

    // Coverage of B_r \ K.
    auto dist = [&](int k) { return (g.cell_center(k) - g.center).norm(); };
    rep.coverage_holds = true;
    for (double r : {s, 2 * s, 3 * s}) {
        CoveringRow row;
        row.r = r;
        double sub = 0;
        for (int k = 0; k < g.size(); ++k) {
            if (mg.square[k] >= 0 && !out.k[k] && dist(k) <= r) row.lhs += g.cell_area();
            if (g.kept[k] && dist(k) <= r + rep.r0 * s && f.maximal[k] > eta / std::pow(2.0, m))
                sub += std::max(f.e[k], 0.0);
        }
        row.rhs = std::pow(5.0, m) / eta * sub;
        row.holds = row.lhs <= (1 + margin) * row.rhs;
        rep.coverage_holds = rep.coverage_holds && row.holds;
        rep.coverage.push_back(row);
    }
    return out;
}

}  // namespace qv
