#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "qv/currents.hpp"
#include "qv/error.hpp"

namespace qv {

namespace {

// Per-sheet gradients of g on cell c (n x 2 each), following consistent
// matchings when they exist and optimal ones from the first vertex otherwise.
std::vector<Mat> sheet_gradients(const QField& g, int c) {
    const Mesh& m = *g.mesh;
    const auto& tri = m.cells()[c];
    const QPoint &a = g.values[tri[0]], &b = g.values[tri[1]], &d = g.values[tri[2]];
    std::vector<int> sb, sd;
    if (!cell_sheets(a, b, d, sb, sd)) {
        sb = match_squared(a, b).perm;
        sd = match_squared(a, d).perm;
    }
    Eigen::Matrix2d dx;
    dx.col(0) = m.vertices()[tri[1]] - m.vertices()[tri[0]];
    dx.col(1) = m.vertices()[tri[2]] - m.vertices()[tri[0]];
    Eigen::Matrix2d inv = dx.inverse();
    std::vector<Mat> out;
    for (int i = 0; i < g.q; ++i) {
        Mat dy(g.n, 2);
        dy.col(0) = b.vec(sb[i]) - a.vec(i);
        dy.col(1) = d.vec(sd[i]) - a.vec(i);
        out.push_back(dy * inv);
    }
    return out;
}

double op_norm(const Mat& d) { return Eigen::JacobiSVD<Mat>(d).singularValues()[0]; }

}  // namespace

double sheet_lipschitz(const QField& g) {
    double lip = 0;
    for (int c = 0; c < g.mesh->num_cells(); ++c)
        for (const Mat& d : sheet_gradients(g, c)) lip = std::max(lip, op_norm(d));
    return lip;
}

std::vector<std::pair<std::string, std::vector<char>>> quadrant_regions(const Mesh& mesh) {
    Point2 lo(INFINITY, INFINITY), hi(-INFINITY, -INFINITY);
    for (const Point2& v : mesh.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    Point2 mid = (lo + hi) / 2;
    const int nc = mesh.num_cells();
    std::vector<std::pair<std::string, std::vector<char>>> out;
    out.push_back({"all", std::vector<char>(nc, 1)});
    const char* names[4] = {"lower_left", "lower_right", "upper_left", "upper_right"};
    for (int k = 0; k < 4; ++k) {
        std::vector<char> f(nc, 0);
        for (int c = 0; c < nc; ++c) {
            Point2 x = mesh.centroid(c);
            f[c] = (x.x() >= mid.x()) == bool(k & 1) && (x.y() >= mid.y()) == bool(k & 2);
        }
        out.push_back({names[k], f});
    }
    return out;
}

double TaylorReport::c_min() const {
    double c = 0.0;
    for (const auto& r : rows) c = std::max(c, r.c_min);
    return c;
}

double TaylorReport::c_max() const {
    double c = INFINITY;
    for (const auto& r : rows) c = std::min(c, r.c_max);
    return c;
}

bool TaylorReport::holds(double c) const {
    for (const auto& r : rows) {
        double slack = 1e-12 * std::max(1.0, r.dirichlet);
        if (r.e < (1 - lip * lip / c) / 2 * r.dirichlet - slack) return false;
        if (r.e > (1 + c * lip * lip) / 2 * r.dirichlet + slack) return false;
    }
    return true;
}

TaylorReport taylor_check(const QField& g, const std::vector<std::pair<std::string, std::vector<char>>>& regions) {
    const Mesh& m = *g.mesh;
    TaylorReport rep;
    rep.lip = sheet_lipschitz(g);
    if (rep.lip > 1 + 1e-12) throw DomainError("taylor_check: Lip(g) > 1");
    EnergyReport en = dirichlet_energy(g);
    std::vector<double> ec(m.num_cells(), 0.0);
    for (int c = 0; c < m.num_cells(); ++c)
        for (const Mat& d : sheet_gradients(g, c)) {
            Eigen::Matrix2d gram = Eigen::Matrix2d::Identity() + d.transpose() * d;
            ec[c] += (std::sqrt(gram.determinant()) - 1) * m.cell_area()[c];
        }
    for (const auto& [name, flags] : regions) {
        if (int(flags.size()) != m.num_cells()) throw InvalidInput("taylor_check: one flag per cell");
        TaylorRow row;
        row.region = name;
        for (int c = 0; c < m.num_cells(); ++c)
            if (flags[c]) {
                row.e += ec[c];
                row.dirichlet += en.cell_energy[c];
            }
        if (row.dirichlet > 0) {
            double ratio = 2 * row.e / row.dirichlet;
            row.rel_error = std::abs(row.e - row.dirichlet / 2) / row.dirichlet;
            double l2 = rep.lip * rep.lip;
            if (l2 > 0) {
                row.c_max = ratio < 1 ? l2 / (1 - ratio) : INFINITY;
                row.c_min = std::max(0.0, (ratio - 1) / l2);
            }
        }
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------

HigherIntegrabilityReport higher_integrability_scan(const ExcessField& f, const std::vector<double>& ps,
                                                    double threshold, double inner_fraction) {
    const BaseGrid& g = f.grid;
    std::vector<char> region(g.size(), 0);
    double area = 0;
    const double half = g.is_ball ? g.radius : 0.5 * std::min(g.nx, g.ny) * g.h;
    for (int k = 0; k < g.size(); ++k) {
        if (!g.kept[k]) continue;
        Point2 d = g.cell_center(k) - g.center;
        bool inner = g.is_ball ? d.norm() <= inner_fraction * half : d.cwiseAbs().maxCoeff() <= inner_fraction * half;
        if (inner && f.delta[k] <= threshold) {
            region[k] = 1;
            area += g.cell_area();
        }
    }
    std::vector<double> sorted = ps;
    std::sort(sorted.begin(), sorted.end());
    HigherIntegrabilityReport rep;
    for (double p : sorted) {
        if (!(p >= 1)) throw InvalidInput("higher_integrability_scan: p >= 1");
        HigherIntegrabilityRow row;
        row.p = p;
        for (int k = 0; k < g.size(); ++k)
            if (region[k]) row.lhs += std::pow(std::max(f.delta[k], 0.0), p) * g.cell_area();
        double ep = std::pow(f.excess, p);
        row.ratio = ep > 0 ? row.lhs / ep : 0.0;
        row.power_mean = area > 0 ? std::pow(row.lhs / area, 1 / p) : 0.0;
        if (!rep.rows.empty() && row.power_mean < rep.rows.back().power_mean * (1 - 1e-12)) rep.monotone = false;
        rep.rows.push_back(row);
    }
    return rep;
}

StrongEstimateReport strong_estimate_scan(const ExcessField& f, double sigma) {
    const BaseGrid& g = f.grid;
    StrongEstimateReport rep;
    for (int level = 0; (1 << level) <= std::min(g.nx, g.ny); ++level) {
        int b = 1 << level;
        for (int j = 0; (j + 1) * b <= g.ny; ++j)
            for (int i = 0; (i + 1) * b <= g.nx; ++i) {
                bool all = true;
                double e = 0;
                for (int jj = j * b; jj < (j + 1) * b; ++jj)
                    for (int ii = i * b; ii < (i + 1) * b; ++ii) {
                        all = all && g.kept[g.id(ii, jj)];
                        e += f.e[g.id(ii, jj)];
                    }
                if (!all) continue;
                StrongEstimateRow row{level, i, j, double(b * b) * g.cell_area(), e, 0, 0};
                row.rhs = f.excess * (std::pow(f.excess, sigma) + std::pow(row.area, sigma));
                row.ratio = row.rhs > 0 ? row.e / row.rhs : 0.0;
                if (level > 0) {
                    // Children are the four blocks one level down.
                    double kids = 0;
                    int hb = b / 2;
                    for (int jj = j * b; jj < (j + 1) * b; jj += hb)
                        for (int ii = i * b; ii < (i + 1) * b; ii += hb)
                            for (int y = jj; y < jj + hb; ++y)
                                for (int x = ii; x < ii + hb; ++x) kids += f.e[g.id(x, y)];
                    rep.additivity_gap = std::max(rep.additivity_gap, std::abs(kids - e));
                }
                rep.rows.push_back(row);
            }
    }
    return rep;
}

}  // namespace qv
