#pragma once

// Internal helpers shared by the dirichlet sources.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qv/error.hpp"
#include "qv/mesh.hpp"

namespace qv::detail {

// (1 - t) a + t b with the sheets of b matched optimally to a.
inline QPoint matched_lerp(const QPoint& a, const QPoint& b, double t) {
    if (t <= 0) return a;
    if (t >= 1) return b;
    auto perm = match_squared(a, b).perm;
    QPoint out(a.q(), a.n());
    for (int i = 0; i < a.q(); ++i)
        for (int k = 0; k < a.n(); ++k)
            out.point(i)[k] = (1 - t) * a.point(i)[k] + t * b.point(perm[i])[k];
    return out;
}

// Edges lying on exactly one cell.
inline std::vector<int> boundary_edges(const Mesh& m) {
    std::vector<int> count(m.edges().size(), 0);
    for (int c = 0; c < m.num_cells(); ++c)
        for (int e : m.cell_edges(c)) ++count[e];
    std::vector<int> out;
    for (std::size_t e = 0; e < count.size(); ++e)
        if (count[e] == 1) out.push_back(int(e));
    return out;
}

inline double edge_length(const Mesh& m, int e) {
    const auto& ed = m.edges()[e];
    return (m.vertices()[ed.a] - m.vertices()[ed.b]).norm();
}

// Vertex-lumped areas (a third of each incident cell).
inline std::vector<double> lumped_area(const Mesh& m) {
    std::vector<double> a(m.num_vertices(), 0.0);
    for (int c = 0; c < m.num_cells(); ++c)
        for (int v : m.cells()[c]) a[v] += m.cell_area()[c] / 3.0;
    return a;
}

// max over edges of G / length, optionally only edges whose ends pass `use`.
template <class Pred>
double edge_lipschitz(const QField& u, Pred use) {
    const Mesh& m = *u.mesh;
    double lip = 0.0;
    for (int e = 0; e < int(m.edges().size()); ++e) {
        const auto& ed = m.edges()[e];
        if (!use(ed.a) || !use(ed.b)) continue;
        lip = std::max(lip, metric_g(u.values[ed.a], u.values[ed.b]) / edge_length(m, e));
    }
    return lip;
}

inline double edge_lipschitz(const QField& u) {
    return edge_lipschitz(u, [](int) { return true; });
}

// Value of u at x, nudged towards `inside` when x sits on the boundary and
// rounding puts it just outside the mesh.
inline QPoint field_at(const QField& u, const Point2& x, const Point2& inside) {
    for (int i = 0; i < 8; ++i) {
        double s = i == 0 ? 0.0 : std::pow(10.0, -13 + i);
        Point2 y = x + s * (inside - x);
        if (u.mesh->locate(y) >= 0) return u.at(y);
    }
    throw DomainError("field lookup outside the mesh");
}

// Fills the unknown entries of w (xi-space values at mesh vertices) in
// breadth-first order from the known ones, each by a Kirszbraun extension of
// the known values within 4h (window doubled until it holds 3 samples) at
// constant max(level, local Lipschitz constant).
void lipschitz_fill(const Mesh& m, std::vector<char>& known, std::vector<Vec>& w, double level);

}  // namespace qv::detail
