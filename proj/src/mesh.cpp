#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "qv/error.hpp"
#include "qv/mesh.hpp"

namespace qv {

Mesh::Mesh(std::vector<Point2> vertices, std::vector<std::array<int, 3>> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
    build();
}

void Mesh::build() {
    const int nv = num_vertices();
    area_.assign(cells_.size(), 0.0);
    cell_edges_.assign(cells_.size(), {});
    cell_w_.assign(cells_.size(), {});
    std::map<std::pair<int, int>, int> edge_id;
    std::vector<int> edge_cells;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        auto& t = cells_[c];
        for (int v : t)
            if (v < 0 || v >= nv) throw InvalidInput("Mesh: cell references a missing vertex");
        Point2 e1 = vertices_[t[1]] - vertices_[t[0]], e2 = vertices_[t[2]] - vertices_[t[0]];
        double a2 = e1.x() * e2.y() - e1.y() * e2.x();
        if (a2 < 0) {
            std::swap(t[1], t[2]);
            a2 = -a2;
        }
        if (a2 <= 1e-300) throw InvalidInput("Mesh: degenerate cell " + std::to_string(c));
        area_[c] = 0.5 * a2;
        for (int k = 0; k < 3; ++k) {
            // Edge opposite vertex k.
            int a = t[(k + 1) % 3], b = t[(k + 2) % 3];
            Point2 u = vertices_[a] - vertices_[t[k]], v = vertices_[b] - vertices_[t[k]];
            double cot = u.dot(v) / std::abs(u.x() * v.y() - u.y() * v.x());
            auto key = std::minmax(a, b);
            auto it = edge_id.find(key);
            int id;
            if (it == edge_id.end()) {
                id = int(edges_.size());
                edge_id.emplace(key, id);
                edges_.push_back({key.first, key.second, 0.0});
                edge_cells.push_back(0);
            } else {
                id = it->second;
            }
            edges_[id].w += 0.5 * cot;
            edge_cells[id]++;
            cell_edges_[c][k] = id;
            cell_w_[c][k] = 0.5 * cot;
        }
    }
    boundary_.assign(nv, 0);
    vertex_edges_.assign(nv, {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edge_cells[e] == 1) boundary_[edges_[e].a] = boundary_[edges_[e].b] = 1;
        vertex_edges_[edges_[e].a].push_back(int(e));
        vertex_edges_[edges_[e].b].push_back(int(e));
    }
}

Mesh Mesh::grid_region(int nx, int ny, double x0, double y0, double x1, double y1,
                       const std::function<bool(Point2)>& keep) {
    if (nx <= 0 || ny <= 0 || !(x1 > x0) || !(y1 > y0))
        throw InvalidInput("Mesh: bad grid extent");
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.x0 = x0;
    g.y0 = y0;
    g.hx = (x1 - x0) / nx;
    g.hy = (y1 - y0) / ny;
    auto pos = [&](int i, int j) { return Point2(x0 + i * g.hx, y0 + j * g.hy); };
    std::vector<char> inside((nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) inside[j * (nx + 1) + i] = keep(pos(i, j));
    g.vertex.assign((nx + 1) * (ny + 1), -1);
    g.square.assign(nx * ny, -1);
    std::vector<Point2> verts;
    std::vector<std::array<int, 3>> cells;
    auto vid = [&](int i, int j) {
        int& v = g.vertex[j * (nx + 1) + i];
        if (v < 0) {
            v = int(verts.size());
            verts.push_back(pos(i, j));
        }
        return v;
    };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            auto in = [&](int a, int b) { return inside[b * (nx + 1) + a]; };
            if (!(in(i, j) && in(i + 1, j) && in(i + 1, j + 1) && in(i, j + 1))) continue;
            int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
            g.square[j * nx + i] = int(cells.size());
            cells.push_back({v00, v10, v11});
            cells.push_back({v00, v11, v01});
        }
    if (cells.empty()) throw InvalidInput("Mesh: region keeps no squares");
    Mesh m(std::move(verts), std::move(cells));
    m.grid_ = std::move(g);
    return m;
}

Mesh Mesh::grid_box(int nx, int ny, double x0, double y0, double x1, double y1) {
    return grid_region(nx, ny, x0, y0, x1, y1, [](Point2) { return true; });
}

Mesh Mesh::grid_disk(Point2 center, double r, int n) {
    double eps = 1e-12 * r;
    return grid_region(n, n, center.x() - r, center.y() - r, center.x() + r,
                       center.y() + r,
                       [=](Point2 p) { return (p - center).norm() <= r + eps; });
}

Mesh Mesh::grid_annulus(Point2 center, double r_in, double r_out, int n) {
    if (!(r_in > 0) || !(r_out > r_in)) throw InvalidInput("Mesh: bad annulus radii");
    double eps = 1e-12 * r_out;
    // Keep squares whose corners are inside the outer disk and outside the
    // open inner disk; that leaves a hole around the centre.
    Mesh m = grid_region(n, n, center.x() - r_out, center.y() - r_out,
                         center.x() + r_out, center.y() + r_out, [=](Point2 p) {
                             double d = (p - center).norm();
                             return d <= r_out + eps && d >= r_in - eps;
                         });
    return m;
}

double Mesh::area() const {
    double a = 0.0;
    for (double x : area_) a += x;
    return a;
}

Point2 Mesh::centroid(int c) const {
    const auto& t = cells_[c];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

double Mesh::min_edge_length() const {
    double h = INFINITY;
    for (const Edge& e : edges_) h = std::min(h, (vertices_[e.a] - vertices_[e.b]).norm());
    return h;
}

namespace {

bool barycentric(const std::vector<Point2>& v, const std::array<int, 3>& t,
                 const Point2& x, Eigen::Vector3d& b, double tol) {
    Point2 a = v[t[0]], e1 = v[t[1]] - a, e2 = v[t[2]] - a, d = x - a;
    double det = e1.x() * e2.y() - e1.y() * e2.x();
    double l1 = (d.x() * e2.y() - d.y() * e2.x()) / det;
    double l2 = (e1.x() * d.y() - e1.y() * d.x()) / det;
    b << 1 - l1 - l2, l1, l2;
    return b.minCoeff() >= -tol;
}

}  // namespace

int Mesh::locate(const Point2& x, Eigen::Vector3d* bary) const {
    Eigen::Vector3d b;
    const double tol = 1e-12;
    if (grid_) {
        const Grid& g = *grid_;
        double fx = (x.x() - g.x0) / g.hx, fy = (x.y() - g.y0) / g.hy;
        int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
        // Points on square edges may belong to a neighbour.
        for (int dj = 0; dj >= -1; --dj)
            for (int di = 0; di >= -1; --di) {
                int i = i0 + di, j = j0 + dj;
                if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) continue;
                int s = g.sid(i, j);
                if (s < 0) continue;
                for (int c : {s, s + 1})
                    if (barycentric(vertices_, cells_[c], x, b, tol)) {
                        if (bary) *bary = b;
                        return c;
                    }
            }
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                int i = i0 + di, j = j0 + dj;
                if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) continue;
                int s = g.sid(i, j);
                if (s < 0) continue;
                for (int c : {s, s + 1})
                    if (barycentric(vertices_, cells_[c], x, b, 1e-9)) {
                        if (bary) *bary = b;
                        return c;
                    }
            }
        return -1;
    }
    for (int c = 0; c < num_cells(); ++c)
        if (barycentric(vertices_, cells_[c], x, b, tol)) {
            if (bary) *bary = b;
            return c;
        }
    return -1;
}

nlohmann::json Mesh::to_json() const {
    nlohmann::json v = nlohmann::json::array(), c = nlohmann::json::array();
    for (const Point2& p : vertices_) v.push_back({p.x(), p.y()});
    for (const auto& t : cells_) c.push_back({t[0], t[1], t[2]});
    nlohmann::json j = {{"vertices", v}, {"cells", c}};
    if (grid_)
        j["grid"] = {{"nx", grid_->nx}, {"ny", grid_->ny}, {"x0", grid_->x0},
                     {"y0", grid_->y0}, {"hx", grid_->hx}, {"hy", grid_->hy}};
    return j;
}

Mesh Mesh::from_json(const nlohmann::json& j) {
    try {
        std::vector<Point2> v;
        for (const auto& p : j.at("vertices")) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        std::vector<std::array<int, 3>> c;
        for (const auto& t : j.at("cells")) c.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        Mesh m(std::move(v), std::move(c));
        if (j.contains("grid")) {
            const auto& gj = j["grid"];
            Grid g;
            g.nx = gj.at("nx");
            g.ny = gj.at("ny");
            g.x0 = gj.at("x0");
            g.y0 = gj.at("y0");
            g.hx = gj.at("hx");
            g.hy = gj.at("hy");
            g.vertex.assign((g.nx + 1) * (g.ny + 1), -1);
            g.square.assign(g.nx * g.ny, -1);
            for (int i = 0; i < m.num_vertices(); ++i) {
                int a = int(std::lround((m.vertices_[i].x() - g.x0) / g.hx));
                int b = int(std::lround((m.vertices_[i].y() - g.y0) / g.hy));
                g.vertex[b * (g.nx + 1) + a] = i;
            }
            for (int c2 = 0; c2 + 1 < m.num_cells(); c2 += 2) {
                Point2 ctr = m.centroid(c2);
                int a = int(std::floor((ctr.x() - g.x0) / g.hx));
                int b = int(std::floor((ctr.y() - g.y0) / g.hy));
                g.square[b * g.nx + a] = c2;
            }
            m.grid_ = std::move(g);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("mesh json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

QField::QField(MeshPtr m, std::vector<QPoint> v) : mesh(std::move(m)), values(std::move(v)) {
    if (!mesh) throw InvalidInput("QField: no mesh");
    if (int(values.size()) != mesh->num_vertices())
        throw InvalidInput("QField: one value per vertex required");
    q = values.at(0).q();
    n = values.at(0).n();
    for (const QPoint& p : values)
        if (p.q() != q || p.n() != n) throw InvalidInput("QField: mixed (q, n)");
}

QField QField::from_function(MeshPtr m, const std::function<QPoint(Point2)>& f) {
    std::vector<QPoint> v;
    v.reserve(m->num_vertices());
    for (const Point2& p : m->vertices()) v.push_back(f(p));
    return QField(std::move(m), std::move(v));
}

QPoint QField::at(const Point2& x) const {
    Eigen::Vector3d b;
    int c = mesh->locate(x, &b);
    if (c < 0) throw DomainError("QField::at: point outside the mesh");
    const auto& t = mesh->cells()[c];
    const QPoint &a = values[t[0]], &pb = values[t[1]], &pc = values[t[2]];
    std::vector<int> sb, sc;
    if (!cell_sheets(a, pb, pc, sb, sc, INFINITY)) {
        sb = match_squared(a, pb).perm;
        sc = match_squared(a, pc).perm;
    }
    QPoint out(q, n);
    for (int i = 0; i < q; ++i)
        for (int k = 0; k < n; ++k)
            out.point(i)[k] = b[0] * a.point(i)[k] + b[1] * pb.point(sb[i])[k] +
                              b[2] * pc.point(sc[i])[k];
    return out;
}

nlohmann::json to_json(const QField& f) {
    nlohmann::json v = nlohmann::json::array();
    for (const QPoint& p : f.values) v.push_back(p);
    return {{"mesh", f.mesh->to_json()}, {"q", f.q}, {"n", f.n}, {"values", v}};
}

QField qfield_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<const Mesh>(Mesh::from_json(j.at("mesh")));
    std::vector<QPoint> v;
    for (const auto& p : j.at("values")) v.push_back(p.get<QPoint>());
    return QField(m, std::move(v));
}

double p1_energy(const Mesh& m, const VField& u, std::vector<double>* per_cell) {
    if (int(u.size()) != m.num_vertices()) throw InvalidInput("p1_energy: one value per vertex");
    double total = 0.0;
    if (per_cell) per_cell->assign(m.num_cells(), 0.0);
    for (int c = 0; c < m.num_cells(); ++c) {
        double e = 0.0;
        for (int k = 0; k < 3; ++k) {
            const auto& ed = m.edges()[m.cell_edges(c)[k]];
            e += m.cell_edge_weights(c)[k] * (u[ed.a] - u[ed.b]).squaredNorm();
        }
        if (per_cell) (*per_cell)[c] = e;
        total += e;
    }
    return total;
}

namespace {

double pair_cost(const QPoint& a, const QPoint& b, const std::vector<int>& s) {
    double c = 0.0;
    for (int i = 0; i < a.q(); ++i) c += (a.vec(i) - b.vec(s[i])).squaredNorm();
    return c;
}

}  // namespace

bool cell_sheets(const QPoint& a, const QPoint& b, const QPoint& c,
                 std::vector<int>& sb, std::vector<int>& sc, double tol) {
    const int q = a.q();
    Assignment ab = match_squared(a, b), ac = match_squared(a, c), bc = match_squared(b, c);
    double scale = 1.0 + ab.cost + ac.cost + bc.cost;
    auto ok = [&](const std::vector<int>& x, const std::vector<int>& y) {
        // Implied b -> c matching.
        std::vector<int> s(q);
        for (int i = 0; i < q; ++i) s[x[i]] = y[i];
        return pair_cost(a, b, x) <= ab.cost + tol * scale &&
               pair_cost(a, c, y) <= ac.cost + tol * scale &&
               pair_cost(b, c, s) <= bc.cost + tol * scale;
    };
    if (ok(ab.perm, ac.perm)) {
        sb = ab.perm;
        sc = ac.perm;
        return true;
    }
    std::vector<int> x(q), y(q);
    for (int i = 0; i < q; ++i) x[i] = i;
    do {
        if (pair_cost(a, b, x) > ab.cost + tol * scale) continue;
        for (int i = 0; i < q; ++i) y[i] = i;
        do {
            if (ok(x, y)) {
                sb = x;
                sc = y;
                return true;
            }
        } while (std::next_permutation(y.begin(), y.end()));
    } while (std::next_permutation(x.begin(), x.end()));
    return false;
}

}  // namespace qv
