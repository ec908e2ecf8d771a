#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "field_util.hpp"
#include "qv/currents.hpp"
#include "qv/error.hpp"

namespace qv {

namespace {

// All sorted k-subsets of {0..d-1}, lexicographic.
std::vector<std::vector<int>> subsets(int d, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        if (int(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < d; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

Mat edge_matrix(const SimplicialCurrent::Cell& c, int ambient) {
    const int k = int(c.v.size()) - 1;
    Mat e(ambient, k);
    for (int j = 0; j < k; ++j) e.col(j) = c.v[j + 1] - c.v[0];
    return e;
}

double det_rows(const Mat& e, const std::vector<int>& rows) {
    const int k = int(rows.size());
    if (k == 0) return 1.0;
    Mat s(k, k);
    for (int i = 0; i < k; ++i) s.row(i) = e.row(rows[i]);
    return s.determinant();
}

double factorial(int k) {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = z;
            dp = n * (z * p1 - p0) / (z * z - 1);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = 0.5 * (1 - z);
        w[i] = 1.0 / ((1 - z * z) * dp * dp);
    }
}

const std::vector<double>& gl_nodes() {
    static std::vector<double> x, w;
    if (x.empty()) gauss_legendre(8, x, w);
    return x;
}
const std::vector<double>& gl_weights() {
    static std::vector<double> x, w;
    if (w.empty()) gauss_legendre(8, x, w);
    return w;
}

// Exact-coordinate key for a vertex (signed zeros folded).
std::vector<double> key_of(const Vec& v) {
    std::vector<double> k(v.size());
    for (int i = 0; i < v.size(); ++i) k[i] = v[i] == 0.0 ? 0.0 : v[i];
    return k;
}

Vec lift(const Point2& x, std::span<const double> y) {
    Vec v(2 + y.size());
    v[0] = x.x();
    v[1] = x.y();
    for (std::size_t i = 0; i < y.size(); ++i) v[2 + i] = y[i];
    return v;
}

// Adds the lifted copies of one base simplex, merging equal ones.
void add_lifted(SimplicialCurrent& out, std::vector<SimplicialCurrent::Cell> cells) {
    std::vector<char> used(cells.size(), 0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (used[i]) continue;
        for (std::size_t j = i + 1; j < cells.size(); ++j)
            if (!used[j] && cells[j].v == cells[i].v) {
                cells[i].theta += cells[j].theta;
                used[j] = 1;
            }
        out.cells.push_back(std::move(cells[i]));
    }
}

}  // namespace

// ---------------------------------------------------------------------------

double SimplicialCurrent::volume(int c) const {
    const Cell& cell = cells[c];
    const int k = int(cell.v.size()) - 1;
    if (k == 0) return 1.0;
    Mat e = edge_matrix(cell, ambient);
    return std::sqrt(std::max(0.0, (e.transpose() * e).determinant())) / factorial(k);
}

Vec SimplicialCurrent::orientation(int c) const {
    Mat e = edge_matrix(cells[c], ambient);
    auto sets = subsets(ambient, dim);
    Vec p(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) p[i] = det_rows(e, sets[i]);
    double n = p.norm();
    return n > 0 ? Vec(p / n) : p;
}

Mat SimplicialCurrent::tangent_projector(int c) const {
    Mat e = edge_matrix(cells[c], ambient);
    Eigen::HouseholderQR<Mat> qr(e);
    Mat q = qr.householderQ() * Mat::Identity(ambient, dim);
    return q * q.transpose();
}

void SimplicialCurrent::validate() const {
    if (base < 0 || base > ambient || dim < 0 || dim > ambient)
        throw InvalidInput("current: inconsistent dimensions");
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (int(cells[c].v.size()) != dim + 1) throw InvalidInput("current: cell with wrong vertex count");
        for (const Vec& v : cells[c].v)
            if (v.size() != ambient) throw InvalidInput("current: vertex of wrong dimension");
        if (cells[c].theta == 0) throw InvalidInput("current: zero multiplicity");
        if (dim > 0 && !(volume(int(c)) > 0)) throw InvalidInput("current: degenerate cell " + std::to_string(c));
    }
}

nlohmann::json SimplicialCurrent::to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const Cell& c : cells) {
        nlohmann::json vs = nlohmann::json::array();
        for (const Vec& v : c.v) vs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
        cs.push_back({{"vertices", vs}, {"multiplicity", std::abs(c.theta)}, {"sign", c.theta > 0 ? 1 : -1}});
    }
    return {{"ambient", ambient}, {"base", base}, {"dim", dim}, {"cells", cs}};
}

SimplicialCurrent SimplicialCurrent::from_json(const nlohmann::json& j) {
    SimplicialCurrent t;
    t.ambient = j.at("ambient").get<int>();
    t.base = j.at("base").get<int>();
    t.dim = j.at("dim").get<int>();
    for (const auto& c : j.at("cells")) {
        Cell cell;
        for (const auto& v : c.at("vertices")) {
            auto x = v.get<std::vector<double>>();
            cell.v.push_back(Eigen::Map<const Vec>(x.data(), Eigen::Index(x.size())));
        }
        cell.theta = c.at("multiplicity").get<int>() * c.at("sign").get<int>();
        t.cells.push_back(std::move(cell));
    }
    t.validate();
    return t;
}

SimplicialCurrent graph_current(const QField& f) {
    const Mesh& m = *f.mesh;
    SimplicialCurrent t;
    t.ambient = 2 + f.n;
    t.base = 2;
    t.dim = 2;
    for (int c = 0; c < m.num_cells(); ++c) {
        const auto& tri = m.cells()[c];
        const QPoint &a = f.values[tri[0]], &b = f.values[tri[1]], &d = f.values[tri[2]];
        std::vector<int> sb, sd;
        if (!cell_sheets(a, b, d, sb, sd))
            throw DomainError("graph_current: cell " + std::to_string(c) +
                              " holds a branch point; refine the mesh");
        std::vector<SimplicialCurrent::Cell> lifted;
        for (int i = 0; i < f.q; ++i)
            lifted.push_back({{lift(m.vertices()[tri[0]], a.point(i)), lift(m.vertices()[tri[1]], b.point(sb[i])),
                               lift(m.vertices()[tri[2]], d.point(sd[i]))},
                              1});
        add_lifted(t, std::move(lifted));
    }
    return t;
}

SimplicialCurrent flat_current(const Mesh& mesh) {
    SimplicialCurrent t;
    t.ambient = t.base = t.dim = 2;
    for (const auto& tri : mesh.cells())
        t.cells.push_back({{mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]}, 1});
    return t;
}

double mass(const SimplicialCurrent& t) {
    double s = 0;
    for (int c = 0; c < int(t.cells.size()); ++c) s += std::abs(t.cells[c].theta) * t.volume(c);
    return s;
}

double mass(const SimplicialCurrent& t, const std::vector<char>& cells) {
    if (cells.size() != t.cells.size()) throw InvalidInput("mass: one flag per cell");
    double s = 0;
    for (int c = 0; c < int(t.cells.size()); ++c)
        if (cells[c]) s += std::abs(t.cells[c].theta) * t.volume(c);
    return s;
}

SimplicialCurrent pushforward(const QField& f, const SimplicialCurrent& r) {
    if (r.ambient != 2 || r.base != 2) throw InvalidInput("pushforward: R must live in the base plane");
    if (r.dim > 2) throw InvalidInput("pushforward: dimension mismatch");
    const Mesh& m = *f.mesh;
    std::map<std::vector<double>, int> vid;
    for (int v = 0; v < m.num_vertices(); ++v) vid.emplace(key_of(m.vertices()[v]), v);
    auto value = [&](const Vec& x) {
        auto it = vid.find(key_of(x));
        return it != vid.end() ? f.values[it->second] : f.at(Point2(x[0], x[1]));
    };
    SimplicialCurrent t;
    t.ambient = 2 + f.n;
    t.base = 2;
    t.dim = r.dim;
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
        const auto& cell = r.cells[c];
        std::vector<QPoint> vals;
        for (const Vec& x : cell.v) vals.push_back(value(x));
        std::vector<std::vector<int>> perm(vals.size());
        std::vector<int> id(f.q);
        for (int i = 0; i < f.q; ++i) id[i] = i;
        perm[0] = id;
        if (r.dim == 1) {
            perm[1] = match_squared(vals[0], vals[1]).perm;
        } else if (r.dim == 2) {
            if (!cell_sheets(vals[0], vals[1], vals[2], perm[1], perm[2]))
                throw DomainError("pushforward: cell " + std::to_string(c) + " holds a branch point");
        }
        std::vector<SimplicialCurrent::Cell> lifted;
        for (int i = 0; i < f.q; ++i) {
            SimplicialCurrent::Cell lc;
            lc.theta = cell.theta;
            for (std::size_t j = 0; j < vals.size(); ++j)
                lc.v.push_back(lift(Point2(cell.v[j][0], cell.v[j][1]), vals[j].point(perm[j][i])));
            lifted.push_back(std::move(lc));
        }
        add_lifted(t, std::move(lifted));
    }
    return t;
}

double pushforward_mass(const QField& f, const SimplicialCurrent& r) { return mass(pushforward(f, r)); }

SimplicialCurrent boundary(const SimplicialCurrent& t) {
    if (t.dim < 1) throw InvalidInput("boundary: 0-currents have no boundary");
    std::map<std::vector<std::vector<double>>, int> faces;
    std::map<std::vector<std::vector<double>>, std::vector<Vec>> verts;
    for (const auto& cell : t.cells) {
        for (int j = 0; j <= t.dim; ++j) {
            std::vector<Vec> f;
            for (int i = 0; i <= t.dim; ++i)
                if (i != j) f.push_back(cell.v[i]);
            // Sort vertices, tracking the permutation parity.
            std::vector<int> order(f.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
            std::vector<std::vector<double>> keys;
            for (const Vec& v : f) keys.push_back(key_of(v));
            int sign = (j % 2 == 0) ? 1 : -1;
            for (std::size_t a = 0; a < order.size(); ++a)
                for (std::size_t b = 0; b + 1 < order.size() - a; ++b)
                    if (keys[order[b + 1]] < keys[order[b]]) {
                        std::swap(order[b], order[b + 1]);
                        sign = -sign;
                    }
            std::vector<std::vector<double>> key;
            std::vector<Vec> sorted;
            for (int o : order) {
                key.push_back(keys[o]);
                sorted.push_back(f[o]);
            }
            faces[key] += sign * cell.theta;
            verts.emplace(key, std::move(sorted));
        }
    }
    SimplicialCurrent b;
    b.ambient = t.ambient;
    b.base = t.base;
    b.dim = t.dim - 1;
    for (const auto& [key, theta] : faces)
        if (theta != 0) b.cells.push_back({verts.at(key), theta});
    return b;
}

// ---------------------------------------------------------------------------

PolyForm& PolyForm::add(double c, std::vector<int> pow, std::vector<int> idx) {
    if (int(pow.size()) != ambient_) throw InvalidInput("PolyForm: exponent vector of wrong size");
    if (int(idx.size()) != degree_ || !std::is_sorted(idx.begin(), idx.end()) ||
        std::adjacent_find(idx.begin(), idx.end()) != idx.end())
        throw InvalidInput("PolyForm: index set must be increasing with size equal to the degree");
    for (int i : idx)
        if (i < 0 || i >= ambient_) throw InvalidInput("PolyForm: index out of range");
    terms_[idx].push_back({c, std::move(pow)});
    return *this;
}

double PolyForm::eval(const Vec& x, const Mat& e) const {
    double s = 0;
    for (const auto& [idx, poly] : terms_) {
        double p = 0;
        for (const auto& mono : poly) {
            double v = mono.c;
            for (int i = 0; i < ambient_; ++i)
                for (int k = 0; k < mono.pow[i]; ++k) v *= x[i];
            p += v;
        }
        s += p * det_rows(e, idx);
    }
    return s;
}

PolyForm PolyForm::d() const {
    PolyForm out(ambient_, degree_ + 1);
    for (const auto& [idx, poly] : terms_)
        for (const auto& mono : poly)
            for (int j = 0; j < ambient_; ++j) {
                if (mono.pow[j] == 0 || std::find(idx.begin(), idx.end(), j) != idx.end()) continue;
                std::vector<int> pow = mono.pow;
                double c = mono.c * pow[j];
                --pow[j];
                int before = int(std::count_if(idx.begin(), idx.end(), [&](int i) { return i < j; }));
                std::vector<int> nidx = idx;
                nidx.insert(nidx.begin() + before, j);
                out.terms_[nidx].push_back({before % 2 == 0 ? c : -c, pow});
            }
    return out;
}

int PolyForm::poly_degree() const {
    int d = 0;
    for (const auto& [idx, poly] : terms_)
        for (const auto& mono : poly) {
            int s = 0;
            for (int p : mono.pow) s += p;
            d = std::max(d, s);
        }
    return d;
}

double pair(const SimplicialCurrent& t, const PolyForm& omega) {
    if (omega.ambient() != t.ambient || omega.degree() != t.dim)
        throw InvalidInput("pair: form and current dimensions differ");
    if (omega.poly_degree() > 12) throw CapabilityError("pair: polynomial degree above 12");
    const auto &x = gl_nodes(), &w = gl_weights();
    double s = 0;
    for (const auto& cell : t.cells) {
        Mat e = edge_matrix(cell, t.ambient);
        double v = 0;
        if (t.dim == 0) {
            v = omega.eval(cell.v[0], e);
        } else if (t.dim == 1) {
            for (std::size_t i = 0; i < x.size(); ++i) v += w[i] * omega.eval(cell.v[0] + x[i] * e.col(0), e);
        } else if (t.dim == 2) {
            // Collapsed Gauss rule on the reference triangle.
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = 0; j < x.size(); ++j) {
                    double u = x[i], r = (1 - u) * x[j];
                    v += w[i] * w[j] * (1 - u) * omega.eval(cell.v[0] + u * e.col(0) + r * e.col(1), e);
                }
        } else {
            throw CapabilityError("pair: cells of dimension above 2");
        }
        s += cell.theta * v;
    }
    return s;
}

double stokes_check(const SimplicialCurrent& t, const PolyForm& omega) {
    return std::abs(pair(t, omega.d()) - pair(boundary(t), omega));
}

double graph_stokes_residual(const QField& fh, const std::function<QPoint(Point2)>& f,
                             const PolyForm& omega, int subdivisions) {
    if (subdivisions < 1) throw InvalidInput("graph_stokes_residual: need at least one subdivision");
    double lhs = pair(graph_current(fh), omega.d());
    SimplicialCurrent edges = boundary(flat_current(*fh.mesh));
    SimplicialCurrent lifted;
    lifted.ambient = 2 + fh.n;
    lifted.base = 2;
    lifted.dim = 1;
    for (const auto& e : edges.cells) {
        Point2 a(e.v[0][0], e.v[0][1]), b(e.v[1][0], e.v[1][1]);
        QPoint prev = f(a);
        for (int s = 1; s <= subdivisions; ++s) {
            Point2 x0 = a + (b - a) * (double(s - 1) / subdivisions), x1 = a + (b - a) * (double(s) / subdivisions);
            QPoint next = f(x1);
            auto perm = match_squared(prev, next).perm;
            for (int i = 0; i < fh.q; ++i)
                lifted.cells.push_back({{lift(x0, prev.point(i)), lift(x1, next.point(perm[i]))}, e.theta});
            prev = next;
        }
    }
    return std::abs(lhs - pair(lifted, omega));
}

// ---------------------------------------------------------------------------

int Slice::total() const {
    int s = 0;
    for (int x : signs) s += x;
    return s;
}

QPoint Slice::qpoint() const {
    for (int s : signs)
        if (s != 1) throw DomainError("slice: negative orientation present");
    if (points.empty()) throw DomainError("slice: empty");
    return QPoint::from_points(points);
}

SliceIndex::SliceIndex(const SimplicialCurrent& t) : t_(&t) {
    if (t.dim != 2 || t.base != 2) throw InvalidInput("SliceIndex: needs a 2-current over a plane");
    if (t.cells.empty()) throw InvalidInput("SliceIndex: empty current");
    Point2 lo(INFINITY, INFINITY), hi(-INFINITY, -INFINITY);
    std::vector<double> sizes;
    for (const auto& c : t.cells) {
        Point2 clo(INFINITY, INFINITY), chi(-INFINITY, -INFINITY);
        for (const Vec& v : c.v) {
            clo = clo.cwiseMin(Point2(v[0], v[1]));
            chi = chi.cwiseMax(Point2(v[0], v[1]));
        }
        lo = lo.cwiseMin(clo);
        hi = hi.cwiseMax(chi);
        sizes.push_back((chi - clo).maxCoeff());
    }
    std::nth_element(sizes.begin(), sizes.begin() + sizes.size() / 2, sizes.end());
    size_ = std::max(sizes[sizes.size() / 2], 1e-300);
    cell_ = 2 * size_;
    lo_ = lo;
    nb_ = std::max(1, int(std::ceil((hi.x() - lo.x()) / cell_)) + 1);
    mb_ = std::max(1, int(std::ceil((hi.y() - lo.y()) / cell_)) + 1);
    if (double(nb_) * mb_ > 4e7) throw CapabilityError("SliceIndex: too many buckets");
    buckets_.assign(std::size_t(nb_) * mb_, {});
    for (int c = 0; c < int(t.cells.size()); ++c) {
        Point2 clo(INFINITY, INFINITY), chi(-INFINITY, -INFINITY);
        for (const Vec& v : t.cells[c].v) {
            clo = clo.cwiseMin(Point2(v[0], v[1]));
            chi = chi.cwiseMax(Point2(v[0], v[1]));
        }
        int i0 = std::clamp(int((clo.x() - lo_.x()) / cell_), 0, nb_ - 1);
        int i1 = std::clamp(int((chi.x() - lo_.x()) / cell_), 0, nb_ - 1);
        int j0 = std::clamp(int((clo.y() - lo_.y()) / cell_), 0, mb_ - 1);
        int j1 = std::clamp(int((chi.y() - lo_.y()) / cell_), 0, mb_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) buckets_[std::size_t(j) * nb_ + i].push_back(c);
    }
}

bool SliceIndex::try_slice(const Point2& x, Slice& s) const {
    s.x = x;
    s.points.clear();
    s.signs.clear();
    int i = int(std::floor((x.x() - lo_.x()) / cell_)), j = int(std::floor((x.y() - lo_.y()) / cell_));
    if (i < 0 || j < 0 || i >= nb_ || j >= mb_) return true;
    const double tol = 1e-12;
    for (int c : buckets_[std::size_t(j) * nb_ + i]) {
        const auto& cell = t_->cells[c];
        Point2 p0(cell.v[0][0], cell.v[0][1]), p1(cell.v[1][0], cell.v[1][1]), p2(cell.v[2][0], cell.v[2][1]);
        Point2 e1 = p1 - p0, e2 = p2 - p0, r = x - p0;
        double det = e1.x() * e2.y() - e1.y() * e2.x();
        double scale = std::max(e1.squaredNorm(), e2.squaredNorm());
        if (std::abs(det) <= 1e-14 * scale) continue;  // vertical cell
        double l1 = (r.x() * e2.y() - r.y() * e2.x()) / det;
        double l2 = (e1.x() * r.y() - e1.y() * r.x()) / det;
        double l0 = 1 - l1 - l2;
        double lo = std::min({l0, l1, l2});
        if (lo < -tol) continue;
        if (lo <= tol) return false;  // on a projected edge
        Vec y = l0 * cell.v[0].tail(t_->fiber()) + l1 * cell.v[1].tail(t_->fiber()) +
                l2 * cell.v[2].tail(t_->fiber());
        int sign = (det > 0 ? 1 : -1) * (cell.theta > 0 ? 1 : -1);
        for (int k = 0; k < std::abs(cell.theta); ++k) {
            s.points.push_back(y);
            s.signs.push_back(sign);
        }
    }
    return true;
}

Slice SliceIndex::slice(const Point2& x) const {
    Slice s;
    if (try_slice(x, s)) return s;
    // On a projected edge: step off it, preferring a side that meets the
    // support (so points on the outer boundary see the inside).
    const Point2 dirs[4] = {Point2(0.8, 0.6), Point2(-0.6, 0.8), Point2(-0.8, -0.6), Point2(0.6, -0.8)};
    bool empty_ok = false;
    for (int k = 1; k <= 8; ++k)
        for (const Point2& d : dirs)
            if (try_slice(x + (k * 1e-9 * size_) * d, s)) {
                if (!s.points.empty()) return s;
                empty_ok = true;
            }
    if (empty_ok) {
        s.x = x;
        s.points.clear();
        s.signs.clear();
        return s;
    }
    throw DomainError("slice: degenerate position after jitter");
}

Slice slice(const SimplicialCurrent& t, const Point2& x) { return SliceIndex(t).slice(x); }

}  // namespace qv
