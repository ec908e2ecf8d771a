#include <algorithm>
#include <cmath>
#include <numbers>

#include "field_util.hpp"
#include "qv/dirichlet.hpp"
#include "qv/error.hpp"

namespace qv {

RadialGauge::RadialGauge(MeshPtr mesh, Point2 center) : mesh_(std::move(mesh)), center_(center) {
    for (int e : detail::boundary_edges(*mesh_)) segments_.emplace_back(mesh_->edges()[e].a, mesh_->edges()[e].b);
    if (segments_.empty()) throw InvalidInput("RadialGauge: mesh has no boundary");
}

int RadialGauge::hit(const Point2& dir, double* radius, double* t) const {
    const Point2 d = dir.normalized();
    int best = -1;
    double best_s = -1, best_t = 0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        const Point2 &p0 = mesh_->vertices()[segments_[k].first], &p1 = mesh_->vertices()[segments_[k].second];
        // center + s d = p0 + t (p1 - p0)
        Point2 e = p1 - p0, r = p0 - center_;
        double den = d.x() * (-e.y()) + d.y() * e.x();
        if (std::abs(den) < 1e-300) continue;
        double s = (r.x() * (-e.y()) + r.y() * e.x()) / den;
        double tt = (d.x() * r.y() - d.y() * r.x()) / den;
        const double slack = 1e-12;
        if (s <= 0 || tt < -slack || tt > 1 + slack) continue;
        if (s > best_s) {
            best_s = s;
            best_t = std::clamp(tt, 0.0, 1.0);
            best = int(k);
        }
    }
    if (best < 0) throw DomainError("RadialGauge: ray misses the boundary");
    *radius = best_s;
    *t = best_t;
    return best;
}

double RadialGauge::boundary_radius(const Point2& dir) const {
    double r, t;
    hit(dir, &r, &t);
    return r;
}

QPoint RadialGauge::boundary_value(const BoundaryData& g, const Point2& dir) const {
    double r, t;
    int k = hit(dir, &r, &t);
    auto a = g.find(segments_[k].first), b = g.find(segments_[k].second);
    if (a == g.end() || b == g.end()) throw InvalidInput("RadialGauge: boundary data missing a vertex");
    return detail::matched_lerp(a->second, b->second, t);
}

// ---------------------------------------------------------------------------

double boundary_energy(const Mesh& mesh, const BoundaryData& g) {
    double e = 0.0;
    for (int ei : detail::boundary_edges(mesh)) {
        const auto& ed = mesh.edges()[ei];
        auto a = g.find(ed.a), b = g.find(ed.b);
        if (a == g.end() || b == g.end()) throw InvalidInput("boundary_energy: data missing a vertex");
        e += metric_g_squared(a->second, b->second) / detail::edge_length(mesh, ei);
    }
    return e;
}

namespace {

Point2 area_centroid(const Mesh& m) {
    Point2 c(0, 0);
    double a = 0;
    for (int k = 0; k < m.num_cells(); ++k) {
        c += m.cell_area()[k] * m.centroid(k);
        a += m.cell_area()[k];
    }
    return c / a;
}

}  // namespace

InterpolationResult interpolate_annulus(const QField& f, const BoundaryData& g, double eps) {
    const Mesh& m = *f.mesh;
    for (const auto& [v, p] : g)
        if (p.q() != f.q || p.n() != f.n) throw InvalidInput("interpolate_annulus: q or n mismatch");
    for (int v = 0; v < m.num_vertices(); ++v)
        if (m.boundary()[v] && !g.count(v)) throw InvalidInput("interpolate_annulus: g misses a boundary vertex");
    const Point2 c = area_centroid(m);
    RadialGauge gauge(f.mesh, c);
    double rmin = INFINITY;
    for (int v = 0; v < m.num_vertices(); ++v)
        if (m.boundary()[v]) rmin = std::min(rmin, (m.vertices()[v] - c).norm());
    if (!(eps > 0 && eps < rmin)) throw InvalidInput("interpolate_annulus: need 0 < eps < r");

    std::vector<QPoint> vals(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (m.boundary()[v]) {
            vals[v] = g.at(v);
            continue;
        }
        Point2 rel = m.vertices()[v] - c;
        double rho = rel.norm();
        if (rho == 0.0) {
            vals[v] = f.at(c);
            continue;
        }
        double R = gauge.boundary_radius(rel);
        if (rho <= R - eps) {
            vals[v] = detail::field_at(f, c + rel * (R / (R - eps)), c);
        } else {
            Point2 b = c + rel * (R / rho);
            QPoint fb = detail::field_at(f, b, c), gb = gauge.boundary_value(g, rel);
            vals[v] = detail::matched_lerp(fb, gb, (rho - (R - eps)) / eps);
        }
    }
    InterpolationResult res{QField(f.mesh, std::move(vals)), {}};
    InterpolationReport& r = res.report;
    r.energy_h = dirichlet_energy(res.h).total;
    r.energy_f = dirichlet_energy(f).total;
    BoundaryData ftrace = boundary_trace(f);
    r.boundary_energy_f = boundary_energy(m, ftrace);
    r.boundary_energy_g = boundary_energy(m, g);
    for (int ei : detail::boundary_edges(m)) {
        const auto& ed = m.edges()[ei];
        double da = metric_g(f.values[ed.a], g.at(ed.a)), db = metric_g(f.values[ed.b], g.at(ed.b));
        r.mismatch += detail::edge_length(m, ei) * 0.5 * (da * da + db * db);
        r.sup_mismatch = std::max({r.sup_mismatch, da, db});
        r.lip_g = std::max(r.lip_g, metric_g(g.at(ed.a), g.at(ed.b)) / detail::edge_length(m, ei));
    }
    r.lip_h = detail::edge_lipschitz(res.h);
    r.lip_f = detail::edge_lipschitz(f);
    double excess = r.energy_h - r.energy_f - eps * (r.boundary_energy_g + r.boundary_energy_f);
    r.c_needed = excess <= 0 ? 0.0 : (r.mismatch > 0 ? excess * eps / r.mismatch : INFINITY);
    return res;
}

// ---------------------------------------------------------------------------

VField mollify(const Mesh& mesh, const VField& v, double eps) {
    if (!mesh.grid()) throw InvalidInput("mollify: needs a grid mesh");
    if (int(v.size()) != mesh.num_vertices()) throw InvalidInput("mollify: one value per vertex");
    const Mesh::Grid& g = *mesh.grid();
    if (!(eps >= 2.0 * std::max(g.hx, g.hy) * (1 - 1e-12)))
        throw InvalidInput("mollify: eps below twice the mesh spacing");
    auto bump = [](double s) { return std::abs(s) >= 1 ? 0.0 : (1 - s * s) * (1 - s * s); };
    const int ri = int(std::ceil(eps / g.hx)), rj = int(std::ceil(eps / g.hy));
    std::vector<double> wx(2 * ri + 1), wy(2 * rj + 1);
    for (int a = -ri; a <= ri; ++a) wx[a + ri] = bump(a * g.hx / eps);
    for (int b = -rj; b <= rj; ++b) wy[b + rj] = bump(b * g.hy / eps);

    VField out(v.size());
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            int id = g.vid(i, j);
            if (id < 0) continue;
            Vec acc = Vec::Zero(v[id].size());
            double wsum = 0.0;
            for (int b = -rj; b <= rj; ++b) {
                int jj = j + b;
                if (jj < 0 || jj > g.ny) continue;
                for (int a = -ri; a <= ri; ++a) {
                    int ii = i + a;
                    if (ii < 0 || ii > g.nx) continue;
                    int o = g.vid(ii, jj);
                    double w = wx[a + ri] * wy[b + rj];
                    if (o < 0 || w == 0.0) continue;
                    acc += w * v[o];
                    wsum += w;
                }
            }
            out[id] = acc / wsum;
        }
    return out;
}

// ---------------------------------------------------------------------------

CompetitorResult build_competitor(const QField& f, const AlmostProjection& proj,
                                  const CompetitorOptions& o) {
    if (!(0 < o.r1 && o.r1 < o.r2 && o.r2 < o.r3)) throw InvalidInput("build_competitor: need 0 < r1 < r2 < r3");
    if (!(o.energy_scale > 0)) throw InvalidInput("build_competitor: energy scale must be positive");
    const EmbeddingSpec& spec = proj.spec();
    if (spec.q != f.q || spec.n != f.n) throw InvalidInput("build_competitor: projection built for another spec");
    const Mesh& m = *f.mesh;
    for (int k = 0; k < 64; ++k) {
        double t = 2 * std::numbers::pi * k / 64;
        if (m.locate(o.center + o.r3 * Point2(std::cos(t), std::sin(t))) < 0)
            throw InvalidInput("build_competitor: B_r3 leaves the mesh");
    }
    const double sE = std::sqrt(o.energy_scale);
    const int nv = m.num_vertices();

    VField fs(nv);
    for (int v = 0; v < nv; ++v) fs[v] = xi(f.values[v], spec) / sE;
    VField mol = mollify(m, fs, o.eps);

    // rho*(f'/sqrt E) and rho*(mollified) at arbitrary points.
    auto proj_f = [&](const Point2& x) { return proj.apply(xi(detail::field_at(f, x, o.center), spec) / sE); };
    auto proj_mol = [&](const Point2& x) {
        Eigen::Vector3d b;
        int c = m.locate(x, &b);
        if (c < 0) throw DomainError("build_competitor: point outside the mesh");
        const auto& t = m.cells()[c];
        return proj.apply(b[0] * mol[t[0]] + b[1] * mol[t[1]] + b[2] * mol[t[2]]);
    };

    CompetitorResult res;
    res.g_embedded.resize(nv);
    std::vector<QPoint> vals(nv);
    for (int v = 0; v < nv; ++v) {
        Point2 rel = m.vertices()[v] - o.center;
        double rho = rel.norm();
        Vec w;
        if (rho > o.r3) {
            res.g_embedded[v] = xi(f.values[v], spec);
            vals[v] = f.values[v];
            continue;
        } else if (rho <= o.r1) {
            w = sE * proj.apply(mol[v]);
        } else {
            Point2 dir = rel / rho;
            if (rho <= o.r2) {
                double t = (rho - o.r1) / (o.r2 - o.r1);
                w = sE * ((1 - t) * proj_mol(o.center + o.r1 * dir) + t * proj_f(o.center + o.r2 * dir));
            } else {
                double t = (rho - o.r2) / (o.r3 - o.r2);
                w = sE * ((1 - t) * proj_f(o.center + o.r2 * dir) +
                          t * xi(detail::field_at(f, o.center + o.r3 * dir, o.center), spec) / sE);
            }
            w = retract_rho(w, spec);
        }
        res.g_embedded[v] = w;
        DecodeResult d = decode_best(w, spec);
        res.report.max_decode_residual = std::max(res.report.max_decode_residual, d.residual);
        vals[v] = d.t;
    }
    res.g = QField(f.mesh, std::move(vals));

    CompetitorReport& r = res.report;
    EnergyReport ef = dirichlet_energy(f), eg = dirichlet_energy(res.g);
    r.energy_f = ef.total;
    r.energy_g = eg.total;
    for (int c = 0; c < m.num_cells(); ++c) {
        double rho = (m.centroid(c) - o.center).norm();
        if (rho <= o.r1) {
            r.energy_inner += eg.cell_energy[c];
            r.energy_f_inner += ef.cell_energy[c];
        } else if (rho <= o.r2) {
            r.energy_mid += eg.cell_energy[c];
            r.energy_f_mid += ef.cell_energy[c];
        } else if (rho <= o.r3) {
            r.energy_outer += eg.cell_energy[c];
            r.energy_f_outer += ef.cell_energy[c];
        }
    }
    r.lip_f = detail::edge_lipschitz(f);
    r.lip_g = detail::edge_lipschitz(res.g);
    auto lumped = detail::lumped_area(m);
    for (int v = 0; v < nv; ++v) {
        double d = metric_g(f.values[v], res.g.values[v]);
        r.l2_distance += lumped[v] * d * d;
        if ((m.vertices()[v] - o.center).norm() > o.r3) r.boundary_mismatch = std::max(r.boundary_mismatch, d);
    }
    return res;
}

}  // namespace qv
