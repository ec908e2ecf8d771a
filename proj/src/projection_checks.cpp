#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "qv/error.hpp"
#include "qv/projections.hpp"

namespace qv {

namespace {

// Scale for cone samples: the tubes live within a few c_bottom of the
// lowest face.
double sample_scale(const AlmostProjection& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 0.5);
    return p.geometry().c(p.geometry().bottom()) * std::pow(10.0, u(rng));
}

Vec nearby_cone_point(const AlmostProjection& p, const Vec& x, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-3.0, -1.0);
    Vec d(x.size());
    for (int i = 0; i < d.size(); ++i) d[i] = g(rng);
    d *= std::pow(10.0, u(rng)) / d.norm();
    return retract_rho(x + d, p.spec());
}

}  // namespace

std::vector<StageLedgerRow> measure_stages(const AlmostProjection& p, int samples,
                                           std::uint64_t seed) {
    const SkeletonGeometry& geo = p.geometry();
    std::vector<StageLedgerRow> rows;
    for (int k = geo.bottom(); k < geo.top(); ++k) {
        std::mt19937_64 rng(seed + 7919 * k);
        StageLedgerRow row;
        row.k = k;
        row.bound_scale = std::pow(p.mu(), p.exponent(k));
        for (int s = 0; s < samples; ++s) {
            Vec x = random_cone_point(p.spec(), rng, sample_scale(p, rng));
            Vec x2 = nearby_cone_point(p, x, rng);
            Vec fx = p.stage_map(k, x), fx2 = p.stage_map(k, x2);
            row.displacement = std::max({row.displacement, (fx - x).norm(), (fx2 - x2).norm()});
            double d = (x - x2).norm();
            if (d > 1e-12) row.lip = std::max(row.lip, (fx - fx2).norm() / d);
        }
        rows.push_back(row);
    }
    return rows;
}

double sup_displacement(const AlmostProjection& p, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double sup = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec x = random_cone_point(p.spec(), rng, sample_scale(p, rng));
        sup = std::max(sup, (p.apply(x) - x).norm());
    }
    return sup;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("loglog_slope: need >= 2 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw InvalidInput("loglog_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::log(x[i]) - mx;
        sxy += a * (std::log(y[i]) - my);
        sxx += a * a;
    }
    return sxy / sxx;
}

void calibrate_constants(AlmostProjection& p, int samples, std::uint64_t seed) {
    auto rows = measure_stages(p, samples, seed);
    AlmostProjection::Constants c;
    double global = 0.0;
    for (const auto& r : rows) {
        double need = std::max(r.lip - 1.0, r.displacement) / r.bound_scale;
        c.stage.push_back(std::max(1.0, 2.0 * need));
        if (r.k == p.geometry().bottom())
            global = std::max(r.lip - 1.0, r.displacement) / std::pow(p.mu(), p.exponent(0));
    }
    c.global = std::max(1.0, 2.0 * global);

    Mesh mesh = Mesh::grid_box(12, 12, 0.0, 0.0, 1.0, 1.0);
    auto fields = random_energy_fields(p, mesh, 20, seed ^ 0x5bd1e995u);
    p.constants.calibrated = false;
    auto rep = verify_energy_inequality(p, mesh, fields);
    double need = 0.0;
    for (const auto& r : rep.rows) need = std::max(need, r.c_needed);
    c.energy = std::max(1.0, 2.0 * need);
    c.calibrated = true;
    p.constants = c;
}

bool EnergyInequalityReport::holds() const {
    for (const auto& r : rows)
        if (!r.holds) return false;
    return true;
}

EnergyInequalityReport verify_energy_inequality(const AlmostProjection& p, const Mesh& mesh,
                                                const std::vector<VField>& fields) {
    EnergyInequalityReport rep;
    rep.c = p.constants.calibrated ? p.constants.energy : 0.0;
    const double a = std::pow(p.mu(), p.exponent(0));
    const double width = std::pow(p.mu(), double(p.geometry().top()));
    for (const VField& u : fields) {
        VField w(u.size());
        std::vector<char> near(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) {
            Vec r = retract_rho(u[i], p.spec());
            near[i] = (u[i] - r).norm() <= width;
            w[i] = p.apply_on_cone(r);
        }
        std::vector<double> cells;
        p1_energy(mesh, u, &cells);
        EnergyInequalityRow row;
        row.lhs = p1_energy(mesh, w);
        for (int c = 0; c < mesh.num_cells(); ++c) {
            const auto& t = mesh.cells()[c];
            bool in = near[t[0]] && near[t[1]] && near[t[2]];
            (in ? row.near : row.far) += cells[c];
        }
        double excess = row.lhs - row.near;
        double denom = a * row.near + row.far;
        row.c_needed = excess <= 0 ? 0.0 : (denom > 0 ? excess / denom : INFINITY);
        double slack = 1e-12 * (1.0 + row.lhs);
        row.holds = p.constants.calibrated &&
                    row.lhs <= (1.0 + rep.c * a) * row.near + rep.c * row.far + slack;
        rep.rows.push_back(row);
    }
    return rep;
}

std::vector<VField> random_energy_fields(const AlmostProjection& p, const Mesh& mesh, int count,
                                         std::uint64_t seed) {
    const EmbeddingSpec& spec = p.spec();
    const double width = std::pow(p.mu(), double(p.geometry().top()));
    const double s = p.geometry().c(p.geometry().bottom());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<VField> out;
    for (int f = 0; f < count; ++f) {
        // Sheets: affine plus one oscillation; off-cone noise: smooth, with
        // amplitude spread around the tube width.
        std::vector<Vec> a(spec.q), bx(spec.q), by(spec.q), cs(spec.q);
        for (int i = 0; i < spec.q; ++i) {
            a[i] = Vec(spec.n);
            bx[i] = Vec(spec.n);
            by[i] = Vec(spec.n);
            cs[i] = Vec(spec.n);
            for (int j = 0; j < spec.n; ++j) {
                a[i][j] = 0.5 * s * g(rng);
                bx[i][j] = s * g(rng);
                by[i][j] = s * g(rng);
                cs[i][j] = 0.3 * s * g(rng);
            }
        }
        double omega = 2.0 + 4.0 * u01(rng), phase = 6.28 * u01(rng);
        double amp = width * std::pow(10.0, 2.0 * u01(rng) - 1.0);
        Mat nx(spec.N(), 2), nc(spec.N(), 1);
        for (int i = 0; i < spec.N(); ++i) {
            nx(i, 0) = g(rng) * 3.0;
            nx(i, 1) = g(rng) * 3.0;
            nc(i, 0) = 6.28 * u01(rng);
        }
        VField field;
        for (const Point2& x : mesh.vertices()) {
            std::vector<Vec> pts;
            for (int i = 0; i < spec.q; ++i)
                pts.push_back(a[i] + bx[i] * x.x() + by[i] * x.y() +
                              cs[i] * std::sin(omega * (x.x() + x.y()) + phase));
            Vec w = xi(QPoint::from_points(pts), spec);
            for (int i = 0; i < spec.N(); ++i)
                w[i] += amp * std::sin(nx(i, 0) * x.x() + nx(i, 1) * x.y() + nc(i, 0));
            field.push_back(w);
        }
        out.push_back(std::move(field));
    }
    return out;
}

QField cone_like_extension(const QField& u) {
    const Mesh& m = *u.mesh;
    if (!m.grid()) throw InvalidInput("cone_like_extension: needs a grid mesh");
    const Mesh::Grid& g = *m.grid();
    if (g.nx != g.ny || std::abs(g.hx - g.hy) > 1e-12 * g.hx)
        throw InvalidInput("cone_like_extension: needs a square grid");
    for (int v : g.vertex)
        if (v < 0) throw InvalidInput("cone_like_extension: needs a full square grid");
    const double R = 0.5 * g.nx * g.hx;
    const Point2 ctr(g.x0 + R, g.y0 + R);

    // Boundary value at a point on the square, linear along the boundary edge
    // with the optimal matching between its endpoints.
    auto boundary_value = [&](const Point2& b) {
        double fi = (b.x() - g.x0) / g.hx, fj = (b.y() - g.y0) / g.hy;
        bool vertical = std::abs(std::abs(b.x() - ctr.x()) - R) <= 1e-12 * R;
        int i0, j0, i1, j1;
        double t;
        if (vertical) {
            i0 = i1 = int(std::lround(fi));
            j0 = std::clamp(int(std::floor(fj)), 0, g.ny - 1);
            j1 = j0 + 1;
            t = fj - j0;
        } else {
            j0 = j1 = int(std::lround(fj));
            i0 = std::clamp(int(std::floor(fi)), 0, g.nx - 1);
            i1 = i0 + 1;
            t = fi - i0;
        }
        const QPoint& p0 = u.values[g.vid(i0, j0)];
        const QPoint& p1 = u.values[g.vid(i1, j1)];
        if (t <= 0) return p0;
        if (t >= 1) return p1;
        auto perm = match_squared(p0, p1).perm;
        QPoint out(u.q, u.n);
        for (int i = 0; i < u.q; ++i)
            for (int k = 0; k < u.n; ++k)
                out.point(i)[k] = (1 - t) * p0.point(i)[k] + t * p1.point(perm[i])[k];
        return out;
    };

    std::vector<QPoint> vals;
    for (int v = 0; v < m.num_vertices(); ++v) {
        Point2 rel = m.vertices()[v] - ctr;
        double s = rel.cwiseAbs().maxCoeff();
        if (s <= 1e-14 * R) {
            vals.push_back(QPoint(u.q, u.n));
            continue;
        }
        if (m.boundary()[v]) {
            vals.push_back(u.values[v]);
            continue;
        }
        QPoint b = boundary_value(ctr + (R / s) * rel);
        QPoint out(u.q, u.n);
        for (int i = 0; i < u.q; ++i)
            for (int k = 0; k < u.n; ++k) out.point(i)[k] = (s / R) * b.point(i)[k];
        vals.push_back(out);
    }
    return QField(u.mesh, std::move(vals));
}

}  // namespace qv
