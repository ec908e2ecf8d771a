#include "qv/dirichlet.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "field_util.hpp"
#include "qv/error.hpp"

namespace qv {

EnergyReport dirichlet_energy(const QField& u) {
    const Mesh& m = *u.mesh;
    if (m.num_cells() == 0) throw InvalidInput("dirichlet_energy: empty mesh");
    std::vector<double> g2(m.edges().size());
    for (std::size_t e = 0; e < g2.size(); ++e)
        g2[e] = metric_g_squared(u.values[m.edges()[e].a], u.values[m.edges()[e].b]);
    EnergyReport r;
    r.cell_energy.assign(m.num_cells(), 0.0);
    r.density.assign(m.num_cells(), 0.0);
    for (int c = 0; c < m.num_cells(); ++c) {
        if (!(m.cell_area()[c] > 0)) throw InvalidInput("dirichlet_energy: degenerate cell");
        double e = 0.0;
        for (int k = 0; k < 3; ++k) e += m.cell_edge_weights(c)[k] * g2[m.cell_edges(c)[k]];
        r.cell_energy[c] = e;
        r.density[c] = e / m.cell_area()[c];
        r.total += e;
    }
    return r;
}

BoundaryData boundary_trace(const Mesh& mesh, const std::function<QPoint(Point2)>& g) {
    BoundaryData b;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (mesh.boundary()[v]) b.emplace(v, g(mesh.vertices()[v]));
    return b;
}

BoundaryData boundary_trace(const QField& u) {
    BoundaryData b;
    for (int v = 0; v < u.mesh->num_vertices(); ++v)
        if (u.mesh->boundary()[v]) b.emplace(v, u.values[v]);
    return b;
}

double max_subgradient(const QField& u, const std::vector<char>& fixed) {
    const Mesh& m = *u.mesh;
    std::vector<Mat> grad(m.num_vertices(), Mat::Zero(u.q, u.n));
    for (const auto& e : m.edges()) {
        auto perm = match_squared(u.values[e.a], u.values[e.b]).perm;
        for (int i = 0; i < u.q; ++i)
            for (int k = 0; k < u.n; ++k) {
                double d = 2.0 * e.w * (u.values[e.a].point(i)[k] - u.values[e.b].point(perm[i])[k]);
                grad[e.a](i, k) += d;
                grad[e.b](perm[i], k) -= d;
            }
    }
    double g = 0.0;
    for (int v = 0; v < m.num_vertices(); ++v)
        if (!fixed[v]) g = std::max(g, grad[v].norm());
    return g;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Minimizer of the energy with the given edge matchings frozen: a Laplacian
// on (vertex, sheet) pairs with the fixed vertices as data.
std::vector<QPoint> lifted_solve(const QField& u, const std::vector<char>& fixed,
                                 const std::vector<std::vector<int>>& perms) {
    const Mesh& m = *u.mesh;
    const int q = u.q, n = u.n;
    std::vector<int> idx(m.num_vertices(), -1);
    int free = 0;
    for (int v = 0; v < m.num_vertices(); ++v)
        if (!fixed[v]) idx[v] = free++;
    std::vector<QPoint> out = u.values;
    if (free == 0) return out;

    std::vector<Eigen::Triplet<double>> trip;
    Mat rhs = Mat::Zero(free * q, n);
    for (std::size_t ei = 0; ei < m.edges().size(); ++ei) {
        const auto& e = m.edges()[ei];
        if (e.w == 0.0) continue;
        for (int i = 0; i < q; ++i) {
            int j = perms[ei][i];
            int ra = idx[e.a] < 0 ? -1 : idx[e.a] * q + i;
            int rb = idx[e.b] < 0 ? -1 : idx[e.b] * q + j;
            if (ra >= 0) trip.emplace_back(ra, ra, e.w);
            if (rb >= 0) trip.emplace_back(rb, rb, e.w);
            if (ra >= 0 && rb >= 0) {
                trip.emplace_back(ra, rb, -e.w);
                trip.emplace_back(rb, ra, -e.w);
            } else if (ra >= 0) {
                for (int k = 0; k < n; ++k) rhs(ra, k) += e.w * u.values[e.b].point(j)[k];
            } else if (rb >= 0) {
                for (int k = 0; k < n; ++k) rhs(rb, k) += e.w * u.values[e.a].point(i)[k];
            }
        }
    }
    SpMat a(free * q, free * q);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("minimize_dirichlet: singular system", 0);
    Mat x = ldlt.solve(rhs);
    for (int v = 0; v < m.num_vertices(); ++v) {
        if (idx[v] < 0) continue;
        QPoint p(q, n);
        for (int i = 0; i < q; ++i)
            for (int k = 0; k < n; ++k) p.point(i)[k] = x(idx[v] * q + i, k);
        out[v] = p;
    }
    return out;
}

std::vector<std::vector<int>> optimal_matchings(const QField& u) {
    std::vector<std::vector<int>> perms;
    perms.reserve(u.mesh->edges().size());
    for (const auto& e : u.mesh->edges())
        perms.push_back(match_squared(u.values[e.a], u.values[e.b]).perm);
    return perms;
}

struct Run {
    QField u;
    EnergyReport report;
};

Run descend(QField u, const std::vector<char>& fixed, double tol, int max_sweeps) {
    Run run;
    double energy = dirichlet_energy(u).total;
    std::vector<TraceRow> trace{{0, energy, max_subgradient(u, fixed)}};
    bool converged = trace[0].max_subgradient <= tol;
    std::vector<std::vector<int>> prev;
    for (int it = 1; it <= max_sweeps && !converged; ++it) {
        auto perms = optimal_matchings(u);
        if (perms == prev) break;  // the solve would repeat itself
        QField next(u.mesh, lifted_solve(u, fixed, perms));
        double e = dirichlet_energy(next).total;
        if (e > energy) break;  // rounding only: the frozen solve cannot increase
        u = std::move(next);
        energy = e;
        prev = std::move(perms);
        trace.push_back({it, energy, max_subgradient(u, fixed)});
        converged = trace.back().max_subgradient <= tol;
    }
    run.report = dirichlet_energy(u);
    run.report.trace = std::move(trace);
    run.report.converged = converged;
    run.u = std::move(u);
    return run;
}

MinimizeResult minimize(QField start, const std::vector<char>& fixed, const MinimizeOptions& opts) {
    MeshPtr mesh = start.mesh;
    const Mesh& m = *mesh;
    double e0 = dirichlet_energy(start).total;
    double tol = opts.tol > 0 ? opts.tol : 1e-8 * (e0 + 1.0);
    Run best = descend(std::move(start), fixed, tol, opts.max_sweeps);

    MinimizeResult res;
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int r = 0; r < opts.restarts; ++r) {
        double rms = std::sqrt(std::max(best.report.total, 0.0) / std::max(1.0, m.area()));
        double step = opts.perturbation * std::max(rms * m.min_edge_length(), 1e-12);
        std::vector<QPoint> vals = best.u.values;
        for (int v = 0; v < m.num_vertices(); ++v) {
            if (fixed[v]) continue;
            QPoint p = vals[v];
            for (int i = 0; i < p.q(); ++i)
                for (int k = 0; k < p.n(); ++k) p.point(i)[k] += step * g(rng);
            vals[v] = p;
        }
        Run run = descend(QField(best.u.mesh, std::move(vals)), fixed, tol,
                          opts.max_sweeps);
        if (run.report.total < best.report.total - tol) {
            best = std::move(run);
            ++res.restarts_improved;
        }
    }
    res.u = std::move(best.u);
    res.report = std::move(best.report);
    return res;
}

}  // namespace

MinimizeResult minimize_dirichlet(MeshPtr mesh, const BoundaryData& boundary,
                                  const MinimizeOptions& opts) {
    if (!mesh) throw InvalidInput("minimize_dirichlet: null mesh");
    const Mesh& m = *mesh;
    if (boundary.empty()) throw InvalidInput("minimize_dirichlet: no boundary data");
    const int q = boundary.begin()->second.q(), n = boundary.begin()->second.n();
    std::vector<char> fixed(m.num_vertices(), 0);
    for (const auto& [v, p] : boundary) {
        if (v < 0 || v >= m.num_vertices()) throw InvalidInput("minimize_dirichlet: bad vertex id");
        if (p.q() != q || p.n() != n) throw InvalidInput("minimize_dirichlet: mixed q or n");
        fixed[v] = 1;
    }
    for (int v = 0; v < m.num_vertices(); ++v)
        if (m.boundary()[v] && !fixed[v])
            throw InvalidInput("minimize_dirichlet: boundary vertex " + std::to_string(v) +
                               " has no data");

    // Harmonic extension of xi(boundary), then back to Q point by point.
    EmbeddingSpec spec = EmbeddingSpec::standard(q, n);
    std::vector<int> idx(m.num_vertices(), -1);
    int free = 0;
    for (int v = 0; v < m.num_vertices(); ++v)
        if (!fixed[v]) idx[v] = free++;
    std::vector<Vec> w(m.num_vertices());
    for (const auto& [v, p] : boundary) w[v] = xi(p, spec);
    std::vector<QPoint> vals(m.num_vertices());
    for (const auto& [v, p] : boundary) vals[v] = p;
    if (free > 0) {
        std::vector<Eigen::Triplet<double>> trip;
        Mat rhs = Mat::Zero(free, spec.N());
        for (const auto& e : m.edges()) {
            int a = idx[e.a], b = idx[e.b];
            if (a >= 0) trip.emplace_back(a, a, e.w);
            if (b >= 0) trip.emplace_back(b, b, e.w);
            if (a >= 0 && b >= 0) {
                trip.emplace_back(a, b, -e.w);
                trip.emplace_back(b, a, -e.w);
            } else if (a >= 0) {
                rhs.row(a) += e.w * w[e.b].transpose();
            } else if (b >= 0) {
                rhs.row(b) += e.w * w[e.a].transpose();
            }
        }
        SpMat lap(free, free);
        lap.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<SpMat> ldlt(lap);
        if (ldlt.info() != Eigen::Success)
            throw ConvergenceError("minimize_dirichlet: singular Laplacian", 0);
        Mat x = ldlt.solve(rhs);
        for (int v = 0; v < m.num_vertices(); ++v)
            if (idx[v] >= 0) vals[v] = decode_best(retract_rho(x.row(idx[v]).transpose(), spec), spec).t;
    }
    return minimize(QField(mesh, std::move(vals)), fixed, opts);
}

MinimizeResult minimize_dirichlet_from(const QField& u, const MinimizeOptions& opts) {
    std::vector<char> fixed(u.mesh->boundary().begin(), u.mesh->boundary().end());
    return minimize(u, fixed, opts);
}

// ---------------------------------------------------------------------------

ReverseHolderReport reverse_holder_check(const QField& u, Point2 inner_center, double inner_radius,
                                         double s, double p, const std::vector<Point2>& centers,
                                         const std::vector<double>& radii) {
    if (!(s > 1.0 && s < 2.0)) throw InvalidInput("reverse_holder_check: need 1 < s < 2");
    if (!(p > 2.0)) throw InvalidInput("reverse_holder_check: need p > 2");
    if (!(inner_radius > 0)) throw InvalidInput("reverse_holder_check: inner radius must be positive");
    const Mesh& m = *u.mesh;
    auto covered = [&](const Point2& c, double r) {
        for (int k = 0; k < 64; ++k) {
            double t = 2 * std::numbers::pi * k / 64;
            if (m.locate(c + r * Point2(std::cos(t), std::sin(t))) < 0) return false;
        }
        return m.locate(c) >= 0;
    };
    if (!covered(inner_center, inner_radius))
        throw InvalidInput("reverse_holder_check: inner domain not inside the mesh");

    EnergyReport e = dirichlet_energy(u);
    auto ball_mean = [&](const Point2& c, double r, double power) {
        double num = 0, den = 0;
        for (int k = 0; k < m.num_cells(); ++k) {
            if ((m.centroid(k) - c).norm() > r) continue;
            num += m.cell_area()[k] * std::pow(e.density[k], power / 2.0);
            den += m.cell_area()[k];
        }
        if (den <= 0) throw InvalidInput("reverse_holder_check: ball holds no cells");
        return num / den;
    };

    ReverseHolderReport rep;
    rep.s = s;
    rep.p = p;
    std::vector<Point2> cs = centers.empty() ? std::vector<Point2>{inner_center} : centers;
    std::vector<double> rs = radii.empty() ? std::vector<double>{inner_radius / 2, inner_radius / 4} : radii;
    for (const Point2& c : cs)
        for (double r : rs) {
            if (!covered(c, 2 * r)) throw InvalidInput("reverse_holder_check: B_2r leaves the mesh");
            BallRatio b;
            b.center = c;
            b.r = r;
            b.l2_mean = std::sqrt(ball_mean(c, r, 2.0));
            b.ls_mean = std::pow(ball_mean(c, 2 * r, s), 1.0 / s);
            b.ratio = b.ls_mean > 0 ? b.l2_mean / b.ls_mean : (b.l2_mean > 0 ? INFINITY : 0.0);
            rep.max_ratio = std::max(rep.max_ratio, b.ratio);
            rep.balls.push_back(b);
        }
    double lp = 0, l2 = 0;
    for (int k = 0; k < m.num_cells(); ++k) {
        l2 += e.cell_energy[k];
        if ((m.centroid(k) - inner_center).norm() <= inner_radius)
            lp += m.cell_area()[k] * std::pow(e.density[k], p / 2.0);
    }
    rep.lp_ratio = l2 > 0 ? std::pow(lp, 1.0 / p) / std::sqrt(l2) : 0.0;
    return rep;
}

}  // namespace qv
