#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "qv/embedding.hpp"
#include "qv/mesh.hpp"
#include "qv/projections.hpp"

namespace qv {

struct TraceRow {
    int iteration = 0;
    double energy = 0.0;
    double max_subgradient = 0.0;
};

struct EnergyReport {
    double total = 0.0;
    std::vector<double> cell_energy;  // per cell, sums to total
    std::vector<double> density;      // |Du|^2 per cell (cell energy / area)
    std::vector<TraceRow> trace;
    bool converged = true;
};

// Sum over edges of the P1 stiffness weight times G(u(a), u(b))^2.
EnergyReport dirichlet_energy(const QField& u);

// Boundary vertex -> prescribed value.
using BoundaryData = std::map<int, QPoint>;
BoundaryData boundary_trace(const Mesh& mesh, const std::function<QPoint(Point2)>& g);
BoundaryData boundary_trace(const QField& u);

struct MinimizeOptions {
    double tol = -1.0;        // stationarity; <= 0 selects 1e-8 (E0 + 1)
    int max_sweeps = 10000;   // matching/solve rounds per run
    int restarts = 5;
    double perturbation = 0.1;  // restart noise, relative to the rms edge increment
    std::uint64_t seed = 3;
};

struct MinimizeResult {
    QField u;
    EnergyReport report;  // trace of the run that produced u
    int restarts_improved = 0;
};

// Alternates optimal edge matchings with an exact solve of the quadratic
// energy of the frozen matchings (sheets of all interior vertices at once).
// Starts from the harmonic extension of xi(boundary) retracted onto Q.
MinimizeResult minimize_dirichlet(MeshPtr mesh, const BoundaryData& boundary,
                                  const MinimizeOptions& opts = {});
// Same, started from u; boundary values of u are kept.
MinimizeResult minimize_dirichlet_from(const QField& u, const MinimizeOptions& opts = {});

// Largest per-vertex gradient norm of the energy with frozen optimal matchings.
double max_subgradient(const QField& u, const std::vector<char>& fixed);

// ---------------------------------------------------------------------------

struct BallRatio {
    Point2 center;
    double r = 0.0;
    double l2_mean = 0.0;  // (mean over B_r of |Du|^2)^{1/2}
    double ls_mean = 0.0;  // (mean over B_2r of |Du|^s)^{1/s}
    double ratio = 0.0;
};

struct ReverseHolderReport {
    double s = 0.0, p = 0.0;
    std::vector<BallRatio> balls;
    double max_ratio = 0.0;
    double lp_ratio = 0.0;  // |Du|_{L^p(inner)} / |Du|_{L^2(domain)}
};

// Balls use the cells whose centroid lies inside; every B_2r must be
// covered by the mesh. Default sweep: the inner centre with radii
// inner_radius / 2 and inner_radius / 4.
ReverseHolderReport reverse_holder_check(const QField& u, Point2 inner_center, double inner_radius,
                                         double s, double p,
                                         const std::vector<Point2>& centers = {},
                                         const std::vector<double>& radii = {});

// ---------------------------------------------------------------------------

struct TruncationOptions {
    bool preserve_boundary = false;  // never replace boundary vertices
    int max_radius_cells = 8;        // largest ball of the maximal function, in mesh steps
};

struct TruncationReport {
    int replaced = 0;
    double lip_out = 0.0;      // max over edges of G / length
    double lip_kept = 0.0;     // same, over edges between kept vertices
    double energy_in = 0.0;
    double energy_out = 0.0;
    double l2_error = 0.0;     // int G(u, out)^2 (vertex-lumped)
    double trace_error = 0.0;  // boundary integral of G(u, out)^2
};

struct TruncationResult {
    QField u;
    std::vector<char> replaced;
    std::vector<double> maximal;  // per-vertex maximal function of |Du|
    TruncationReport report;
};

// Vertices where the maximal function of |Du| exceeds `level` get new values
// from a Lipschitz extension of xi o u off that set, retracted onto Q.
TruncationResult lipschitz_truncate(const QField& u, double level,
                                    const TruncationOptions& opts = {});

// ---------------------------------------------------------------------------

// Radial structure of a star-shaped mesh around `center`: R(theta) is the
// distance to the boundary polygon along the ray.
class RadialGauge {
public:
    RadialGauge(MeshPtr mesh, Point2 center);
    double boundary_radius(const Point2& dir) const;
    Point2 center() const { return center_; }
    // Boundary value of a per-boundary-vertex map at the boundary point in
    // direction dir, linear along the boundary edge with matched sheets.
    QPoint boundary_value(const BoundaryData& g, const Point2& dir) const;

private:
    MeshPtr mesh_;
    Point2 center_;
    std::vector<std::pair<int, int>> segments_;
    int hit(const Point2& dir, double* radius, double* t) const;
};

// Interpolation: f rescaled into B_{R - eps}, then a matched
// linear ramp to g across the outer eps-annulus (per ray).
struct InterpolationReport {
    double energy_h = 0.0, energy_f = 0.0;
    double boundary_energy_f = 0.0, boundary_energy_g = 0.0;  // D(., boundary)
    double mismatch = 0.0;      // boundary integral of G(f, g)^2
    double sup_mismatch = 0.0;  // sup over the boundary of G(f, g)
    double lip_h = 0.0, lip_f = 0.0, lip_g = 0.0;
    // Smallest C with D(h) <= D(f) + eps D(g) + eps D(f) + C mismatch / eps.
    double c_needed = 0.0;
};

struct InterpolationResult {
    QField h;
    InterpolationReport report;
};

InterpolationResult interpolate_annulus(const QField& f, const BoundaryData& g, double eps);

// Dirichlet energy of boundary data along the boundary polygon.
double boundary_energy(const Mesh& mesh, const BoundaryData& g);

// ---------------------------------------------------------------------------

// Tensor quartic bump of radius eps, normalised on the grid; near the
// boundary the kernel is renormalised over the available vertices.
VField mollify(const Mesh& mesh, const VField& v, double eps);

struct CompetitorOptions {
    double mu = 0.1;
    double eps = 0.1;
    double r1 = 1.2, r2 = 1.4, r3 = 1.6;
    double energy_scale = 1.0;  // E
    Point2 center = Point2(0, 0);
};

struct CompetitorReport {
    double energy_f = 0.0, energy_g = 0.0;
    double energy_inner = 0.0, energy_mid = 0.0, energy_outer = 0.0;  // g on B_r1, r1..r2, r2..r3
    double energy_f_inner = 0.0, energy_f_mid = 0.0, energy_f_outer = 0.0;
    double lip_f = 0.0, lip_g = 0.0;
    double max_decode_residual = 0.0;
    double boundary_mismatch = 0.0;  // sup over vertices outside B_r3 of G(f, g)
    double l2_distance = 0.0;        // int G(f, g)^2
};

struct CompetitorResult {
    QField g;
    VField g_embedded;  // g' = xi o g as built (on Q)
    CompetitorReport report;
};

CompetitorResult build_competitor(const QField& f, const AlmostProjection& proj,
                                  const CompetitorOptions& opts);

}  // namespace qv
