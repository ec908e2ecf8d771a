#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qv/dirichlet.hpp"
#include "qv/mesh.hpp"

namespace qv {

// ---------------------------------------------------------------------------
// Simplicial currents.

// k-simplices in R^{m+n}, first m coordinates horizontal. The orientation
// is the vertex order: v1 - v0, ..., vk - v0.
struct SimplicialCurrent {
    struct Cell {
        std::vector<Vec> v;  // k + 1 vertices
        int theta = 1;       // nonzero
    };
    int ambient = 0;  // m + n
    int base = 0;     // m
    int dim = 0;      // k
    std::vector<Cell> cells;

    int fiber() const { return ambient - base; }
    // k-volume of a cell (0-cells: 1).
    double volume(int c) const;
    // Unit orienting k-vector in Pluecker coordinates, over the sorted
    // k-subsets of {0..ambient-1} (lexicographic).
    Vec orientation(int c) const;
    // Orthogonal projector onto the tangent plane.
    Mat tangent_projector(int c) const;

    void validate() const;  // throws InvalidInput
    nlohmann::json to_json() const;
    static SimplicialCurrent from_json(const nlohmann::json& j);
};

// Sheets are tracked cell by cell with consistent optimal matchings; a cell
// that holds a branch point throws DomainError naming it. Coincident lifted
// cells merge into one cell of higher multiplicity.
SimplicialCurrent graph_current(const QField& f);

// Integration current of the mesh (k = m = 2, fiber 0) and its boundary.
SimplicialCurrent flat_current(const Mesh& mesh);

double mass(const SimplicialCurrent& t);
double mass(const SimplicialCurrent& t, const std::vector<char>& cells);

// T_{f,R} for a current R in the base plane (R.ambient == 2). Values at the
// vertices of R come from f; R should resolve the mesh of f.
SimplicialCurrent pushforward(const QField& f, const SimplicialCurrent& r);
double pushforward_mass(const QField& f, const SimplicialCurrent& r);

// Face cancellation with orientation signs (exact vertex coordinates).
SimplicialCurrent boundary(const SimplicialCurrent& t);

// ---------------------------------------------------------------------------
// Polynomial differential forms on R^d.

class PolyForm {
public:
    struct Monomial {
        double c = 0.0;
        std::vector<int> pow;
    };
    using Poly = std::vector<Monomial>;

    PolyForm(int ambient, int degree) : ambient_(ambient), degree_(degree) {}
    // Adds c * prod x_i^pow_i dx^{idx} (idx increasing, size degree).
    PolyForm& add(double c, std::vector<int> pow, std::vector<int> idx);

    int ambient() const { return ambient_; }
    int degree() const { return degree_; }
    // omega(x)(E_1, ..., E_k), E an ambient x k matrix.
    double eval(const Vec& x, const Mat& e) const;
    PolyForm d() const;
    int poly_degree() const;

private:
    int ambient_, degree_;
    std::map<std::vector<int>, Poly> terms_;
};

// <T, omega> by per-cell quadrature (exact for polynomial degree <= 12).
double pair(const SimplicialCurrent& t, const PolyForm& omega);
// |<t, d omega> - <boundary(t), omega>|
double stokes_check(const SimplicialCurrent& t, const PolyForm& omega);

// Graph boundary identity: |<gr(f_h), d omega> - <T_{f, dOmega_h}, omega>|,
// with T_{f, dOmega_h} pushed by the exact map along the mesh boundary
// (every boundary edge split into `subdivisions` pieces).
double graph_stokes_residual(const QField& fh, const std::function<QPoint(Point2)>& f,
                             const PolyForm& omega, int subdivisions = 32);

// ---------------------------------------------------------------------------
// Slices.

struct Slice {
    Point2 x;
    std::vector<Vec> points;  // one entry per unit of multiplicity
    std::vector<int> signs;   // +-1
    int total() const;        // sum of signs
    // Q-point when every sign is +1.
    QPoint qpoint() const;
};

// Projection index of a 2-dimensional current over a 2-dimensional base.
class SliceIndex {
public:
    explicit SliceIndex(const SimplicialCurrent& t);
    // Points on a projected cell boundary are moved by k 1e-9 cell sizes
    // (k = 1..8) along four fixed directions; the first nonempty slice wins,
    // so boundary points are read from inside the support.
    Slice slice(const Point2& x) const;
    const SimplicialCurrent& current() const { return *t_; }

private:
    const SimplicialCurrent* t_;
    double cell_ = 1.0, size_ = 1.0;
    Point2 lo_;
    int nb_ = 1, mb_ = 1;
    std::vector<std::vector<int>> buckets_;
    bool try_slice(const Point2& x, Slice& s) const;
};

Slice slice(const SimplicialCurrent& t, const Point2& x);

// ---------------------------------------------------------------------------
// Base grids, excess and maximal functions.

// Squares of side h; the domain is the union of the kept squares. A ball
// base keeps squares whose corners lie in the closed ball.
struct BaseGrid {
    int nx = 0, ny = 0;
    double x0 = 0, y0 = 0, h = 1;
    std::vector<char> kept;  // nx * ny
    bool is_ball = false;
    Point2 center = Point2(0, 0);
    double radius = 0.0;

    static BaseGrid ball(Point2 center, double radius, int n);
    static BaseGrid box(double x0, double y0, double x1, double y1, int nx, int ny);

    int size() const { return nx * ny; }
    int id(int i, int j) const { return j * nx + i; }
    Point2 cell_center(int c) const;
    double cell_area() const { return h * h; }
    double area() const;
    // B_rho(x) inside the domain.
    bool admits(const Point2& x, double rho) const;
    // Mesh of the kept squares, split as Mesh::grid_region does.
    Mesh mesh() const;
};

// Sum of `values` over kept squares whose centre lies within rho of the
// centre of square c, and the area of those squares.
void ball_sum(const BaseGrid& g, const std::vector<double>& values, int c, double rho,
              double* sum, double* area);

// sup over admissible dyadic radii (h/2) 2^j of mean(values) on the ball.
std::vector<double> maximal_function(const BaseGrid& g, const std::vector<double>& values);

struct ExcessField {
    BaseGrid grid;
    int q = 0;
    std::vector<double> mass;    // M(T restricted to cell x R^n)
    std::vector<double> e;       // e_T(cell)
    std::vector<double> delta;   // e_T(cell) / |cell|
    std::vector<char> delta_unstable;  // finest two scales differ by more than 2x
    std::vector<double> maximal;  // M_T
    double excess = 0.0;         // E = e_T(base) / |base|

    double e_of(const std::vector<char>& cells) const;
    double mass_of(const std::vector<char>& cells) const;
    std::string to_csv() const;
};

// Checks pi_# t = Q [[base]] square by square (DomainError otherwise);
// q <= 0 infers Q from the projected mass.
ExcessField excess_field(const SimplicialCurrent& t, const BaseGrid& grid, int q = 0);

struct VarifoldReport {
    double ve = 0.0;
    double e = 0.0;  // cylindrical excess over the same base
    double ratio() const { return e > 0 ? ve / e : 0.0; }
};
VarifoldReport varifold_excess(const SimplicialCurrent& t, const BaseGrid& grid);

// ---------------------------------------------------------------------------
// Modified BV estimate.

struct TestFunction {
    std::string name;
    std::function<double(const Vec&)> f;  // Lipschitz constant <= 1
};
// Five fixed test functions on R^n.
std::vector<TestFunction> standard_test_functions(int n);

struct BvRow {
    int level = 0, i = 0, j = 0;  // dyadic block (size 2^level squares)
    std::string psi;
    double tv = 0.0, tv_coarea = 0.0;
    double e = 0.0, mass = 0.0;
    double lhs = 0.0, rhs = 0.0;  // tv^2 and 2 e M
    bool holds = false;           // lhs <= (1 + margin) rhs
};

struct BvReport {
    std::vector<BvRow> rows;
    double worst_ratio = 0.0;         // max lhs / rhs (rhs > 0)
    double coarea_disagreement = 0.0;  // max relative gap between the two TVs
    bool holds() const;
};

// Phi_psi sampled on `sub` points per square side, P1 on the split squares.
// Regions: all dyadic blocks of kept squares (nx = ny = 2^L).
BvReport bv_estimate_check(const SimplicialCurrent& t, const BaseGrid& grid,
                           const std::vector<TestFunction>& psis, double margin = 0.1,
                           int sub = 2);

// ---------------------------------------------------------------------------
// Maximal-function covering estimate.

struct CoveringRow {
    double r = 0.0;
    double lhs = 0.0;  // |J_theta cap B_r|
    double rhs = 0.0;  // 5^m / theta mu({M >= 2^-m theta} cap B_{r + r0 s})
    bool holds = false;
};

struct MaximalReport {
    std::vector<double> maximal;
    std::vector<char> j_theta;
    double r0 = 0.0;
    std::vector<CoveringRow> rows;
    bool holds() const;
};

// mu per square of a ball base B_{4s}; J_theta within B_{3s}. Throws
// DomainError when r0 >= 1/5.
MaximalReport maximal_measure(const BaseGrid& ball, const std::vector<double>& mu, double theta,
                              double margin = 0.0);

// ---------------------------------------------------------------------------
// Lipschitz approximation.

struct LipschitzApproxReport {
    double eta = 0.0, excess = 0.0, r0 = 0.0;
    int k_cells = 0, cells = 0;
    double lip = 0.0;            // max over mesh edges of G / length
    double lip_over_sqrt_eta = 0.0;
    double w1_ratio = 0.0;       // max over K-vertex pairs of W1 / (sqrt(eta) |x - y|)
    double graph_mismatch = 0.0;  // max vertex gap between gr(u|K) and t over K
    std::vector<CoveringRow> coverage;  // |B_r \ K| against 5^m / eta e_T(...)
    bool coverage_holds = false;
};

struct LipschitzApprox {
    QField u;               // on the kept squares of B_{3s}
    std::vector<char> k;    // per base square
    ExcessField field;
    LipschitzApproxReport report;
};

// Base: ball B_{4s} of the given grid; q inferred.
LipschitzApprox lipschitz_approximate(const SimplicialCurrent& t, const BaseGrid& ball, double eta,
                                      double margin = 0.1);

// ---------------------------------------------------------------------------
// Taylor expansion of the graph mass.

struct TaylorRow {
    std::string region;
    double e = 0.0;          // e_{gr g}(A)
    double dirichlet = 0.0;  // int_A |Dg|^2
    double rel_error = 0.0;  // |e - D/2| / D
    // Lower side holds iff C <= c_max (C^-1 multiplies Lip^2 there); upper
    // side iff C >= c_min.
    double c_max = INFINITY, c_min = 0.0;
};

struct TaylorReport {
    double lip = 0.0;
    std::vector<TaylorRow> rows;
    double c_min() const;  // max over rows
    double c_max() const;  // min over rows
    bool holds(double c) const;
};

// Regions: cell flags over g.mesh, with names. Throws DomainError when
// Lip(g) > 1.
TaylorReport taylor_check(const QField& g, const std::vector<std::pair<std::string, std::vector<char>>>& regions);
// Whole domain and the four quadrants of its bounding box.
std::vector<std::pair<std::string, std::vector<char>>> quadrant_regions(const Mesh& mesh);

// Per-cell operator norm of the sheet gradients (max over sheets).
double sheet_lipschitz(const QField& g);

// ---------------------------------------------------------------------------
// Empirical scans.

struct HigherIntegrabilityRow {
    double p = 0.0;
    double lhs = 0.0;       // int over {delta <= threshold} cap inner of delta^p
    double ratio = 0.0;     // lhs / E^p
    double power_mean = 0.0;  // (lhs / |region|)^{1/p}
};
struct HigherIntegrabilityReport {
    std::vector<HigherIntegrabilityRow> rows;
    bool monotone = true;  // power means nondecreasing in p
};
HigherIntegrabilityReport higher_integrability_scan(const ExcessField& f, const std::vector<double>& ps,
                                                    double threshold = 1.0, double inner_fraction = 0.5);

struct StrongEstimateRow {
    int level = 0, i = 0, j = 0;
    double area = 0.0, e = 0.0, rhs = 0.0, ratio = 0.0;  // rhs = E (E^sigma + |A|^sigma)
};
struct StrongEstimateReport {
    std::vector<StrongEstimateRow> rows;
    double additivity_gap = 0.0;  // per level: |sum of blocks - total|
};
StrongEstimateReport strong_estimate_scan(const ExcessField& f, double sigma);

// ---------------------------------------------------------------------------
// Test currents.

namespace fixtures {

// Q sheets y = heights[i] over the base grid mesh.
SimplicialCurrent flat_sheets(const BaseGrid& g, const std::vector<Vec>& heights);
// One sheet y = A x.
SimplicialCurrent tilted_sheet(const BaseGrid& g, const Mat& a);
// Q flat sheets plus a +e sheet at height 1 and a -e sheet at height 2.
SimplicialCurrent orientation_reversed_pair(const BaseGrid& g, int q, int n);
// [[z^{1/2}]] + [[-z^{1/2}]] (n = 2).
QPoint branch(Point2 x);
// Q sheets y = k + tilt x_1 (n = 1, k = 0, 1, ...) with sheet 0 raised by
// `height` at the base vertex nearest `at`.
QField spike_field(const BaseGrid& g, int q, double height, Point2 at, double tilt = 0.0);
// Random Lipschitz 2-valued fields on the grid mesh (n = 1 and 2 alternate).
std::vector<QField> random_two_valued(const BaseGrid& g, int count, std::uint64_t seed);
// Values of u on the base grid mesh.
QField field_on(const BaseGrid& g, const std::function<QPoint(Point2)>& f);

}  // namespace fixtures

}  // namespace qv
