#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qv/qspace.hpp"

namespace qv {

using Point2 = Eigen::Vector2d;

// Triangulated planar domain. Grid-built meshes split every kept square
// along its lower-left/upper-right diagonal.
class Mesh {
public:
    struct Edge {
        int a, b;
        double w;  // P1 stiffness weight: 1/2 sum of opposite cotangents
    };
    struct Grid {
        int nx = 0, ny = 0;
        double x0 = 0, y0 = 0, hx = 1, hy = 1;
        std::vector<int> vertex;  // (nx+1)*(ny+1), -1 if absent
        std::vector<int> square;  // nx*ny -> first of its two cells, -1 if absent
        int vid(int i, int j) const { return vertex[j * (nx + 1) + i]; }
        int sid(int i, int j) const { return square[j * nx + i]; }
    };

    Mesh() = default;
    Mesh(std::vector<Point2> vertices, std::vector<std::array<int, 3>> cells);

    // Squares of the nx x ny lattice on [x0,x1]x[y0,y1] whose four corners
    // pass `keep`.
    static Mesh grid_region(int nx, int ny, double x0, double y0, double x1,
                            double y1, const std::function<bool(Point2)>& keep);
    static Mesh grid_box(int nx, int ny, double x0, double y0, double x1, double y1);
    // Staircase disk: n squares across the bounding box of the disk.
    static Mesh grid_disk(Point2 center, double r, int n);
    static Mesh grid_annulus(Point2 center, double r_in, double r_out, int n);

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>>& cells() const { return cells_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<char>& boundary() const { return boundary_; }
    const std::vector<double>& cell_area() const { return area_; }
    // For cell c, its edges as indices into edges() and their per-cell weights.
    const std::array<int, 3>& cell_edges(int c) const { return cell_edges_[c]; }
    const std::array<double, 3>& cell_edge_weights(int c) const { return cell_w_[c]; }
    // Vertex -> incident edge indices.
    const std::vector<std::vector<int>>& vertex_edges() const { return vertex_edges_; }
    const std::optional<Grid>& grid() const { return grid_; }

    int num_vertices() const { return int(vertices_.size()); }
    int num_cells() const { return int(cells_.size()); }
    double area() const;
    Point2 centroid(int c) const;
    double min_edge_length() const;

    // Cell containing x (or -1) and its barycentric coordinates.
    int locate(const Point2& x, Eigen::Vector3d* bary = nullptr) const;

    nlohmann::json to_json() const;
    static Mesh from_json(const nlohmann::json& j);

private:
    void build();

    std::vector<Point2> vertices_;
    std::vector<std::array<int, 3>> cells_;
    std::vector<Edge> edges_;
    std::vector<char> boundary_;
    std::vector<double> area_;
    std::vector<std::array<int, 3>> cell_edges_;
    std::vector<std::array<double, 3>> cell_w_;
    std::vector<std::vector<int>> vertex_edges_;
    std::optional<Grid> grid_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

// Q-valued map sampled at mesh vertices.
struct QField {
    MeshPtr mesh;
    int q = 0, n = 0;
    std::vector<QPoint> values;

    QField() = default;
    QField(MeshPtr m, std::vector<QPoint> v);
    static QField from_function(MeshPtr m, const std::function<QPoint(Point2)>& f);

    // Sheets are matched to the first vertex of the containing cell and
    // blended linearly. Throws DomainError outside the mesh.
    QPoint at(const Point2& x) const;
};

nlohmann::json to_json(const QField& f);
QField qfield_from_json(const nlohmann::json& j);

// Vector-valued field (one value per vertex), used for xi-images.
using VField = std::vector<Vec>;

// P1 Dirichlet integral of a vector field, total and per cell.
double p1_energy(const Mesh& m, const VField& u, std::vector<double>* per_cell = nullptr);

// Sheets of (a, b, c) consistent with optimal matchings on all three edges,
// if any. Returns false when the cell contains a branch point.
bool cell_sheets(const QPoint& a, const QPoint& b, const QPoint& c,
                 std::vector<int>& sb, std::vector<int>& sc, double tol = 1e-9);

}  // namespace qv
