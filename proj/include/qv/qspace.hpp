#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "json.hpp"

namespace qv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Unordered q-tuple of points in R^n. Storage order is incidental; equality
// and serialization go through the canonical (lexicographic) order.
class QPoint {
public:
    QPoint() = default;
    QPoint(int q, int n);
    // coords row-major, q rows of n.
    QPoint(int q, int n, std::vector<double> coords);
    static QPoint from_points(const std::vector<Vec>& pts);
    static QPoint repeated(int q, const Vec& p);

    int q() const { return q_; }
    int n() const { return n_; }
    std::span<const double> point(int i) const {
        return {data_.data() + std::size_t(i) * n_, std::size_t(n_)};
    }
    std::span<double> point(int i) {
        return {data_.data() + std::size_t(i) * n_, std::size_t(n_)};
    }
    Vec vec(int i) const;
    const std::vector<double>& data() const { return data_; }

    QPoint canonical() const;
    // Same storage, rows reordered: out.point(i) = point(perm[i]).
    QPoint permuted(const std::vector<int>& perm) const;

    // Equal canonical forms up to tol per coordinate.
    bool equals(const QPoint& other, double tol = 0.0) const;

private:
    int q_ = 0;
    int n_ = 0;
    std::vector<double> data_;
};

struct Assignment {
    std::vector<int> perm;  // row i is matched to column perm[i]
    double cost = 0.0;
};

// Exact minimum-cost perfect matching on a square cost matrix (row-major).
// Among optimal permutations within tie_tol the lexicographically smallest
// is returned.
Assignment solve_assignment(std::span<const double> cost, int q,
                            double tie_tol = 1e-12);

// cost[i*q + j] = |a_i - b_j|^2
std::vector<double> squared_cost_matrix(const QPoint& a, const QPoint& b);

Assignment match_squared(const QPoint& a, const QPoint& b);
double metric_g(const QPoint& a, const QPoint& b);
double metric_g_squared(const QPoint& a, const QPoint& b);
double wasserstein1(const QPoint& a, const QPoint& b);

double separation(const QPoint& t);  // +inf when all points coincide
double diameter(const QPoint& t);
QPoint translate(const QPoint& t, const Vec& y);
std::vector<QPoint> cluster_split(const QPoint& t, double threshold);

// Tolerance under which two coordinates are considered the same point.
inline constexpr double kPointTol = 1e-12;

void to_json(nlohmann::json& j, const QPoint& p);
void from_json(const nlohmann::json& j, QPoint& p);

}  // namespace qv
