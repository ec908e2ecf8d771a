#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qv/error.hpp"
#include "qv/kernels.hpp"
#include "qv/qspace.hpp"

namespace qv {

QPoint::QPoint(int q, int n) : q_(q), n_(n), data_(std::size_t(q) * n, 0.0) {
    if (q <= 0 || n <= 0) throw InvalidInput("QPoint: q and n must be positive");
}

QPoint::QPoint(int q, int n, std::vector<double> coords)
    : q_(q), n_(n), data_(std::move(coords)) {
    if (q <= 0 || n <= 0) throw InvalidInput("QPoint: q and n must be positive");
    if (data_.size() != std::size_t(q) * n)
        throw InvalidInput("QPoint: expected q*n coordinates");
}

QPoint QPoint::from_points(const std::vector<Vec>& pts) {
    if (pts.empty()) throw InvalidInput("QPoint: empty point list");
    int n = int(pts[0].size());
    std::vector<double> c;
    c.reserve(pts.size() * n);
    for (const Vec& p : pts) {
        if (p.size() != n) throw InvalidInput("QPoint: ragged point list");
        c.insert(c.end(), p.data(), p.data() + n);
    }
    return QPoint(int(pts.size()), n, std::move(c));
}

QPoint QPoint::repeated(int q, const Vec& p) {
    return from_points(std::vector<Vec>(q, p));
}

Vec QPoint::vec(int i) const {
    return Eigen::Map<const Vec>(data_.data() + std::size_t(i) * n_, n_);
}

QPoint QPoint::permuted(const std::vector<int>& perm) const {
    QPoint out(q_, n_);
    for (int i = 0; i < q_; ++i)
        std::copy_n(point(perm[i]).begin(), n_, out.point(i).begin());
    return out;
}

QPoint QPoint::canonical() const {
    std::vector<int> idx(q_);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        auto pa = point(a), pb = point(b);
        return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(),
                                            pb.end());
    });
    return permuted(idx);
}

bool QPoint::equals(const QPoint& other, double tol) const {
    if (q_ != other.q_ || n_ != other.n_) return false;
    if (tol == 0.0) return canonical().data_ == other.canonical().data_;
    return metric_g(*this, other) <= tol;
}

namespace {

void check_compatible(const QPoint& a, const QPoint& b) {
    if (a.q() != b.q() || a.n() != b.n())
        throw InvalidInput("QPoint mismatch: (q,n) = (" + std::to_string(a.q()) +
                           "," + std::to_string(a.n()) + ") vs (" +
                           std::to_string(b.q()) + "," + std::to_string(b.n()) +
                           ")");
}

}  // namespace

std::vector<double> squared_cost_matrix(const QPoint& a, const QPoint& b) {
    check_compatible(a, b);
    const int q = a.q(), n = a.n();
    std::vector<double> bt(std::size_t(q) * n);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < n; ++k) bt[k * q + j] = b.point(j)[k];
    std::vector<double> c(std::size_t(q) * q);
    kernels::squared_distances(a.data().data(), q, bt.data(), q, n, c.data());
    return c;
}

Assignment match_squared(const QPoint& a, const QPoint& b) {
    auto c = squared_cost_matrix(a, b);
    return solve_assignment(c, a.q());
}

double metric_g_squared(const QPoint& a, const QPoint& b) {
    return std::max(0.0, match_squared(a, b).cost);
}

double metric_g(const QPoint& a, const QPoint& b) {
    return std::sqrt(metric_g_squared(a, b));
}

double wasserstein1(const QPoint& a, const QPoint& b) {
    auto c = squared_cost_matrix(a, b);
    for (double& x : c) x = std::sqrt(x);
    return solve_assignment(c, a.q()).cost;
}

double separation(const QPoint& t) {
    double s = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t.q(); ++i)
        for (int j = i + 1; j < t.q(); ++j) {
            double d = (t.vec(i) - t.vec(j)).norm();
            if (d > kPointTol) s = std::min(s, d);
        }
    return s;
}

double diameter(const QPoint& t) {
    double d = 0.0;
    for (int i = 0; i < t.q(); ++i)
        for (int j = i + 1; j < t.q(); ++j)
            d = std::max(d, (t.vec(i) - t.vec(j)).norm());
    return d;
}

QPoint translate(const QPoint& t, const Vec& y) {
    if (y.size() != t.n()) throw InvalidInput("translate: dimension mismatch");
    QPoint out = t;
    for (int i = 0; i < t.q(); ++i)
        for (int k = 0; k < t.n(); ++k) out.point(i)[k] -= y[k];
    return out;
}

std::vector<QPoint> cluster_split(const QPoint& t, double threshold) {
    if (!(threshold > 0)) throw InvalidInput("cluster_split: threshold must be positive");
    const int q = t.q();
    std::vector<int> parent(q);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j)
            if ((t.vec(i) - t.vec(j)).norm() <= threshold) {
                int a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
    // Clusters ordered by their smallest member; members keep input order.
    std::vector<std::vector<Vec>> groups;
    std::vector<int> slot(q, -1);
    for (int i = 0; i < q; ++i) {
        int r = find(i);
        if (slot[r] < 0) {
            slot[r] = int(groups.size());
            groups.emplace_back();
        }
        groups[slot[r]].push_back(t.vec(i));
    }
    std::vector<QPoint> out;
    for (auto& g : groups) out.push_back(QPoint::from_points(g));
    return out;
}

void to_json(nlohmann::json& j, const QPoint& p) {
    QPoint c = p.canonical();
    nlohmann::json pts = nlohmann::json::array();
    for (int i = 0; i < c.q(); ++i)
        pts.push_back(std::vector<double>(c.point(i).begin(), c.point(i).end()));
    j = {{"q", c.q()}, {"n", c.n()}, {"points", pts}};
}

void from_json(const nlohmann::json& j, QPoint& p) {
    try {
        int q = j.at("q").get<int>(), n = j.at("n").get<int>();
        const auto& pts = j.at("points");
        if (int(pts.size()) != q) throw InvalidInput("QPoint json: expected q points");
        std::vector<double> c;
        for (const auto& row : pts) {
            auto v = row.get<std::vector<double>>();
            if (int(v.size()) != n) throw InvalidInput("QPoint json: expected n coordinates");
            c.insert(c.end(), v.begin(), v.end());
        }
        p = QPoint(q, n, std::move(c));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("QPoint json: ") + e.what());
    }
}

}  // namespace qv
