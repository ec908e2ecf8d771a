#include "qv/convex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd null_space(const MatrixXd& a, double rel_tol) {
    const int n = int(a.cols());
    if (a.rows() == 0) return MatrixXd::Identity(n, n);
    Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
    const VectorXd& s = svd.singularValues();
    double smax = s.size() ? s[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * std::max(1.0, smax)) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

namespace {

MatrixXd stack_rows(const MatrixXd& e, const MatrixXd& g,
                    const std::vector<int>& work) {
    MatrixXd c(e.rows() + work.size(), e.cols());
    if (e.rows()) c.topRows(e.rows()) = e;
    for (std::size_t i = 0; i < work.size(); ++i) c.row(e.rows() + i) = g.row(work[i]);
    return c;
}

// Minimizer of the quadratic over {C x = 0}.
VectorXd equality_qp(const MatrixXd& h, const VectorXd& f, const MatrixXd& c) {
    MatrixXd z = null_space(c);
    if (z.cols() == 0) return VectorXd::Zero(h.cols());
    MatrixXd hz = z.transpose() * h * z;
    VectorXd y = hz.ldlt().solve(z.transpose() * f);
    return z * y;
}

}  // namespace

QpResult solve_cone_qp(const MatrixXd& h, const VectorXd& f, const MatrixXd& e,
                       const MatrixXd& g, int max_iter) {
    const int n = int(h.cols());
    QpResult r;
    r.x = VectorXd::Zero(n);
    std::vector<int> work;
    double fscale = std::max(1.0, f.norm());
    const double tol = 1e-13 * fscale;
    for (int it = 0; it < max_iter; ++it) {
        r.iterations = it + 1;
        MatrixXd c = stack_rows(e, g, work);
        VectorXd xhat = equality_qp(h, f, c);
        VectorXd d = xhat - r.x;
        if (d.norm() <= 1e-14 * std::max(1.0, xhat.norm())) {
            if (work.empty()) { r.converged = true; break; }
            // Multipliers from H x - f = C' lambda.
            VectorXd grad = h * r.x - f;
            VectorXd lam = c.transpose().colPivHouseholderQr().solve(grad);
            int worst = -1;
            double most_neg = -1e-12 * fscale;
            for (std::size_t i = 0; i < work.size(); ++i) {
                double li = lam[e.rows() + i];
                if (li < most_neg) { most_neg = li; worst = int(i); }
            }
            if (worst < 0) { r.converged = true; break; }
            work.erase(work.begin() + worst);
            continue;
        }
        double alpha = 1.0;
        int block = -1;
        for (int i = 0; i < g.rows(); ++i) {
            if (std::find(work.begin(), work.end(), i) != work.end()) continue;
            double gd = g.row(i).dot(d);
            if (gd < -tol * 1e-3) {
                double gx = std::max(0.0, g.row(i).dot(r.x));
                double a = gx / -gd;
                if (a < alpha) { alpha = a; block = i; }
            }
        }
        r.x += alpha * d;
        if (block >= 0) work.push_back(block);
    }
    r.objective = 0.5 * r.x.dot(h * r.x) - f.dot(r.x);
    return r;
}

MinNormResult min_norm_point(const MatrixXd& pts, int max_iter) {
    const int m = int(pts.cols());
    MinNormResult r;
    r.weights = VectorXd::Zero(m);
    if (m == 0) return r;
    double scale = 0.0;
    int start = 0;
    for (int j = 0; j < m; ++j) {
        double nj = pts.col(j).squaredNorm();
        scale = std::max(scale, nj);
        if (nj < pts.col(start).squaredNorm()) start = j;
    }
    const double eps = 1e-12 * std::max(scale, 1e-300);
    std::vector<int> s{start};
    std::vector<double> lam{1.0};
    VectorXd x = pts.col(start);
    for (int major = 0; major < max_iter; ++major) {
        int j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < m; ++k) {
            double v = x.dot(pts.col(k));
            if (v < best) { best = v; j = k; }
        }
        if (best >= x.squaredNorm() - eps ||
            std::find(s.begin(), s.end(), j) != s.end()) {
            r.converged = true;
            break;
        }
        s.push_back(j);
        lam.push_back(0.0);
        for (int minor = 0; minor < max_iter; ++minor) {
            const int k = int(s.size());
            MatrixXd p(pts.rows(), k);
            for (int i = 0; i < k; ++i) p.col(i) = pts.col(s[i]);
            MatrixXd kkt = MatrixXd::Zero(k + 1, k + 1);
            kkt.topLeftCorner(k, k) = p.transpose() * p;
            kkt.block(0, k, k, 1).setOnes();
            kkt.block(k, 0, 1, k).setOnes();
            VectorXd rhs = VectorXd::Zero(k + 1);
            rhs[k] = 1.0;
            VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
            VectorXd alpha = sol.head(k);
            if ((alpha.array() > 1e-14).all()) {
                for (int i = 0; i < k; ++i) lam[i] = alpha[i];
                x = p * alpha;
                break;
            }
            double theta = 1.0;
            for (int i = 0; i < k; ++i)
                if (alpha[i] <= 1e-14) theta = std::min(theta, lam[i] / (lam[i] - alpha[i]));
            for (int i = 0; i < k; ++i) lam[i] = theta * alpha[i] + (1 - theta) * lam[i];
            std::vector<int> s2;
            std::vector<double> l2;
            for (int i = 0; i < k; ++i)
                if (lam[i] > 1e-14) { s2.push_back(s[i]); l2.push_back(lam[i]); }
            s = s2;
            lam = l2;
            double tot = 0.0;
            for (double v : lam) tot += v;
            for (double& v : lam) v /= tot;
            x.setZero();
            for (std::size_t i = 0; i < s.size(); ++i) x += lam[i] * pts.col(s[i]);
        }
    }
    r.x = x;
    for (std::size_t i = 0; i < s.size(); ++i) r.weights[s[i]] = lam[i];
    return r;
}

}  // namespace qv
