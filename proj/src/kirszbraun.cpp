#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qv/error.hpp"
#include "qv/projections.hpp"

namespace qv {

namespace {

struct Smoothed {
    const std::vector<Vec>& ys;
    const std::vector<double>& r;
    double beta, eps;

    // log-sum-exp of beta * (sqrt(|y - y_i|^2 + eps^2) - r_i), divided by beta.
    double value(const Vec& y) const {
        double top = -INFINITY;
        std::vector<double> a(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
            a[i] = std::sqrt((y - ys[i]).squaredNorm() + eps * eps) - r[i];
            top = std::max(top, a[i]);
        }
        double s = 0.0;
        for (double x : a) s += std::exp(beta * (x - top));
        return top + std::log(s) / beta;
    }

    void derivatives(const Vec& y, Vec& grad, Mat& hess) const {
        const int d = int(y.size());
        const std::size_t m = ys.size();
        std::vector<double> a(m), s(m);
        double top = -INFINITY;
        for (std::size_t i = 0; i < m; ++i) {
            s[i] = std::sqrt((y - ys[i]).squaredNorm() + eps * eps);
            a[i] = s[i] - r[i];
            top = std::max(top, a[i]);
        }
        std::vector<double> p(m);
        double z = 0.0;
        for (std::size_t i = 0; i < m; ++i) z += (p[i] = std::exp(beta * (a[i] - top)));
        grad = Vec::Zero(d);
        hess = Mat::Zero(d, d);
        Mat outer = Mat::Zero(d, d);
        for (std::size_t i = 0; i < m; ++i) {
            double pi = p[i] / z;
            if (pi < 1e-300) continue;
            Vec g = (y - ys[i]) / s[i];
            grad += pi * g;
            hess += (pi / s[i]) * (Mat::Identity(d, d) - g * g.transpose());
            outer += pi * g * g.transpose();
        }
        hess += beta * (outer - grad * grad.transpose());
    }
};

double exact_max(const std::vector<Vec>& ys, const std::vector<double>& r, const Vec& y) {
    double v = -INFINITY;
    for (std::size_t i = 0; i < ys.size(); ++i) v = std::max(v, (y - ys[i]).norm() - r[i]);
    return v;
}

}  // namespace

Vec minmax_point(const std::vector<Vec>& ys, const std::vector<double>& r, const Vec& start,
                 double* value) {
    if (ys.empty()) throw InvalidInput("minmax_point: no samples");
    if (ys.size() == 1) {
        if (value) *value = -r[0];
        return ys[0];
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i)
        scale = std::max({scale, std::abs(r[i]), (ys[i] - ys[0]).norm()});
    scale = std::max(scale, 1e-300);

    Vec y = start, best = start;
    double best_v = exact_max(ys, r, y);
    for (int j = 0; j <= 13; ++j) {
        Smoothed f{ys, r, std::pow(10.0, j) / scale, scale * std::pow(10.0, -j - 1)};
        double fv = f.value(y);
        for (int it = 0; it < 60; ++it) {
            Vec g;
            Mat h;
            f.derivatives(y, g, h);
            if (g.norm() <= 1e-15) break;
            double damp = 1e-14 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
            h.diagonal().array() += damp;
            Vec step = -h.ldlt().solve(g);
            if (!step.allFinite() || g.dot(step) >= 0) step = -g;
            double t = 1.0, slope = g.dot(step);
            bool moved = false;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                Vec cand = y + t * step;
                double cv = f.value(cand);
                if (cv <= fv + 1e-4 * t * slope) {
                    moved = cv < fv;
                    y = cand;
                    fv = cv;
                    break;
                }
            }
            if (!moved || t * step.norm() <= 1e-16 * (scale + y.norm())) break;
        }
        double v = exact_max(ys, r, y);
        if (v < best_v) {
            best_v = v;
            best = y;
        }
    }
    if (value) *value = best_v;
    return best;
}

double kirszbraun_violation(const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                            double lambda, const Vec& x, const Vec& y) {
    double v = -INFINITY;
    for (std::size_t i = 0; i < xs.size(); ++i)
        v = std::max(v, (y - ys[i]).norm() - lambda * (x - xs[i]).norm());
    return v;
}

double sampled_lipschitz(const std::vector<Vec>& u, const std::vector<Vec>& v) {
    double lip = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            double d = (u[i] - u[j]).norm();
            if (d > 0) lip = std::max(lip, (v[i] - v[j]).norm() / d);
        }
    return lip;
}

KirszbraunExtension::KirszbraunExtension(std::vector<Vec> xs, std::vector<Vec> ys, double lambda)
    : xs_(std::move(xs)), ys_(std::move(ys)), lambda_(lambda) {
    if (xs_.size() != ys_.size()) throw InvalidInput("kirszbraun: sample count mismatch");
    if (!(lambda_ > 0)) throw InvalidInput("kirszbraun: lambda must be positive");
    for (std::size_t i = 0; i < xs_.size(); ++i) {
        scale_ = std::max({scale_, (xs_[i] - xs_[0]).norm() * lambda_, (ys_[i] - ys_[0]).norm()});
        for (std::size_t j = 0; j < i; ++j) {
            double dx = (xs_[i] - xs_[j]).norm(), dy = (ys_[i] - ys_[j]).norm();
            if (dy > lambda_ * dx + 1e-9 * std::max(1.0, dx))
                throw InvalidInput("kirszbraun: samples " + std::to_string(j) + ", " +
                                   std::to_string(i) + " violate the Lipschitz bound (" +
                                   std::to_string(dy / dx) + " > " + std::to_string(lambda_) + ")");
        }
    }
}

Vec KirszbraunExtension::operator()(const Vec& x) const { return eval(x, {}, {}); }

Vec KirszbraunExtension::eval(const Vec& x, const std::vector<Vec>& extra_x,
                              const std::vector<Vec>& extra_y, const Vec* guess) const {
    std::vector<Vec> ys;
    std::vector<double> r;
    ys.reserve(ys_.size() + extra_y.size());
    r.reserve(ys.capacity());
    auto add = [&](const Vec& xi, const Vec& yi) {
        ys.push_back(yi);
        r.push_back(lambda_ * (x - xi).norm());
    };
    for (std::size_t i = 0; i < xs_.size(); ++i) add(xs_[i], ys_[i]);
    for (std::size_t i = 0; i < extra_x.size(); ++i) add(extra_x[i], extra_y[i]);
    if (ys.empty()) throw InvalidInput("kirszbraun: no samples");
    std::size_t near = std::min_element(r.begin(), r.end()) - r.begin();
    if (r[near] == 0.0) return ys[near];
    const double slack = tol * std::max(1.0, scale_);
    if (guess) {
        bool ok = true;
        for (std::size_t i = 0; i < ys.size() && ok; ++i) ok = (*guess - ys[i]).norm() <= r[i];
        if (ok) return *guess;
    }
    double v = 0.0;
    Vec y = minmax_point(ys, r, ys[near], &v);
    if (v > slack)
        throw ConvergenceError("kirszbraun: infeasible query (max violation " +
                                   std::to_string(v) + ")",
                               v);
    if (!guess) return y;
    // Walk from the centre towards the guess until the first ball boundary.
    Vec d = *guess - y;
    double t = 1.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        Vec e = y - ys[i];
        double a = d.squaredNorm(), b = e.dot(d), c = e.squaredNorm() - r[i] * r[i];
        if (a <= 0 || c > 0) continue;
        double root = (-b + std::sqrt(std::max(0.0, b * b - a * c))) / a;
        t = std::min(t, std::max(0.0, root));
    }
    return y + t * d;
}

Vec kirszbraun_extend(const std::vector<Vec>& xs, const std::vector<Vec>& ys, double lambda,
                      const Vec& query) {
    return KirszbraunExtension(xs, ys, lambda)(query);
}

// ---------------------------------------------------------------------------

namespace {

KirszbraunExtension checked_boundary(const std::vector<Vec>& u, const std::vector<Vec>& v,
                                     double b, double tau, bool check_displacement) {
    if (!(b >= 2.0)) throw InvalidInput("radial extension: b must be at least 2");
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("radial extension: tau must lie in (0, 1)");
    if (u.size() != v.size()) throw InvalidInput("radial extension: sample count mismatch");
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(u[i].norm() - b) > 1e-9 * b)
            throw InvalidInput("radial extension: boundary sample off the sphere |x| = b");
        if (check_displacement && (v[i] - u[i]).norm() > tau + 1e-9)
            throw InvalidInput("radial extension: |v(x) - x| = " +
                               std::to_string((v[i] - u[i]).norm()) + " exceeds tau");
    }
    double lip = sampled_lipschitz(u, v);
    if (lip > 1.0 + tau + 1e-9)
        throw InvalidInput("radial extension: boundary Lipschitz constant " +
                           std::to_string(lip) + " exceeds 1 + tau");
    return KirszbraunExtension(u, v, 1.0 + 2.0 * tau);
}

}  // namespace

RadialConeExtension::RadialConeExtension(std::vector<Vec> u, std::vector<Vec> v, double b,
                                         double tau, bool check_displacement)
    : b_(b), tau_(tau), guided_(check_displacement),
      k_(checked_boundary(u, v, b, tau, check_displacement)) {}

Vec RadialConeExtension::operator()(const Vec& z) const {
    double r = z.norm();
    if (r > b_ * (1 + 1e-9)) throw DomainError("radial extension: query outside B_b");
    Vec zero = Vec::Zero(k_.ys().empty() ? z.size() : k_.ys()[0].size());
    if (r <= tau_) return zero;
    // Nearest point of B_tau within the cone is tau z/|z|. Aim for the
    // shrink-and-stretch interpolant, exact for identity boundary data.
    Vec guess = (b_ / (b_ - tau_)) * (1.0 - tau_ / r) * z;
    if (!guided_ || guess.size() != zero.size()) return k_.eval(z, {tau_ / r * z}, {zero});
    return k_.eval(z, {tau_ / r * z}, {zero}, &guess);
}

}  // namespace qv
