#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qv/error.hpp"
#include "qv/projections.hpp"

namespace qv {

double SkeletonGeometry::c(int k) const {
    int i = k - (bottom() - 1);
    if (i < 0 || i >= int(c_.size())) throw InvalidInput("SkeletonGeometry::c: index out of range");
    return c_[i];
}

double SkeletonGeometry::lower_distance(const Vec& x, int k) const {
    return complex_.distance_to_skeleton(x, k - 1);
}

bool SkeletonGeometry::in_tube(const Vec& x, int face, double a, double b) const {
    int k = complex_.face(face).dim;
    return complex_.distance_to_face(x, face) <= a && lower_distance(x, k) >= b;
}

namespace {

Vec unit_gaussian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(n);
    do {
        for (int i = 0; i < n; ++i) v[i] = g(rng);
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

}  // namespace

SkeletonGeometry SkeletonGeometry::build(ConeComplex complex, const SkeletonOptions& opts) {
    SkeletonGeometry g;
    g.complex_ = std::move(complex);
    const EmbeddingSpec& spec = g.complex_.spec();
    g.top_ = spec.q * spec.n;
    const int bottom = g.complex_.min_dim();
    const int N = spec.N();

    for (int attempt = 0; attempt <= opts.max_doublings; ++attempt) {
        double kappa = opts.kappa0 * std::pow(2.0, attempt);
        g.kappa_ = kappa;
        g.c_.assign(g.top_ - bottom + 1, 1.0);
        for (int i = int(g.c_.size()) - 2; i >= 0; --i) g.c_[i] = kappa * g.c_[i + 1];

        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        double gap = INFINITY;
        bool ok = true;
        for (int k = bottom; k < g.top_ && ok; ++k) {
            auto faces = g.complex_.faces_of_dim(k);
            if (faces.size() < 2) continue;
            double ck = g.c(k), cl = g.c(k - 1);
            for (int f : faces) {
                for (int s = 0; s < opts.samples_per_face && ok; ++s) {
                    Vec y0;
                    g.complex_.distance_to_face(unit_gaussian(N, rng), f, &y0);
                    double d = g.lower_distance(y0, k);
                    if (!(d > 1e-9)) continue;
                    Vec y = std::isinf(d) ? y0 : Vec(y0 * (cl * (1.0 + u01(rng)) / d));
                    Vec x = retract_rho(y + 2.0 * ck * u01(rng) * unit_gaussian(N, rng), spec);
                    if (!g.in_tube(x, f, 2.0 * ck, cl)) continue;
                    for (int h : faces) {
                        if (h == f) continue;
                        double e = g.complex_.distance_to_face(x, h) - 2.0 * ck;
                        gap = std::min(gap, e);
                        if (e <= 0) ok = false;
                    }
                }
            }
        }
        if (ok) {
            g.gap_ = gap;
            return g;
        }
    }
    throw DomainError("SkeletonGeometry: tubes still overlap after " +
                      std::to_string(opts.max_doublings) + " doublings of kappa");
}

// ---------------------------------------------------------------------------

double AlmostProjection::exponent(int k) const {
    return std::pow(2.0, double(k - geo_.top()));
}

AlmostProjection AlmostProjection::build(const EmbeddingSpec& spec, double mu,
                                         const RhoStarOptions& opts) {
    return build(face_decomposition(spec), mu, opts);
}

AlmostProjection AlmostProjection::build(const ConeComplex& complex, double mu,
                                         const RhoStarOptions& opts) {
    AlmostProjection p;
    p.mu_ = mu;
    p.geo_ = SkeletonGeometry::build(complex, opts.skeleton);
    p.mu_max_ = std::min(0.5, 0.5 * p.geo_.gap());
    if (!(mu > 0.0 && mu < p.mu_max_))
        throw InvalidInput("build_rho_star: mu = " + std::to_string(mu) +
                           " outside (0, " + std::to_string(p.mu_max_) + ")");
    const ConeComplex& cx = p.geo_.complex();
    const EmbeddingSpec& spec = cx.spec();
    const int N = spec.N(), top = p.geo_.top(), bottom = p.geo_.bottom();
    std::mt19937_64 rng(opts.seed);

    std::vector<StageReport> reports;
    for (int k = top - 1; k >= bottom; --k) {
        for (int f : cx.faces_of_dim(k)) {
            const Face& face = cx.face(f);
            const double b = 2.0 * p.geo_.c(k);
            Vec y_ref = Vec::Zero(N);
            if (k > bottom) {
                double d1 = p.geo_.lower_distance(face.representative, k);
                y_ref = face.representative * ((p.geo_.c(k - 1) + 4.0 * p.geo_.c(k)) / d1);
            }
            Mat proj = face.span * face.span.transpose();
            int dim_v = top - k;
            int draws = int(std::min<double>(
                opts.max_draws, std::ceil(opts.draws_per_unit * b * std::max(1, dim_v - 1))));
            std::vector<Vec> us, vs;
            for (int i = 0; i < draws; ++i) {
                Vec pt = retract_rho(y_ref + b * unit_gaussian(N, rng), spec, p.retract_);
                Vec z = pt - y_ref;
                z -= proj * z;
                if (z.norm() < 1e-9 * b) continue;
                Vec u = b / z.norm() * z;
                bool dup = false;
                for (const Vec& o : us)
                    if ((o - u).norm() <= 1e-9 * b) {
                        dup = true;
                        break;
                    }
                if (dup) continue;
                if ((retract_rho(y_ref + u, spec, p.retract_) - (y_ref + u)).norm() > 1e-8 * b)
                    continue;
                us.push_back(u);
            }
            for (const Vec& u : us) vs.push_back(p.stage_map(k + 1, y_ref + u) - y_ref);

            StageReport rep;
            rep.k = k;
            rep.face = f;
            rep.samples = int(us.size());
            rep.lip_defect = std::max(0.0, sampled_lipschitz(us, vs) - 1.0);
            for (std::size_t i = 0; i < us.size(); ++i)
                rep.displacement = std::max(rep.displacement, (vs[i] - us[i]).norm());
            rep.tau = std::max({std::pow(mu, 2.0 * p.exponent(k)), rep.lip_defect, rep.displacement});
            if (!(rep.tau < 1.0))
                throw InvalidInput("build_rho_star: stage k = " + std::to_string(k) +
                                   " needs tau = " + std::to_string(rep.tau) +
                                   " >= 1; mu is too large");
            reports.push_back(rep);
            // Kept ascending in k: lower stages are built later and read
            // this one through stage_map.
            p.stages_.insert(p.stages_.begin(),
                             Stage{k, f, y_ref, RadialConeExtension(us, vs, b, rep.tau)});
        }
    }
    std::stable_sort(p.stages_.begin(), p.stages_.end(), [](const Stage& a, const Stage& b) {
        return a.k != b.k ? a.k < b.k : a.face < b.face;
    });
    std::stable_sort(reports.begin(), reports.end(), [](const StageReport& a, const StageReport& b) {
        return a.k != b.k ? a.k < b.k : a.face < b.face;
    });
    p.reports_ = std::move(reports);
    return p;
}

int AlmostProjection::active_stage(int k, const Vec& x, int* face) const {
    const ConeComplex& cx = geo_.complex();
    int last_k = -1;
    double lower = 0.0;
    for (const Stage& s : stages_) {
        if (s.k < k) continue;
        if (s.k != last_k) {
            last_k = s.k;
            lower = geo_.lower_distance(x, s.k);
        }
        if (lower < geo_.c(s.k - 1)) continue;
        if (cx.distance_to_face(x, s.face) <= 2.0 * geo_.c(s.k)) {
            if (face) *face = s.face;
            return s.k;
        }
    }
    if (face) *face = -1;
    return geo_.top();
}

Vec AlmostProjection::eval_stage(const Stage& s, const Vec& x) const {
    Vec y;
    geo_.complex().distance_to_face(x, s.face, &y);
    Vec z = x - y;
    if (z.norm() <= s.ext.tau()) return y;
    return retract_rho(y + s.ext(z), spec(), retract_);
}

Vec AlmostProjection::stage_map(int k, const Vec& x) const {
    int face = -1;
    active_stage(k, x, &face);
    if (face < 0) return x;
    for (const Stage& s : stages_)
        if (s.face == face) return eval_stage(s, x);
    return x;
}

Vec AlmostProjection::apply_on_cone(const Vec& x) const { return stage_map(geo_.bottom(), x); }

Vec AlmostProjection::apply(const Vec& w) const {
    return apply_on_cone(retract_rho(w, spec(), retract_));
}

}  // namespace qv
