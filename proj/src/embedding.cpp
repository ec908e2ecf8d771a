#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qv/convex.hpp"
#include "qv/embedding.hpp"
#include "qv/error.hpp"
#include "qv/kernels.hpp"

namespace qv {

Vec EmbeddingSpec::dir(int l) const {
    return Eigen::Map<const Vec>(dirs.data() + std::size_t(l) * n, n);
}

bool operator==(const EmbeddingSpec& a, const EmbeddingSpec& b) {
    return a.q == b.q && a.n == b.n && a.h == b.h && a.dirs == b.dirs &&
           a.scale == b.scale;
}

namespace {

// Minimum over sampled pairs of |xi(S) - xi(T)| / G(S,T). Besides Gaussian
// pairs it tries "crossed" pairs that fool coordinate-aligned projections.
double sampled_lower_ratio(const EmbeddingSpec& spec, int pairs,
                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < pairs; ++s) {
        QPoint a = random_qpoint(spec.q, spec.n, 1.0, rng);
        QPoint b = random_qpoint(spec.q, spec.n, 1.0, rng);
        if (s % 2 == 1 && spec.q >= 2) {
            // b = a with two points exchanging one coordinate.
            b = a;
            int k = int(rng() % spec.n);
            std::swap(b.point(0)[k], b.point(1)[k]);
        }
        double d = metric_g(a, b);
        if (d < 1e-9) continue;
        worst = std::min(worst, (xi(a, spec) - xi(b, spec)).norm() / d);
    }
    return worst;
}

std::vector<Vec> spread_directions(int n, int h, std::uint64_t seed) {
    std::vector<Vec> dirs;
    if (n == 1) return {Vec::Ones(1)};
    if (n == 2) {
        // Lines through the origin at equal angles; a seed-dependent offset
        // is only used when a resample is requested.
        double off = seed ? std::fmod(0.6180339887498949 * double(seed), 1.0) : 0.0;
        for (int l = 0; l < h; ++l) {
            double th = M_PI * (l + off) / h;
            Vec e(2);
            e << std::cos(th), std::sin(th);
            dirs.push_back(e);
        }
        return dirs;
    }
    // Greedy maximin over lines (e and -e identified).
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec> pool(4000, Vec(n));
    for (auto& v : pool) {
        for (int k = 0; k < n; ++k) v[k] = g(rng);
        v.normalize();
    }
    dirs.push_back(pool[0]);
    while (int(dirs.size()) < h) {
        int best = 0;
        double best_cos = 2.0;
        for (std::size_t c = 0; c < pool.size(); ++c) {
            double m = 0.0;
            for (const Vec& d : dirs) m = std::max(m, std::abs(d.dot(pool[c])));
            if (m < best_cos) { best_cos = m; best = int(c); }
        }
        dirs.push_back(pool[best]);
    }
    return dirs;
}

}  // namespace

EmbeddingSpec EmbeddingSpec::custom(int q, int n, const std::vector<Vec>& dirs,
                                    double scale, bool validate) {
    if (q <= 0 || n <= 0) throw InvalidInput("EmbeddingSpec: q and n must be positive");
    if (dirs.empty()) throw InvalidInput("EmbeddingSpec: no directions");
    EmbeddingSpec s;
    s.q = q;
    s.n = n;
    s.h = int(dirs.size());
    s.scale = scale > 0 ? scale : 1.0 / std::sqrt(double(s.h));
    for (int l = 0; l < s.h; ++l) {
        if (dirs[l].size() != n) throw InvalidInput("EmbeddingSpec: direction of wrong dimension");
        if (std::abs(dirs[l].norm() - 1.0) > 1e-12)
            throw InvalidInput("EmbeddingSpec: directions must be unit vectors");
        for (int m = 0; m < l; ++m)
            if ((dirs[l] - dirs[m]).norm() < 1e-12)
                throw InvalidInput("EmbeddingSpec: repeated direction");
        s.dirs.insert(s.dirs.end(), dirs[l].data(), dirs[l].data() + n);
    }
    Mat e(s.h, n);
    for (int l = 0; l < s.h; ++l) e.row(l) = dirs[l].transpose();
    if (Eigen::FullPivLU<Mat>(e).rank() < n)
        throw InvalidInput("EmbeddingSpec: directions do not span R^n");
    if (validate && sampled_lower_ratio(s, 10000, 0x51ed) < 1e-6)
        throw InvalidInput("EmbeddingSpec: xi is not injective on sampled pairs");
    return s;
}

EmbeddingSpec EmbeddingSpec::standard(int q, int n, std::uint64_t seed) {
    if (q <= 0 || n <= 0) throw InvalidInput("EmbeddingSpec: q and n must be positive");
    int h = n == 1 ? 1 : std::max(n, n * (q - 1) + 1);
    for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
        auto dirs = spread_directions(n, h, attempt == 0 && n == 2 ? 0 : seed + attempt);
        try {
            return custom(q, n, dirs, -1.0, true);
        } catch (const InvalidInput&) {
        }
    }
    throw InvalidInput("EmbeddingSpec: no injective direction set found");
}

Vec lmap(const QPoint& p, const EmbeddingSpec& spec) {
    if (p.q() != spec.q || p.n() != spec.n)
        throw InvalidInput("lmap: q-point does not match the spec");
    const int q = spec.q, n = spec.n;
    std::vector<double> pt(std::size_t(q) * n);
    for (int i = 0; i < q; ++i)
        for (int k = 0; k < n; ++k) pt[k * q + i] = p.point(i)[k];
    Vec out(spec.N());
    kernels::project(spec.dirs.data(), spec.h, pt.data(), q, n, spec.scale,
                     out.data());
    return out;
}

Vec omap(const Vec& w, const EmbeddingSpec& spec) {
    if (w.size() != spec.N()) throw InvalidInput("omap: vector has wrong length");
    Vec out = w;
    for (int l = 0; l < spec.h; ++l)
        std::sort(out.data() + l * spec.q, out.data() + (l + 1) * spec.q);
    return out;
}

Vec xi(const QPoint& t, const EmbeddingSpec& spec) {
    return omap(lmap(t, spec), spec);
}

// ---------------------------------------------------------------------------
// decode

namespace {

// positions[l][i]: sorted slot of point i in block l.
using Positions = std::vector<std::vector<int>>;

Positions positions_of(const QPoint& p, const EmbeddingSpec& spec) {
    Vec lp = lmap(p, spec);
    Positions pos(spec.h, std::vector<int>(spec.q));
    std::vector<int> idx(spec.q);
    for (int l = 0; l < spec.h; ++l) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return lp[l * spec.q + a] < lp[l * spec.q + b];
        });
        for (int j = 0; j < spec.q; ++j) pos[l][idx[j]] = j;
    }
    return pos;
}

// Least-squares points for fixed slots.
QPoint solve_points(const Vec& wo, const Positions& pos, const EmbeddingSpec& spec) {
    Mat m = Mat::Zero(spec.n, spec.n);
    for (int l = 0; l < spec.h; ++l) m += spec.dir(l) * spec.dir(l).transpose();
    m *= spec.scale * spec.scale;
    Eigen::LDLT<Mat> ldlt(m);
    QPoint out(spec.q, spec.n);
    for (int i = 0; i < spec.q; ++i) {
        Vec rhs = Vec::Zero(spec.n);
        for (int l = 0; l < spec.h; ++l)
            rhs += spec.scale * wo[l * spec.q + pos[l][i]] * spec.dir(l);
        Vec p = ldlt.solve(rhs);
        std::copy_n(p.data(), spec.n, out.point(i).begin());
    }
    return out;
}

DecodeResult alternate(const Vec& w, const Vec& wo, QPoint p,
                       const EmbeddingSpec& spec) {
    Positions pos = positions_of(p, spec);
    for (int it = 0; it < 100; ++it) {
        p = solve_points(wo, pos, spec);
        Positions next = positions_of(p, spec);
        if (next == pos) break;
        pos = std::move(next);
    }
    return {p, (xi(p, spec) - w).norm()};
}

std::vector<int> independent_blocks(const EmbeddingSpec& spec) {
    std::vector<int> chosen;
    Mat b(0, spec.n);
    for (int l = 0; l < spec.h && int(chosen.size()) < spec.n; ++l) {
        Mat t(b.rows() + 1, spec.n);
        if (b.rows()) t.topRows(b.rows()) = b;
        t.row(b.rows()) = spec.dir(l).transpose();
        if (Eigen::FullPivLU<Mat>(t).rank() == t.rows()) {
            b = t;
            chosen.push_back(l);
        }
    }
    return chosen;
}

long factorial(int q) {
    long f = 1;
    for (int i = 2; i <= q; ++i) f *= i;
    return f;
}

}  // namespace

DecodeResult decode_best(const Vec& w, const EmbeddingSpec& spec,
                         const DecodeOptions& opts) {
    if (w.size() != spec.N()) throw InvalidInput("decode: vector has wrong length");
    const int q = spec.q, n = spec.n;
    const Vec wo = omap(w, spec);
    DecodeResult best{QPoint(q, n), std::numeric_limits<double>::infinity()};
    auto consider = [&](const DecodeResult& r) {
        if (r.residual < best.residual) best = r;
    };
    const double tol = opts.tol * std::max(1.0, w.norm());

    std::vector<int> basis = independent_blocks(spec);
    Mat b(n, n);
    for (int k = 0; k < n; ++k) b.row(k) = spec.dir(basis[k]).transpose();
    Eigen::FullPivLU<Mat> blu(b);

    long combos = 1;
    for (int k = 1; k < n; ++k) {
        combos *= factorial(q);
        if (combos > opts.enumeration_budget) break;
    }
    if (combos <= opts.enumeration_budget) {
        // Points are labelled by their slot in the first basis block; every
        // other basis block is matched by a permutation.
        std::vector<std::vector<int>> perms(n, std::vector<int>(q));
        for (auto& p : perms) std::iota(p.begin(), p.end(), 0);
        while (true) {
            QPoint p(q, n);
            for (int i = 0; i < q; ++i) {
                Vec rhs(n);
                for (int k = 0; k < n; ++k)
                    rhs[k] = wo[basis[k] * q + perms[k][i]] / spec.scale;
                Vec x = blu.solve(rhs);
                std::copy_n(x.data(), n, p.point(i).begin());
            }
            consider({p, (xi(p, spec) - w).norm()});
            int k = n - 1;
            while (k >= 1 && !std::next_permutation(perms[k].begin(), perms[k].end())) --k;
            if (k < 1) break;
        }
        if (best.residual > tol) consider(alternate(w, wo, best.t, spec));
    }
    if (best.residual > tol) {
        std::mt19937_64 rng(opts.seed);
        double sd = std::max(1e-3, wo.norm() / std::sqrt(double(spec.N())));
        for (int r = 0; r < opts.restarts && best.residual > tol; ++r)
            consider(alternate(w, wo, random_qpoint(q, n, sd, rng), spec));
    }
    return best;
}

QPoint decode(const Vec& w, const EmbeddingSpec& spec, const DecodeOptions& opts) {
    DecodeResult r = decode_best(w, spec, opts);
    if (r.residual > opts.tol * std::max(1.0, w.norm()))
        throw ConvergenceError("decode: residual " + std::to_string(r.residual) +
                                   " above tolerance",
                               r.residual);
    return r.t;
}

// ---------------------------------------------------------------------------
// retract_rho

namespace {

// order[l][j]: point sitting in slot j of block l.
using Pattern = std::vector<std::vector<int>>;

Pattern pattern_of(const QPoint& p, const EmbeddingSpec& spec) {
    Positions pos = positions_of(p, spec);
    Pattern pat(spec.h, std::vector<int>(spec.q));
    for (int l = 0; l < spec.h; ++l)
        for (int i = 0; i < spec.q; ++i) pat[l][pos[l][i]] = i;
    return pat;
}

struct CellFit {
    Vec p;         // nq coordinates
    double dist2;  // squared distance from w to the cell closure
    std::vector<std::pair<int, int>> tight;  // (block, slot) with slot ~ slot+1
};

CellFit fit_cell(const Vec& w, const Pattern& pat, const EmbeddingSpec& spec) {
    const int q = spec.q, n = spec.n, dim = q * n;
    Mat a = Mat::Zero(spec.N(), dim);
    Mat g = Mat::Zero(spec.h * (q - 1), dim);
    for (int l = 0; l < spec.h; ++l) {
        Vec e = spec.dir(l);
        for (int j = 0; j < q; ++j)
            a.block(l * q + j, pat[l][j] * n, 1, n) = spec.scale * e.transpose();
        for (int j = 0; j + 1 < q; ++j) {
            g.block(l * (q - 1) + j, pat[l][j + 1] * n, 1, n) += e.transpose();
            g.block(l * (q - 1) + j, pat[l][j] * n, 1, n) -= e.transpose();
        }
    }
    Mat hmat = a.transpose() * a;
    Vec f = a.transpose() * w;
    QpResult r = solve_cone_qp(hmat, f, Mat(0, dim), g);
    CellFit c;
    c.p = r.x;
    c.dist2 = std::max(0.0, w.squaredNorm() + 2.0 * r.objective);
    double gtol = 1e-9 * std::max(1.0, r.x.norm());
    for (int l = 0; l < spec.h; ++l)
        for (int j = 0; j + 1 < q; ++j)
            if (g.row(l * (q - 1) + j).dot(r.x) <= gtol) c.tight.push_back({l, j});
    return c;
}

QPoint to_qpoint(const Vec& p, const EmbeddingSpec& spec) {
    return QPoint(spec.q, spec.n, std::vector<double>(p.data(), p.data() + p.size()));
}

}  // namespace

Vec retract_rho(const Vec& w, const EmbeddingSpec& spec, const RetractOptions& opts) {
    if (w.size() != spec.N()) throw InvalidInput("retract_rho: vector has wrong length");
    if (spec.q == 1) {
        DecodeResult d = decode_best(w, spec);
        return xi(d.t, spec);
    }
    std::vector<QPoint> starts;
    DecodeOptions dopt;
    dopt.restarts = 0;
    starts.push_back(decode_best(w, spec, dopt).t);
    std::mt19937_64 rng(opts.seed);
    double sd = std::max(1e-3, w.norm() / std::sqrt(double(spec.N())));
    for (int r = 0; r < opts.restarts; ++r)
        starts.push_back(random_qpoint(spec.q, spec.n, sd, rng));

    CellFit best;
    best.dist2 = std::numeric_limits<double>::infinity();
    std::vector<Pattern> visited;
    for (const QPoint& s : starts) {
        Pattern pat = pattern_of(s, spec);
        if (std::find(visited.begin(), visited.end(), pat) != visited.end()) continue;
        visited.push_back(pat);
        CellFit cur = fit_cell(w, pat, spec);
        for (int move = 0; move < opts.max_moves; ++move) {
            // Cross into the neighbouring cell through the best tight wall.
            bool improved = false;
            CellFit next;
            Pattern next_pat;
            for (auto [l, j] : cur.tight) {
                Pattern np = pat;
                std::swap(np[l][j], np[l][j + 1]);
                if (std::find(visited.begin(), visited.end(), np) != visited.end()) continue;
                visited.push_back(np);
                CellFit c = fit_cell(w, np, spec);
                if (c.dist2 < cur.dist2 - 1e-13 * std::max(1.0, w.squaredNorm()) &&
                    (!improved || c.dist2 < next.dist2)) {
                    next = c;
                    next_pat = np;
                    improved = true;
                }
            }
            if (!improved) break;
            cur = next;
            pat = next_pat;
        }
        if (cur.dist2 < best.dist2) best = cur;
    }
    return xi(to_qpoint(best.p, spec), spec);
}

double distance_to_cone(const Vec& w, const EmbeddingSpec& spec) {
    return (retract_rho(w, spec) - w).norm();
}

}  // namespace qv
