#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "field_util.hpp"
#include "qv/dirichlet.hpp"
#include "qv/error.hpp"

namespace qv {

namespace {

// Buckets of points on a square lattice of side `cell`.
class Buckets {
public:
    Buckets(double cell) : cell_(cell) {}
    void add(int id, const Point2& x) { map_[key(x)].push_back(id); }
    template <class F>
    void near(const Point2& x, double r, F f) const {
        long i0 = long(std::floor((x.x() - r) / cell_)), i1 = long(std::floor((x.x() + r) / cell_));
        long j0 = long(std::floor((x.y() - r) / cell_)), j1 = long(std::floor((x.y() + r) / cell_));
        for (long i = i0; i <= i1; ++i)
            for (long j = j0; j <= j1; ++j) {
                auto it = map_.find(pack(i, j));
                if (it == map_.end()) continue;
                for (int id : it->second) f(id);
            }
    }

private:
    static long long pack(long i, long j) { return (static_cast<long long>(i) << 32) ^ (j & 0xffffffffLL); }
    long long key(const Point2& x) const {
        return pack(long(std::floor(x.x() / cell_)), long(std::floor(x.y() / cell_)));
    }
    double cell_;
    std::unordered_map<long long, std::vector<int>> map_;
};

}  // namespace

namespace detail {

void lipschitz_fill(const Mesh& m, std::vector<char>& known, std::vector<Vec>& w, double level) {
    const int nv = m.num_vertices();
    const double h = m.min_edge_length();
    // Fill in breadth-first order from the kept set.
    std::vector<int> depth(nv, -1), order;
    std::deque<int> queue;
    for (int v = 0; v < nv; ++v)
        if (known[v]) {
            depth[v] = 0;
            queue.push_back(v);
        }
    std::vector<std::vector<int>> nbr(nv);
    for (const auto& ed : m.edges()) {
        nbr[ed.a].push_back(ed.b);
        nbr[ed.b].push_back(ed.a);
    }
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        if (depth[v] > 0) order.push_back(v);
        for (int b : nbr[v])
            if (depth[b] < 0) {
                depth[b] = depth[v] + 1;
                queue.push_back(b);
            }
    }
    Buckets pts(4 * h);
    for (int v = 0; v < nv; ++v)
        if (known[v]) pts.add(v, m.vertices()[v]);
    for (int v : order) {
        const Point2& x = m.vertices()[v];
        double r = 4 * h;
        std::vector<int> win;
        while (true) {
            win.clear();
            pts.near(x, r, [&](int b) {
                if ((m.vertices()[b] - x).norm() <= r) win.push_back(b);
            });
            if (win.size() >= 3 || r > 1e3 * h) break;
            r *= 2;
        }
        if (win.empty()) throw DomainError("lipschitz fill: vertex unreachable from the known set");
        std::sort(win.begin(), win.end());
        std::vector<Vec> xs, ys;
        for (int b : win) {
            xs.push_back(m.vertices()[b]);
            ys.push_back(w[b]);
        }
        double lam = std::max(level, sampled_lipschitz(xs, ys)) * (1 + 1e-9);
        w[v] = KirszbraunExtension(xs, ys, lam)(Vec(x));
        known[v] = 1;
        pts.add(v, x);
    }
}

}  // namespace detail

TruncationResult lipschitz_truncate(const QField& u, double level, const TruncationOptions& opts) {
    if (!(level > 0)) throw InvalidInput("lipschitz_truncate: level must be positive");
    const Mesh& m = *u.mesh;
    const int nv = m.num_vertices();
    const double h = m.min_edge_length();
    const int jmax = std::max(0, int(std::floor(std::log2(std::max(1, opts.max_radius_cells)))));
    const double rmax = h * std::ldexp(1.0, jmax);

    EnergyReport e = dirichlet_energy(u);
    Buckets cells(rmax);
    for (int c = 0; c < m.num_cells(); ++c) cells.add(c, m.centroid(c));

    TruncationResult res;
    res.maximal.assign(nv, 0.0);
    for (int v = 0; v < nv; ++v) {
        const Point2& x = m.vertices()[v];
        std::vector<double> num(jmax + 1, 0.0), den(jmax + 1, 0.0);
        cells.near(x, rmax, [&](int c) {
            double d = (m.centroid(c) - x).norm();
            for (int j = 0; j <= jmax; ++j)
                if (d <= h * std::ldexp(1.0, j)) {
                    num[j] += m.cell_area()[c] * std::sqrt(e.density[c]);
                    den[j] += m.cell_area()[c];
                }
        });
        for (int j = 0; j <= jmax; ++j)
            if (den[j] > 0) res.maximal[v] = std::max(res.maximal[v], num[j] / den[j]);
    }

    res.replaced.assign(nv, 0);
    for (int v = 0; v < nv; ++v)
        res.replaced[v] = res.maximal[v] > level && !(opts.preserve_boundary && m.boundary()[v]);
    res.u = u;
    int bad = int(std::count(res.replaced.begin(), res.replaced.end(), 1));
    if (bad == nv) throw DomainError("lipschitz_truncate: level below the maximal function everywhere");

    if (bad > 0) {
        EmbeddingSpec spec = EmbeddingSpec::standard(u.q, u.n);
        std::vector<Vec> w(nv);
        std::vector<char> known(nv, 0);
        for (int v = 0; v < nv; ++v)
            if (!res.replaced[v]) {
                w[v] = xi(u.values[v], spec);
                known[v] = 1;
            }
        detail::lipschitz_fill(m, known, w, level);
        for (int v = 0; v < nv; ++v)
            if (res.replaced[v]) res.u.values[v] = decode_best(retract_rho(w[v], spec), spec).t;
    }

    TruncationReport& rep = res.report;
    rep.replaced = bad;
    rep.lip_out = detail::edge_lipschitz(res.u);
    rep.lip_kept = detail::edge_lipschitz(res.u, [&](int v) { return !res.replaced[v]; });
    rep.energy_in = e.total;
    rep.energy_out = dirichlet_energy(res.u).total;
    auto lumped = detail::lumped_area(m);
    std::vector<double> d2(nv);
    for (int v = 0; v < nv; ++v) {
        d2[v] = metric_g_squared(u.values[v], res.u.values[v]);
        rep.l2_error += lumped[v] * d2[v];
    }
    for (int ei : detail::boundary_edges(m)) {
        const auto& ed = m.edges()[ei];
        rep.trace_error += detail::edge_length(m, ei) * 0.5 * (d2[ed.a] + d2[ed.b]);
    }
    return res;
}

}  // namespace qv
