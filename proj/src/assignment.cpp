#include <algorithm>
#include <cmath>
#include <limits>

#include "qv/error.hpp"
#include "qv/qspace.hpp"

namespace qv {

namespace {

// Shortest augmenting path Hungarian method with potentials. Returns the
// row potentials u and column potentials v alongside the matching so the
// caller can read off the tight (zero reduced cost) edges.
struct HungarianResult {
    std::vector<int> row_to_col;
    std::vector<double> u, v;
};

HungarianResult hungarian(std::span<const double> c, int q) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(q + 1, 0.0), v(q + 1, 0.0), minv(q + 1);
    std::vector<int> p(q + 1, 0), way(q + 1, 0);
    std::vector<char> used(q + 1);
    for (int i = 1; i <= q; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= q; ++j) {
                if (used[j]) continue;
                double cur = c[(i0 - 1) * q + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= q; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    HungarianResult r;
    r.row_to_col.assign(q, -1);
    for (int j = 1; j <= q; ++j) r.row_to_col[p[j] - 1] = j - 1;
    r.u.assign(u.begin() + 1, u.end());
    r.v.assign(v.begin() + 1, v.end());
    return r;
}

// Kuhn's augmenting-path matching restricted to allowed edges, with rows
// [0, first_free) already fixed.
bool try_kuhn(int row, const std::vector<char>& allowed, int q,
              std::vector<int>& col_owner, std::vector<char>& seen) {
    for (int j = 0; j < q; ++j) {
        if (!allowed[row * q + j] || seen[j]) continue;
        seen[j] = 1;
        if (col_owner[j] < 0 ||
            try_kuhn(col_owner[j], allowed, q, col_owner, seen)) {
            col_owner[j] = row;
            return true;
        }
    }
    return false;
}

bool has_completion(const std::vector<char>& allowed, int q, int fixed_rows,
                    const std::vector<int>& fixed_cols) {
    std::vector<int> col_owner(q, -1);
    for (int i = 0; i < fixed_rows; ++i) col_owner[fixed_cols[i]] = i;
    for (int i = fixed_rows; i < q; ++i) {
        std::vector<char> seen(q, 0);
        for (int r = 0; r < fixed_rows; ++r) seen[fixed_cols[r]] = 1;
        if (!try_kuhn(i, allowed, q, col_owner, seen)) return false;
    }
    return true;
}

// Summed in ascending order so that transposed problems give the same bits.
double row_sum(std::span<const double> c, int q, const std::vector<int>& perm) {
    double terms[64];
    std::vector<double> big;
    double* t = terms;
    if (q > 64) { big.resize(q); t = big.data(); }
    for (int i = 0; i < q; ++i) t[i] = c[i * q + perm[i]];
    std::sort(t, t + q);
    double s = 0.0;
    for (int i = 0; i < q; ++i) s += t[i];
    return s;
}

}  // namespace

Assignment solve_assignment(std::span<const double> cost, int q,
                            double tie_tol) {
    if (q <= 0 || cost.size() != std::size_t(q) * q)
        throw InvalidInput("solve_assignment: cost matrix is not q x q");
    Assignment a;
    if (q == 1) {
        a.perm = {0};
        a.cost = cost[0];
        return a;
    }
    double scale = 1.0;
    for (double x : cost) scale = std::max(scale, std::abs(x));
    const double tol = tie_tol * scale;
    if (q == 2) {
        double id = cost[0] + cost[3], sw = cost[1] + cost[2];
        a.perm = (id <= sw + tol) ? std::vector<int>{0, 1} : std::vector<int>{1, 0};
        a.cost = row_sum(cost, q, a.perm);
        return a;
    }
    HungarianResult h = hungarian(cost, q);
    // Every optimal permutation lives on the tight edges of an optimal dual;
    // walk rows in order and take the smallest column that still completes.
    std::vector<char> tight(std::size_t(q) * q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
            tight[i * q + j] = (cost[i * q + j] - h.u[i] - h.v[j]) <= tol;
    std::vector<int> fixed;
    fixed.reserve(q);
    for (int i = 0; i < q; ++i) {
        bool placed = false;
        for (int j = 0; j < q && !placed; ++j) {
            if (!tight[i * q + j]) continue;
            if (std::find(fixed.begin(), fixed.end(), j) != fixed.end()) continue;
            fixed.push_back(j);
            if (has_completion(tight, q, i + 1, fixed)) placed = true;
            else fixed.pop_back();
        }
        if (!placed) {
            // Tolerance starved the tight graph; the Hungarian matching is
            // itself optimal.
            fixed = h.row_to_col;
            break;
        }
    }
    a.perm = fixed;
    a.cost = row_sum(cost, q, a.perm);
    double hc = row_sum(cost, q, h.row_to_col);
    if (a.cost > hc + q * tol) {
        a.perm = h.row_to_col;
        a.cost = hc;
    }
    return a;
}

}  // namespace qv
