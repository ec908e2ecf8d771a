#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <map>
#include <cmath>
#include <limits>
#include <numeric>

#include "qv/convex.hpp"
#include "qv/embedding.hpp"
#include "qv/error.hpp"

namespace qv {

Signature canonical_signature(const Signature& s) {
    if (s.empty()) return s;
    const int q = int(s[0].size());
    std::vector<int> perm(q);
    std::iota(perm.begin(), perm.end(), 0);
    Signature best;
    bool have = false;
    do {
        Signature t(s.size(), std::vector<int>(q));
        for (std::size_t l = 0; l < s.size(); ++l)
            for (int i = 0; i < q; ++i) t[l][i] = s[l][perm[i]];
        if (!have || t < best) {
            best = std::move(t);
            have = true;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Signature signature_of(const QPoint& p, const EmbeddingSpec& spec, double tol) {
    Vec lp = lmap(p, spec);
    Signature s(spec.h, std::vector<int>(spec.q));
    std::vector<int> idx(spec.q);
    for (int l = 0; l < spec.h; ++l) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return lp[l * spec.q + a] < lp[l * spec.q + b];
        });
        int rank = 0;
        s[l][idx[0]] = 0;
        for (int j = 1; j < spec.q; ++j) {
            if (lp[l * spec.q + idx[j]] - lp[l * spec.q + idx[j - 1]] > tol) ++rank;
            s[l][idx[j]] = rank;
        }
    }
    return s;
}

namespace {

// Rank vectors whose ranks fill {0..k-1}.
std::vector<std::vector<int>> weak_orders(int q) {
    std::vector<std::vector<int>> out;
    std::vector<int> r(q, 0);
    while (true) {
        std::vector<char> used(q, 0);
        for (int x : r) used[x] = 1;
        int k = 0;
        while (k < q && used[k]) ++k;
        bool ok = true;
        for (int j = k; j < q; ++j) ok = ok && !used[j];
        if (ok) out.push_back(r);
        int i = q - 1;
        while (i >= 0 && ++r[i] == q) r[i--] = 0;
        if (i < 0) break;
    }
    return out;
}

struct Constraints {
    Mat eq;
    Mat ineq;
};

void append_row(Mat& m, const Vec& row) {
    m.conservativeResize(m.rows() + 1, row.size());
    m.row(m.rows() - 1) = row.transpose();
}

void add_block(Constraints& c, const EmbeddingSpec& spec, int l,
               const std::vector<int>& rank) {
    const int q = spec.q, n = spec.n;
    Vec e = spec.dir(l);
    auto diff = [&](int b, int a) {
        Vec row = Vec::Zero(q * n);
        row.segment(b * n, n) += e;
        row.segment(a * n, n) -= e;
        return row;
    };
    int top = *std::max_element(rank.begin(), rank.end());
    std::vector<int> rep(top + 1, -1);
    for (int i = 0; i < q; ++i) {
        if (rep[rank[i]] < 0) rep[rank[i]] = i;
        else append_row(c.eq, diff(i, rep[rank[i]]));
    }
    for (int k = 0; k < top; ++k) append_row(c.ineq, diff(rep[k + 1], rep[k]));
}

// Returns false when the strict system has no solution with margin `slack`;
// otherwise fills p with a strictly feasible point and dim with dim null(eq).
bool realizable(const Constraints& c, int nq, double slack, Vec& p, int& dim) {
    Mat z = c.eq.rows() ? null_space(c.eq) : Mat(Mat::Identity(nq, nq));
    dim = int(z.cols());
    if (dim == 0) return c.ineq.rows() == 0 && (p = Vec::Zero(nq), true);
    if (c.ineq.rows() == 0) {
        p = z.col(0);
        return true;
    }
    Mat gz = c.ineq * z;
    Mat cols(dim, gz.rows());
    for (int i = 0; i < gz.rows(); ++i) {
        double nr = gz.row(i).norm();
        if (nr < 1e-12) return false;
        cols.col(i) = gz.row(i).transpose() / nr;
    }
    MinNormResult mn = min_norm_point(cols);
    double norm = mn.x.norm();
    if (norm < slack) return false;
    p = z * (mn.x / (norm * norm));
    return true;
}

Mat arrangement(const EmbeddingSpec& spec, const Signature& s) {
    const int q = spec.q, n = spec.n;
    Mat a = Mat::Zero(spec.N(), q * n);
    std::vector<int> idx(q);
    for (int l = 0; l < spec.h; ++l) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int x, int y) { return s[l][x] < s[l][y]; });
        for (int j = 0; j < q; ++j)
            a.block(l * q + j, idx[j] * n, 1, n) = spec.scale * spec.dir(l).transpose();
    }
    return a;
}

}  // namespace

ConeComplex::ConeComplex(EmbeddingSpec spec, std::vector<Face> faces)
    : spec_(std::move(spec)), faces_(std::move(faces)) {
    for (const Face& f : faces_) index_[f.signature] = f.id;
}

int ConeComplex::min_dim() const {
    int d = std::numeric_limits<int>::max();
    for (const Face& f : faces_) d = std::min(d, f.dim);
    return d;
}

int ConeComplex::max_dim() const {
    int d = 0;
    for (const Face& f : faces_) d = std::max(d, f.dim);
    return d;
}

std::vector<int> ConeComplex::faces_of_dim(int k) const {
    std::vector<int> out;
    for (const Face& f : faces_)
        if (f.dim == k) out.push_back(f.id);
    return out;
}

int ConeComplex::lookup(const Signature& canonical) const {
    auto it = index_.find(canonical);
    return it == index_.end() ? -1 : it->second;
}

double ConeComplex::distance_to_face(const Vec& x, int id, Vec* nearest) const {
    const Face& f = faces_.at(id);
    Vec y;
    if (f.ineq.rows() == 0) {
        y = f.span * (f.span.transpose() * x);
    } else {
        Mat h = f.arrange.transpose() * f.arrange;
        QpResult r = solve_cone_qp(h, f.arrange.transpose() * x, f.eq, f.ineq);
        y = f.arrange * r.x;
    }
    if (nearest) *nearest = y;
    return (x - y).norm();
}

double ConeComplex::distance_to_skeleton(const Vec& x, int k) const {
    double d = std::numeric_limits<double>::infinity();
    for (const Face& f : faces_)
        if (f.dim <= k) d = std::min(d, distance_to_face(x, f.id));
    return d;
}

ConeComplex face_decomposition(const EmbeddingSpec& spec, const FaceOptions& opts) {
    if (spec.q > opts.max_q || spec.h * spec.q > opts.max_hq)
        throw CapabilityError("face_decomposition: (q, h) = (" +
                              std::to_string(spec.q) + ", " + std::to_string(spec.h) +
                              ") exceeds the enumeration bound q <= " +
                              std::to_string(opts.max_q) + ", h*q <= " +
                              std::to_string(opts.max_hq));
    const int q = spec.q, nq = spec.q * spec.n;
    auto orders = weak_orders(q);
    std::map<Signature, std::pair<int, Vec>> found;

    Signature sig(spec.h);
    // Depth-first over blocks with feasibility pruning. The first block is
    // taken nondecreasing: relabelling points makes that no loss.
    std::function<void(int, const Constraints&)> dfs = [&](int l, const Constraints& c) {
        if (l == spec.h) {
            Vec p;
            int dim = 0;
            if (!realizable(c, nq, opts.slack, p, dim)) return;
            Signature canon = canonical_signature(sig);
            if (!found.count(canon)) found.emplace(canon, std::make_pair(dim, p));
            return;
        }
        for (const auto& r : orders) {
            if (l == 0 && !std::is_sorted(r.begin(), r.end())) continue;
            Constraints next = c;
            add_block(next, spec, l, r);
            Vec p;
            int dim = 0;
            if (!realizable(next, nq, opts.slack, p, dim)) continue;
            sig[l] = r;
            dfs(l + 1, next);
        }
    };
    Constraints start{Mat(0, nq), Mat(0, nq)};
    dfs(0, start);

    std::vector<Face> faces;
    for (auto& [canon, dp] : found) {
        Face f;
        f.signature = canon;
        f.dim = dp.first;
        Constraints c{Mat(0, nq), Mat(0, nq)};
        for (int l = 0; l < spec.h; ++l) add_block(c, spec, l, canon[l]);
        Vec p;
        int dim = 0;
        // Rebuild for the canonical labelling (the stored p used another).
        realizable(c, nq, opts.slack, p, dim);
        f.arrange = arrangement(spec, canon);
        f.eq = c.eq;
        f.ineq = c.ineq;
        Vec r = f.arrange * p;
        f.representative = r / r.norm();
        Mat z = c.eq.rows() ? null_space(c.eq) : Mat(Mat::Identity(nq, nq));
        Eigen::HouseholderQR<Mat> qr(f.arrange * z);
        f.span = qr.householderQ() * Mat::Identity(spec.N(), z.cols());
        faces.push_back(std::move(f));
    }
    std::stable_sort(faces.begin(), faces.end(), [](const Face& a, const Face& b) {
        return a.dim != b.dim ? a.dim < b.dim : a.signature < b.signature;
    });
    for (std::size_t i = 0; i < faces.size(); ++i) faces[i].id = int(i);
    return ConeComplex(spec, std::move(faces));
}

int face_of(const Vec& w, const ConeComplex& complex, double eps_face) {
    const EmbeddingSpec& spec = complex.spec();
    DecodeOptions dopt;
    DecodeResult d = decode_best(w, spec, dopt);
    if (d.residual > dopt.tol * std::max(1.0, w.norm()))
        throw DomainError("face_of: point is not on the cone (decode residual " +
                          std::to_string(d.residual) + ")");
    int id = complex.lookup(canonical_signature(signature_of(d.t, spec, eps_face * w.norm())));
    if (id < 0) id = complex.lookup(canonical_signature(signature_of(d.t, spec, 0.0)));
    if (id < 0) throw DomainError("face_of: signature not realised by any face");
    return id;
}

nlohmann::json to_json(const ConeComplex& c) {
    nlohmann::json faces = nlohmann::json::array();
    for (const Face& f : c.faces()) {
        faces.push_back({{"id", f.id},
                         {"dim", f.dim},
                         {"signature", f.signature},
                         {"representative",
                          std::vector<double>(f.representative.data(),
                                              f.representative.data() +
                                                  f.representative.size())}});
    }
    const EmbeddingSpec& s = c.spec();
    return {{"spec", {{"q", s.q}, {"n", s.n}, {"h", s.h}, {"dirs", s.dirs}, {"scale", s.scale}}},
            {"faces", faces}};
}

}  // namespace qv
