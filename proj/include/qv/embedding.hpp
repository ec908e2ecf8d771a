#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "qv/qspace.hpp"

namespace qv {

struct EmbeddingSpec {
    int q = 0;
    int n = 0;
    int h = 0;
    std::vector<double> dirs;  // h x n, row-major, unit rows
    double scale = 1.0;

    int N() const { return q * h; }
    Vec dir(int l) const;

    // n = 1: a single direction. n >= 2: max(n, n(q-1)+1) spread directions,
    // with injectivity of xi checked on random pairs (resampled on failure).
    static EmbeddingSpec standard(int q, int n, std::uint64_t seed = 0x9e3779b9u);
    // scale <= 0 selects h^{-1/2}.
    static EmbeddingSpec custom(int q, int n, const std::vector<Vec>& dirs,
                                double scale = -1.0, bool validate = true);
};

bool operator==(const EmbeddingSpec& a, const EmbeddingSpec& b);

// L applied to p in its storage order: block l holds scale * (p_i . e_l).
Vec lmap(const QPoint& p, const EmbeddingSpec& spec);
// Sorts every q-block ascending.
Vec omap(const Vec& w, const EmbeddingSpec& spec);
Vec xi(const QPoint& t, const EmbeddingSpec& spec);

struct DecodeOptions {
    int restarts = 8;
    double tol = 1e-7;  // residual, relative to max(1, |w|)
    std::uint64_t seed = 17;
    long enumeration_budget = 20000;
};

struct DecodeResult {
    QPoint t;
    double residual = 0.0;  // |xi(t) - w|
};

// Never throws on a large residual; the caller judges.
DecodeResult decode_best(const Vec& w, const EmbeddingSpec& spec,
                         const DecodeOptions& opts = {});
// Throws ConvergenceError when the residual stays above tolerance.
QPoint decode(const Vec& w, const EmbeddingSpec& spec,
              const DecodeOptions& opts = {});

struct RetractOptions {
    int restarts = 8;
    std::uint64_t seed = 29;
    int max_moves = 64;
};

// Nearest point of the cone Q = xi(I_Q) found by local search over the
// closed top cells, each a convex QP.
Vec retract_rho(const Vec& w, const EmbeddingSpec& spec,
                const RetractOptions& opts = {});

// Distance to Q as realised by retract_rho.
double distance_to_cone(const Vec& w, const EmbeddingSpec& spec);

// Random q-point with Gaussian coordinates of the given standard deviation.
template <class Rng>
QPoint random_qpoint(int q, int n, double sd, Rng& rng);

// ---------------------------------------------------------------------------
// Faces of Q.

// ranks[l][i]: dense rank of point i inside block l (ties share a rank).
using Signature = std::vector<std::vector<int>>;

struct Face {
    int id = 0;
    int dim = 0;
    Signature signature;     // canonical under relabelling of points
    Vec representative;      // unit vector in the relative interior
    Mat span;                // N x dim orthonormal basis of the linear span
    // Closure in p-coordinates (R^{nq}): x = arrange * p, eq * p = 0,
    // ineq * p >= 0 (strict on the open face).
    Mat arrange;
    Mat eq;
    Mat ineq;
};

struct FaceOptions {
    int max_q = 3;
    int max_hq = 12;
    double slack = 1e-6;
};

class ConeComplex {
public:
    ConeComplex() = default;
    ConeComplex(EmbeddingSpec spec, std::vector<Face> faces);

    const EmbeddingSpec& spec() const { return spec_; }
    const std::vector<Face>& faces() const { return faces_; }
    const Face& face(int id) const { return faces_.at(id); }
    int min_dim() const;
    int max_dim() const;
    std::vector<int> faces_of_dim(int k) const;
    // -1 when unknown.
    int lookup(const Signature& canonical) const;

    // Distance to the closure of a face; optionally its nearest point.
    double distance_to_face(const Vec& x, int id, Vec* nearest = nullptr) const;
    // Distance to S_k (union of faces of dimension <= k); +inf when empty.
    double distance_to_skeleton(const Vec& x, int k) const;

private:
    EmbeddingSpec spec_;
    std::vector<Face> faces_;
    std::map<Signature, int> index_;
};

ConeComplex face_decomposition(const EmbeddingSpec& spec,
                               const FaceOptions& opts = {});

Signature canonical_signature(const Signature& s);
// Signature of p's labelled points with tie tolerance tol.
Signature signature_of(const QPoint& p, const EmbeddingSpec& spec, double tol);

// Face containing w; w must lie on Q up to the decode tolerance.
int face_of(const Vec& w, const ConeComplex& complex, double eps_face = 1e-7);

nlohmann::json to_json(const ConeComplex& c);

}  // namespace qv

#include "qv/embedding_impl.hpp"
