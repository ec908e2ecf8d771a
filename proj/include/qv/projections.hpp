#pragma once

#include <cstdint>
#include <vector>

#include "qv/embedding.hpp"
#include "qv/mesh.hpp"

namespace qv {

// ---------------------------------------------------------------------------
// Kirszbraun extension, one query at a time.

// argmin_y max_i (|y - y_i| - r_i): smoothed (log-sum-exp) Newton with
// continuation in the smoothing parameter. Returns the max value in *value.
Vec minmax_point(const std::vector<Vec>& ys, const std::vector<double>& r,
                 const Vec& start, double* value = nullptr);

// max_i (|y - y_i| - lambda |x - x_i|).
double kirszbraun_violation(const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                            double lambda, const Vec& x, const Vec& y);

class KirszbraunExtension {
public:
    // Throws InvalidInput when the samples are not lambda-Lipschitz
    // (1e-9 slack, relative to the pair distance).
    KirszbraunExtension(std::vector<Vec> xs, std::vector<Vec> ys, double lambda);

    // Throws ConvergenceError if the value is infeasible beyond `tol`.
    Vec operator()(const Vec& x) const;
    // Same, with extra samples valid for this query only. With a guess:
    // the guess itself if feasible, else the last feasible point on the
    // segment from the min-max centre to the guess.
    Vec eval(const Vec& x, const std::vector<Vec>& extra_x,
             const std::vector<Vec>& extra_y, const Vec* guess = nullptr) const;

    double lambda() const { return lambda_; }
    const std::vector<Vec>& xs() const { return xs_; }
    const std::vector<Vec>& ys() const { return ys_; }
    double tol = 1e-8;  // absolute, times max(1, sample scale)

private:
    std::vector<Vec> xs_, ys_;
    double lambda_;
    double scale_ = 1.0;
};

Vec kirszbraun_extend(const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                      double lambda, const Vec& query);

// Sampled Lipschitz constant of u_i -> v_i over all pairs (0 for < 2 samples).
double sampled_lipschitz(const std::vector<Vec>& u, const std::vector<Vec>& v);

// ---------------------------------------------------------------------------
// Radial extension into a convex cone V from the sphere of radius b.
//
// Boundary data v on dB_b with Lip <= 1 + tau and |v(x) - x| <= tau. The
// extension is 0 on B_tau and the (1 + 2 tau)-Kirszbraun extension of
// v together with that zero map elsewhere. Queries must lie in V; the cone
// itself is only seen through the samples. Among feasible values the one
// nearest b (z - tau z/|z|) / (b - tau) is preferred (exact for identity
// data); with the displacement check off, the plain min-max value is used.
class RadialConeExtension {
public:
    // b >= 2. check_displacement = false skips the |v(x) - x| <= tau test
    // (the Lipschitz test always runs: the extension needs it).
    RadialConeExtension(std::vector<Vec> u, std::vector<Vec> v, double b, double tau,
                        bool check_displacement = true);

    Vec operator()(const Vec& z) const;

    double b() const { return b_; }
    double tau() const { return tau_; }
    double lambda() const { return 1.0 + 2.0 * tau_; }
    const KirszbraunExtension& kirszbraun() const { return k_; }

private:
    double b_, tau_;
    bool guided_;
    KirszbraunExtension k_;
};

// ---------------------------------------------------------------------------
// Tubes around the skeleta of Q.

struct SkeletonOptions {
    double kappa0 = 4.0;
    int max_doublings = 12;
    int samples_per_face = 300;
    std::uint64_t seed = 5;
};

class SkeletonGeometry {
public:
    static SkeletonGeometry build(ConeComplex complex, const SkeletonOptions& opts = {});

    const ConeComplex& complex() const { return complex_; }
    int top() const { return top_; }  // nQ, dimension of the top faces
    int bottom() const { return complex_.min_dim(); }
    // c_k for bottom()-1 <= k <= top()-1; c_{top-1} = 1.
    double c(int k) const;
    double kappa() const { return kappa_; }
    // Smallest sampled distance between a tube and the other tubes of its
    // dimension (+inf when every dimension has a single face).
    double gap() const { return gap_; }

    // dist(x, S_{k-1}) for a face of dimension k.
    double lower_distance(const Vec& x, int k) const;
    // x in F^_{a,b}: dist(x, F) <= a and dist(x, S_{k-1}) >= b.
    bool in_tube(const Vec& x, int face, double a, double b) const;

private:
    ConeComplex complex_;
    int top_ = 0;
    double kappa_ = 0.0;
    std::vector<double> c_;  // indexed by k - (bottom - 1)
    double gap_ = 0.0;
};

// ---------------------------------------------------------------------------
// Almost-projection rho*_mu.

struct RhoStarOptions {
    std::uint64_t seed = 11;
    SkeletonOptions skeleton;
    double draws_per_unit = 50.0;  // sphere draws per unit radius and dimension
    int max_draws = 2000;
};

struct StageReport {
    int k = 0;           // face dimension
    int face = 0;
    double tau = 0.0;    // radial-extension parameter used
    double lip_defect = 0.0;   // sampled Lip - 1 of the boundary data
    double displacement = 0.0; // sampled |v(x) - x| of the boundary data
    int samples = 0;
};

class AlmostProjection {
public:
    static AlmostProjection build(const EmbeddingSpec& spec, double mu,
                                  const RhoStarOptions& opts = {});
    static AlmostProjection build(const ConeComplex& complex, double mu,
                                  const RhoStarOptions& opts = {});

    // Global map: rho*_0 after retraction onto Q.
    Vec apply(const Vec& w) const;
    // rho*_0 on Q (x assumed on Q).
    Vec apply_on_cone(const Vec& x) const;
    // f_k: stages of dimension >= k only (f_top is the identity).
    Vec stage_map(int k, const Vec& x) const;
    // Dimension and face of the stage that handles x in f_k, or (top, -1).
    int active_stage(int k, const Vec& x, int* face = nullptr) const;

    double mu() const { return mu_; }
    double mu_max() const { return mu_max_; }
    // 2^{-nQ+k}
    double exponent(int k) const;
    const SkeletonGeometry& geometry() const { return geo_; }
    const EmbeddingSpec& spec() const { return geo_.complex().spec(); }
    const std::vector<StageReport>& stages() const { return reports_; }

    // Frozen constants (filled by calibrate_constants).
    struct Constants {
        std::vector<double> stage;  // indexed by k - bottom
        double global = 0.0;
        double energy = 0.0;
        bool calibrated = false;
    };
    Constants constants;

private:
    struct Stage {
        int k = 0, face = 0;
        Vec y_ref;
        RadialConeExtension ext;
    };
    Vec eval_stage(const Stage& s, const Vec& x) const;

    double mu_ = 0.0, mu_max_ = 0.0;
    SkeletonGeometry geo_;
    std::vector<Stage> stages_;  // ascending dimension, then face id
    std::vector<StageReport> reports_;
    RetractOptions retract_;
};

// ---------------------------------------------------------------------------
// Verification harness.

// Random point of Q whose cluster structure puts it near the lower faces.
template <class Rng>
Vec random_cone_point(const EmbeddingSpec& spec, Rng& rng, double scale = 1.0);

struct StageLedgerRow {
    int k = 0;
    double lip = 0.0;           // sampled Lip(f_k) on close pairs
    double displacement = 0.0;  // sampled sup |f_k(x) - x|
    double bound_scale = 0.0;   // mu^{2^{-nQ+k}}
};

std::vector<StageLedgerRow> measure_stages(const AlmostProjection& p, int samples,
                                           std::uint64_t seed);

// Fits and freezes the stage, global and energy constants (margin 2, floor 1).
void calibrate_constants(AlmostProjection& p, int samples, std::uint64_t seed);

// sup over sampled P in Q of |rho*(P) - P|.
double sup_displacement(const AlmostProjection& p, int samples, std::uint64_t seed);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct EnergyInequalityRow {
    double lhs = 0.0;   // int |D(rho* o u)|^2
    double near = 0.0;  // int over dist(u, Q) <= mu^{nQ} of |Du|^2
    double far = 0.0;
    double c_needed = 0.0;  // smallest C that makes the row hold
    bool holds = false;     // against the frozen energy constant
};

struct EnergyInequalityReport {
    double c = 0.0;
    std::vector<EnergyInequalityRow> rows;
    bool holds() const;
};

// Fields are vertex values in R^N on a shared mesh. Uses p.constants.energy
// when calibrated; otherwise reports c_needed only.
EnergyInequalityReport verify_energy_inequality(const AlmostProjection& p, const Mesh& mesh,
                                                const std::vector<VField>& fields);

// Smooth fields that wander in and out of the mu^{nQ}-neighbourhood of Q.
std::vector<VField> random_energy_fields(const AlmostProjection& p, const Mesh& mesh,
                                         int count, std::uint64_t seed);

// h(x) = (|x|_inf / R) u(R x / |x|_inf) on a square grid mesh centred at the
// origin with half-width R; only boundary values of u are read.
QField cone_like_extension(const QField& u);

}  // namespace qv

#include "qv/projections_impl.hpp"
