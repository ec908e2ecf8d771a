#pragma once

// Lane-parallel primitives used on hot paths. Every backend accumulates
// with fused multiply-add in the same order as the scalar reference, so
// results are bit-identical across backends.

#include <cstddef>
#include <string_view>

namespace qv::kernels {

enum class Backend { Scalar, Avx2, Neon };

// out[i*nb + j] = sum_k (a[i*dim + k] - bt[k*nb + j])^2
// a is row-major (na x dim); b is given transposed (dim x nb).
void squared_distances(const double* a, std::size_t na, const double* bt,
                       std::size_t nb, std::size_t dim, double* out);

// out[i] = sum_k (xt[k*m + i] - y[k])^2 for m samples stored as dim x m.
void squared_distances_to(const double* xt, std::size_t m, std::size_t dim,
                          const double* y, double* out);

// out[l*np + i] = scale * sum_k dirs[l*dim + k] * pt[k*np + i]
// dirs row-major (nd x dim); points transposed (dim x np).
void project(const double* dirs, std::size_t nd, const double* pt,
             std::size_t np, std::size_t dim, double scale, double* out);

Backend active_backend();
// Restricted to backends the CPU supports; returns false otherwise.
bool set_backend(Backend b);
bool backend_available(Backend b);
std::string_view backend_name(Backend b);

// Direct entry points for equivalence tests.
namespace scalar {
void squared_distances(const double*, std::size_t, const double*, std::size_t,
                       std::size_t, double*);
void squared_distances_to(const double*, std::size_t, std::size_t,
                          const double*, double*);
void project(const double*, std::size_t, const double*, std::size_t,
             std::size_t, double, double*);
}  // namespace scalar

namespace avx2 {
bool compiled();
void squared_distances(const double*, std::size_t, const double*, std::size_t,
                       std::size_t, double*);
void squared_distances_to(const double*, std::size_t, std::size_t,
                          const double*, double*);
void project(const double*, std::size_t, const double*, std::size_t,
             std::size_t, double, double*);
}  // namespace avx2

namespace neon {
bool compiled();
void squared_distances(const double*, std::size_t, const double*, std::size_t,
                       std::size_t, double*);
void squared_distances_to(const double*, std::size_t, std::size_t,
                          const double*, double*);
void project(const double*, std::size_t, const double*, std::size_t,
             std::size_t, double, double*);
}  // namespace neon

}  // namespace qv::kernels
