#include "qv/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace qv::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() {
    // QV_KERNELS=scalar pins the reference path (useful when bisecting).
    const char* env = std::getenv("QV_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (avx2::compiled() && cpu_has_avx2()) return Backend::Avx2;
    if (neon::compiled()) return Backend::Neon;
    return Backend::Scalar;
}

std::atomic<Backend>& current() {
    static std::atomic<Backend> b{detect()};
    return b;
}

}  // namespace

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return avx2::compiled() && cpu_has_avx2();
        case Backend::Neon: return neon::compiled();
    }
    return false;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) {
    if (!backend_available(b)) return false;
    current().store(b, std::memory_order_relaxed);
    return true;
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

void squared_distances(const double* a, std::size_t na, const double* bt,
                       std::size_t nb, std::size_t dim, double* out) {
    switch (active_backend()) {
        case Backend::Avx2: return avx2::squared_distances(a, na, bt, nb, dim, out);
        case Backend::Neon: return neon::squared_distances(a, na, bt, nb, dim, out);
        default: return scalar::squared_distances(a, na, bt, nb, dim, out);
    }
}

void squared_distances_to(const double* xt, std::size_t m, std::size_t dim,
                          const double* y, double* out) {
    switch (active_backend()) {
        case Backend::Avx2: return avx2::squared_distances_to(xt, m, dim, y, out);
        case Backend::Neon: return neon::squared_distances_to(xt, m, dim, y, out);
        default: return scalar::squared_distances_to(xt, m, dim, y, out);
    }
}

void project(const double* dirs, std::size_t nd, const double* pt,
             std::size_t np, std::size_t dim, double scale, double* out) {
    switch (active_backend()) {
        case Backend::Avx2: return avx2::project(dirs, nd, pt, np, dim, scale, out);
        case Backend::Neon: return neon::project(dirs, nd, pt, np, dim, scale, out);
        default: return scalar::project(dirs, nd, pt, np, dim, scale, out);
    }
}

}  // namespace qv::kernels
