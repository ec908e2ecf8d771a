#include "qv/kernels.hpp"

#include <cmath>

#if !defined(QV_NO_SIMD) && (defined(__x86_64__) || defined(_M_X64)) && \
    (defined(__GNUC__) || defined(__clang__))
#define QV_HAVE_AVX2 1
#include <immintrin.h>
#endif

namespace qv::kernels::avx2 {

#ifdef QV_HAVE_AVX2

bool compiled() { return true; }

#define QV_AVX2 __attribute__((target("avx2,fma")))

QV_AVX2 void squared_distances(const double* a, std::size_t na,
                               const double* bt, std::size_t nb,
                               std::size_t dim, double* out) {
    for (std::size_t i = 0; i < na; ++i) {
        const double* ai = a + i * dim;
        std::size_t j = 0;
        for (; j + 4 <= nb; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < dim; ++k) {
                __m256d d = _mm256_sub_pd(_mm256_set1_pd(ai[k]),
                                          _mm256_loadu_pd(bt + k * nb + j));
                acc = _mm256_fmadd_pd(d, d, acc);
            }
            _mm256_storeu_pd(out + i * nb + j, acc);
        }
        for (; j < nb; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                double d = ai[k] - bt[k * nb + j];
                acc = std::fma(d, d, acc);
            }
            out[i * nb + j] = acc;
        }
    }
}

QV_AVX2 void squared_distances_to(const double* xt, std::size_t m,
                                  std::size_t dim, const double* y,
                                  double* out) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = 0; k < dim; ++k) {
            __m256d d = _mm256_sub_pd(_mm256_loadu_pd(xt + k * m + i),
                                      _mm256_set1_pd(y[k]));
            acc = _mm256_fmadd_pd(d, d, acc);
        }
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double d = xt[k * m + i] - y[k];
            acc = std::fma(d, d, acc);
        }
        out[i] = acc;
    }
}

QV_AVX2 void project(const double* dirs, std::size_t nd, const double* pt,
                     std::size_t np, std::size_t dim, double scale,
                     double* out) {
    const __m256d vs = _mm256_set1_pd(scale);
    for (std::size_t l = 0; l < nd; ++l) {
        const double* e = dirs + l * dim;
        std::size_t i = 0;
        for (; i + 4 <= np; i += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t k = 0; k < dim; ++k)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(e[k]),
                                      _mm256_loadu_pd(pt + k * np + i), acc);
            _mm256_storeu_pd(out + l * np + i, _mm256_mul_pd(acc, vs));
        }
        for (; i < np; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k)
                acc = std::fma(e[k], pt[k * np + i], acc);
            out[l * np + i] = acc * scale;
        }
    }
}

#else

bool compiled() { return false; }
void squared_distances(const double* a, std::size_t na, const double* bt,
                       std::size_t nb, std::size_t dim, double* out) {
    scalar::squared_distances(a, na, bt, nb, dim, out);
}
void squared_distances_to(const double* xt, std::size_t m, std::size_t dim,
                          const double* y, double* out) {
    scalar::squared_distances_to(xt, m, dim, y, out);
}
void project(const double* dirs, std::size_t nd, const double* pt,
             std::size_t np, std::size_t dim, double scale, double* out) {
    scalar::project(dirs, nd, pt, np, dim, scale, out);
}

#endif

}  // namespace qv::kernels::avx2
