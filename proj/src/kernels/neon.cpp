#include "qv/kernels.hpp"

#include <cmath>

#if !defined(QV_NO_SIMD) && defined(__aarch64__)
#define QV_HAVE_NEON 1
#include <arm_neon.h>
#endif

namespace qv::kernels::neon {

#ifdef QV_HAVE_NEON

bool compiled() { return true; }

void squared_distances(const double* a, std::size_t na, const double* bt,
                       std::size_t nb, std::size_t dim, double* out) {
    for (std::size_t i = 0; i < na; ++i) {
        const double* ai = a + i * dim;
        std::size_t j = 0;
        for (; j + 2 <= nb; j += 2) {
            float64x2_t acc = vdupq_n_f64(0.0);
            for (std::size_t k = 0; k < dim; ++k) {
                float64x2_t d =
                    vsubq_f64(vdupq_n_f64(ai[k]), vld1q_f64(bt + k * nb + j));
                acc = vfmaq_f64(acc, d, d);
            }
            vst1q_f64(out + i * nb + j, acc);
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

void squared_distances_to(const double* xt, std::size_t m, std::size_t dim,
                          const double* y, double* out) {
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            float64x2_t d =
                vsubq_f64(vld1q_f64(xt + k * m + i), vdupq_n_f64(y[k]));
            acc = vfmaq_f64(acc, d, d);
        }
        vst1q_f64(out + i, acc);
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

void project(const double* dirs, std::size_t nd, const double* pt,
             std::size_t np, std::size_t dim, double scale, double* out) {
    for (std::size_t l = 0; l < nd; ++l) {
        const double* e = dirs + l * dim;
        std::size_t i = 0;
        for (; i + 2 <= np; i += 2) {
            float64x2_t acc = vdupq_n_f64(0.0);
            for (std::size_t k = 0; k < dim; ++k)
                acc = vfmaq_f64(acc, vdupq_n_f64(e[k]),
                                vld1q_f64(pt + k * np + i));
            vst1q_f64(out + l * np + i, vmulq_n_f64(acc, scale));
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

}  // namespace qv::kernels::neon
