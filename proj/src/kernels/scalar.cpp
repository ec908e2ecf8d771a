#include "qv/kernels.hpp"

#include <cmath>

namespace qv::kernels::scalar {

void squared_distances(const double* a, std::size_t na, const double* bt,
                       std::size_t nb, std::size_t dim, double* out) {
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                double d = a[i * dim + k] - bt[k * nb + j];
                acc = std::fma(d, d, acc);
            }
            out[i * nb + j] = acc;
        }
    }
}

void squared_distances_to(const double* xt, std::size_t m, std::size_t dim,
                          const double* y, double* out) {
    for (std::size_t i = 0; i < m; ++i) {
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
        for (std::size_t i = 0; i < np; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k)
                acc = std::fma(dirs[l * dim + k], pt[k * np + i], acc);
            out[l * np + i] = acc * scale;
        }
    }
}

}  // namespace qv::kernels::scalar
