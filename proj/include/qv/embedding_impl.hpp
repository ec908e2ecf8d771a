#pragma once

#include <random>

namespace qv {

template <class Rng>
QPoint random_qpoint(int q, int n, double sd, Rng& rng) {
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> c(std::size_t(q) * n);
    for (double& x : c) x = g(rng);
    return QPoint(q, n, std::move(c));
}

}  // namespace qv
