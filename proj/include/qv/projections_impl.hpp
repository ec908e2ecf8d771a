#pragma once

#include <random>

namespace qv {

template <class Rng>
Vec random_cone_point(const EmbeddingSpec& spec, Rng& rng, double scale) {
    // A few cluster centres, points jittered at a log-uniform scale so that
    // collisions (lower faces) are approached at every distance.
    std::uniform_int_distribution<int> nc(1, spec.q);
    std::uniform_real_distribution<double> lg(-3.0, 0.7);
    std::normal_distribution<double> g(0.0, 1.0);
    int k = nc(rng);
    std::vector<Vec> centres(k, Vec(spec.n));
    for (Vec& c : centres)
        for (int i = 0; i < spec.n; ++i) c[i] = scale * g(rng);
    double jitter = scale * std::pow(10.0, lg(rng));
    std::vector<Vec> pts;
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int i = 0; i < spec.q; ++i) {
        Vec p = centres[i < k ? i : pick(rng)];
        for (int j = 0; j < spec.n; ++j) p[j] += jitter * g(rng);
        pts.push_back(p);
    }
    return xi(QPoint::from_points(pts), spec);
}

}  // namespace qv
