#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "qv/embedding.hpp"
#include "qv/error.hpp"

using namespace qv;

namespace {

EmbeddingSpec pair_line() { return EmbeddingSpec::custom(2, 1, {Vec::Ones(1)}, 1.0); }

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("lmap and omap on the pair-on-a-line spec") {
    auto s = pair_line();
    CHECK(lmap(QPoint(2, 1, {3, 5}), s) == v2(3, 5));
    CHECK(lmap(QPoint(2, 1), s).isZero());
    CHECK(omap(v2(5, 3), s) == v2(3, 5));
    CHECK(omap(v2(3, 5), s) == v2(3, 5));
    std::mt19937_64 rng(1);
    auto g = EmbeddingSpec::standard(3, 2);
    QPoint p = random_qpoint(3, 2, 1.0, rng);
    QPoint p2(3, 2, std::vector<double>(p.data()));
    for (double& x : const_cast<std::vector<double>&>(p2.data())) x *= 2.5;
    CHECK((lmap(p2, g) - 2.5 * lmap(p, g)).norm() <= 1e-14);
}

TEST_CASE("omap is 1-Lipschitz") {
    auto s = EmbeddingSpec::standard(3, 2);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 500; ++t) {
        Vec a(s.N()), b(s.N());
        for (int i = 0; i < s.N(); ++i) { a[i] = g(rng); b[i] = g(rng); }
        CHECK((omap(a, s) - omap(b, s)).norm() <= (a - b).norm() + 1e-12);
    }
}

TEST_CASE("standard spec shapes") {
    auto a = EmbeddingSpec::standard(2, 1);
    CHECK(a.h == 1);
    CHECK(a.scale == 1.0);
    auto b = EmbeddingSpec::standard(3, 2);
    CHECK(b.h == 5);
    CHECK(b.N() == 15);
    CHECK(b.scale == doctest::Approx(1 / std::sqrt(5.0)));
    auto c = EmbeddingSpec::standard(1, 3);
    CHECK(c.h == 3);
    for (int l = 0; l < b.h; ++l) CHECK(b.dir(l).norm() == doctest::Approx(1.0));
}

TEST_CASE("spec validation rejects bad direction sets") {
    CHECK_THROWS_AS(EmbeddingSpec::custom(2, 2, {v2(2, 0), v2(0, 1)}), InvalidInput);
    CHECK_THROWS_AS(EmbeddingSpec::custom(2, 2, {v2(1, 0), v2(1, 0)}), InvalidInput);
    // Coordinate axes alone cannot tell {(0,0),(1,1)} from {(0,1),(1,0)}.
    CHECK_THROWS_AS(EmbeddingSpec::custom(2, 2, {v2(1, 0), v2(0, 1)}), InvalidInput);
}

TEST_CASE("xi is permutation invariant bit for bit and 1-Lipschitz") {
    std::mt19937_64 rng(9);
    for (auto [q, n] : {std::pair{2, 1}, {3, 1}, {2, 2}, {3, 2}, {2, 3}}) {
        auto s = EmbeddingSpec::standard(q, n);
        for (int t = 0; t < 300; ++t) {
            QPoint a = random_qpoint(q, n, 1.0, rng), b = random_qpoint(q, n, 1.0, rng);
            std::vector<int> perm(q);
            for (int i = 0; i < q; ++i) perm[i] = q - 1 - i;
            Vec x1 = xi(a, s), x2 = xi(a.permuted(perm), s);
            CHECK(std::memcmp(x1.data(), x2.data(), sizeof(double) * x1.size()) == 0);
            CHECK((xi(a, s) - xi(b, s)).norm() <= metric_g(a, b) * (1 + 1e-9));
        }
        CHECK(xi(QPoint(q, n), s).isZero());
    }
}

TEST_CASE("decode inverts xi") {
    std::mt19937_64 rng(21);
    for (auto [q, n] : {std::pair{2, 1}, {3, 1}, {2, 2}, {3, 2}, {2, 3}, {4, 2}}) {
        auto s = EmbeddingSpec::standard(q, n);
        for (int t = 0; t < 100; ++t) {
            QPoint a = random_qpoint(q, n, 1.0, rng);
            CHECK(metric_g(decode(xi(a, s), s), a) <= 1e-6);
        }
        CHECK(decode(Vec::Zero(s.N()), s).equals(QPoint(q, n), 1e-12));
    }
    auto p = pair_line();
    CHECK(decode(v2(3, 5), p).equals(QPoint(2, 1, {3, 5})));
}

TEST_CASE("decode refuses points far from the cone") {
    auto s = EmbeddingSpec::standard(2, 2);
    Vec w = Vec::Zero(s.N());
    // Block sums disagree, so no q-point produces this vector.
    w[0] = 5.0;
    CHECK_THROWS_AS(decode(w, s), ConvergenceError);
}

TEST_CASE("retract_rho") {
    auto p = pair_line();
    // Nearest point of {a <= b} to (5,3) is the midpoint on the diagonal.
    Vec r = retract_rho(v2(5, 3), p);
    CHECK((r - v2(4, 4)).norm() <= 1e-12);
    CHECK((retract_rho(v2(3, 5), p) - v2(3, 5)).norm() <= 1e-12);

    std::mt19937_64 rng(13);
    std::normal_distribution<double> g;
    for (auto [q, n] : {std::pair{2, 1}, {3, 1}, {2, 2}, {3, 2}}) {
        auto s = EmbeddingSpec::standard(q, n);
        for (int t = 0; t < 40; ++t) {
            Vec on = xi(random_qpoint(q, n, 1.0, rng), s);
            CHECK((retract_rho(on, s) - on).norm() <= 1e-9);
            Vec w(s.N());
            for (int i = 0; i < s.N(); ++i) w[i] = g(rng);
            Vec r1 = retract_rho(w, s);
            CHECK(decode_best(r1, s).residual <= 1e-9);
            CHECK((retract_rho(r1, s) - r1).norm() <= 1e-8);
            // Never farther than the decoded guess.
            CHECK((r1 - w).norm() <= (xi(decode_best(w, s).t, s) - w).norm() + 1e-9);
        }
    }
}

TEST_CASE("retract_rho matches brute-force nearest point for pairs on a line") {
    auto p = pair_line();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        Vec w = v2(g(rng), g(rng));
        // Dense search over the closed half-plane a <= b.
        double best = INFINITY;
        for (int i = -400; i <= 400; ++i) {
            double a = w[0] + i * 0.01;
            for (double b : {std::max(a, w[1])}) best = std::min(best, (v2(a, b) - w).norm());
        }
        CHECK((retract_rho(w, p) - w).norm() <= best + 1e-4);
    }
}

TEST_CASE("face lattice for pairs on a line") {
    auto c = face_decomposition(pair_line());
    REQUIRE(c.faces().size() == 2);
    CHECK(c.face(0).dim == 1);
    CHECK(c.face(1).dim == 2);
    CHECK(face_of(v2(1, 1), c) == 0);
    CHECK(face_of(v2(1, 2), c) == 1);
    CHECK(face_of(Vec::Zero(2), c) == 0);
    CHECK_THROWS_AS(face_of(v2(3, -7), c), DomainError);
    // Points within eps/2 of an open-face point keep their face.
    Vec w = v2(1, 2);
    CHECK(face_of(w + v2(0, 0.4e-7 * w.norm()), c) == 1);
    CHECK(c.distance_to_face(v2(5, 3), 0) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("single-valued spec has one face") {
    auto s = EmbeddingSpec::standard(1, 2);
    auto c = face_decomposition(s);
    REQUIRE(c.faces().size() == 1);
    CHECK(c.face(0).dim == 2);
}

TEST_CASE("face properties p1-p4 on sampled cone points") {
    std::mt19937_64 rng(17);
    for (auto [q, n] : {std::pair{2, 1}, {3, 1}, {2, 2}}) {
        auto s = EmbeddingSpec::standard(q, n);
        auto c = face_decomposition(s);
        for (int t = 0; t < 300; ++t) {
            QPoint a = random_qpoint(q, n, 1.0, rng);
            if (t % 3 == 0) a.point(1)[0] = a.point(0)[0];      // partial tie
            if (t % 5 == 0) for (int k = 0; k < n; ++k) a.point(1)[k] = a.point(0)[k];
            Vec w = xi(a, s);
            int id = face_of(w, c);
            // Cone property.
            CHECK(face_of(3.7 * w, c) == id);
            CHECK(face_of(0.2 * w, c) == id);
            // Membership is consistent with the closure distances.
            CHECK(c.distance_to_face(w, id) <= 1e-9);
        }
        // Driving an open point onto a tie lowers the face dimension.
        QPoint a = random_qpoint(q, n, 1.0, rng), b = a;
        for (int k = 0; k < n; ++k) b.point(1)[k] = b.point(0)[k];
        int top = face_of(xi(a, s), c), low = face_of(xi(b, s), c);
        CHECK(c.face(low).dim < c.face(top).dim);
        for (double t : {0.5, 0.9, 0.99})
            CHECK(face_of((1 - t) * xi(a, s) + t * xi(b, s), c) == top);
    }
}

TEST_CASE("enumeration bound is a capability error") {
    auto s = EmbeddingSpec::standard(3, 2);  // h*q = 15
    CHECK_THROWS_AS(face_decomposition(s), CapabilityError);
}

TEST_CASE("face counts for small specs") {
    // Three points on a line: all distinct, two tie patterns, all equal.
    auto c31 = face_decomposition(EmbeddingSpec::standard(3, 1));
    CHECK(c31.faces().size() == 4);
    CHECK(c31.min_dim() == 1);
    CHECK(c31.max_dim() == 3);
    CHECK(c31.faces_of_dim(2).size() == 2);
    // Pairs in the plane: the difference vector lies in one of three open
    // sectors (up to sign), on one of three lines, or vanishes.
    auto c22 = face_decomposition(EmbeddingSpec::standard(2, 2));
    CHECK(c22.faces().size() == 7);
    CHECK(c22.faces_of_dim(4).size() == 3);
    CHECK(c22.faces_of_dim(3).size() == 3);
    CHECK(c22.min_dim() == 2);
    auto j = to_json(c22);
    CHECK(j["faces"].size() == 7);
    CHECK(j["faces"][0]["dim"] == 2);
}
