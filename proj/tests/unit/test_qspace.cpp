#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "qv/embedding.hpp"
#include "qv/error.hpp"
#include "qv/qspace.hpp"

using namespace qv;

namespace {

QPoint line(std::vector<double> xs) {
    int q = int(xs.size());
    return QPoint(q, 1, std::move(xs));
}

// Exhaustive minimum over permutations, summed in row order.
double brute(const QPoint& a, const QPoint& b, bool squared) {
    std::vector<int> p(a.q());
    std::iota(p.begin(), p.end(), 0);
    double best = INFINITY;
    do {
        std::vector<double> terms;
        for (int i = 0; i < a.q(); ++i) {
            double d2 = (a.vec(i) - b.vec(p[i])).squaredNorm();
            terms.push_back(squared ? d2 : std::sqrt(d2));
        }
        double s = 0.0;
        for (double t : terms) s += t;
        best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    return squared ? std::sqrt(best) : best;
}

}  // namespace

TEST_CASE("metric_g and wasserstein1 on hand examples") {
    QPoint a = line({0, 2}), b = line({1, 1});
    CHECK(metric_g(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(wasserstein1(a, b) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(metric_g(a, a) == 0.0);
    CHECK(wasserstein1(b, b) == 0.0);
}

TEST_CASE("assignment equals the permutation oracle") {
    std::mt19937_64 rng(11);
    for (int q = 2; q <= 6; ++q)
        for (int n = 1; n <= 3; ++n)
            for (int s = 0; s < 60; ++s) {
                QPoint a = random_qpoint(q, n, 1.0, rng), b = random_qpoint(q, n, 1.0, rng);
                CHECK(std::abs(metric_g(a, b) - brute(a, b, true)) <= 1e-12);
                CHECK(std::abs(wasserstein1(a, b) - brute(a, b, false)) <= 1e-12);
            }
}

TEST_CASE("ties resolve to the lexicographically smallest optimal permutation") {
    // All-zero costs: every permutation is optimal.
    std::vector<double> c(16, 0.0);
    CHECK(solve_assignment(c, 4).perm == std::vector<int>{0, 1, 2, 3});
    // Rows 0 and 1 interchangeable, row 2 pinned to column 0.
    std::vector<double> d = {5, 1, 1, 5, 1, 1, 0, 9, 9};
    auto a = solve_assignment(d, 3);
    CHECK(a.cost == 2.0);
    CHECK(a.perm == std::vector<int>{1, 2, 0});
}

TEST_CASE("assignment rejects non-square input") {
    std::vector<double> c(5, 0.0);
    CHECK_THROWS_AS(solve_assignment(c, 2), InvalidInput);
    CHECK_THROWS_AS(metric_g(line({0, 1}), line({0, 1, 2})), InvalidInput);
}

TEST_CASE("metric axioms and W1 >= G") {
    std::mt19937_64 rng(5);
    for (int s = 0; s < 2000; ++s) {
        int q = 2 + s % 4, n = 1 + s % 3;
        QPoint a = random_qpoint(q, n, 1.0, rng), b = random_qpoint(q, n, 1.0, rng),
               c = random_qpoint(q, n, 1.0, rng);
        CHECK(metric_g(a, b) == metric_g(b, a));
        CHECK(metric_g(a, c) <= metric_g(a, b) + metric_g(b, c) + 1e-9);
        CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-9);
        CHECK(wasserstein1(a, b) >= metric_g(a, b) - 1e-9);
    }
}

TEST_CASE("zero distance iff canonical forms agree") {
    QPoint a(3, 2, {1, 2, 0, 0, 1, 1});
    QPoint b(3, 2, {0, 0, 1, 1, 1, 2});
    CHECK(a.equals(b));
    CHECK(metric_g(a, b) == 0.0);
    QPoint c(3, 2, {0, 0, 1, 1, 1, 2.5});
    CHECK_FALSE(a.equals(c));
    CHECK(metric_g(a, c) > 0.0);
}

TEST_CASE("separation and diameter") {
    auto t = line({0, 1, 3});
    CHECK(separation(t) == 1.0);
    CHECK(diameter(t) == 3.0);
    QPoint p(2, 2, {0, 0, 3, 4});
    CHECK(separation(p) == 5.0);
    CHECK(diameter(p) == 5.0);
    auto same = line({2, 2, 2});
    CHECK(std::isinf(separation(same)));
    CHECK(diameter(same) == 0.0);
}

TEST_CASE("translation") {
    std::mt19937_64 rng(2);
    QPoint t = random_qpoint(3, 2, 1.0, rng);
    Vec y(2);
    y << 0.3, -1.2;
    CHECK(translate(t, Vec::Zero(2)).equals(t));
    CHECK(metric_g(translate(translate(t, -y), y), t) <= 1e-15);
    for (int s = 0; s < 200; ++s) {
        QPoint a = random_qpoint(4, 2, 1.0, rng), b = random_qpoint(4, 2, 1.0, rng);
        CHECK(std::abs(metric_g(translate(a, y), translate(b, y)) - metric_g(a, b)) <= 1e-12);
    }
    CHECK_THROWS_AS(translate(t, Vec::Zero(3)), InvalidInput);
}

TEST_CASE("cluster_split") {
    auto parts = cluster_split(line({0, 0.1, 5, 5.2}), 1.0);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].equals(line({0, 0.1})));
    CHECK(parts[1].equals(line({5, 5.2})));
    auto t = line({0, 1, 3});
    CHECK(cluster_split(t, 10.0).size() == 1);
    CHECK(cluster_split(t, 0.5).size() == 3);
    CHECK_THROWS_AS(cluster_split(t, 0.0), InvalidInput);
    // Members of different clusters are farther apart than the threshold.
    std::mt19937_64 rng(8);
    QPoint r = random_qpoint(6, 2, 2.0, rng);
    auto cl = cluster_split(r, 0.7);
    int total = 0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
        total += cl[i].q();
        for (std::size_t j = i + 1; j < cl.size(); ++j)
            for (int a = 0; a < cl[i].q(); ++a)
                for (int b = 0; b < cl[j].q(); ++b)
                    CHECK((cl[i].vec(a) - cl[j].vec(b)).norm() > 0.7);
    }
    CHECK(total == 6);
}

TEST_CASE("QPoint json round-trip in canonical order") {
    QPoint a(3, 2, {1, 2, 0, 0, 1, 1});
    nlohmann::json j = a;
    CHECK(j["points"][0] == std::vector<double>{0, 0});
    QPoint b = j.get<QPoint>();
    CHECK(b.data() == a.canonical().data());
    nlohmann::json bad = {{"q", 2}, {"n", 1}, {"points", {{1.0}}}};
    CHECK_THROWS_AS(bad.get<QPoint>(), InvalidInput);
}
