#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "qv/kernels.hpp"

using namespace qv::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("vector kernels agree bit for bit with the scalar reference") {
    std::mt19937_64 rng(3);
    // Odd sizes exercise the remainder loops.
    for (std::size_t na : {1u, 2u, 3u, 5u, 7u})
        for (std::size_t nb : {1u, 3u, 4u, 6u, 9u, 13u})
            for (std::size_t dim : {1u, 2u, 3u, 5u}) {
                auto a = random_vec(na * dim, rng), bt = random_vec(nb * dim, rng);
                std::vector<double> ref(na * nb), v(na * nb), ne(na * nb);
                scalar::squared_distances(a.data(), na, bt.data(), nb, dim, ref.data());
                avx2::squared_distances(a.data(), na, bt.data(), nb, dim, v.data());
                neon::squared_distances(a.data(), na, bt.data(), nb, dim, ne.data());
                CHECK(bit_equal(ref, v));
                CHECK(bit_equal(ref, ne));

                std::vector<double> r2(nb), v2(nb);
                scalar::squared_distances_to(bt.data(), nb, dim, a.data(), r2.data());
                avx2::squared_distances_to(bt.data(), nb, dim, a.data(), v2.data());
                CHECK(bit_equal(r2, v2));

                std::vector<double> r3(na * nb), v3(na * nb);
                scalar::project(a.data(), na, bt.data(), nb, dim, 0.37, r3.data());
                avx2::project(a.data(), na, bt.data(), nb, dim, 0.37, v3.data());
                CHECK(bit_equal(r3, v3));
            }
}

TEST_CASE("squared distance kernel matches the textbook formula") {
    double a[] = {0.0, 0.0, 1.0, 2.0};  // two points in R^2
    double bt[] = {3.0, 0.0, 4.0, 0.0};  // b0 = (3,4), b1 = (0,0), transposed
    double out[4];
    squared_distances(a, 2, bt, 2, 2, out);
    CHECK(out[0] == 25.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 8.0);
    CHECK(out[3] == 5.0);
}

TEST_CASE("backend selection") {
    Backend before = active_backend();
    CHECK(set_backend(Backend::Scalar));
    CHECK(active_backend() == Backend::Scalar);
    CHECK(backend_name(Backend::Avx2) == "avx2");
    set_backend(before);
}
