#include <doctest.h>

#include <cmath>
#include <random>

#include "ciaf/error.hpp"
#include "ciaf/metrics.hpp"
#include "metric_oracles.hpp"

using namespace ciaf;
using namespace ciaf::testing;

TEST_CASE("cosine distance basics") {
    const std::vector<double> a{1, 0}, b{0, 1}, c{-1, 0}, z{0, 0};
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
    CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
    CHECK(cosine_distance(a, c) == doctest::Approx(2.0));
    CHECK(cosine_distance(a, z) == 0.0);
    const std::vector<double> three{1, 2, 3};
    CHECK_THROWS_AS(cosine_distance(a, three), DimensionMismatch);
}

TEST_CASE("fixed points") {
    const std::vector<std::vector<double>> basis3 = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    CHECK(remote_clique(basis3) == 1.0);
    // centroid (1/2, 1/2): cos = (1/2) / sqrt(1/2)
    const std::vector<std::vector<double>> basis2 = {{1, 0}, {0, 1}};
    CHECK(std::fabs(span(basis2) - (1.0 - 0.5 / std::sqrt(0.5))) < 1e-9);
    CHECK(std::fabs(span(basis2) - 0.29289321881345) < 1e-9);
    // three orthonormal vectors: cos to centroid is 1/sqrt(3)
    CHECK(std::fabs(span(basis3) - (1.0 - 1.0 / std::sqrt(3.0))) < 1e-12);

    CHECK(remote_clique(std::vector<std::vector<double>>{}) == 0.0);
    CHECK(span(std::vector<std::vector<double>>{}) == 0.0);
    CHECK(remote_clique(std::vector<std::vector<double>>{{1, 2}}) == 0.0);
    CHECK(span(std::vector<std::vector<double>>{{1, 2}}) == 0.0);
    // opposite vectors cancel: zero centroid
    CHECK(span(std::vector<std::vector<double>>{{1, 0}, {-1, 0}}) == 0.0);
    CHECK(remote_clique(std::vector<std::vector<double>>{{1, 0}, {-1, 0}}) == doctest::Approx(2.0));
}

TEST_CASE("mismatched dimensions") {
    const std::vector<std::vector<double>> v = {{1, 0}, {0, 1, 0}};
    CHECK_THROWS_AS(remote_clique(v), DimensionMismatch);
    CHECK_THROWS_AS(span(v), DimensionMismatch);
}

TEST_CASE("embedding overloads agree with raw vectors") {
    const std::vector<EmbeddingVector> e = {{{1, 2, 0}, "m"}, {{0, 1, 1}, "m"}, {{3, 0, 1}, "m"}};
    const std::vector<std::vector<double>> raw = {{1, 2, 0}, {0, 1, 1}, {3, 0, 1}};
    CHECK(remote_clique(e) == remote_clique(raw));
    CHECK(span(e) == span(raw));
}

TEST_CASE("random sets match the oracles") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> n_dist(0, 8), d_dist(1, 16);
    std::normal_distribution<double> x(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = n_dist(rng), d = d_dist(rng);
        std::vector<std::vector<double>> v(n, std::vector<double>(d));
        for (auto& row : v)
            for (auto& e : row) e = x(rng);
        CHECK(close_rel(remote_clique(v), oracle_rc(v)));
        CHECK(close_rel(span(v), oracle_span(v)));
    }
}

TEST_CASE("metrics are order-invariant and bounded") {
    std::vector<std::vector<double>> v = {{0.3, -1, 2}, {1, 1, 1}, {-2, 0.5, 0}, {0, 0, 4}};
    const double rc = remote_clique(v), sp = span(v);
    std::reverse(v.begin(), v.end());
    CHECK(remote_clique(v) == doctest::Approx(rc).epsilon(1e-12));
    CHECK(span(v) == doctest::Approx(sp).epsilon(1e-12));
    CHECK(rc >= 0.0);
    CHECK(rc <= 2.0);
    CHECK(sp >= 0.0);
    CHECK(sp <= 2.0);
}
