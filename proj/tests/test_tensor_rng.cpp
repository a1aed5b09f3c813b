#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "jrlab/errors.hpp"
#include "jrlab/rng.hpp"
#include "jrlab/tensor.hpp"

using namespace jrlab;

TEST_CASE("tensor construction and shape checks") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.all_finite());

    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), DimensionError);

    Tensor v = Tensor::from({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(v.rows(), DimensionError);
    CHECK_THROWS_AS(v.at(0, 0), DimensionError);
    CHECK_THROWS_AS(v.row(0), DimensionError);
}

TEST_CASE("tensor accessors address row-major storage") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.at(0, 0) == 1.0);
    CHECK(t.at(0, 2) == 3.0);
    CHECK(t.at(1, 0) == 4.0);
    CHECK(t.row(1)[2] == 6.0);
    CHECK_THROWS_AS(t.at(2, 0), DimensionError);
    CHECK_THROWS_AS(t.at(0, 3), DimensionError);
    CHECK_THROWS_AS(t.row(2), DimensionError);
}

TEST_CASE("tensor arithmetic") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 2}, {10, 20, 30, 40});
    a += b;
    CHECK(a.at(1, 1) == 44.0);
    a *= 0.5;
    CHECK(a.at(0, 0) == 5.5);

    Tensor c = Tensor::zeros({3});
    CHECK_THROWS_AS(a += c, DimensionError);

    CHECK(squared_norm(b) == doctest::Approx(100 + 400 + 900 + 1600));
    const double x[3] = {1, 2, 3}, y[3] = {4, 5, 6};
    CHECK(dot(x, y, 3) == doctest::Approx(32.0));
}

TEST_CASE("ensure_finite rejects NaN and infinity") {
    Tensor t = Tensor::from({2}, {1.0, 2.0});
    CHECK_NOTHROW(ensure_finite(t, "t"));
    t.data[1] = std::nan("");
    CHECK(!t.all_finite());
    CHECK_THROWS_AS(ensure_finite(t, "t"), DimensionError);
    t.data[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ensure_finite(t, "t"), DimensionError);
}

TEST_CASE("rng streams replay deterministically") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c = a;  // copies resume from the same position
    CHECK(a.next_u64() == c.next_u64());

    Rng d(43);
    CHECK(Rng(42).next_u64() != d.next_u64());
}

TEST_CASE("rng children are position-independent and distinct") {
    Rng parent(7);
    Rng child_before = parent.child(1);
    for (int i = 0; i < 10; ++i) parent.next_u64();
    Rng child_after = parent.child(1);
    for (int i = 0; i < 20; ++i) CHECK(child_before.next_u64() == child_after.next_u64());

    Rng c1 = parent.child(1), c2 = parent.child(2);
    bool all_equal = true;
    for (int i = 0; i < 20; ++i) all_equal = all_equal && (c1.next_u64() == c2.next_u64());
    CHECK(!all_equal);
}

TEST_CASE("uniform draws stay in range") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 5.0);
        CHECK(u >= -2.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("uniform_index covers [0, n) without bias artifacts") {
    Rng rng(2);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 3000; ++i) {
        const std::uint64_t k = rng.uniform_index(7);
        CHECK(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal draws have standard moments") {
    // Sample mean of n standard normals has se 1/sqrt(n); sample variance
    // has se ~ sqrt(2/n).  Stay 5 sigma away from both.
    const std::size_t n = 100000;
    Rng rng(3);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("shuffle permutes and replays by seed") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;

    Rng a(9);
    a.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == w);
    CHECK(v != w);  // 50! permutations; identity is effectively impossible

    std::vector<int> v2 = w;
    Rng b(9);
    b.shuffle(v2);
    CHECK(v2 == v);
}
