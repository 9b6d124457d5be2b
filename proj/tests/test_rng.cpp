#include <doctest.h>

#include <cmath>

#include "qfi/rng.hpp"

using namespace qfi;

TEST_CASE("derived streams are deterministic and key-sensitive") {
    auto a = rng::derive_stream(42, {1, 2, 3});
    auto b = rng::derive_stream(42, {1, 2, 3});
    auto c = rng::derive_stream(42, {1, 2, 4});
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());  // collision over 100 draws is absurdly unlikely
    }
}

TEST_CASE("uniform stays in [0,1) with sensible mean") {
    auto s = rng::derive_stream(7, {0});
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        acc += u;
    }
    CHECK(std::abs(acc / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal moments") {
    auto s = rng::derive_stream(11, {0});
    const int n = 200000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = s.normal();
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("below is unbiased over small ranges") {
    auto s = rng::derive_stream(3, {9});
    int counts[5] = {0, 0, 0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[s.below(5)];
    for (int k = 0; k < 5; ++k)
        CHECK(std::abs(counts[k] - n / 5.0) < 5.0 * std::sqrt(n * 0.2 * 0.8));
}
