#include "doctest.h"

#include "c2t/rng.hpp"

#include <cmath>
#include <set>

using namespace c2t;

TEST_CASE("fnv1a is deterministic and input-sensitive") {
    CHECK(fnv1a("abc", 3) == fnv1a("abc", 3));
    CHECK(fnv1a("abc", 3) != fnv1a("abd", 3));
    CHECK(fnv1a_u64(1) != fnv1a_u64(2));
}

TEST_CASE("same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split substreams differ from each other and the base") {
    Rng base(7);
    Rng s0 = Rng::split(7, 0);
    Rng s1 = Rng::split(7, 1);
    CHECK(s0.next_u64() != s1.next_u64());
    CHECK(Rng::split(7, 0).next_u64() == Rng::split(7, 0).next_u64());
    (void)base;
}

TEST_CASE("uniform01 stays in [0,1) with plausible mean") {
    Rng r(3);
    double sum = 0;
    for (int i = 0; i < 20000; ++i) {
        double u = r.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / 20000 - 0.5) < 0.02);
}

TEST_CASE("uniform_int covers the range") {
    Rng r(11);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        auto v = r.uniform_int(5);
        REQUIRE(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("normal has roughly unit moments") {
    Rng r(13);
    double sum = 0, sq = 0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("poisson mean approximates lambda") {
    Rng r(17);
    double sum = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += r.poisson(0.8);
    CHECK(std::abs(sum / n - 0.8) < 0.05);
    CHECK(r.poisson(0.0) == 0);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> w = v;
    Rng a(5), b(5);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::sort(v.begin(), v.end());
    CHECK(v == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}
