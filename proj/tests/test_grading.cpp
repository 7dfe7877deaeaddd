#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mayengine/grading.hpp"

using namespace may;

TEST_CASE("chow degree") {
    CHECK(chow_degree({0, 0, 0}) == 0);
    CHECK(chow_degree({20, 4, 11}) == 2);   // tau*g
    CHECK(chow_degree({20, 4, 12}) == 0);   // g
    CHECK(chow_degree({1, 1, 1}) == 0);     // h1
    // tau lowers w by 1, raising Chow degree by 2.
    TriDegree x{7, 3, 5};
    CHECK(chow_degree({x.s, x.f, x.w - 1}) == chow_degree(x) + 2);
}

TEST_CASE("May differential degree law") {
    MayDegree b20{4, 4, 2, 2};
    CHECK(may_differential_target(b20, 2) == MayDegree{3, 3, 3, 2});
    // d4 on g = (8,20,4,12) -> (5,19,5,12) = degree of h1^4 h4.
    CHECK(may_differential_target({8, 20, 4, 12}, 4) == MayDegree{5, 19, 5, 12});
    CHECK_THROWS_AS(may_differential_target(b20, 1), std::invalid_argument);
    CHECK_THROWS_AS(may_differential_target(b20, 0), std::invalid_argument);
}

TEST_CASE("Adams differential degree law") {
    CHECK(adams_differential_target({31, 8, 17}, 3) == TriDegree{30, 11, 17});
    CHECK(adams_differential_target({38, 2, 20}, 4) == TriDegree{37, 6, 20});
    CHECK_THROWS_AS(adams_differential_target({1, 1, 1}, 1), std::invalid_argument);
}

TEST_CASE("classical-to-motivic embedding lands in Chow degree 0") {
    for (int s = 0; s <= 30; ++s)
        for (int f = 0; f <= 12; ++f) {
            TriDegree d = classical_to_motivic(s, f);
            CHECK(d == TriDegree{2 * s + f, f, s + f});
            CHECK(chow_degree(d) == 0);
        }
    CHECK_THROWS_AS(classical_to_motivic(3, -1), std::invalid_argument);
}

TEST_CASE("Ctau-to-ANSS translation") {
    CHECK(ctau_to_anss(3, 2) == std::pair<int, int>{3, 1});
    CHECK(ctau_to_anss(0, 0) == std::pair<int, int>{0, 0});
    // Composite with the embedding: motivic (s,w) of a classical (s_cl,f_cl)
    // class maps to Novikov filtration 2w - s = f_cl... on the nose:
    TriDegree d = classical_to_motivic(7, 3);
    CHECK(ctau_to_anss(d.s, d.w).second == 2 * (7 + 3) - (2 * 7 + 3));
}

TEST_CASE("degree arithmetic operators") {
    MayDegree a{1, 2, 3, 4}, b{5, 6, 7, 8};
    CHECK(a + b == MayDegree{6, 8, 10, 12});
    CHECK(b - a == MayDegree{4, 4, 4, 4});
    CHECK((a + b).tri() == TriDegree{8, 10, 12});
    CHECK(a.str() == "(1,2,3,4)");
    CHECK(a.tri().str() == "(2,3,4)");
}
