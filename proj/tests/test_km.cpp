#include <doctest.h>

#include "fasm/km.hpp"
#include "test_util.hpp"

using namespace fasm;

TEST_CASE("kaplan_meier textbook no-censoring case") {
    const auto ds = testutil::make_dataset({1, 2, 3, 4}, {1, 1, 1, 1},
                                           {"A", "A", "A", "A"});
    const auto S = kaplan_meier(ds);
    CHECK(S(0.5) == 1.0);
    CHECK(S(1) == doctest::Approx(0.75));
    CHECK(S(2) == doctest::Approx(0.50));
    CHECK(S(3) == doctest::Approx(0.25));
    CHECK(S(4) == doctest::Approx(0.0));
    CHECK(S(100) == doctest::Approx(0.0));
}

TEST_CASE("all censored gives a flat curve") {
    const auto ds = testutil::make_dataset({1, 2, 3}, {0, 0, 0}, {"A", "A", "A"});
    const auto S = kaplan_meier(ds);
    CHECK(S(2) == 1.0);
    CHECK(S(10) == 1.0);
}

TEST_CASE("censoring shrinks later risk sets") {
    const auto ds = testutil::make_dataset({1, 2, 3}, {1, 0, 1}, {"A", "A", "A"});
    const auto S = kaplan_meier(ds);
    CHECK(S(1) == doctest::Approx(2.0 / 3.0));
    CHECK(S(2.5) == doctest::Approx(2.0 / 3.0));
    CHECK(S(3) == doctest::Approx(0.0));
}

TEST_CASE("censoring_km single-jump hand computation") {
    const auto ds = testutil::make_dataset({1, 2, 3}, {1, 0, 1}, {"A", "A", "A"});
    const auto G = censoring_km(ds);
    CHECK(G(1.5) == 1.0);
    CHECK(G(2) == doctest::Approx(0.5));
    CHECK(G.left_limit(2) == 1.0);
}

TEST_CASE("no censoring gives G identically 1") {
    const auto ds = testutil::make_dataset({1, 2, 3}, {1, 1, 1}, {"A", "A", "A"});
    const auto G = censoring_km(ds);
    CHECK(G(0.5) == 1.0);
    CHECK(G(3) == 1.0);
}

TEST_CASE("censoring_km mirrors kaplan_meier with inverted flags") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto ds = testutil::random_dataset(seed);
        const auto G = censoring_km(ds);
        for (auto& s : ds.subjects) s.event = !s.event;
        const auto S = kaplan_meier(ds);
        REQUIRE(G.times() == S.times());
        for (std::size_t k = 0; k < G.times().size(); ++k)
            CHECK(G.values()[k] == S.values()[k]);
    }
}

TEST_CASE("KM curves are nonincreasing, right-continuous, start at 1") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ds = testutil::random_dataset(seed, 50, 1, 2, 0.5);
        for (const auto& curve : {kaplan_meier(ds), censoring_km(ds)}) {
            CHECK(curve.value_before_first() == 1.0);
            double prev = 1.0;
            for (std::size_t k = 0; k < curve.times().size(); ++k) {
                CHECK(curve.values()[k] <= prev + 1e-15);
                CHECK(curve(curve.times()[k]) == curve.values()[k]);
                prev = curve.values()[k];
            }
        }
    }
}

TEST_CASE("S(t) * G(t) equals the observed-time survival on no-tie data") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        auto ds = testutil::random_dataset(seed, 30, 1, 2, 0.4);
        // nudge any tied times apart
        for (std::size_t i = 0; i < ds.size(); ++i)
            ds.subjects[i].time += 1e-6 * static_cast<double>(i);
        const auto S = kaplan_meier(ds);
        const auto G = censoring_km(ds);
        for (const auto& s : ds.subjects) {
            const double t = s.time;
            std::size_t beyond = 0;
            for (const auto& o : ds.subjects)
                if (o.time > t) ++beyond;
            const double emp = static_cast<double>(beyond) /
                               static_cast<double>(ds.size());
            CHECK(S(t) * G(t) == doctest::Approx(emp).epsilon(1e-9));
        }
    }
}

TEST_CASE("ipcw_pair_weight conventions") {
    // no censoring -> weight 1
    const auto ds = testutil::make_dataset({1, 2, 3}, {1, 1, 1}, {"A", "A", "A"});
    CHECK(ipcw_pair_weight(censoring_km(ds), 2.5) == 1.0);

    // G(t-) = 0.5 -> weight 4
    StepFunction G({1.0}, {0.5});
    CHECK(ipcw_pair_weight(G, 2.0) == doctest::Approx(4.0));

    // truncation floor caps the weight at 1/0.05^2
    StepFunction tiny({1.0}, {0.01});
    CHECK(ipcw_pair_weight(tiny, 2.0) == doctest::Approx(400.0));
}

TEST_CASE("step function evaluation against a linear scan") {
    StepFunction f({1.0, 2.0, 5.0}, {0.9, 0.6, 0.2});
    CHECK(f(0.99) == 1.0);
    CHECK(f(1.0) == 0.9);
    CHECK(f(4.999) == 0.6);
    CHECK(f(5.0) == 0.2);
    CHECK(f.left_limit(1.0) == 1.0);
    CHECK(f.left_limit(5.0) == 0.6);
    CHECK(f.left_limit(6.0) == 0.2);
}
