#include <catch2/catch_amalgamated.hpp>

#include "jumpdiff/alignment.hpp"
#include "jumpdiff/rng.hpp"

using namespace jumpdiff;

TEST_CASE("protected set is exactly the span starts") {
    const Alignment a({1, 2, 3}, {{0, 3}, {3, 2}, {5, 4}});
    const ProtectedSet p = protected_from_alignment(a);
    CHECK(p.indices() == std::vector<std::size_t>{0, 3, 5});
}

TEST_CASE("single phone protects only frame zero") {
    const Alignment a({7}, {{0, 23}});
    CHECK(protected_from_alignment(a).indices() == std::vector<std::size_t>{0});
}

TEST_CASE("protected set size equals phone count on random alignments") {
    RandomStream rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.index(12);
        std::vector<int> phones(n);
        std::vector<std::size_t> durations(n);
        std::vector<std::size_t> expected_starts;
        std::size_t start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            phones[i] = static_cast<int>(rng.index(5));
            durations[i] = 1 + rng.index(9);
            expected_starts.push_back(start);
            start += durations[i];
        }
        const Alignment a = Alignment::from_durations(phones, durations);
        const ProtectedSet p = protected_from_alignment(a);
        REQUIRE(p.size() == n);
        CHECK(p.indices() == expected_starts);
        for (std::size_t idx : p.indices()) CHECK(idx < a.total_frames());
    }
}

TEST_CASE("alignment construction rejects bad spans") {
    CHECK_THROWS_AS(Alignment({1}, {{1, 2}}), std::invalid_argument);       // gap at 0
    CHECK_THROWS_AS(Alignment({1, 2}, {{0, 2}, {3, 1}}), std::invalid_argument);  // hole
    CHECK_THROWS_AS(Alignment({1, 2}, {{0, 2}, {1, 2}}), std::invalid_argument);  // overlap
    CHECK_THROWS_AS(Alignment({1}, {{0, 0}}), std::invalid_argument);       // empty span
    CHECK_THROWS_AS(Alignment({}, {}), std::invalid_argument);
}

TEST_CASE("phone_at finds the covering span") {
    const Alignment a({4, 5}, {{0, 2}, {2, 3}});
    CHECK(a.phone_at(0) == 0);
    CHECK(a.phone_at(1) == 0);
    CHECK(a.phone_at(2) == 1);
    CHECK(a.phone_at(4) == 1);
    CHECK_THROWS_AS(a.phone_at(5), std::out_of_range);
}

TEST_CASE("upsample_prior repeats prototypes by duration") {
    Spectrogram protos(2, 2);
    protos(0, 0) = 1.0;
    protos(1, 0) = 2.0;
    protos(0, 1) = 5.0;
    protos(1, 1) = 6.0;

    SECTION("single phone repeats") {
        Spectrogram single(2, 1);
        single.set_column(0, protos.column(0));
        const Spectrogram out = upsample_prior(single, {4});
        REQUIRE(out.length() == 4);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(out(0, l) == 1.0);
            CHECK(out(1, l) == 2.0);
        }
    }

    SECTION("unit durations concatenate") {
        const Spectrogram out = upsample_prior(protos, {1, 1});
        REQUIRE(out.length() == 2);
        CHECK(out(0, 0) == 1.0);
        CHECK(out(0, 1) == 5.0);
    }

    SECTION("zero duration is rejected") {
        CHECK_THROWS_AS(upsample_prior(protos, {2, 0}), std::invalid_argument);
    }

    SECTION("random case matches an independently built alignment") {
        RandomStream rng(11);
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t n = 1 + rng.index(5);
            Spectrogram means(3, n);
            for (double& v : means.raw()) v = rng.normal();
            std::vector<std::size_t> durations(n);
            std::vector<int> ids(n, 0);
            for (auto& d : durations) d = 1 + rng.index(6);
            const Spectrogram out = upsample_prior(means, durations);
            const Alignment align = Alignment::from_durations(ids, durations);
            REQUIRE(out.length() == align.total_frames());
            for (std::size_t f = 0; f < out.length(); ++f) {
                const std::size_t phone = align.phone_at(f);
                auto got = out.column(f);
                auto want = means.column(phone);
                CHECK(std::equal(got.begin(), got.end(), want.begin()));
            }
        }
    }
}
