#include "vmr/proposals.hpp"
#include "vmr/rand.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <stdexcept>

using namespace vmr;
namespace fs = std::filesystem;

TEST_CASE("sliding windows") {
    SUBCASE("single full window") {
        const auto props = sliding_window_proposals(10, {10}, 0.5);
        REQUIRE(props.size() == 1);
        CHECK(props[0].segment.start == 0.0);
        CHECK(props[0].segment.end == 10.0);
    }
    SUBCASE("stride enumeration") {
        const auto props = sliding_window_proposals(8, {4}, 0.5);
        REQUIRE(props.size() == 3);
        CHECK(props[0].segment.start == 0.0);
        CHECK(props[0].segment.end == 4.0);
        CHECK(props[1].segment.start == 2.0);
        CHECK(props[1].segment.end == 6.0);
        CHECK(props[2].segment.start == 4.0);
        CHECK(props[2].segment.end == 8.0);
    }
    SUBCASE("window longer than the video is skipped") {
        const auto props = sliding_window_proposals(5, {9, 5}, 0.5);
        REQUIRE(props.size() == 1);
        CHECK(props[0].segment.length() == 5.0);
    }
    SUBCASE("deduplicated and ordered by start then length") {
        const auto props = sliding_window_proposals(8, {4, 4, 8}, 0.5);
        REQUIRE(props.size() == 4);
        for (size_t i = 1; i < props.size(); ++i) {
            const bool ordered =
                props[i - 1].segment.start < props[i].segment.start ||
                (props[i - 1].segment.start == props[i].segment.start &&
                 props[i - 1].segment.length() < props[i].segment.length());
            CHECK(ordered);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(sliding_window_proposals(8, {}, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(sliding_window_proposals(8, {4}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(sliding_window_proposals(8, {4}, 1.5), std::invalid_argument);
    }
}

TEST_CASE("proposals respect video bounds") {
    VideoFeatures v;
    v.id = "vid";
    v.frames = Matrix(37, 2);
    const auto props = proposals_for_video(v, ProposalConfig{});
    CHECK(!props.empty());
    for (const auto& p : props) {
        CHECK(p.segment.valid());
        CHECK(p.segment.end <= 37.0);
        CHECK(p.source_video == "vid");
    }
}

TEST_CASE("tiou") {
    CHECK(tiou({3, 7}, {3, 7}) == 1.0);
    CHECK(tiou({0, 2}, {5, 9}) == 0.0);
    CHECK(tiou({0, 10}, {5, 15}) == doctest::Approx(1.0 / 3.0));

    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        Segment a{uniform_real(rng, 0, 50), 0};
        a.end = a.start + uniform_real(rng, 0.5, 20);
        Segment b{uniform_real(rng, 0, 50), 0};
        b.end = b.start + uniform_real(rng, 0.5, 20);
        CHECK(tiou(a, b) == tiou(b, a));
        CHECK(tiou(a, a) == 1.0);
        CHECK(tiou(a, b) >= 0.0);
        CHECK(tiou(a, b) <= 1.0);
    }
}

TEST_CASE("best_by_tiou") {
    const std::vector<Proposal> candidates = {{{0, 4}, "v"}, {{2, 6}, "v"}};
    SUBCASE("exact match wins") {
        const Proposal& best = best_by_tiou(candidates, {2, 6});
        CHECK(best.segment.start == 2.0);  // tIoU 1 beats 1/3
    }
    SUBCASE("all-zero tie breaks to earliest then shortest") {
        const std::vector<Proposal> disjoint = {{{5, 9}, "v"}, {{3, 8}, "v"}, {{3, 6}, "v"}};
        const Proposal& best = best_by_tiou(disjoint, {20, 30});
        CHECK(best.segment.start == 3.0);
        CHECK(best.segment.end == 6.0);
    }
    SUBCASE("deterministic for a fixed order") {
        for (int i = 0; i < 5; ++i) {
            const Proposal& best = best_by_tiou(candidates, {0, 4});
            CHECK(best.segment.start == 0.0);
        }
    }
    CHECK_THROWS_AS(best_by_tiou({}, {0, 1}), std::invalid_argument);
}

TEST_CASE("proposal file roundtrip") {
    const fs::path path = fs::temp_directory_path() / "vmr_props.txt";
    const std::vector<Proposal> props = {{{0, 4.5}, "a"}, {{2, 6}, "b"}};
    save_proposal_file(props, path.string());
    const auto loaded = load_proposal_file(path.string());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].source_video == "a");
    CHECK(loaded[0].segment.end == 4.5);
    CHECK(loaded[1].source_video == "b");
    fs::remove(path);
}
