#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>

#include "maskflow/dataset_io.hpp"
#include "maskflow/identifier_assigner.hpp"

using namespace maskflow;

TEST_CASE("sample_assignment basics") {
    IdentityLabelBank bank{7};
    IdentityAssignment a = sample_assignment(2, bank, 3);
    REQUIRE(a.entity_count() == 2);
    REQUIRE(a.labels[0] != a.labels[1]);
    for (int l : a.labels) {
        REQUIRE(l >= 1);
        REQUIRE(l <= 7);
    }
    IdentityAssignment b = sample_assignment(2, bank, 3);
    REQUIRE(a.labels == b.labels);

    IdentityLabelBank one{1};
    REQUIRE(sample_assignment(1, one, 0).labels == std::vector<int>{1});

    REQUIRE_THROWS_AS(sample_assignment(3, one, 0), CapacityError);
}

TEST_CASE("sample_assignment is uniform over ordered pairs") {
    IdentityLabelBank bank{7};
    const int draws = 10000;
    std::map<std::pair<int, int>, int> counts;
    for (int i = 0; i < draws; ++i) {
        IdentityAssignment a = sample_assignment(2, bank, static_cast<uint64_t>(i));
        counts[{a.labels[0], a.labels[1]}]++;
    }
    REQUIRE(counts.size() == 42);
    const double p = 1.0 / 42.0;
    const double sigma = std::sqrt(draws * p * (1 - p));
    for (const auto& [pair, c] : counts) {
        REQUIRE(std::abs(c - draws * p) <= 4.0 * sigma);
    }
}

TEST_CASE("assign_labels") {
    const int T = 2, H = 4, W = 4;
    auto blank = [&] { return TensorF({T, 1, H, W}); };

    SECTION("all-zero masks give an all-zero label map") {
        std::vector<TensorF> masks = {blank(), blank()};
        IdentityAssignment a;
        a.labels = {3, 5};
        LabelMap lm = assign_labels(masks, a);
        for (int v : lm.data) REQUIRE(v == 0);
    }

    SECTION("single entity maps its pixels to its label") {
        std::vector<TensorF> masks = {blank()};
        masks[0].at4(0, 0, 1, 2) = 1.0f;
        masks[0].at4(1, 0, 3, 3) = 1.0f;
        IdentityAssignment a;
        a.labels = {4};
        LabelMap lm = assign_labels(masks, a);
        REQUIRE(lm.at(0, 1, 2) == 4);
        REQUIRE(lm.at(1, 3, 3) == 4);
        REQUIRE(lm.at(0, 0, 0) == 0);
    }

    SECTION("overlap resolves to the front-most (highest index) entity") {
        std::vector<TensorF> masks = {blank(), blank()};
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) masks[0].at4(0, 0, y, x) = 1.0f;
        for (int y = 1; y < 4; ++y)
            for (int x = 1; x < 4; ++x) masks[1].at4(0, 0, y, x) = 1.0f;
        IdentityAssignment a;
        a.labels = {2, 5};
        LabelMap lm = assign_labels(masks, a);
        // brute-force per-pixel check against the depth order
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int expect = 0;
                if (masks[0].at4(0, 0, y, x) > 0.5f) expect = 2;
                if (masks[1].at4(0, 0, y, x) > 0.5f) expect = 5;
                REQUIRE(lm.at(0, y, x) == expect);
            }
    }

    SECTION("non-binary masks are rejected") {
        std::vector<TensorF> masks = {blank()};
        masks[0].at4(0, 0, 0, 0) = 0.5f;
        IdentityAssignment a;
        a.labels = {1};
        REQUIRE_THROWS_AS(assign_labels(masks, a), ValidationError);
    }
}

TEST_CASE("one_hot") {
    LabelMap lm;
    lm.t = 2;
    lm.h = 3;
    lm.w = 3;
    lm.data.assign(18, 0);

    SECTION("all-background map") {
        TensorF oh = one_hot<float>(lm, 7);
        REQUIRE(oh.shape == std::vector<int>{2, 8, 3, 3});
        for (int f = 0; f < 2; ++f)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x) {
                    REQUIRE(oh.at4(f, 0, y, x) == 1.0f);
                    for (int c = 1; c <= 7; ++c) REQUIRE(oh.at4(f, c, y, x) == 0.0f);
                }
    }

    SECTION("only used channels are active, per-pixel sums are one") {
        lm.at(0, 0, 0) = 2;
        lm.at(0, 1, 1) = 5;
        lm.at(1, 2, 2) = 2;
        TensorF oh = one_hot<float>(lm, 7);
        std::vector<bool> channel_used(8, false);
        for (int f = 0; f < 2; ++f)
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 3; ++x) {
                    float sum = 0;
                    for (int c = 0; c <= 7; ++c) {
                        float v = oh.at4(f, c, y, x);
                        REQUIRE((v == 0.0f || v == 1.0f));
                        sum += v;
                        if (v == 1.0f) channel_used[static_cast<size_t>(c)] = true;
                    }
                    REQUIRE(sum == 1.0f);
                }
        REQUIRE(channel_used == std::vector<bool>{true, false, true, false, false, true, false, false});
    }

    SECTION("argmax inverts one_hot") {
        Rng rng(15, "onehot");
        for (auto& v : lm.data) v = static_cast<int>(rng.uniform_int(8));
        TensorF oh = one_hot<float>(lm, 7);
        LabelMap back = one_hot_argmax(oh);
        REQUIRE(back.data == lm.data);
    }

    SECTION("labels beyond capacity raise") {
        lm.at(0, 0, 0) = 9;
        REQUIRE_THROWS_AS(one_hot<float>(lm, 7), CapacityError);
    }
}

TEST_CASE("relabeling equivariance") {
    // one_hot(assign_labels(M, pi o A)) == permute_channels(one_hot(assign_labels(M, A)), pi)
    for (uint64_t seed = 0; seed < 6; ++seed) {
        SceneSample s = generate_scene(32, 32, 8, 3, TrajectoryKind::random_walk, 100 + seed);
        IdentityLabelBank bank{7};
        IdentityAssignment a = sample_assignment(3, bank, seed);
        LabelPermutation pi = LabelPermutation::random(7, seed * 31 + 1);
        TensorF lhs = one_hot<float>(assign_labels(s.masks, apply_permutation(pi, a)), 7);
        TensorF rhs = permute_channels(one_hot<float>(assign_labels(s.masks, a), 7), pi);
        REQUIRE(max_abs_diff(lhs, rhs) == 0.0);
    }
}

TEST_CASE("label permutations validate") {
    LabelPermutation pi(3);
    pi.map = {0, 2, 2, 3};
    REQUIRE_THROWS_AS(pi.validate(), ValidationError);
    pi.map = {1, 0, 2, 3};
    REQUIRE_THROWS_AS(pi.validate(), ValidationError);
    pi.map = {0, 3, 1, 2};
    REQUIRE_NOTHROW(pi.validate());
    // involution
    LabelPermutation swap25(7);
    std::swap(swap25.map[2], swap25.map[5]);
    IdentityAssignment a;
    a.labels = {2, 7};
    IdentityAssignment twice = apply_permutation(swap25, apply_permutation(swap25, a));
    REQUIRE(twice.labels == a.labels);
}

TEST_CASE("label map serializes to indexed PNG losslessly") {
    namespace fs = std::filesystem;
    LabelMap lm;
    lm.t = 1;
    lm.h = 16;
    lm.w = 16;
    lm.data.assign(256, 0);
    Rng rng(8, "pngpal");
    for (auto& v : lm.data) v = static_cast<int>(rng.uniform_int(256));
    fs::path p = fs::temp_directory_path() / "mf_labelmap.png";
    save_label_map_png(lm, 0, 255, p);
    LabelMap back = load_label_map_png(p);
    REQUIRE(back.h == 16);
    REQUIRE(back.w == 16);
    REQUIRE(back.data == lm.data);
    fs::remove(p);
}
