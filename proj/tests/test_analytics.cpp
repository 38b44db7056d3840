#include <gtest/gtest.h>

#include <fstream>

#include "egoseg/analytics.hpp"
#include "synthetic.hpp"

using namespace egoseg;
using namespace egoseg::analytics;

TEST(Overlap, MatchesCountingOracle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> d(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = egoseg::testing::random_mask(23, 17, d(rng), rng);
        const auto b = egoseg::testing::random_mask(23, 17, d(rng), rng);
        const double na = double(a.count()), nb = double(b.count()), both = double((a & b).count());
        const auto s = overlap(a, b);
        EXPECT_EQ(s.dice, 2.0 * both / (na + nb));
        EXPECT_EQ(s.precision, both / na);
        EXPECT_EQ(s.recall, both / nb);
        const auto r = overlap(b, a);
        EXPECT_EQ(r.dice, s.dice);
        EXPECT_EQ(r.precision, s.recall);
        EXPECT_EQ(pixel_accuracy(a, b), double(23 * 17 - (a - b).count() - (b - a).count()) / (23 * 17));
    }
}

TEST(Overlap, EdgeCases) {
    const BinaryMask empty(5, 5), full(5, 5, true);
    EXPECT_EQ(overlap(empty, empty).dice, 1.0);
    EXPECT_EQ(overlap(full, empty).dice, 0.0);
    EXPECT_EQ(overlap(empty, full).recall, 0.0);
    EXPECT_EQ(overlap(full, full).dice, 1.0);
    EXPECT_EQ(pixel_accuracy(full, empty), 0.0);
    EXPECT_THROW(overlap(full, BinaryMask(5, 6)), Error);
    EXPECT_THROW(pixel_accuracy(full, BinaryMask(6, 5)), Error);
}

TEST(Heatmap, WeightsByFrameNumber) {
    // Pixel 0 in every frame, pixel 1 in frames 1 and 2, pixel 2 only in frame 3, pixel 3 never.
    std::vector<BinaryMask> masks(3, BinaryMask(4, 1));
    masks[0].set(0, true);
    masks[0].set(1, true);
    masks[1].set(0, true);
    masks[1].set(1, true);
    masks[2].set(0, true);
    masks[2].set(2, true);
    const auto h = accumulate_heatmap(masks, 4);
    EXPECT_NEAR(h.at(0, 0), 1.5, 1e-12);
    EXPECT_NEAR(h.at(1, 0), 0.75, 1e-12);
    EXPECT_NEAR(h.at(2, 0), 0.75, 1e-12);
    EXPECT_EQ(h.at(3, 0), 0.0);
    const auto t = normalize(h);
    EXPECT_NEAR(t[0], 1.0, 1e-12);
    EXPECT_NEAR(t[1], 0.5, 1e-12);
    EXPECT_EQ(t[3], 0.0);
}

TEST(Heatmap, RejectsBadInput) {
    EXPECT_THROW(Heatmap(0, 1, 1), Error);
    EXPECT_THROW(Heatmap(1, 1, 0), Error);
    Heatmap h(2, 2, 3);
    EXPECT_THROW(h.add(BinaryMask(2, 2), 0), Error);
    EXPECT_THROW(h.add(BinaryMask(2, 2), 4), Error);
    EXPECT_THROW(h.add(BinaryMask(3, 2), 1), Error);
    std::vector<BinaryMask> four(4, BinaryMask(2, 2));
    EXPECT_THROW(accumulate_heatmap(four, 3), Error);
    EXPECT_THROW(accumulate_heatmap({}, 3), Error);
}

TEST(Heatmap, ConstantMapNormalizesToZero) {
    std::vector<BinaryMask> masks(2, BinaryMask(3, 3, true));
    for (double v : normalize(accumulate_heatmap(masks, 2))) EXPECT_EQ(v, 0.0);
}

TEST(Ramp, PiecewiseLinearStops) {
    EXPECT_EQ(ramp_color(0.0), (Rgb{0, 0, 0}));
    EXPECT_EQ(ramp_color(1.0 / 3.0), (Rgb{255, 0, 0}));
    EXPECT_EQ(ramp_color(2.0 / 3.0), (Rgb{255, 255, 0}));
    EXPECT_EQ(ramp_color(1.0), (Rgb{255, 255, 255}));
    EXPECT_EQ(ramp_color(0.5), (Rgb{255, 128, 0}));
    EXPECT_EQ(ramp_color(-1.0), ramp_color(0.0));
    EXPECT_EQ(ramp_color(2.0), ramp_color(1.0));
    // Brightness never decreases along the ramp.
    double prev = -1;
    for (int i = 0; i <= 300; ++i) {
        const double l = luminance(ramp_color(i / 300.0));
        EXPECT_GE(l, prev);
        prev = l;
    }
}

TEST(Heatmap, RenderAndRawDump) {
    std::vector<BinaryMask> masks(2, BinaryMask(2, 1));
    masks[0].set(0, true);
    masks[1].set(0, true);
    const auto h = accumulate_heatmap(masks, 2);
    const Frame img = render_heatmap(h);
    EXPECT_EQ(img.at(0, 0), (Rgb{255, 255, 255}));
    EXPECT_EQ(img.at(1, 0), (Rgb{0, 0, 0}));

    egoseg::testing::TempDir dir("heat");
    write_heatmap_raw(dir / "h.txt", h);
    std::ifstream in(dir / "h.txt");
    std::string comment;
    std::getline(in, comment);
    EXPECT_EQ(comment[0], '#');
    int w, hh, L;
    double a, b;
    in >> w >> hh >> L >> a >> b;
    EXPECT_EQ(w, 2);
    EXPECT_EQ(hh, 1);
    EXPECT_EQ(L, 2);
    EXPECT_EQ(a, 1.5);
    EXPECT_EQ(b, 0.0);
}

TEST(RunStats, MeansAndRates) {
    SessionReport r;
    r.video = "ball";
    r.width = 10;
    r.height = 10;
    for (int n = 1; n <= 4; ++n) {
        FrameRecord f;
        f.frame = n;
        f.provenance = n == 1 ? Provenance::user_seed : Provenance::propagated;
        f.seed_reason = n == 1 ? "initial" : "";
        f.flow_seconds = 0.1 * n;
        f.processing_seconds = 0.2;
        f.total_seconds = 0.1 * n + 0.2;
        f.mask_area = std::size_t(10 * n);
        r.frames.push_back(f);
    }
    const auto s = collect_stats(r);
    EXPECT_EQ(s.object, "ball");
    EXPECT_EQ(s.frames, 4);
    EXPECT_EQ(s.user_inputs, 1);
    EXPECT_NEAR(s.flow_seconds, 0.25, 1e-12);
    EXPECT_NEAR(s.processing_seconds, 0.2, 1e-12);
    EXPECT_NEAR(s.total_seconds, 0.45, 1e-12);
    EXPECT_DOUBLE_EQ(s.mean_area_pixels, 25.0);
    EXPECT_DOUBLE_EQ(s.mean_area_percent, 25.0);
    EXPECT_DOUBLE_EQ(s.user_inputs_per_300, 75.0);

    const std::vector<RunStats> rows{s};
    const auto csv = format_run_stats(rows, true);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "Object,Total Time(sec),Optical Flow Time(sec),Processing Time(sec),Image Size(px),% Area,"
              "User Input (per 300 frames),DICE,Pixel Accuracy");
    EXPECT_NE(csv.find("ball,0.4500,0.2500,0.2000,25,25.00,75.0,-,-"), std::string::npos);
    EXPECT_NE(format_run_stats(rows, false).find("ball"), std::string::npos);
}

TEST(Agreement, SummaryStatistics) {
    const std::vector<OverlapScores> s{{1.0, 1.0, 1.0}, {0.5, 0.25, 0.75}};
    const std::vector<double> acc{1.0, 0.5};
    const auto a = summarize(s, acc);
    EXPECT_EQ(a.pairs, 2);
    EXPECT_DOUBLE_EQ(a.dice_mean, 0.75);
    EXPECT_DOUBLE_EQ(a.dice_std, 0.25);
    EXPECT_DOUBLE_EQ(a.precision_mean, 0.625);
    EXPECT_DOUBLE_EQ(a.recall_mean, 0.875);
    EXPECT_DOUBLE_EQ(a.pixel_accuracy_mean, 0.75);
    EXPECT_EQ(format_agreement(a, true), "pairs,dice_mean,dice_std,precision,recall,pixel_accuracy\n"
                                         "2,0.7500,0.2500,0.6250,0.8750,0.7500\n");
    EXPECT_EQ(summarize({}).pairs, 0);
}

TEST(Report, JsonRoundTrip) {
    SessionReport r;
    r.video = "v";
    r.width = 4;
    r.height = 3;
    r.sequence_length = 2;
    FrameRecord f;
    f.frame = 2;
    f.provenance = Provenance::user_seed;
    f.seed_reason = "size+model_match";
    f.failed_tests = {"size", "model_match"};
    f.mask_area = 7;
    r.frames = {f};
    const auto back = SessionReport::from_json(r.to_json());
    EXPECT_EQ(back.video, "v");
    ASSERT_EQ(back.frames.size(), 1u);
    EXPECT_EQ(back.frames[0].failed_tests, f.failed_tests);
    EXPECT_EQ(back.failures("size"), 1);
    EXPECT_EQ(back.failure_inputs(), 1);
}
