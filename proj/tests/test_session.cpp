#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "egoseg/session.hpp"
#include "synthetic.hpp"

using namespace egoseg;
using namespace egoseg::session;
namespace fs = std::filesystem;
using egoseg::testing::TempDir;

namespace {

constexpr int W = 64, H = 48;

BinaryMask still_truth() { return egoseg::testing::disk_mask(W, H, 32, 24, 12); }

// A motionless ball on a striped wall, noise redrawn on every frame.
void write_still(const fs::path& dir, int frames) {
    std::mt19937_64 rng(11);
    std::vector<Frame> out;
    for (int i = 0; i < frames; ++i) {
        Frame f = egoseg::testing::stripes(W, H);
        egoseg::testing::paint_ball(f, still_truth(), 32, 24);
        egoseg::testing::add_noise(f, 4.0, rng);
        out.push_back(std::move(f));
    }
    egoseg::testing::write_sequence(dir, out);
}

OracleSeedProvider still_oracle() {
    return OracleSeedProvider([](int) { return still_truth(); });
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SeedPolygon square_seed() { return SeedPolygon{{{18, 10}, {46, 10}, {46, 38}, {18, 38}}}; }

} // namespace

TEST(Session, StateMachineTransitions) {
    TempDir frames("frames"), out("run");
    write_still(frames.path(), 4);
    Session s(FrameSequence::open(frames.path()), Config{}, out.path());
    EXPECT_EQ(s.status(), Status::awaiting_seed);
    ASSERT_TRUE(s.pending());
    EXPECT_EQ(s.pending()->frame, 1);
    EXPECT_EQ(s.pending()->reason, "initial");

    EXPECT_THROW(s.step(), InvalidTransition);
    EXPECT_THROW(s.submit_seed(2, square_seed()), InvalidTransition);
    EXPECT_THROW(s.submit_seed(1, SeedPolygon{{{1, 1}, {5, 1}}}), Error);
    EXPECT_EQ(s.status(), Status::awaiting_seed);
    EXPECT_EQ(s.cursor(), 1);

    std::vector<Event> events;
    s.set_listener([&](const Event& e) { events.push_back(e); });
    s.submit_seed(1, square_seed());
    EXPECT_EQ(s.status(), Status::propagating);
    EXPECT_EQ(s.cursor(), 2);
    EXPECT_FALSE(s.pending());
    EXPECT_TRUE(fs::exists(s.mask_path(1)));
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].kind, Event::Kind::mask);
    EXPECT_EQ(events[0].frame, 1);

    EXPECT_THROW(s.submit_seed(2, square_seed()), InvalidTransition);
    s.run_until_input();
    EXPECT_EQ(s.status(), Status::finished);
    EXPECT_EQ(s.cursor(), 5);
    EXPECT_TRUE(s.report().completed);
    EXPECT_EQ(s.report().frames.size(), 4u);
    EXPECT_THROW(s.step(), InvalidTransition);
    for (int n = 1; n <= 4; ++n) EXPECT_TRUE(fs::exists(s.mask_path(n)));
}

TEST(Session, StaticVideoNeedsOneInputPerInterval) {
    TempDir frames("frames"), out("run");
    write_still(frames.path(), 300);
    auto oracle = still_oracle();
    const auto report = run(FrameSequence::open(frames.path()), oracle, Config{}, out.path());
    EXPECT_TRUE(report.completed);
    EXPECT_EQ(report.user_inputs(), 6);
    EXPECT_EQ(report.scheduled_inputs(), 6);
    EXPECT_EQ(report.failure_inputs(), 0);
    for (const auto& f : report.frames)
        if (f.provenance == Provenance::user_seed) EXPECT_EQ((f.frame - 1) % 50, 0) << f.frame;
}

TEST(Session, InputsBoundedByCadence) {
    TempDir frames("frames");
    write_still(frames.path(), 20);
    for (int interval : {1, 3, 7, 19, 20, 25}) {
        TempDir out("run");
        Config c;
        c.reseed_interval = interval;
        auto oracle = still_oracle();
        const auto report = run(FrameSequence::open(frames.path()), oracle, c, out.path());
        EXPECT_EQ(report.user_inputs(), (20 + interval - 1) / interval) << "interval " << interval;
        EXPECT_EQ(oracle.requests(), report.user_inputs());
    }
}

TEST(Session, DeclinedRequestHaltsAndResumes) {
    TempDir frames("frames"), partial("partial"), whole("whole");
    write_still(frames.path(), 30);
    Config c;
    c.reseed_interval = 10;

    ScriptedSeedProvider first_only({{1, square_seed()}});
    {
        Session s(FrameSequence::open(frames.path()), c, partial.path());
        const auto report = run(s, first_only);
        EXPECT_FALSE(report.completed);
        EXPECT_EQ(s.status(), Status::awaiting_reseed);
        EXPECT_EQ(s.pending()->frame, 11);
        EXPECT_EQ(s.pending()->reason, "scheduled");
    }
    auto resumed = Session::resume(FrameSequence::open(frames.path()), partial.path());
    EXPECT_EQ(resumed.status(), Status::awaiting_reseed);
    EXPECT_EQ(resumed.cursor(), 11);
    EXPECT_EQ(resumed.config().reseed_interval, 10);
    EXPECT_EQ(resumed.pool().size(), 1u);
    ScriptedSeedProvider all({{1, square_seed()}, {11, square_seed()}, {21, square_seed()}});
    const auto report = run(resumed, all);
    EXPECT_TRUE(report.completed);
    EXPECT_EQ(report.frames.size(), 30u);
    EXPECT_EQ(report.user_inputs(), 3);

    run(FrameSequence::open(frames.path()), all, c, whole.path());
    for (int n = 1; n <= 30; ++n)
        EXPECT_EQ(slurp(partial / ("masks/" + frame_file_name(n))), slurp(whole / ("masks/" + frame_file_name(n))))
            << "frame " << n;
}

TEST(Session, RunsAreDeterministic) {
    TempDir frames("frames"), a("a"), b("b");
    write_still(frames.path(), 12);
    Config c;
    c.reseed_interval = 5;
    auto o1 = still_oracle(), o2 = still_oracle();
    run(FrameSequence::open(frames.path()), o1, c, a.path());
    run(FrameSequence::open(frames.path()), o2, c, b.path());
    for (int n = 1; n <= 12; ++n)
        EXPECT_EQ(slurp(a / ("masks/" + frame_file_name(n))), slurp(b / ("masks/" + frame_file_name(n))));
    EXPECT_EQ(slurp(a / "keyframes.json"), slurp(b / "keyframes.json"));
}

TEST(Session, SuddenGrowthTriggersSizeFailure) {
    TempDir frames("frames"), out("run");
    const auto truth = [](int n) {
        return egoseg::testing::disk_mask(W, H, 32, 24, n < 10 ? 10.0 : 10.0 * std::sqrt(2.0));
    };
    std::mt19937_64 rng(3);
    std::vector<Frame> seq;
    for (int n = 1; n <= 12; ++n) {
        Frame f = egoseg::testing::stripes(W, H);
        egoseg::testing::paint_ball(f, truth(n), 32, 24);
        egoseg::testing::add_noise(f, 4.0, rng);
        seq.push_back(std::move(f));
    }
    egoseg::testing::write_sequence(frames.path(), seq);
    OracleSeedProvider oracle(truth);
    const auto report = run(FrameSequence::open(frames.path()), oracle, Config{}, out.path());
    ASSERT_EQ(report.frames.size(), 12u);
    const auto& rec = report.frames[9];
    EXPECT_EQ(rec.provenance, Provenance::user_seed);
    EXPECT_NE(std::find(rec.failed_tests.begin(), rec.failed_tests.end(), "size"), rec.failed_tests.end());
    EXPECT_GE(report.failures("size"), 1);
    EXPECT_EQ(report.user_inputs(), 2);
}

TEST(ScriptedSeeds, ParsesBothLayouts) {
    const auto a = ScriptedSeedProvider::from_json(R"([{"frame_index": 1, "vertices": [[0,0],[4,0],[4,4]]}])");
    const auto b =
        ScriptedSeedProvider::from_json(R"({"seeds": [{"frame_index": 3, "vertices": [[0,0],[4,0],[4,4]]}]})");
    ASSERT_EQ(a.seeds().size(), 1u);
    EXPECT_EQ(a.seeds().begin()->first, 1);
    EXPECT_EQ(a.seeds().begin()->second.vertices.size(), 3u);
    EXPECT_EQ(b.seeds().begin()->first, 3);

    ScriptedSeedProvider p = a;
    EXPECT_TRUE(p.request({1, "initial"}, Frame(8, 8)));
    EXPECT_FALSE(p.request({2, "scheduled"}, Frame(8, 8)));
}

TEST(ScriptedSeeds, RejectsBadFiles) {
    EXPECT_THROW(ScriptedSeedProvider::from_json("not json"), Error);
    EXPECT_THROW(ScriptedSeedProvider::from_json(R"([{"vertices": [[0,0],[4,0],[4,4]]}])"), Error);
    EXPECT_THROW(ScriptedSeedProvider::from_json(R"([{"frame_index": 0, "vertices": [[0,0],[4,0],[4,4]]}])"), Error);
    EXPECT_THROW(ScriptedSeedProvider::from_json(R"([{"frame_index": 1, "vertices": [[0,0],[4,0],[4,4]]},
                                                     {"frame_index": 1, "vertices": [[0,0],[4,0],[4,4]]}])"),
                 Error);
    EXPECT_THROW(ScriptedSeedProvider::from_file("/nonexistent/seeds.json"), Error);
}

TEST(Config, JsonRoundTripAndValidation) {
    Config c;
    c.size_fraction = 0.25;
    c.reseed_interval = 7;
    c.band_radius = 4;
    c.segment.lambda = 3.5;
    c.flow.pyramid_levels = 1;
    const auto back = Config::from_json(c.to_json());
    EXPECT_EQ(back.size_fraction, 0.25);
    EXPECT_EQ(back.reseed_interval, 7);
    EXPECT_EQ(back.band_radius, 4);
    EXPECT_EQ(back.segment.lambda, 3.5);
    EXPECT_EQ(back.flow.pyramid_levels, 1);

    Config bad;
    bad.reseed_interval = 0;
    EXPECT_THROW(bad.validate(), Error);
    bad = Config{};
    bad.size_fraction = 1.0;
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_THROW(Config::from_json("{\"reseed_interval\": \"x\"}"), Error);
}

TEST(OutlinePolygon, RasterizesBackToTheRegion) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        BinaryMask m = egoseg::testing::disk_mask(50, 40, 10 + 30 * u(rng), 8 + 24 * u(rng), 2 + 10 * u(rng));
        m = m | egoseg::testing::rect_mask(50, 40, 20, 18, 20 + int(15 * u(rng)) + 1, 22);
        const auto poly = outline_polygon(m);
        if (!poly) continue; // two separate pieces
        EXPECT_TRUE(m.subset_of(rasterize(*poly, 50, 40)));
        EXPECT_EQ(rasterize(*poly, 50, 40), rasterize(*outline_polygon(rasterize(*poly, 50, 40)), 50, 40));
    }
    const auto disk = egoseg::testing::disk_mask(50, 40, 25, 20, 9);
    EXPECT_EQ(rasterize(*outline_polygon(disk), 50, 40), disk);
}

TEST(OutlinePolygon, FillsHolesAndRejectsPieces) {
    BinaryMask ring = egoseg::testing::rect_mask(30, 30, 5, 5, 25, 25);
    const BinaryMask hole = egoseg::testing::rect_mask(30, 30, 10, 10, 20, 20);
    ring = ring & ~hole;
    EXPECT_EQ(rasterize(*outline_polygon(ring), 30, 30), egoseg::testing::rect_mask(30, 30, 5, 5, 25, 25));

    const BinaryMask two = egoseg::testing::rect_mask(30, 30, 1, 1, 5, 5) | egoseg::testing::rect_mask(30, 30, 20, 20, 25, 25);
    EXPECT_FALSE(outline_polygon(two));
    EXPECT_TRUE(outline_polygon(two, 12));
    EXPECT_FALSE(outline_polygon(BinaryMask(30, 30)));
    EXPECT_THROW(hull_polygon(BinaryMask(30, 30)), Error);
}

TEST(HullPolygon, CoversTheMask) {
    const BinaryMask two = egoseg::testing::rect_mask(30, 30, 1, 1, 5, 5) | egoseg::testing::rect_mask(30, 30, 20, 20, 25, 25);
    const auto cover = rasterize(hull_polygon(two), 30, 30);
    EXPECT_TRUE(two.subset_of(cover));
    EXPECT_TRUE(cover.at(12, 12));
    EXPECT_FALSE(cover.at(20, 4));
}
