#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "egoseg/confidence.hpp"
#include "egoseg/flow.hpp"
#include "egoseg/image.hpp"
#include "egoseg/report.hpp"
#include "egoseg/segmenter.hpp"

namespace egoseg::session {

struct Config {
    /// Size test fraction f: flag when the mask shrinks to (1-f) or grows to (1+f) of the keyframe's.
    double size_fraction = 0.39;
    /// Frames between forced user inputs, counted from the last keyframe.
    int reseed_interval = 50;
    /// Uncertainty band radius in pixels; 0 = scale with the object (see propagator::auto_band_radius).
    int band_radius = 0;
    double weight_tol = 0.15;
    double projection_growth = confidence::default_projection_growth;
    segmenter::Options segment{};
    flow::FlowParams flow{15.0, 200, 3};

    void validate() const;
    std::string to_json() const;
    static Config from_json(const std::string& text);
    confidence::Config confidence() const { return {size_fraction, projection_growth, weight_tol}; }
};

/// Raised for requests that do not fit the session's current state.
class InvalidTransition : public Error {
public:
    using Error::Error;
};

enum class Status { awaiting_seed, propagating, awaiting_reseed, finished };
std::string to_string(Status s);

struct SeedRequest {
    int frame = 0;
    /// "initial", "scheduled", or '+'-joined failure names such as "size+model_match".
    std::string reason;
};

/// Supplies seed polygons when the session asks for user input.
class SeedProvider {
public:
    virtual ~SeedProvider() = default;
    /// std::nullopt declines the request; the session then halts.
    virtual std::optional<SeedPolygon> request(const SeedRequest& req, const Frame& frame) = 0;
};

/// Seeds read from a file, keyed by frame number. Requests for frames without
/// an entry are declined.
class ScriptedSeedProvider : public SeedProvider {
public:
    ScriptedSeedProvider() = default;
    explicit ScriptedSeedProvider(std::map<int, SeedPolygon> seeds) : seeds_(std::move(seeds)) {}
    /// JSON: [{"frame_index": 1, "vertices": [[x, y], ...]}, ...] or {"seeds": [...]}.
    static ScriptedSeedProvider from_file(const std::filesystem::path& path);
    static ScriptedSeedProvider from_json(const std::string& text);

    std::optional<SeedPolygon> request(const SeedRequest& req, const Frame& frame) override;
    const std::map<int, SeedPolygon>& seeds() const { return seeds_; }

private:
    std::map<int, SeedPolygon> seeds_;
};

/// Convex hull of a mask's pixel squares after dilating by `padding` pixels.
SeedPolygon hull_polygon(const BinaryMask& mask, int padding = 0);

/// Traced outline (pixel-edge polygon) of a mask after dilating by `padding`
/// pixels and filling holes. Returns std::nullopt when the padded mask is not
/// a single 4-connected region.
std::optional<SeedPolygon> outline_polygon(const BinaryMask& mask, int padding = 0);

/// Test-only provider that seeds from a reference mask, like an annotator
/// tracing a loose polygon around the true object. Falls back to the convex
/// hull when the padded object is in several pieces.
class OracleSeedProvider : public SeedProvider {
public:
    OracleSeedProvider(std::function<BinaryMask(int frame)> truth, int padding = 0)
        : truth_(std::move(truth)), padding_(padding) {}
    std::optional<SeedPolygon> request(const SeedRequest& req, const Frame& frame) override;
    int requests() const { return requests_; }

private:
    std::function<BinaryMask(int)> truth_;
    int padding_;
    int requests_ = 0;
};

struct Event {
    enum class Kind { state, mask } kind = Kind::state;
    int frame = 0;
    Status status = Status::awaiting_seed;
    std::string reason;
};

/// One object tracked through one frame sequence. Frames are processed in
/// order; each frame ends up either propagated (confidence passed) or user
/// seeded. Everything needed to resume is persisted under the run directory:
///   config.json, state.json, keyframes.json, report.json, masks/NNNNNN.png
class Session {
public:
    Session(FrameSequence sequence, Config config, std::filesystem::path run_dir, std::string name = {});
    /// Reopens a run directory written by an earlier session.
    static Session resume(FrameSequence sequence, const std::filesystem::path& run_dir);

    Status status() const { return status_; }
    /// Next frame to be processed (1-based). Masks exist for every frame before it.
    int cursor() const { return cursor_; }
    /// The outstanding request while awaiting a seed.
    std::optional<SeedRequest> pending() const;
    const SessionReport& report() const { return report_; }
    const confidence::KeyframePool& pool() const { return pool_; }
    const Config& config() const { return config_; }
    const FrameSequence& sequence() const { return sequence_; }
    const std::filesystem::path& run_dir() const { return run_dir_; }
    std::filesystem::path mask_path(int frame) const;

    /// Answers the pending request. Throws egoseg::Error when not awaiting a
    /// seed, on a frame mismatch, or for an invalid polygon; the session state
    /// is unchanged in those cases.
    void submit_seed(int frame, const SeedPolygon& seed);
    /// Processes the frame at the cursor. Only valid while propagating.
    void step();
    /// Steps until a seed is needed or the sequence ends.
    void run_until_input();

    void set_listener(std::function<void(const Event&)> listener) { listener_ = std::move(listener); }

    /// state.json contents.
    std::string state_json() const;

private:
    void persist_state() const;
    void emit(Event::Kind kind, int frame);
    void finish_frame(FrameRecord rec, const segmenter::SegmentationResult& result, const Frame& frame);
    const Frame& frame(int number);

    FrameSequence sequence_;
    Config config_;
    std::filesystem::path run_dir_;
    Status status_ = Status::awaiting_seed;
    int cursor_ = 1;
    int last_keyframe_ = 0;
    std::string pending_reason_ = "initial";
    FrameRecord pending_record_{};
    segmenter::SegmentationResult current_;
    confidence::KeyframePool pool_;
    SessionReport report_;
    std::map<int, Frame> frame_cache_;
    std::function<void(const Event&)> listener_;
};

/// Drives a session to completion, asking `provider` whenever input is
/// needed. Stops early (status awaiting_*) when the provider declines.
SessionReport run(Session& session, SeedProvider& provider);
SessionReport run(const FrameSequence& sequence, SeedProvider& provider, const Config& config,
                  const std::filesystem::path& run_dir);

} // namespace egoseg::session
