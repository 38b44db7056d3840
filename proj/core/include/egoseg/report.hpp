#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace egoseg {

enum class Provenance { user_seed, propagated };

/// What happened on one frame of a session.
struct FrameRecord {
    int frame = 0;
    Provenance provenance = Provenance::propagated;
    /// For user seeds: "initial", "scheduled", or the failure that triggered the request.
    std::string seed_reason;
    /// Confidence tests (or "object_lost" / "degenerate") that rejected the prediction.
    std::vector<std::string> failed_tests;
    double flow_seconds = 0.0;
    double processing_seconds = 0.0;
    double total_seconds = 0.0;
    std::size_t mask_area = 0;
};

struct SessionReport {
    std::string video;
    int width = 0;
    int height = 0;
    int sequence_length = 0;
    bool completed = false;
    std::vector<FrameRecord> frames;

    int user_inputs() const;
    int scheduled_inputs() const;
    int failure_inputs() const;
    /// Failure-driven reseeds that the named test contributed to.
    int failures(const std::string& test) const;

    std::string to_json() const;
    static SessionReport from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static SessionReport load(const std::filesystem::path& path);
};

} // namespace egoseg
