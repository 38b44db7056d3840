#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egoseg/image.hpp"
#include "egoseg/report.hpp"

namespace egoseg::analytics {

/// A = predicted, B = reference.
/// dice = 2|A∩B| / (|A| + |B|), precision = |A∩B| / |A|, recall = |A∩B| / |B|.
/// Two empty masks agree perfectly; exactly one empty mask scores zero throughout.
struct OverlapScores {
    double dice = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

OverlapScores overlap(const BinaryMask& pred, const BinaryMask& truth);
/// Fraction of pixels on which the two masks agree.
double pixel_accuracy(const BinaryMask& pred, const BinaryMask& truth);

/// Recency-weighted occupancy: every foreground pixel of frame i adds i / L.
struct Heatmap {
    int width = 0;
    int height = 0;
    int total_frames = 0;
    std::vector<double> values;

    Heatmap() = default;
    Heatmap(int w, int h, int L);
    double at(int x, int y) const { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    /// Adds mask of frame `frame_number` (1-based) with weight frame_number / L.
    void add(const BinaryMask& mask, int frame_number);
};

/// masks[k] is frame k + 1. Requires masks.size() <= L and equal dimensions.
Heatmap accumulate_heatmap(std::span<const BinaryMask> masks, int total_frames);

/// Min-max normalised values in [0, 1]; all zero for a constant heatmap.
std::vector<double> normalize(const Heatmap& h);
/// Black -> red -> yellow -> white, piecewise linear over [0, 1].
Rgb ramp_color(double t);
Frame render_heatmap(const Heatmap& h);
void write_heatmap_raw(const std::filesystem::path& path, const Heatmap& h);

/// Per-object summary in the column layout of the usual performance table.
struct RunStats {
    std::string object;
    int frames = 0;
    double total_seconds = 0.0;      // mean per frame
    double flow_seconds = 0.0;       // mean per frame
    double processing_seconds = 0.0; // mean per frame
    double mean_area_pixels = 0.0;
    double mean_area_percent = 0.0;
    int user_inputs = 0;
    double user_inputs_per_300 = 0.0;
    std::optional<double> dice;
    std::optional<double> pixel_accuracy;
};

RunStats collect_stats(const SessionReport& report);

/// Mean/std of DICE and mean precision/recall over matched mask pairs.
struct AgreementSummary {
    int pairs = 0;
    double dice_mean = 0.0;
    double dice_std = 0.0;
    double precision_mean = 0.0;
    double recall_mean = 0.0;
    double pixel_accuracy_mean = 0.0;
};

AgreementSummary summarize(std::span<const OverlapScores> scores, std::span<const double> accuracies = {});

std::string format_run_stats(std::span<const RunStats> rows, bool delimited);
std::string format_agreement(const AgreementSummary& s, bool delimited);

} // namespace egoseg::analytics
