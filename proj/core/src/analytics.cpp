#include "egoseg/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace egoseg::analytics {

OverlapScores overlap(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth)) throw Error("overlap needs masks of equal dimensions");
    std::size_t a = 0, b = 0, both = 0;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        a += pred[i];
        b += truth[i];
        both += pred[i] && truth[i];
    }
    if (a == 0 && b == 0) return {1.0, 1.0, 1.0};
    if (a == 0 || b == 0) return {0.0, 0.0, 0.0};
    return {2.0 * double(both) / double(a + b), double(both) / double(a), double(both) / double(b)};
}

double pixel_accuracy(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth)) throw Error("pixel accuracy needs masks of equal dimensions");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) agree += pred[i] == truth[i];
    return double(agree) / double(pred.pixel_count());
}

Heatmap::Heatmap(int w, int h, int L) : width(w), height(h), total_frames(L) {
    if (w <= 0 || h <= 0) throw Error("heatmap dimensions must be positive");
    if (L <= 0) throw Error("total frame count must be positive");
    values.assign(std::size_t(w) * std::size_t(h), 0.0);
}

void Heatmap::add(const BinaryMask& mask, int frame_number) {
    if (mask.width() != width || mask.height() != height) throw Error("mask does not match heatmap dimensions");
    if (frame_number < 1 || frame_number > total_frames) throw Error("frame number outside 1..L");
    const double weight = double(frame_number) / double(total_frames);
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask[i]) values[i] += weight;
}

Heatmap accumulate_heatmap(std::span<const BinaryMask> masks, int total_frames) {
    if (masks.empty()) throw Error("no masks to accumulate");
    if (int(masks.size()) > total_frames) throw Error("more masks than total frames");
    Heatmap h(masks.front().width(), masks.front().height(), total_frames);
    for (std::size_t k = 0; k < masks.size(); ++k) h.add(masks[k], int(k) + 1);
    return h;
}

std::vector<double> normalize(const Heatmap& h) {
    std::vector<double> out(h.values.size(), 0.0);
    if (h.values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(h.values.begin(), h.values.end());
    const double range = *hi - *lo;
    if (range <= 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (h.values[i] - *lo) / range;
    return out;
}

Rgb ramp_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto byte = [](double v) { return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    const double s = t * 3.0;
    return {byte(s), byte(s - 1.0), byte(s - 2.0)};
}

Frame render_heatmap(const Heatmap& h) {
    const auto t = normalize(h);
    Frame img(h.width, h.height);
    for (std::size_t i = 0; i < t.size(); ++i) img.pixels()[i] = ramp_color(t[i]);
    return img;
}

void write_heatmap_raw(const std::filesystem::path& path, const Heatmap& h) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write heatmap " + path.string());
    out << "# heatmap width height total_frames, then row-major accumulator values\n";
    out << h.width << ' ' << h.height << ' ' << h.total_frames << '\n';
    char buf[32];
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
            std::snprintf(buf, sizeof buf, "%.17g", h.at(x, y));
            out << (x ? " " : "") << buf;
        }
        out << '\n';
    }
}

RunStats collect_stats(const SessionReport& report) {
    RunStats s;
    s.object = report.video;
    s.frames = int(report.frames.size());
    s.user_inputs = report.user_inputs();
    if (s.frames == 0) return s;
    for (const auto& f : report.frames) {
        s.total_seconds += f.total_seconds;
        s.flow_seconds += f.flow_seconds;
        s.processing_seconds += f.processing_seconds;
        s.mean_area_pixels += double(f.mask_area);
    }
    const double n = s.frames;
    s.total_seconds /= n;
    s.flow_seconds /= n;
    s.processing_seconds /= n;
    s.mean_area_pixels /= n;
    const double frame_pixels = double(report.width) * double(report.height);
    if (frame_pixels > 0) s.mean_area_percent = 100.0 * s.mean_area_pixels / frame_pixels;
    s.user_inputs_per_300 = double(s.user_inputs) * 300.0 / n;
    return s;
}

AgreementSummary summarize(std::span<const OverlapScores> scores, std::span<const double> accuracies) {
    AgreementSummary s;
    s.pairs = int(scores.size());
    if (scores.empty()) return s;
    for (const auto& o : scores) {
        s.dice_mean += o.dice;
        s.precision_mean += o.precision;
        s.recall_mean += o.recall;
    }
    const double n = double(scores.size());
    s.dice_mean /= n;
    s.precision_mean /= n;
    s.recall_mean /= n;
    double var = 0.0;
    for (const auto& o : scores) var += (o.dice - s.dice_mean) * (o.dice - s.dice_mean);
    s.dice_std = std::sqrt(var / n);
    if (!accuracies.empty()) {
        for (double a : accuracies) s.pixel_accuracy_mean += a;
        s.pixel_accuracy_mean /= double(accuracies.size());
    }
    return s;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::string format_run_stats(std::span<const RunStats> rows, bool delimited) {
    std::ostringstream out;
    const char* header[] = {"Object", "Total Time(sec)", "Optical Flow Time(sec)", "Processing Time(sec)",
                            "Image Size(px)", "% Area", "User Input (per 300 frames)", "DICE", "Pixel Accuracy"};
    if (delimited) {
        for (std::size_t i = 0; i < std::size(header); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
    } else {
        char line[256];
        std::snprintf(line, sizeof line, "%-12s %10s %10s %10s %12s %8s %10s %8s %8s\n", "Object", "Total(s)",
                      "Flow(s)", "Proc(s)", "Area(px)", "%Area", "Input/300", "DICE", "PixAcc");
        out << line;
    }
    for (const auto& r : rows) {
        const std::string dice = r.dice ? fixed(*r.dice, 4) : "-";
        const std::string acc = r.pixel_accuracy ? fixed(*r.pixel_accuracy, 4) : "-";
        if (delimited) {
            out << r.object << ',' << fixed(r.total_seconds, 4) << ',' << fixed(r.flow_seconds, 4) << ','
                << fixed(r.processing_seconds, 4) << ',' << fixed(r.mean_area_pixels, 0) << ','
                << fixed(r.mean_area_percent, 2) << ',' << fixed(r.user_inputs_per_300, 1) << ',' << dice << ','
                << acc << '\n';
        } else {
            char line[256];
            std::snprintf(line, sizeof line, "%-12s %10.4f %10.4f %10.4f %12.0f %7.2f%% %10.1f %8s %8s\n",
                          r.object.c_str(), r.total_seconds, r.flow_seconds, r.processing_seconds, r.mean_area_pixels,
                          r.mean_area_percent, r.user_inputs_per_300, dice.c_str(), acc.c_str());
            out << line;
        }
    }
    return out.str();
}

std::string format_agreement(const AgreementSummary& s, bool delimited) {
    std::ostringstream out;
    if (delimited) {
        out << "pairs,dice_mean,dice_std,precision,recall,pixel_accuracy\n"
            << s.pairs << ',' << fixed(s.dice_mean, 4) << ',' << fixed(s.dice_std, 4) << ','
            << fixed(s.precision_mean, 4) << ',' << fixed(s.recall_mean, 4) << ',' << fixed(s.pixel_accuracy_mean, 4)
            << '\n';
    } else {
        out << "Frames compared: " << s.pairs << '\n'
            << "DICE       mean " << fixed(s.dice_mean, 4) << "  std " << fixed(s.dice_std, 4) << '\n'
            << "Precision  " << fixed(s.precision_mean, 4) << '\n'
            << "Recall     " << fixed(s.recall_mean, 4) << '\n'
            << "Pixel acc. " << fixed(s.pixel_accuracy_mean, 4) << '\n';
    }
    return out.str();
}

} // namespace egoseg::analytics
