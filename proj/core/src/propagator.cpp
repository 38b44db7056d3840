#include "egoseg/propagator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace egoseg::propagator {

namespace {

void fill_rect(BinaryMask& m, int x0, int y0, int x1, int y1) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, m.width() - 1);
    y1 = std::min(y1, m.height() - 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m.set(x, y, true);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

UncertainRegion build_uncertain_region(const BinaryMask& warped, const flow::FlowField& flow, int radius) {
    if (radius < 1) throw Error("band radius must be at least 1");
    if (warped.none()) throw Error("cannot build an uncertain region around an empty mask");
    if (flow.width != warped.width() || flow.height != warped.height()) throw Error("flow field does not match mask");

    const int w = warped.width(), h = warped.height();
    const BinaryMask outer = dilate(warped, radius);
    UncertainRegion region;
    region.inner_certain_fg = erode(warped, radius);
    region.band = outer - region.inner_certain_fg;

    const auto [mu, mv] = flow::mean_flow(flow, warped);
    const BoundingBox box = bounding_box(warped);
    const int r = radius;
    BinaryMask strips(w, h);
    if (mu <= -edge_flow_threshold && box.x0 < r) fill_rect(strips, 0, box.y0 - r, r - 1, box.y1 + r);
    if (mu >= edge_flow_threshold && box.x1 >= w - r) fill_rect(strips, w - r, box.y0 - r, w - 1, box.y1 + r);
    if (mv <= -edge_flow_threshold && box.y0 < r) fill_rect(strips, box.x0 - r, 0, box.x1 + r, r - 1);
    if (mv >= edge_flow_threshold && box.y1 >= h - r) fill_rect(strips, box.x0 - r, h - r, box.x1 + r, h - 1);

    // Erosion treats the outside as background, so the interior never reaches a strip.
    region.band |= strips - region.inner_certain_fg;
    region.outer_certain_bg = ~(outer | strips);
    return region;
}

int auto_band_radius(std::size_t mask_area) {
    return std::max(5, int(std::lround(0.05 * std::sqrt(double(mask_area)))));
}

Prediction predict_next(const Frame& prev_frame, const Frame& curr_frame,
                        const segmenter::SegmentationResult& prev_result, int radius,
                        const flow::FlowParams& flow_params, const segmenter::Options& options,
                        segmenter::WarmStart refit_from) {
    Prediction p;
    auto t0 = std::chrono::steady_clock::now();
    const auto field = flow::compute_flow(prev_frame, curr_frame, flow_params);
    p.flow_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    p.warped = flow::warp_mask(prev_result.mask, field);
    if (p.warped.none()) throw ObjectLost("object lost: warped mask is empty");
    p.radius = radius > 0 ? radius : auto_band_radius(p.warped.count());
    const auto region = build_uncertain_region(p.warped, field, p.radius);
    p.result = segmenter::segment_from_prior_mask(curr_frame, p.warped, region.band, prev_result.fg_model,
                                                  prev_result.bg_model, options, refit_from);
    p.refine_seconds = seconds_since(t0);
    return p;
}

} // namespace egoseg::propagator
