#pragma once

#include "egoseg/flow.hpp"
#include "egoseg/image.hpp"
#include "egoseg/segmenter.hpp"

namespace egoseg::propagator {

/// Raised when the warped mask is empty (the object left the frame).
class ObjectLost : public Error {
public:
    using Error::Error;
};

/// Partition of the frame for refinement: the band is relabeled by graph cut,
/// the other two parts keep their labels.
struct UncertainRegion {
    BinaryMask band;
    BinaryMask inner_certain_fg;
    BinaryMask outer_certain_bg;
};

/// Mean object flow (in pixels) toward an edge needed before that edge's strip joins the band.
inline constexpr double edge_flow_threshold = 0.5;

/// band = dilate(warped, r) \ erode(warped, r), plus a strip of width r along
/// every frame edge the object is both near (within r) and moving toward. The
/// strip spans the mask's extent along that edge padded by r.
UncertainRegion build_uncertain_region(const BinaryMask& warped, const flow::FlowField& flow, int radius);

/// max(5, round(0.05 * sqrt(area))).
int auto_band_radius(std::size_t mask_area);

struct Prediction {
    segmenter::SegmentationResult result;
    BinaryMask warped;
    int radius = 0;
    double flow_seconds = 0.0;
    double refine_seconds = 0.0;
};

/// Flow, forward warp, uncertainty band, band graph cut with the previous
/// frame's models. A radius <= 0 selects auto_band_radius. Throws ObjectLost
/// when the warp leaves nothing in the frame. `refit_from` seeds the model
/// refit (the session passes its latest keyframe's models).
Prediction predict_next(const Frame& prev_frame, const Frame& curr_frame,
                        const segmenter::SegmentationResult& prev_result, int radius,
                        const flow::FlowParams& flow_params = {}, const segmenter::Options& options = {},
                        segmenter::WarmStart refit_from = {});

} // namespace egoseg::propagator
