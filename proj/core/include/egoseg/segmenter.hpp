#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "egoseg/gmm.hpp"
#include "egoseg/image.hpp"
#include "egoseg/mincut.hpp"

namespace egoseg::segmenter {

/// Raised when graph cut collapses to an empty or full-frame mask.
class DegenerateSegmentation : public Error {
public:
    using Error::Error;
};

struct Options {
    gmm::FitOptions fit{};
    double prior_cap = gmm::default_prior_cap;
    double lambda = 10.0;
    /// Stop when fewer than this fraction of the frame's pixels flip.
    double convergence_fraction = 0.001;
    int max_iterations = 10;
    /// Terminal cost that pins a pixel to its given label.
    double hard_constraint = 1e6;
    /// Per-iteration energies and flip counts are written here when set.
    std::ostream* log = nullptr;
};

struct SegmentationResult {
    BinaryMask mask;
    gmm::ColorMixtureModel fg_model;
    gmm::ColorMixtureModel bg_model;
    int iterations = 0;
    std::vector<std::size_t> changed_history;
};

/// Iterated graph cut from a polygon seed: fit both color models from the
/// current labeling, cut, refit, until the number of flipped pixels drops under
/// the convergence threshold or the iteration budget runs out. The returned
/// models are fit to the returned mask.
SegmentationResult segment_from_seed(const Frame& frame, const SeedPolygon& seed, const Options& options = {});

/// Same loop starting from an arbitrary initial labeling.
SegmentationResult segment_from_mask(const Frame& frame, const BinaryMask& initial, const Options& options = {});

/// Initial centers for a refit. Null members fall back to the models used for the cut.
struct WarmStart {
    const gmm::ColorMixtureModel* fg = nullptr;
    const gmm::ColorMixtureModel* bg = nullptr;
};

/// Relabels only the `uncertain` pixels with one graph cut using the supplied
/// models; every other pixel keeps its label from `labeled`. Models are then
/// refit once over the final labeling, warm-started from `refit_from` (or the
/// supplied models) so mode indices keep their meaning. An empty uncertain
/// region returns the input unchanged.
SegmentationResult segment_from_prior_mask(const Frame& frame, const BinaryMask& labeled, const BinaryMask& uncertain,
                                           const gmm::ColorMixtureModel& fg_model,
                                           const gmm::ColorMixtureModel& bg_model, const Options& options = {},
                                           WarmStart refit_from = {});

/// Graph with data costs from the two models' priors and gradient smoothness.
mincut::PixelGraph build_graph(const Frame& frame, const gmm::ColorMixtureModel& fg_model,
                               const gmm::ColorMixtureModel& bg_model, const Options& options);

} // namespace egoseg::segmenter
