#include "egoseg/segmenter.hpp"

#include <ostream>

namespace egoseg::segmenter {

namespace {

mincut::PixelGraph graph_with_smoothness(const Frame& frame, const gmm::ColorMixtureModel& fg_model,
                                         const gmm::ColorMixtureModel& bg_model, const Options& options,
                                         mincut::SmoothnessField smoothness) {
    auto p = gmm::priors(frame, fg_model, bg_model, options.prior_cap);
    mincut::PixelGraph g;
    g.width = frame.width();
    g.height = frame.height();
    g.fg_cost = std::move(p.fg);
    g.bg_cost = std::move(p.bg);
    g.smoothness = std::move(smoothness);
    return g;
}

std::size_t count_flips(const BinaryMask& a, const BinaryMask& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) n += a[i] != b[i];
    return n;
}

void check_not_degenerate(const BinaryMask& m) {
    const std::size_t c = m.count();
    if (c == 0) throw DegenerateSegmentation("degenerate segmentation: mask is empty");
    if (c == m.pixel_count()) throw DegenerateSegmentation("degenerate segmentation: mask covers the whole frame");
}

struct Models {
    gmm::ColorMixtureModel fg;
    gmm::ColorMixtureModel bg;
};

Models fit_models(const Frame& frame, const BinaryMask& labels, const Options& options, const Models* warm) {
    const auto fg = gmm::samples(frame, labels, true);
    const auto bg = gmm::samples(frame, labels, false);
    return {gmm::fit(fg, options.fit, warm ? &warm->fg : nullptr), gmm::fit(bg, options.fit, warm ? &warm->bg : nullptr)};
}

} // namespace

mincut::PixelGraph build_graph(const Frame& frame, const gmm::ColorMixtureModel& fg_model,
                               const gmm::ColorMixtureModel& bg_model, const Options& options) {
    return graph_with_smoothness(frame, fg_model, bg_model, options,
                                 mincut::smoothness_from_gradient(frame, options.lambda));
}

SegmentationResult segment_from_mask(const Frame& frame, const BinaryMask& initial, const Options& options) {
    if (initial.width() != frame.width() || initial.height() != frame.height())
        throw Error("seed mask does not match frame dimensions");
    if (options.max_iterations < 1) throw Error("max_iterations must be at least 1");
    const std::size_t inside = initial.count();
    const std::size_t k = std::size_t(options.fit.modes);
    if (inside < k || initial.pixel_count() - inside < k)
        throw Error("seed must leave at least " + std::to_string(k) + " pixels on each side");

    const auto smoothness = mincut::smoothness_from_gradient(frame, options.lambda);
    const double threshold = options.convergence_fraction * double(frame.pixel_count());

    SegmentationResult r;
    r.mask = initial;
    Models models = fit_models(frame, r.mask, options, nullptr);
    for (int it = 1; it <= options.max_iterations; ++it) {
        const auto graph = graph_with_smoothness(frame, models.fg, models.bg, options, smoothness);
        auto cut = mincut::solve(graph);
        const std::size_t flips = count_flips(cut.labels, r.mask);
        r.changed_history.push_back(flips);
        r.iterations = it;
        if (options.log)
            *options.log << "graph-cut iteration " << it << ": energy " << cut.flow << ", flipped " << flips
                         << ", foreground " << cut.labels.count() << '\n';
        r.mask = std::move(cut.labels);
        check_not_degenerate(r.mask);
        models = fit_models(frame, r.mask, options, &models);
        if (double(flips) < threshold) break;
    }
    r.fg_model = std::move(models.fg);
    r.bg_model = std::move(models.bg);
    return r;
}

SegmentationResult segment_from_seed(const Frame& frame, const SeedPolygon& seed, const Options& options) {
    return segment_from_mask(frame, rasterize(seed, frame.width(), frame.height()), options);
}

SegmentationResult segment_from_prior_mask(const Frame& frame, const BinaryMask& labeled, const BinaryMask& uncertain,
                                           const gmm::ColorMixtureModel& fg_model,
                                           const gmm::ColorMixtureModel& bg_model, const Options& options,
                                           WarmStart refit_from) {
    if (labeled.width() != frame.width() || labeled.height() != frame.height() || !labeled.same_shape(uncertain))
        throw Error("masks do not match frame dimensions");

    SegmentationResult r;
    r.iterations = 1;
    if (uncertain.none()) {
        r.mask = labeled;
        r.fg_model = fg_model;
        r.bg_model = bg_model;
        r.changed_history = {0};
        return r;
    }

    auto graph = build_graph(frame, fg_model, bg_model, options);
    for (std::size_t i = 0; i < labeled.pixel_count(); ++i) {
        if (uncertain[i]) continue;
        graph.fg_cost[i] = labeled[i] ? 0.0 : options.hard_constraint;
        graph.bg_cost[i] = labeled[i] ? options.hard_constraint : 0.0;
    }
    auto cut = mincut::solve(graph);
    r.changed_history = {count_flips(cut.labels, labeled)};
    if (options.log)
        *options.log << "band graph-cut: energy " << cut.flow << ", flipped " << r.changed_history.front() << '\n';
    r.mask = std::move(cut.labels);
    check_not_degenerate(r.mask);

    const Models warm{refit_from.fg ? *refit_from.fg : fg_model, refit_from.bg ? *refit_from.bg : bg_model};
    Models refit = fit_models(frame, r.mask, options, &warm);
    r.fg_model = std::move(refit.fg);
    r.bg_model = std::move(refit.bg);
    return r;
}

} // namespace egoseg::segmenter
