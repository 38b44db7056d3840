#include "egoseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>

#include <Eigen/LU>

namespace egoseg::gmm {

Mode::Mode(const Eigen::Vector3d& center, const Eigen::Matrix3d& covariance, double weight)
    : center_(center), covariance_(covariance), weight_(weight) {
    const double det = covariance_.determinant();
    if (!(det > 0.0)) throw Error("mode covariance must be positive definite");
    inverse_ = covariance_.inverse();
    log_norm_ = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + std::log(det));
}

double Mode::log_density(const Eigen::Vector3d& x) const {
    const Eigen::Vector3d d = x - center_;
    return log_norm_ - 0.5 * d.dot(inverse_ * d);
}

ColorMixtureModel::ColorMixtureModel(std::vector<Mode> modes) {
    if (modes.empty()) throw Error("a mixture model needs at least one mode");
    double total = 0.0;
    for (const Mode& m : modes) {
        if (m.weight() < 0.0) throw Error("mode weights must be non-negative");
        total += m.weight();
    }
    if (!(total > 0.0)) throw Error("mode weights must not all be zero");
    modes_.reserve(modes.size());
    for (const Mode& m : modes) modes_.emplace_back(m.center(), m.covariance(), m.weight() / total);
}

double ColorMixtureModel::log_density(const Eigen::Vector3d& x) const {
    // log-sum-exp over modes
    double best = -std::numeric_limits<double>::infinity();
    double terms[16];
    std::vector<double> spill;
    double* t = terms;
    if (modes_.size() > 16) {
        spill.resize(modes_.size());
        t = spill.data();
    }
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        t[i] = modes_[i].weight() > 0.0 ? std::log(modes_[i].weight()) + modes_[i].log_density(x)
                                        : -std::numeric_limits<double>::infinity();
        best = std::max(best, t[i]);
    }
    if (!std::isfinite(best)) return best;
    double sum = 0.0;
    for (std::size_t i = 0; i < modes_.size(); ++i) sum += std::exp(t[i] - best);
    return best + std::log(sum);
}

std::size_t ColorMixtureModel::nearest_mode(const Eigen::Vector3d& x) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        const double d = (x - modes_[i].center()).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

// Samples collapse to distinct colors with multiplicities; k-means on the
// weighted distinct set is identical to k-means on the raw samples.
struct ColorHistogram {
    std::vector<Eigen::Vector3d> colors;
    std::vector<double> counts;
    double total = 0.0;
};

ColorHistogram histogram(std::span<const Rgb> samples) {
    std::vector<std::uint32_t> keys;
    keys.reserve(samples.size());
    for (const Rgb& c : samples) keys.push_back((std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | c.b);
    std::sort(keys.begin(), keys.end());
    ColorHistogram h;
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        const std::uint32_t k = keys[i];
        h.colors.emplace_back(double(k >> 16), double((k >> 8) & 0xff), double(k & 0xff));
        h.counts.push_back(double(j - i));
        i = j;
    }
    h.total = double(samples.size());
    return h;
}

std::vector<Eigen::Vector3d> kmeanspp_seeds(const ColorHistogram& h, int k, std::mt19937_64& rng) {
    std::vector<Eigen::Vector3d> centers;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // first center: a sample drawn uniformly, i.e. a color drawn by multiplicity
    double target = unit(rng) * h.total;
    std::size_t pick = 0;
    for (double acc = 0.0; pick + 1 < h.colors.size(); ++pick) {
        acc += h.counts[pick];
        if (acc > target) break;
    }
    centers.push_back(h.colors[pick]);

    std::vector<double> d2(h.colors.size());
    for (std::size_t i = 0; i < h.colors.size(); ++i) d2[i] = (h.colors[i] - centers[0]).squaredNorm();

    while (int(centers.size()) < k) {
        double mass = 0.0;
        for (std::size_t i = 0; i < d2.size(); ++i) mass += h.counts[i] * d2[i];
        if (!(mass > 0.0)) break; // every color already is a center
        target = unit(rng) * mass;
        pick = d2.size();
        double acc = 0.0;
        for (std::size_t i = 0; i < d2.size(); ++i) {
            if (d2[i] <= 0.0) continue;
            acc += h.counts[i] * d2[i];
            pick = i;
            if (acc > target) break;
        }
        centers.push_back(h.colors[pick]);
        for (std::size_t i = 0; i < d2.size(); ++i)
            d2[i] = std::min(d2[i], (h.colors[i] - centers.back()).squaredNorm());
    }
    return centers;
}

std::size_t nearest(const std::vector<Eigen::Vector3d>& centers, const Eigen::Vector3d& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.size(); ++j) {
        const double d = (x - centers[j]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

} // namespace

ColorMixtureModel fit(std::span<const Rgb> samples, const FitOptions& options, const ColorMixtureModel* warm_start) {
    if (samples.empty()) throw Error("cannot fit a color model to an empty sample set");
    if (options.modes < 1) throw Error("mode count must be at least 1");

    const ColorHistogram h = histogram(samples);
    const int k = std::min<int>(options.modes, int(h.colors.size()));

    std::vector<Eigen::Vector3d> centers;
    if (warm_start && !warm_start->empty()) {
        for (const Mode& m : warm_start->modes()) centers.push_back(m.center());
    } else {
        std::mt19937_64 rng(options.seed);
        centers = kmeanspp_seeds(h, k, rng);
    }

    std::vector<std::size_t> label(h.colors.size(), std::size_t(-1));
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < h.colors.size(); ++i) {
            const std::size_t j = nearest(centers, h.colors[i]);
            if (j != label[i]) {
                label[i] = j;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Eigen::Vector3d> sums(centers.size(), Eigen::Vector3d::Zero());
        std::vector<double> mass(centers.size(), 0.0);
        for (std::size_t i = 0; i < h.colors.size(); ++i) {
            sums[label[i]] += h.counts[i] * h.colors[i];
            mass[label[i]] += h.counts[i];
        }
        for (std::size_t j = 0; j < centers.size(); ++j)
            if (mass[j] > 0.0) centers[j] = sums[j] / mass[j];
    }

    // Empirical statistics of the final partition; empty clusters are dropped.
    std::vector<Eigen::Vector3d> sums(centers.size(), Eigen::Vector3d::Zero());
    std::vector<double> mass(centers.size(), 0.0);
    for (std::size_t i = 0; i < h.colors.size(); ++i) {
        sums[label[i]] += h.counts[i] * h.colors[i];
        mass[label[i]] += h.counts[i];
    }
    std::vector<Eigen::Vector3d> means(centers.size());
    for (std::size_t j = 0; j < centers.size(); ++j)
        means[j] = mass[j] > 0.0 ? Eigen::Vector3d(sums[j] / mass[j]) : centers[j];
    std::vector<Eigen::Matrix3d> scatter(centers.size(), Eigen::Matrix3d::Zero());
    for (std::size_t i = 0; i < h.colors.size(); ++i) {
        const Eigen::Vector3d d = h.colors[i] - means[label[i]];
        scatter[label[i]] += h.counts[i] * d * d.transpose();
    }

    std::vector<Mode> modes;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        if (mass[j] <= 0.0) continue;
        Eigen::Matrix3d cov = scatter[j] / mass[j];
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal().array() += options.regularization;
        modes.emplace_back(means[j], cov, mass[j] / h.total);
    }
    return ColorMixtureModel(std::move(modes));
}

std::vector<Rgb> samples(const Frame& frame, const BinaryMask& mask, bool value) {
    if (frame.width() != mask.width() || frame.height() != mask.height())
        throw Error("mask does not match frame dimensions");
    std::vector<Rgb> out;
    const auto px = frame.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        if (mask[i] == value) out.push_back(px[i]);
    return out;
}

PixelPriors priors(const Frame& frame, const ColorMixtureModel& fg_model, const ColorMixtureModel& bg_model,
                   double cap) {
    if (fg_model.empty() || bg_model.empty()) throw Error("priors need non-empty models");
    PixelPriors p;
    p.width = frame.width();
    p.height = frame.height();
    p.fg.resize(frame.pixel_count());
    p.bg.resize(frame.pixel_count());
    // Frames repeat colors heavily; memoise by packed RGB.
    std::unordered_map<std::uint32_t, std::pair<double, double>> memo;
    memo.reserve(1 << 14);
    const auto clamp = [cap](double v) { return std::isnan(v) ? cap : std::clamp(v, 0.0, cap); };
    const auto px = frame.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const Rgb c = px[i];
        const std::uint32_t key = (std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | c.b;
        auto it = memo.find(key);
        if (it == memo.end()) {
            const Eigen::Vector3d x(c.r, c.g, c.b);
            it = memo.emplace(key, std::pair{clamp(-fg_model.log_density(x)), clamp(-bg_model.log_density(x))}).first;
        }
        p.fg[i] = it->second.first;
        p.bg[i] = it->second.second;
    }
    return p;
}

} // namespace egoseg::gmm
