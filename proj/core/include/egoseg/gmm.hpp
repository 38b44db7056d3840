#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "egoseg/image.hpp"

namespace egoseg::gmm {

/// One Gaussian component over RGB (8-bit units).
class Mode {
public:
    Mode(const Eigen::Vector3d& center, const Eigen::Matrix3d& covariance, double weight);

    const Eigen::Vector3d& center() const { return center_; }
    const Eigen::Matrix3d& covariance() const { return covariance_; }
    double weight() const { return weight_; }

    /// log N(x; center, covariance), without the mixture weight.
    double log_density(const Eigen::Vector3d& x) const;

private:
    Eigen::Vector3d center_;
    Eigen::Matrix3d covariance_;
    Eigen::Matrix3d inverse_;
    double log_norm_ = 0.0; // -0.5 * (3 log 2pi + log det)
    double weight_ = 0.0;
};

/// Multivariate Gaussian mixture over RGB. Immutable once built.
class ColorMixtureModel {
public:
    ColorMixtureModel() = default;
    /// Weights are normalised to sum to one.
    explicit ColorMixtureModel(std::vector<Mode> modes);

    std::size_t size() const { return modes_.size(); }
    bool empty() const { return modes_.empty(); }
    const Mode& operator[](std::size_t i) const { return modes_[i]; }
    const std::vector<Mode>& modes() const { return modes_; }

    double log_density(const Eigen::Vector3d& x) const;
    double log_density(Rgb c) const { return log_density(Eigen::Vector3d(c.r, c.g, c.b)); }
    /// Index of the mode with the nearest center (Euclidean); lowest index on ties.
    std::size_t nearest_mode(const Eigen::Vector3d& x) const;

private:
    std::vector<Mode> modes_;
};

struct FitOptions {
    int modes = 5;
    int max_iterations = 100;
    std::uint64_t seed = 0x5eed;
    /// Added to every covariance diagonal (8-bit units squared).
    double regularization = 1.0;
};

/// Hard-assignment k-means fit: centers are cluster means, covariances the
/// cluster covariances plus the regularisation floor, weights the cluster
/// fractions. k-means++ seeding unless `warm_start` is given, in which case its
/// centers seed Lloyd's iterations. Fewer distinct colors than modes yields
/// fewer modes. Throws egoseg::Error on an empty sample set.
ColorMixtureModel fit(std::span<const Rgb> samples, const FitOptions& options = {},
                      const ColorMixtureModel* warm_start = nullptr);

/// Collects the pixels of `frame` where `mask` equals `value`.
std::vector<Rgb> samples(const Frame& frame, const BinaryMask& mask, bool value);

/// Per-pixel negative log-likelihoods under the two models, clamped to [0, cap].
struct PixelPriors {
    int width = 0;
    int height = 0;
    std::vector<double> fg;
    std::vector<double> bg;
};

inline constexpr double default_prior_cap = 50.0;

PixelPriors priors(const Frame& frame, const ColorMixtureModel& fg_model, const ColorMixtureModel& bg_model,
                   double cap = default_prior_cap);

} // namespace egoseg::gmm
