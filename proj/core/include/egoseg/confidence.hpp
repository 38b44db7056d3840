#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "egoseg/gmm.hpp"
#include "egoseg/image.hpp"
#include "egoseg/segmenter.hpp"

namespace egoseg::confidence {

/// Ground-truth snapshot taken from a user-seeded frame.
struct Keyframe {
    int frame_index = 0;
    std::size_t mask_size = 0;
    gmm::ColorMixtureModel fg_model;
    gmm::ColorMixtureModel bg_model;
    /// Acceptable center error per foreground mode: mean of the three channel
    /// standard deviations of the mode's member pixels.
    std::vector<double> center_tolerance;
};

class KeyframePool {
public:
    bool empty() const { return keyframes_.empty(); }
    std::size_t size() const { return keyframes_.size(); }
    const std::vector<Keyframe>& keyframes() const { return keyframes_; }
    /// Highest frame index; throws on an empty pool.
    const Keyframe& most_recent() const;
    /// Appends; indices must be strictly increasing.
    void append(Keyframe k);

    void save(const std::filesystem::path& path) const;
    static KeyframePool load(const std::filesystem::path& path);

private:
    std::vector<Keyframe> keyframes_;
};

/// Mean of the per-channel population standard deviations of `members`
/// (0 for an empty set).
double center_tolerance(std::span<const Rgb> members);

/// Builds the keyframe for a user-seeded result: foreground pixels are assigned
/// to their nearest foreground mode to get each mode's tolerance.
Keyframe make_keyframe(int frame_index, const segmenter::SegmentationResult& result, const Frame& frame);

/// Appends the keyframe for `result`. Throws on a duplicate or out-of-order index.
void admit_keyframe(KeyframePool& pool, int frame_index, const segmenter::SegmentationResult& result,
                    const Frame& frame);

// -- size test ---------------------------------------------------------------

/// True (pass) unless candidate <= (1 - f) key or candidate >= (1 + f) key.
/// Both bounds are inclusive.
bool size_test(std::size_t candidate_size, std::size_t key_size, double fraction);
bool size_test(std::size_t candidate_size, const KeyframePool& pool, double fraction);

// -- under-segmentation test -------------------------------------------------

/// Closest background/foreground mode pair and the spread of that background
/// mode along the line joining the two centers.
struct ClusterGeometry {
    std::size_t bg_mode = 0;
    std::size_t fg_mode = 0;
    double squared_distance = 0.0;
    /// sum_k |sqrt(lambda_k) e_k . c_hat| over the background covariance eigenpairs;
    /// empty when the two centers coincide.
    std::optional<double> projection;
};

/// Pair minimising the squared center distance (ties: lowest bg index, then
/// lowest fg index), with its projection.
ClusterGeometry cluster_geometry(const gmm::ColorMixtureModel& fg, const gmm::ColorMixtureModel& bg);

/// sum_k |sqrt(lambda_k) e_k . direction| for a symmetric covariance; `direction` need not be unit.
double eigen_projection(const Eigen::Matrix3d& covariance, const Eigen::Vector3d& direction);

inline constexpr double default_projection_growth = 1.25;

struct UnderSegmentation {
    bool passed = true;
    ClusterGeometry keyframe;
    ClusterGeometry current;
    /// P_current / P_keyframe, when both are defined.
    std::optional<double> ratio;
};

/// Fails when the current projection exceeds growth * the keyframe projection,
/// or conservatively when either direction is undefined.
UnderSegmentation under_segmentation(const gmm::ColorMixtureModel& curr_fg, const gmm::ColorMixtureModel& curr_bg,
                                     const Keyframe& key, double growth = default_projection_growth);
bool under_segmentation_test(const gmm::ColorMixtureModel& curr_fg, const gmm::ColorMixtureModel& curr_bg,
                             const Keyframe& key, double growth = default_projection_growth);

// -- model match test --------------------------------------------------------

struct ModePair {
    std::size_t current = 0;
    std::size_t key = 0;
    double distance = 0.0;
};

/// Greedy nearest-center matching without replacement, min(K) pairs.
std::vector<ModePair> match_modes(const gmm::ColorMixtureModel& current, const gmm::ColorMixtureModel& key);

struct ModelMatch {
    bool passed = false;
    /// Best over keyframes of the smallest (tolerance - distance) over matched pairs.
    double best_margin = 0.0;
    std::optional<int> matched_keyframe;
};

ModelMatch model_match(const gmm::ColorMixtureModel& curr_fg, const KeyframePool& pool, double weight_tol);
bool model_match_test(const gmm::ColorMixtureModel& curr_fg, const KeyframePool& pool, double weight_tol);

// -- verdict -----------------------------------------------------------------

enum class Test { size, under_segmentation, model_match };
std::string to_string(Test t);

struct Config {
    double size_fraction = 0.39;
    double projection_growth = default_projection_growth;
    double weight_tol = 0.15;
};

struct Verdict {
    bool passed = true;
    std::vector<Test> failed_tests;
    double size_ratio = 0.0;
    std::optional<double> projection_ratio;
    double center_margin = 0.0;

    bool failed(Test t) const;
};

Verdict evaluate(const segmenter::SegmentationResult& result, const KeyframePool& pool, const Config& config = {});

} // namespace egoseg::confidence
