#include "egoseg/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>

#include "json_io.hpp"

namespace egoseg::confidence {

const Keyframe& KeyframePool::most_recent() const {
    if (keyframes_.empty()) throw Error("keyframe pool is empty");
    return keyframes_.back();
}

void KeyframePool::append(Keyframe k) {
    if (!keyframes_.empty() && k.frame_index <= keyframes_.back().frame_index) {
        if (std::any_of(keyframes_.begin(), keyframes_.end(),
                        [&](const Keyframe& e) { return e.frame_index == k.frame_index; }))
            throw Error("frame " + std::to_string(k.frame_index) + " is already a keyframe");
        throw Error("keyframe indices must increase");
    }
    if (k.mask_size == 0) throw Error("keyframe mask must not be empty");
    if (k.center_tolerance.size() != k.fg_model.size()) throw Error("one center tolerance per foreground mode expected");
    keyframes_.push_back(std::move(k));
}

void KeyframePool::save(const std::filesystem::path& path) const {
    json_io::json j = json_io::json::array();
    for (const auto& k : keyframes_) j.push_back(json_io::to_json(k));
    std::ofstream out(path);
    if (!out) throw Error("cannot write keyframe pool " + path.string());
    out << json_io::json{{"keyframes", j}}.dump(2) << '\n';
}

KeyframePool KeyframePool::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read keyframe pool " + path.string());
    KeyframePool pool;
    try {
        const auto j = json_io::json::parse(in);
        for (const auto& k : j.at("keyframes")) pool.append(json_io::keyframe_from_json(k));
    } catch (const json_io::json::exception& e) {
        throw Error("malformed keyframe pool " + path.string() + ": " + e.what());
    }
    return pool;
}

double center_tolerance(std::span<const Rgb> members) {
    if (members.empty()) return 0.0;
    const double n = double(members.size());
    double sum[3] = {0, 0, 0};
    for (const Rgb& c : members) {
        sum[0] += c.r;
        sum[1] += c.g;
        sum[2] += c.b;
    }
    const double mean[3] = {sum[0] / n, sum[1] / n, sum[2] / n};
    double ss[3] = {0, 0, 0};
    for (const Rgb& c : members) {
        const double d[3] = {c.r - mean[0], c.g - mean[1], c.b - mean[2]};
        for (int k = 0; k < 3; ++k) ss[k] += d[k] * d[k];
    }
    return (std::sqrt(ss[0] / n) + std::sqrt(ss[1] / n) + std::sqrt(ss[2] / n)) / 3.0;
}

Keyframe make_keyframe(int frame_index, const segmenter::SegmentationResult& result, const Frame& frame) {
    Keyframe k;
    k.frame_index = frame_index;
    k.mask_size = result.mask.count();
    k.fg_model = result.fg_model;
    k.bg_model = result.bg_model;
    std::vector<std::vector<Rgb>> members(result.fg_model.size());
    for (const Rgb& c : gmm::samples(frame, result.mask, true))
        members[result.fg_model.nearest_mode(Eigen::Vector3d(c.r, c.g, c.b))].push_back(c);
    for (const auto& m : members) k.center_tolerance.push_back(center_tolerance(m));
    return k;
}

void admit_keyframe(KeyframePool& pool, int frame_index, const segmenter::SegmentationResult& result,
                    const Frame& frame) {
    pool.append(make_keyframe(frame_index, result, frame));
}

bool size_test(std::size_t candidate_size, std::size_t key_size, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error("size fraction must lie in (0, 1)");
    // Relative slack keeps the inclusive bounds exact for integer sizes.
    constexpr double slack = 1e-12;
    const double c = double(candidate_size), k = double(key_size);
    if (c <= (1.0 - fraction) * k * (1.0 + slack)) return false;
    if (c >= (1.0 + fraction) * k * (1.0 - slack)) return false;
    return true;
}

bool size_test(std::size_t candidate_size, const KeyframePool& pool, double fraction) {
    return size_test(candidate_size, pool.most_recent().mask_size, fraction);
}

double eigen_projection(const Eigen::Matrix3d& covariance, const Eigen::Vector3d& direction) {
    const Eigen::Vector3d unit = direction.normalized();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(covariance);
    if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
    double p = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double scale = std::sqrt(std::max(es.eigenvalues()[k], 0.0));
        p += std::abs(scale * es.eigenvectors().col(k).dot(unit));
    }
    return p;
}

ClusterGeometry cluster_geometry(const gmm::ColorMixtureModel& fg, const gmm::ColorMixtureModel& bg) {
    if (fg.empty() || bg.empty()) throw Error("cluster geometry needs non-empty models");
    ClusterGeometry g;
    g.squared_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bg.size(); ++i)
        for (std::size_t j = 0; j < fg.size(); ++j) {
            const double d = (bg[i].center() - fg[j].center()).squaredNorm();
            if (d < g.squared_distance) {
                g.squared_distance = d;
                g.bg_mode = i;
                g.fg_mode = j;
            }
        }
    if (g.squared_distance > 0.0)
        g.projection = eigen_projection(bg[g.bg_mode].covariance(), fg[g.fg_mode].center() - bg[g.bg_mode].center());
    return g;
}

UnderSegmentation under_segmentation(const gmm::ColorMixtureModel& curr_fg, const gmm::ColorMixtureModel& curr_bg,
                                     const Keyframe& key, double growth) {
    UnderSegmentation u;
    u.keyframe = cluster_geometry(key.fg_model, key.bg_model);
    u.current = cluster_geometry(curr_fg, curr_bg);
    if (!u.keyframe.projection || !u.current.projection) {
        u.passed = false;
        return u;
    }
    if (*u.keyframe.projection > 0.0) u.ratio = *u.current.projection / *u.keyframe.projection;
    u.passed = !(*u.current.projection > growth * *u.keyframe.projection);
    return u;
}

bool under_segmentation_test(const gmm::ColorMixtureModel& curr_fg, const gmm::ColorMixtureModel& curr_bg,
                             const Keyframe& key, double growth) {
    return under_segmentation(curr_fg, curr_bg, key, growth).passed;
}

std::vector<ModePair> match_modes(const gmm::ColorMixtureModel& current, const gmm::ColorMixtureModel& key) {
    std::vector<ModePair> all;
    for (std::size_t i = 0; i < current.size(); ++i)
        for (std::size_t j = 0; j < key.size(); ++j)
            all.push_back({i, j, (current[i].center() - key[j].center()).norm()});
    std::stable_sort(all.begin(), all.end(), [](const ModePair& a, const ModePair& b) { return a.distance < b.distance; });
    std::vector<bool> used_c(current.size()), used_k(key.size());
    std::vector<ModePair> out;
    const std::size_t want = std::min(current.size(), key.size());
    for (const ModePair& p : all) {
        if (out.size() == want) break;
        if (used_c[p.current] || used_k[p.key]) continue;
        used_c[p.current] = used_k[p.key] = true;
        out.push_back(p);
    }
    return out;
}

ModelMatch model_match(const gmm::ColorMixtureModel& curr_fg, const KeyframePool& pool, double weight_tol) {
    if (!(weight_tol > 0.0)) throw Error("weight tolerance must be positive");
    ModelMatch m;
    m.best_margin = -std::numeric_limits<double>::infinity();
    for (const Keyframe& k : pool.keyframes()) {
        bool ok = true;
        double margin = std::numeric_limits<double>::infinity();
        for (const ModePair& p : match_modes(curr_fg, k.fg_model)) {
            const double tol = k.center_tolerance.at(p.key);
            margin = std::min(margin, tol - p.distance);
            if (p.distance > tol) ok = false;
            if (std::abs(curr_fg[p.current].weight() - k.fg_model[p.key].weight()) > weight_tol) ok = false;
        }
        m.best_margin = std::max(m.best_margin, margin);
        if (ok && !m.passed) {
            m.passed = true;
            m.matched_keyframe = k.frame_index;
        }
    }
    return m;
}

bool model_match_test(const gmm::ColorMixtureModel& curr_fg, const KeyframePool& pool, double weight_tol) {
    return model_match(curr_fg, pool, weight_tol).passed;
}

std::string to_string(Test t) {
    switch (t) {
    case Test::size: return "size";
    case Test::under_segmentation: return "under_segmentation";
    case Test::model_match: return "model_match";
    }
    return "unknown";
}

bool Verdict::failed(Test t) const {
    return std::find(failed_tests.begin(), failed_tests.end(), t) != failed_tests.end();
}

Verdict evaluate(const segmenter::SegmentationResult& result, const KeyframePool& pool, const Config& config) {
    const Keyframe& key = pool.most_recent();
    Verdict v;
    const std::size_t size = result.mask.count();
    v.size_ratio = double(size) / double(key.mask_size);
    if (!size_test(size, key.mask_size, config.size_fraction)) v.failed_tests.push_back(Test::size);

    const auto under = under_segmentation(result.fg_model, result.bg_model, key, config.projection_growth);
    v.projection_ratio = under.ratio;
    if (!under.passed) v.failed_tests.push_back(Test::under_segmentation);

    const auto match = model_match(result.fg_model, pool, config.weight_tol);
    v.center_margin = match.best_margin;
    if (!match.passed) v.failed_tests.push_back(Test::model_match);

    v.passed = v.failed_tests.empty();
    return v;
}

} // namespace egoseg::confidence
