#pragma once

// JSON encodings shared by the persistence code. Not installed.

#include <json.hpp>

#include "egoseg/confidence.hpp"
#include "egoseg/gmm.hpp"
#include "egoseg/image.hpp"

namespace egoseg::json_io {

using nlohmann::json;

inline json to_json(const gmm::ColorMixtureModel& m) {
    json modes = json::array();
    for (const auto& mode : m.modes()) {
        json cov = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov.push_back(mode.covariance()(r, c));
        modes.push_back({{"center", {mode.center()[0], mode.center()[1], mode.center()[2]}},
                         {"covariance", cov},
                         {"weight", mode.weight()}});
    }
    return {{"modes", modes}};
}

inline gmm::ColorMixtureModel model_from_json(const json& j) {
    std::vector<gmm::Mode> modes;
    for (const auto& m : j.at("modes")) {
        const auto& c = m.at("center");
        const auto& cv = m.at("covariance");
        if (c.size() != 3 || cv.size() != 9) throw Error("malformed mixture mode record");
        Eigen::Matrix3d cov;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) cov(r, k) = cv[std::size_t(3 * r + k)].get<double>();
        modes.emplace_back(Eigen::Vector3d(c[0].get<double>(), c[1].get<double>(), c[2].get<double>()), cov,
                           m.at("weight").get<double>());
    }
    return gmm::ColorMixtureModel(std::move(modes));
}

inline json to_json(const confidence::Keyframe& k) {
    return {{"frame_index", k.frame_index},
            {"mask_size", k.mask_size},
            {"fg_model", to_json(k.fg_model)},
            {"bg_model", to_json(k.bg_model)},
            {"center_tolerance", k.center_tolerance}};
}

inline confidence::Keyframe keyframe_from_json(const json& j) {
    confidence::Keyframe k;
    k.frame_index = j.at("frame_index").get<int>();
    k.mask_size = j.at("mask_size").get<std::size_t>();
    k.fg_model = model_from_json(j.at("fg_model"));
    k.bg_model = model_from_json(j.at("bg_model"));
    k.center_tolerance = j.at("center_tolerance").get<std::vector<double>>();
    return k;
}

inline json to_json(const SeedPolygon& p) {
    json v = json::array();
    for (const Point& q : p.vertices) v.push_back({q.x, q.y});
    return v;
}

inline SeedPolygon polygon_from_json(const json& vertices) {
    SeedPolygon p;
    for (const auto& v : vertices) {
        if (!v.is_array() || v.size() != 2) throw Error("polygon vertices must be [x, y] pairs");
        p.vertices.push_back({v[0].get<int>(), v[1].get<int>()});
    }
    return p;
}

} // namespace egoseg::json_io
