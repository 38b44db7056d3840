#include "egoseg/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egoseg/image.hpp"

namespace egoseg {

using nlohmann::json;

int SessionReport::user_inputs() const {
    return int(std::count_if(frames.begin(), frames.end(),
                             [](const FrameRecord& f) { return f.provenance == Provenance::user_seed; }));
}

int SessionReport::scheduled_inputs() const {
    return int(std::count_if(frames.begin(), frames.end(), [](const FrameRecord& f) {
        return f.provenance == Provenance::user_seed && (f.seed_reason == "initial" || f.seed_reason == "scheduled");
    }));
}

int SessionReport::failure_inputs() const { return user_inputs() - scheduled_inputs(); }

int SessionReport::failures(const std::string& test) const {
    return int(std::count_if(frames.begin(), frames.end(), [&](const FrameRecord& f) {
        return std::find(f.failed_tests.begin(), f.failed_tests.end(), test) != f.failed_tests.end();
    }));
}

std::string SessionReport::to_json() const {
    json fr = json::array();
    for (const auto& f : frames)
        fr.push_back({{"frame", f.frame},
                      {"provenance", f.provenance == Provenance::user_seed ? "user_seed" : "propagated"},
                      {"seed_reason", f.seed_reason},
                      {"failed_tests", f.failed_tests},
                      {"flow_seconds", f.flow_seconds},
                      {"processing_seconds", f.processing_seconds},
                      {"total_seconds", f.total_seconds},
                      {"mask_area", f.mask_area}});
    json j{{"video", video},
           {"width", width},
           {"height", height},
           {"sequence_length", sequence_length},
           {"completed", completed},
           {"user_inputs", user_inputs()},
           {"scheduled_inputs", scheduled_inputs()},
           {"failure_inputs", failure_inputs()},
           {"frames", fr}};
    return j.dump(2);
}

SessionReport SessionReport::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        SessionReport r;
        r.video = j.value("video", "");
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
        r.sequence_length = j.at("sequence_length").get<int>();
        r.completed = j.at("completed").get<bool>();
        for (const auto& f : j.at("frames")) {
            FrameRecord rec;
            rec.frame = f.at("frame").get<int>();
            rec.provenance = f.at("provenance").get<std::string>() == "user_seed" ? Provenance::user_seed
                                                                                   : Provenance::propagated;
            rec.seed_reason = f.value("seed_reason", "");
            rec.failed_tests = f.value("failed_tests", std::vector<std::string>{});
            rec.flow_seconds = f.value("flow_seconds", 0.0);
            rec.processing_seconds = f.value("processing_seconds", 0.0);
            rec.total_seconds = f.value("total_seconds", 0.0);
            rec.mask_area = f.value("mask_area", std::size_t{0});
            r.frames.push_back(std::move(rec));
        }
        return r;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed session report: ") + e.what());
    }
}

void SessionReport::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report " + path.string());
    out << to_json() << '\n';
}

SessionReport SessionReport::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read report " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

} // namespace egoseg
