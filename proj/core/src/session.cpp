#include "egoseg/session.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "egoseg/propagator.hpp"
#include "json_io.hpp"

namespace egoseg::session {

namespace fs = std::filesystem;
using json_io::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    // write-then-rename so readers never see a partial file
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text << '\n';
    }
    fs::rename(tmp, p);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Status status_from_string(const std::string& s) {
    for (Status st : {Status::awaiting_seed, Status::propagating, Status::awaiting_reseed, Status::finished})
        if (to_string(st) == s) return st;
    throw Error("unknown session status: " + s);
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Config

void Config::validate() const {
    if (!(size_fraction > 0.0 && size_fraction < 1.0)) throw Error("size fraction must lie in (0, 1)");
    if (reseed_interval < 1) throw Error("reseed interval must be at least 1 frame");
    if (band_radius < 0) throw Error("band radius must be non-negative (0 = auto)");
    if (!(weight_tol > 0.0)) throw Error("weight tolerance must be positive");
    if (!(projection_growth > 1.0)) throw Error("projection growth must exceed 1");
    if (segment.fit.modes < 1) throw Error("mode count must be at least 1");
    if (!(segment.lambda > 0.0)) throw Error("lambda must be positive");
    if (segment.max_iterations < 1) throw Error("max iterations must be at least 1");
    if (!(flow.alpha > 0.0) || flow.iterations < 0 || flow.pyramid_levels < 1) throw Error("invalid flow parameters");
}

std::string Config::to_json() const {
    json j{{"size_fraction", size_fraction},
           {"reseed_interval", reseed_interval},
           {"band_radius", band_radius},
           {"weight_tol", weight_tol},
           {"projection_growth", projection_growth},
           {"gmm_modes", segment.fit.modes},
           {"kmeans_max_iterations", segment.fit.max_iterations},
           {"rng_seed", segment.fit.seed},
           {"covariance_regularization", segment.fit.regularization},
           {"prior_cap", segment.prior_cap},
           {"lambda", segment.lambda},
           {"convergence_fraction", segment.convergence_fraction},
           {"max_iterations", segment.max_iterations},
           {"hard_constraint", segment.hard_constraint},
           {"flow_alpha", flow.alpha},
           {"flow_iterations", flow.iterations},
           {"flow_pyramid_levels", flow.pyramid_levels}};
    return j.dump(2);
}

Config Config::from_json(const std::string& text) {
    Config c;
    try {
        const auto j = json::parse(text);
        c.size_fraction = j.value("size_fraction", c.size_fraction);
        c.reseed_interval = j.value("reseed_interval", c.reseed_interval);
        c.band_radius = j.value("band_radius", c.band_radius);
        c.weight_tol = j.value("weight_tol", c.weight_tol);
        c.projection_growth = j.value("projection_growth", c.projection_growth);
        c.segment.fit.modes = j.value("gmm_modes", c.segment.fit.modes);
        c.segment.fit.max_iterations = j.value("kmeans_max_iterations", c.segment.fit.max_iterations);
        c.segment.fit.seed = j.value("rng_seed", c.segment.fit.seed);
        c.segment.fit.regularization = j.value("covariance_regularization", c.segment.fit.regularization);
        c.segment.prior_cap = j.value("prior_cap", c.segment.prior_cap);
        c.segment.lambda = j.value("lambda", c.segment.lambda);
        c.segment.convergence_fraction = j.value("convergence_fraction", c.segment.convergence_fraction);
        c.segment.max_iterations = j.value("max_iterations", c.segment.max_iterations);
        c.segment.hard_constraint = j.value("hard_constraint", c.segment.hard_constraint);
        c.flow.alpha = j.value("flow_alpha", c.flow.alpha);
        c.flow.iterations = j.value("flow_iterations", c.flow.iterations);
        c.flow.pyramid_levels = j.value("flow_pyramid_levels", c.flow.pyramid_levels);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed session config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string to_string(Status s) {
    switch (s) {
    case Status::awaiting_seed: return "awaiting_seed";
    case Status::propagating: return "propagating";
    case Status::awaiting_reseed: return "awaiting_reseed";
    case Status::finished: return "finished";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Seed providers

ScriptedSeedProvider ScriptedSeedProvider::from_json(const std::string& text) {
    std::map<int, SeedPolygon> seeds;
    try {
        auto j = json::parse(text);
        if (j.is_object()) j = j.at("seeds");
        for (const auto& rec : j) {
            const int frame = rec.at("frame_index").get<int>();
            if (frame < 1) throw Error("seed frame_index must be >= 1");
            if (!seeds.emplace(frame, json_io::polygon_from_json(rec.at("vertices"))).second)
                throw Error("duplicate seed for frame " + std::to_string(frame));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed seed file: ") + e.what());
    }
    return ScriptedSeedProvider(std::move(seeds));
}

ScriptedSeedProvider ScriptedSeedProvider::from_file(const fs::path& path) { return from_json(slurp(path)); }

std::optional<SeedPolygon> ScriptedSeedProvider::request(const SeedRequest& req, const Frame&) {
    const auto it = seeds_.find(req.frame);
    if (it == seeds_.end()) return std::nullopt;
    return it->second;
}

SeedPolygon hull_polygon(const BinaryMask& mask, int padding) {
    const BinaryMask m = padding > 0 ? dilate(mask, padding) : mask;
    std::vector<Point> pts;
    for (int y = 0; y < m.height(); ++y) {
        int x0 = -1, x1 = -1;
        for (int x = 0; x < m.width(); ++x)
            if (m.at(x, y)) {
                if (x0 < 0) x0 = x;
                x1 = x;
            }
        if (x0 < 0) continue;
        pts.insert(pts.end(), {{x0, y}, {x0, y + 1}, {x1 + 1, y}, {x1 + 1, y + 1}});
    }
    if (pts.empty()) throw Error("cannot build a polygon around an empty mask");
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto turn = [](Point o, Point a, Point b) {
        return (long long)(a.x - o.x) * (b.y - o.y) - (long long)(a.y - o.y) * (b.x - o.x);
    };
    // Andrew's monotone chain, dropping collinear points.
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return SeedPolygon{std::move(hull)};
}

namespace {

// Sets the missing pair of every 2x2 window whose foreground touches only diagonally.
void remove_pinches(BinaryMask& m) {
    for (bool changed = true; changed;) {
        changed = false;
        for (int y = 0; y + 1 < m.height(); ++y)
            for (int x = 0; x + 1 < m.width(); ++x) {
                const bool a = m.at(x, y), b = m.at(x + 1, y), c = m.at(x, y + 1), d = m.at(x + 1, y + 1);
                if (a == d && b == c && a != b) {
                    m.set(x, y, true);
                    m.set(x + 1, y, true);
                    m.set(x, y + 1, true);
                    m.set(x + 1, y + 1, true);
                    changed = true;
                }
            }
    }
}

// Labels pixels equal to `value` reachable (4-connected) from `start`.
std::vector<std::uint8_t> flood(const BinaryMask& m, std::size_t start, bool value) {
    std::vector<std::uint8_t> seen(m.pixel_count(), 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    const int w = m.width(), h = m.height();
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = int(i % std::size_t(w)), y = int(i / std::size_t(w));
        const Point next[] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (const Point& q : next) {
            if (q.x < 0 || q.y < 0 || q.x >= w || q.y >= h) continue;
            const std::size_t j = m.index(q.x, q.y);
            if (seen[j] || m[j] != value) continue;
            seen[j] = 1;
            stack.push_back(j);
        }
    }
    return seen;
}

} // namespace

std::optional<SeedPolygon> outline_polygon(const BinaryMask& mask, int padding) {
    BinaryMask m = padding > 0 ? dilate(mask, padding) : mask;
    const int w = m.width(), h = m.height();
    // Fill holes: background not reachable from the border becomes foreground.
    BinaryMask outside(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = m.index(x, y);
            if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && !m[i] && !outside[i]) {
                const auto reach = flood(m, i, false);
                for (std::size_t j = 0; j < reach.size(); ++j)
                    if (reach[j]) outside.set(j, true);
            }
        }
    m = ~outside;
    remove_pinches(m);

    std::size_t first = m.pixel_count();
    for (std::size_t i = 0; i < m.pixel_count() && first == m.pixel_count(); ++i)
        if (m[i]) first = i;
    if (first == m.pixel_count()) return std::nullopt;
    const auto component = flood(m, first, true);
    if (std::size_t(std::count(component.begin(), component.end(), 1)) != m.count()) return std::nullopt;

    // Walk the boundary clockwise (y down) along pixel edges, object on the right.
    const auto in = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && m.at(x, y); };
    const Point start{int(first % std::size_t(w)), int(first / std::size_t(w))};
    std::vector<Point> corners;
    Point p = start;
    int dir = 0; // 0 east, 1 south, 2 west, 3 north
    do {
        corners.push_back(p);
        // Pixels ahead-left and ahead-right of the current corner for each heading.
        const auto left_px = [&](int d) -> Point {
            switch (d) {
            case 0: return {p.x, p.y - 1};
            case 1: return {p.x, p.y};
            case 2: return {p.x - 1, p.y};
            default: return {p.x - 1, p.y - 1};
            }
        };
        const auto right_px = [&](int d) -> Point {
            switch (d) {
            case 0: return {p.x, p.y};
            case 1: return {p.x - 1, p.y};
            case 2: return {p.x - 1, p.y - 1};
            default: return {p.x, p.y - 1};
            }
        };
        // Prefer turning left, then straight, then right, keeping object on the right.
        for (int turn : {3, 0, 1}) {
            const int d = (dir + turn) % 4;
            const Point l = left_px(d), r = right_px(d);
            if (in(r.x, r.y) && !in(l.x, l.y)) {
                dir = d;
                break;
            }
        }
        static constexpr Point step[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        p = {p.x + step[dir].x, p.y + step[dir].y};
    } while (!(p == start));

    // Keep only corners where the direction changes.
    SeedPolygon poly;
    const std::size_t n = corners.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = corners[(i + n - 1) % n], b = corners[i], c = corners[(i + 1) % n];
        if ((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) != 0) poly.vertices.push_back(b);
    }
    try {
        poly.validate(w, h);
    } catch (const Error&) {
        return std::nullopt;
    }
    return poly;
}

std::optional<SeedPolygon> OracleSeedProvider::request(const SeedRequest& req, const Frame&) {
    const BinaryMask truth = truth_(req.frame);
    if (truth.none()) return std::nullopt;
    ++requests_;
    if (auto outline = outline_polygon(truth, padding_)) return outline;
    return hull_polygon(truth, padding_);
}

// ---------------------------------------------------------------------------
// Session

Session::Session(FrameSequence sequence, Config config, fs::path run_dir, std::string name)
    : sequence_(std::move(sequence)), config_(std::move(config)), run_dir_(std::move(run_dir)) {
    config_.validate();
    fs::create_directories(run_dir_ / "masks");
    report_.video = name.empty() ? sequence_.directory().filename().string() : std::move(name);
    report_.width = sequence_.width();
    report_.height = sequence_.height();
    report_.sequence_length = sequence_.length();
    write_text(run_dir_ / "config.json", config_.to_json());
    persist_state();
    report_.save(run_dir_ / "report.json");
}

Session Session::resume(FrameSequence sequence, const fs::path& run_dir) {
    const Config config = Config::from_json(slurp(run_dir / "config.json"));
    json state;
    try {
        state = json::parse(slurp(run_dir / "state.json"));
    } catch (const json::exception& e) {
        throw Error(std::string("malformed session state: ") + e.what());
    }
    const auto report = SessionReport::load(run_dir / "report.json");
    Session s(std::move(sequence), config, run_dir, report.video);
    s.report_ = report;
    try {
        s.status_ = status_from_string(state.at("status").get<std::string>());
        s.cursor_ = state.at("cursor").get<int>();
        s.last_keyframe_ = state.at("last_keyframe").get<int>();
        s.pending_reason_ = state.value("reason", "");
        s.pending_record_.frame = s.cursor_;
        s.pending_record_.failed_tests = state.value("failed_tests", std::vector<std::string>{});
        if (state.contains("fg_model")) {
            s.current_.fg_model = json_io::model_from_json(state.at("fg_model"));
            s.current_.bg_model = json_io::model_from_json(state.at("bg_model"));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed session state: ") + e.what());
    }
    if (fs::exists(run_dir / "keyframes.json")) s.pool_ = confidence::KeyframePool::load(run_dir / "keyframes.json");
    if (s.cursor_ > 1) {
        s.current_.mask = read_mask_png(s.mask_path(s.cursor_ - 1));
        s.current_.iterations = 1;
    }
    s.persist_state();
    s.report_.save(run_dir / "report.json");
    return s;
}

fs::path Session::mask_path(int frame) const { return run_dir_ / "masks" / frame_file_name(frame); }

std::optional<SeedRequest> Session::pending() const {
    if (status_ != Status::awaiting_seed && status_ != Status::awaiting_reseed) return std::nullopt;
    return SeedRequest{cursor_, pending_reason_};
}

std::string Session::state_json() const {
    json j{{"video", report_.video},
           {"status", to_string(status_)},
           {"cursor", cursor_},
           {"last_keyframe", last_keyframe_},
           {"length", sequence_.length()}};
    if (const auto p = pending()) {
        j["frame"] = p->frame;
        j["reason"] = p->reason;
        j["failed_tests"] = pending_record_.failed_tests;
    }
    if (!current_.fg_model.empty()) {
        j["fg_model"] = json_io::to_json(current_.fg_model);
        j["bg_model"] = json_io::to_json(current_.bg_model);
    }
    return j.dump(2);
}

void Session::persist_state() const { write_text(run_dir_ / "state.json", state_json()); }

void Session::emit(Event::Kind kind, int frame) {
    if (!listener_) return;
    listener_(Event{kind, frame, status_, pending() ? pending_reason_ : std::string{}});
}

const Frame& Session::frame(int number) {
    auto it = frame_cache_.find(number);
    if (it == frame_cache_.end()) it = frame_cache_.emplace(number, sequence_.frame(number)).first;
    // keep the previous and current frame only
    for (auto jt = frame_cache_.begin(); jt != frame_cache_.end();) {
        if (jt->first < number - 1) jt = frame_cache_.erase(jt);
        else ++jt;
    }
    return it->second;
}

void Session::finish_frame(FrameRecord rec, const segmenter::SegmentationResult& result, const Frame&) {
    write_mask_png(mask_path(rec.frame), result.mask);
    rec.mask_area = result.mask.count();
    report_.frames.push_back(std::move(rec));
    current_ = result;
    const int done = cursor_;
    ++cursor_;
    pending_reason_.clear();
    pending_record_ = {};
    status_ = cursor_ > sequence_.length() ? Status::finished : Status::propagating;
    report_.completed = status_ == Status::finished;
    persist_state();
    if (status_ == Status::finished || done % 50 == 0 || report_.frames.back().provenance == Provenance::user_seed)
        report_.save(run_dir_ / "report.json");
    emit(Event::Kind::mask, done);
    emit(Event::Kind::state, cursor_);
}

void Session::submit_seed(int number, const SeedPolygon& seed) {
    if (status_ != Status::awaiting_seed && status_ != Status::awaiting_reseed)
        throw InvalidTransition("session is " + to_string(status_) + "; no seed was requested");
    if (number != cursor_)
        throw InvalidTransition("seed is for frame " + std::to_string(number) + " but frame " +
                                std::to_string(cursor_) + " was requested");
    const auto t0 = std::chrono::steady_clock::now();
    const Frame& f = frame(number);
    seed.validate(f.width(), f.height());
    auto result = segmenter::segment_from_seed(f, seed, config_.segment);
    confidence::admit_keyframe(pool_, number, result, f);
    pool_.save(run_dir_ / "keyframes.json");

    FrameRecord rec = pending_record_;
    rec.frame = number;
    rec.provenance = Provenance::user_seed;
    rec.seed_reason = pending_reason_;
    const double seconds = seconds_since(t0);
    rec.processing_seconds += seconds;
    rec.total_seconds += seconds;
    last_keyframe_ = number;
    finish_frame(std::move(rec), result, f);
}

void Session::step() {
    if (status_ != Status::propagating) throw InvalidTransition("session is " + to_string(status_) + "; cannot step");
    const int n = cursor_;
    if (n - last_keyframe_ >= config_.reseed_interval) {
        status_ = Status::awaiting_reseed;
        pending_reason_ = "scheduled";
        pending_record_ = {};
        pending_record_.frame = n;
        persist_state();
        report_.save(run_dir_ / "report.json");
        emit(Event::Kind::state, n);
        return;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const Frame& prev = frame(n - 1);
    const Frame& curr = frame(n);
    FrameRecord rec;
    rec.frame = n;
    std::vector<std::string> failed;
    try {
        const auto& key = pool_.most_recent();
        auto pred = propagator::predict_next(prev, curr, current_, config_.band_radius, config_.flow, config_.segment,
                                             {&key.fg_model, &key.bg_model});
        rec.flow_seconds = pred.flow_seconds;
        const auto verdict = confidence::evaluate(pred.result, pool_, config_.confidence());
        if (verdict.passed) {
            rec.total_seconds = seconds_since(t0);
            rec.processing_seconds = rec.total_seconds - rec.flow_seconds;
            finish_frame(std::move(rec), pred.result, curr);
            return;
        }
        for (auto t : verdict.failed_tests) failed.push_back(confidence::to_string(t));
    } catch (const propagator::ObjectLost&) {
        failed = {"object_lost"};
    } catch (const segmenter::DegenerateSegmentation&) {
        failed = {"degenerate"};
    }
    rec.total_seconds = seconds_since(t0);
    rec.processing_seconds = rec.total_seconds - rec.flow_seconds;
    rec.failed_tests = failed;
    status_ = Status::awaiting_reseed;
    pending_reason_ = join(failed, "+");
    pending_record_ = std::move(rec);
    persist_state();
    report_.save(run_dir_ / "report.json");
    emit(Event::Kind::state, n);
}

void Session::run_until_input() {
    while (status_ == Status::propagating) step();
}

SessionReport run(Session& session, SeedProvider& provider) {
    for (;;) {
        switch (session.status()) {
        case Status::finished: return session.report();
        case Status::propagating: session.run_until_input(); break;
        case Status::awaiting_seed:
        case Status::awaiting_reseed: {
            const auto req = *session.pending();
            const auto seed = provider.request(req, session.sequence().frame(req.frame));
            if (!seed) return session.report();
            session.submit_seed(req.frame, *seed);
            break;
        }
        }
    }
}

SessionReport run(const FrameSequence& sequence, SeedProvider& provider, const Config& config,
                  const fs::path& run_dir) {
    Session s(sequence, config, run_dir);
    return run(s, provider);
}

} // namespace egoseg::session
