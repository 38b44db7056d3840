#include "egoseg/service.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include <httplib.h>

#include "json_io.hpp"

namespace egoseg::service {

namespace fs = std::filesystem;
using json_io::json;

namespace {

struct Slot {
    std::mutex op; // serialises mutations of `session`
    std::unique_ptr<session::Session> session;

    std::mutex mu; // guards everything below
    std::condition_variable cv;
    std::string state;
    std::vector<std::pair<long, std::string>> events; // (id, formatted SSE message)
    long last_id = 0;
    bool closing = false;

    void publish(const session::Event& e) {
        json data{{"status", session::to_string(e.status)}, {"frame", e.frame}};
        if (!e.reason.empty()) data["reason"] = e.reason;
        const char* name = e.kind == session::Event::Kind::mask ? "mask" : "state";
        {
            std::lock_guard lk(mu);
            state = session->state_json();
            ++last_id;
            events.emplace_back(last_id, "id: " + std::to_string(last_id) + "\nevent: " + name +
                                             "\ndata: " + data.dump() + "\n\n");
        }
        cv.notify_all();
    }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_video_dir(const fs::path& p) {
    if (!fs::is_directory(p)) return false;
    for (const auto& e : fs::directory_iterator(p))
        if (e.path().filename() == frame_file_name(1)) return true;
    return false;
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

} // namespace

struct Server::Impl {
    fs::path frames_root;
    fs::path run_root;
    session::Config config;
    httplib::Server http;
    std::mutex slots_mu;
    std::map<std::string, std::shared_ptr<Slot>> slots;

    std::shared_ptr<Slot> slot(const std::string& id) {
        std::lock_guard lk(slots_mu);
        if (auto it = slots.find(id); it != slots.end()) return it->second;
        if (id.find('/') != std::string::npos || id == ".." || !is_video_dir(frames_root / id)) return nullptr;
        auto s = std::make_shared<Slot>();
        auto seq = FrameSequence::open(frames_root / id);
        const fs::path dir = run_root / id;
        if (fs::exists(dir / "state.json"))
            s->session = std::make_unique<session::Session>(session::Session::resume(std::move(seq), dir));
        else
            s->session = std::make_unique<session::Session>(std::move(seq), config, dir, id);
        s->state = s->session->state_json();
        Slot* raw = s.get();
        s->session->set_listener([raw](const session::Event& e) { raw->publish(e); });
        slots.emplace(id, s);
        return s;
    }

    void routes() {
        http.Get("/videos", [this](const httplib::Request&, httplib::Response& res) {
            json ids = json::array();
            std::vector<std::string> names;
            if (fs::is_directory(frames_root))
                for (const auto& e : fs::directory_iterator(frames_root))
                    if (is_video_dir(e.path())) names.push_back(e.path().filename().string());
            std::sort(names.begin(), names.end());
            for (auto& n : names) ids.push_back(n);
            res.set_content(ids.dump(), "application/json");
        });

        http.Get(R"(/videos/([^/]+)/frames/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            const fs::path p = frames_root / req.matches[1].str() / frame_file_name(std::stoi(req.matches[2].str()));
            if (req.matches[1].str() == ".." || !fs::is_regular_file(p)) return reply_error(res, 404, "no such frame");
            res.set_content(read_file(p), "image/png");
        });

        http.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = slot(req.matches[1].str());
            if (!s) return reply_error(res, 404, "no such video");
            std::lock_guard lk(s->mu);
            res.set_content(s->state, "application/json");
        });

        http.Get(R"(/sessions/([^/]+)/masks/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = slot(req.matches[1].str());
            if (!s) return reply_error(res, 404, "no such video");
            const fs::path p = s->session->mask_path(std::stoi(req.matches[2].str()));
            if (!fs::is_regular_file(p)) return reply_error(res, 404, "mask not available yet");
            res.set_content(read_file(p), "image/png");
        });

        http.Post(R"(/sessions/([^/]+)/seed)", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = slot(req.matches[1].str());
            if (!s) return reply_error(res, 404, "no such video");
            int frame = 0;
            SeedPolygon poly;
            try {
                const auto body = json::parse(req.body);
                frame = body.at("frame_index").get<int>();
                poly = json_io::polygon_from_json(body.at("vertices"));
            } catch (const std::exception& e) {
                return reply_error(res, 400, std::string("malformed seed: ") + e.what());
            }
            std::lock_guard op(s->op);
            try {
                s->session->submit_seed(frame, poly);
            } catch (const session::InvalidTransition& e) {
                return reply_error(res, 409, e.what());
            } catch (const segmenter::DegenerateSegmentation& e) {
                return reply_error(res, 422, e.what());
            } catch (const Error& e) {
                return reply_error(res, 400, e.what());
            }
            res.set_content(s->session->state_json(), "application/json");
        });

        const auto advance = [this](bool until_input) {
            return [this, until_input](const httplib::Request& req, httplib::Response& res) {
                auto s = slot(req.matches[1].str());
                if (!s) return reply_error(res, 404, "no such video");
                std::lock_guard op(s->op);
                try {
                    if (until_input) {
                        if (s->session->status() != session::Status::propagating)
                            throw session::InvalidTransition("session is " + session::to_string(s->session->status()));
                        s->session->run_until_input();
                    } else {
                        s->session->step();
                    }
                } catch (const session::InvalidTransition& e) {
                    return reply_error(res, 409, e.what());
                }
                res.set_content(s->session->state_json(), "application/json");
            };
        };
        http.Post(R"(/sessions/([^/]+)/step)", advance(false));
        http.Post(R"(/sessions/([^/]+)/run)", advance(true));

        http.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            auto s = slot(req.matches[1].str());
            if (!s) return reply_error(res, 404, "no such video");
            long after = 0;
            std::string greeting;
            {
                std::lock_guard lk(s->mu);
                if (req.has_header("Last-Event-ID")) {
                    after = std::stol(req.get_header_value("Last-Event-ID"));
                } else {
                    after = s->last_id;
                    greeting = "event: snapshot\ndata: " + json::parse(s->state).dump() + "\n\n";
                }
            }
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [s, after, greeting](std::size_t, httplib::DataSink& sink) mutable {
                    if (!greeting.empty()) {
                        if (!sink.write(greeting.data(), greeting.size())) return false;
                        greeting.clear();
                    }
                    std::string out;
                    {
                        std::unique_lock lk(s->mu);
                        s->cv.wait_for(lk, std::chrono::milliseconds(200),
                                       [&] { return s->closing || s->last_id > after; });
                        if (s->closing) return false;
                        for (const auto& [id, msg] : s->events)
                            if (id > after) out += msg;
                        after = s->last_id;
                    }
                    if (out.empty()) return sink.is_writable();
                    return sink.write(out.data(), out.size());
                });
        });
    }
};

Server::Server(fs::path frames_root, fs::path run_root, session::Config config) : impl_(std::make_unique<Impl>()) {
    config.validate();
    if (!fs::is_directory(frames_root)) throw Error("frames root is not a readable directory: " + frames_root.string());
    impl_->frames_root = std::move(frames_root);
    impl_->run_root = std::move(run_root);
    impl_->config = std::move(config);
    fs::create_directories(impl_->run_root);
    // SO_REUSEPORT (httplib's default) would let a second server share a busy port.
    impl_->http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    impl_->routes();
}

Server::~Server() { stop(); }

void Server::bind(const std::string& host, int port) {
    if (!impl_->http.bind_to_port(host, port))
        throw Error("cannot listen on " + host + ":" + std::to_string(port) + " (port unavailable?)");
}

int Server::bind_any_port(const std::string& host) {
    const int port = impl_->http.bind_to_any_port(host);
    if (port < 0) throw Error("cannot bind any port on " + host);
    return port;
}

void Server::serve() { impl_->http.listen_after_bind(); }

void Server::listen(const std::string& host, int port) {
    bind(host, port);
    serve();
}

void Server::stop() {
    {
        std::lock_guard lk(impl_->slots_mu);
        for (auto& [id, s] : impl_->slots) {
            {
                std::lock_guard g(s->mu);
                s->closing = true;
            }
            s->cv.notify_all();
        }
    }
    impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

} // namespace egoseg::service
