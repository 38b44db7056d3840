#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "egoseg/session.hpp"

namespace egoseg::service {

/// HTTP front end for annotation sessions. Each subdirectory of the frames root
/// holding numbered PNG frames is a video; its session id is the directory
/// name. Session state lives under `<run_root>/<id>/`.
///
///   GET  /videos                      JSON list of video ids
///   GET  /videos/{id}/frames/{n}      frame PNG
///   GET  /sessions/{id}/state         JSON: status, cursor, frame, reason
///   GET  /sessions/{id}/masks/{n}     mask PNG (404 until produced)
///   POST /sessions/{id}/seed          {"frame_index": n, "vertices": [[x, y], ...]}
///   POST /sessions/{id}/step          advance one frame
///   POST /sessions/{id}/run           advance until input is needed
///   GET  /sessions/{id}/events        server-sent events (state / mask)
///
/// Illegal transitions answer 409, malformed bodies 400, unknown ids 404.
class Server {
public:
    Server(std::filesystem::path frames_root, std::filesystem::path run_root, session::Config config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and serves until stop(). Throws egoseg::Error when the port is unavailable.
    void listen(const std::string& host, int port);
    /// Binds to a free port and returns it; call serve() afterwards.
    int bind_any_port(const std::string& host);
    void bind(const std::string& host, int port);
    void serve();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace egoseg::service
