#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "hilayout/pipeline.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace hilayout {

inline constexpr const char* kStructuredTextType = "text/x-hilayout";

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;             ///< 0 binds any free port
    std::string static_dir;      ///< built UI assets, served under /
    std::string snapshot_dir;    ///< when set, sessions are written here on stop
    std::size_t history = 50;    ///< undo snapshots kept per session
    std::uint64_t seed = 1;
    int workers = 4;
    std::size_t max_queued = 64;
};

struct Session {
    std::string id;
    std::uint64_t seed = 0;
    SceneLayout layout;
    std::deque<SceneLayout> history;  ///< oldest first
    long version = 0;
    std::mutex mu;
};

/// Scene document with per-object provenance, as sent over the wire.
nlohmann::json scene_document(const Session& s, bool network);

/// HTTP front end over a Pipeline: sessions in memory, one mutation at a
/// time per session, requests handled by a bounded worker pool.
class SceneServer {
public:
    SceneServer(std::shared_ptr<const Pipeline> pipeline, ServerConfig cfg);
    ~SceneServer();

    /// Binds and returns the port.
    int bind();
    /// Serves until stop(); call bind() first.
    void listen();
    void stop();
    bool running() const;

    std::size_t session_count() const;

private:
    void routes();
    std::shared_ptr<Session> find(const std::string& id) const;
    void snapshot() const;

    std::shared_ptr<const Pipeline> pipeline_;
    ServerConfig cfg_;
    std::unique_ptr<httplib::Server> http_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    long next_id_ = 1;
};

}  // namespace hilayout
