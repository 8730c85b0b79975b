#include "hilayout/server.hpp"

#include <filesystem>

#include <httplib.h>

#include "hilayout/error.hpp"
#include "hilayout/metrics.hpp"

namespace hilayout {

using nlohmann::json;

namespace {

json rel_json(const RelPlacement& r) {
    return {{"position", {r.position.x, r.position.y}}, {"theta", r.theta.degrees()}};
}

json error_json(const std::string& code, const std::string& message) {
    return {{"error", {{"code", code}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, error_json(code, message));
}

bool wants_text(const httplib::Request& req) {
    return req.get_header_value("Accept").find(kStructuredTextType) != std::string::npos;
}

/// Map pipeline failures onto statuses: unusable scenes are 422, provider
/// trouble is 502, malformed requests are 400.
void send_exception(httplib::Response& res) {
    try {
        throw;
    } catch (const ProviderError& e) {
        send_error(res, 502, e.code(), e.what());
    } catch (const FixtureMissing& e) {
        send_error(res, 502, e.code(), e.what());
    } catch (const Error& e) {
        json body = error_json(e.code(), e.what());
        body["report"] = {{"errors", json::array({{{"code", e.kind()}, {"path", "document"}, {"message", e.what()}}})},
                          {"repairs", json::array()},
                          {"dropped", json::array()}};
        send_json(res, 422, body);
    } catch (const json::exception& e) {
        send_error(res, 400, "server.BadRequest", e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 400, "server.BadRequest", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "server.Internal", e.what());
    }
}

json report_json(const io::ValidationReport& r) {
    return {{"repairs", r.repairs}, {"dropped", r.dropped}};
}

}  // namespace

json scene_document(const Session& s, bool network) {
    const auto& l = s.layout;
    json prov = json::array();
    for (const auto& o : l.objects) {
        const auto* area = l.hierarchy.find_area(o.area);
        const bool anchor = area && area->anchor == o.id;
        json p{{"id", o.id}, {"area", o.area}, {"anchor", anchor}};
        p["source"] = anchor ? "solver" : (network ? "network" : "rule");
        if (o.relation) p["relation"] = *o.relation;
        if (o.target) p["target"] = rel_json(*o.target);
        if (!anchor) {
            const auto* a = l.find(area->anchor);
            if (a) p["realized"] = rel_json(rel(o.pose, a->pose));
        }
        if (const auto& asset = l.hierarchy.objects.at(o.id).asset) p["asset"] = *asset;
        prov.push_back(std::move(p));
    }
    return {{"session", s.id}, {"version", s.version}, {"format", io::kFormatVersion},
            {"document", io::to_json(l)}, {"provenance", prov}};
}

SceneServer::SceneServer(std::shared_ptr<const Pipeline> pipeline, ServerConfig cfg)
    : pipeline_(std::move(pipeline)), cfg_(std::move(cfg)), http_(std::make_unique<httplib::Server>()) {
    const int workers = std::max(1, cfg_.workers);
    const std::size_t queued = cfg_.max_queued;
    http_->new_task_queue = [workers, queued] { return new httplib::ThreadPool(workers, queued); };
    routes();
}

SceneServer::~SceneServer() { stop(); }

int SceneServer::bind() {
    const int port = cfg_.port == 0 ? http_->bind_to_any_port(cfg_.host) : (http_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
    if (port < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    return port;
}

void SceneServer::listen() { http_->listen_after_bind(); }

void SceneServer::stop() {
    if (http_->is_running()) http_->stop();
    snapshot();
}

bool SceneServer::running() const { return http_->is_running(); }

std::size_t SceneServer::session_count() const {
    std::shared_lock lock(sessions_mu_);
    return sessions_.size();
}

std::shared_ptr<Session> SceneServer::find(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void SceneServer::snapshot() const {
    if (cfg_.snapshot_dir.empty()) return;
    std::filesystem::create_directories(cfg_.snapshot_dir);
    std::shared_lock lock(sessions_mu_);
    for (const auto& [id, s] : sessions_) {
        std::lock_guard session_lock(s->mu);
        io::write_file((std::filesystem::path(cfg_.snapshot_dir) / (id + ".hilayout")).string(),
                       io::serialize(s->layout).text);
    }
}

void SceneServer::routes() {
    auto& srv = *http_;
    const bool network = pipeline_->uses_network();

    auto send_scene = [network](const httplib::Request& req, httplib::Response& res, const Session& s, int status,
                                json extra = json::object()) {
        if (wants_text(req)) {
            res.status = status;
            res.set_content(io::serialize(s.layout).text, kStructuredTextType);
            return;
        }
        json body = scene_document(s, network);
        body.update(extra);
        send_json(res, status, body);
    };

    srv.Get("/healthz", [this, network](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"sessions", session_count()}, {"network", network}});
    });

    srv.Post("/sessions", [this, send_scene](const httplib::Request& req, httplib::Response& res) {
        try {
            const json body = json::parse(req.body);
            const std::string requirement = body.at("requirement").get<std::string>();
            const auto size = body.at("size");
            if (!size.is_array() || size.size() != 2) throw std::invalid_argument("size must be [width, depth]");
            const Vec2 room{size[0].get<double>(), size[1].get<double>()};
            auto s = std::make_shared<Session>();
            s->seed = body.value("seed", cfg_.seed);
            s->layout = pipeline_->synth(requirement, room, s->seed).layout;
            {
                std::unique_lock lock(sessions_mu_);
                s->id = "s" + std::to_string(next_id_++);
                sessions_[s->id] = s;
            }
            res.set_header("Location", "/sessions/" + s->id);
            std::lock_guard lock(s->mu);
            send_scene(req, res, *s, 201);
        } catch (...) {
            send_exception(res);
        }
    });

    srv.Get(R"(/sessions/([A-Za-z0-9_-]+)/scene)", [this, send_scene](const httplib::Request& req, httplib::Response& res) {
        const auto s = find(req.matches[1]);
        if (!s) return send_error(res, 404, "server.UnknownSession", "no session " + std::string(req.matches[1]));
        std::lock_guard lock(s->mu);
        send_scene(req, res, *s, 200);
    });

    srv.Get(R"(/sessions/([A-Za-z0-9_-]+)/scene\.svg)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto s = find(req.matches[1]);
        if (!s) return send_error(res, 404, "server.UnknownSession", "no session " + std::string(req.matches[1]));
        std::lock_guard lock(s->mu);
        res.set_content(render_svg(s->layout), "image/svg+xml");
    });

    srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/edits)", [this, send_scene](const httplib::Request& req, httplib::Response& res) {
        const auto s = find(req.matches[1]);
        if (!s) return send_error(res, 404, "server.UnknownSession", "no session " + std::string(req.matches[1]));
        try {
            const json body = json::parse(req.body);
            const std::string instruction = body.at("instruction").get<std::string>();
            std::lock_guard lock(s->mu);
            auto r = pipeline_->edit(s->layout, instruction, s->seed);
            s->history.push_back(std::move(s->layout));
            while (s->history.size() > cfg_.history) s->history.pop_front();
            s->layout = std::move(r.layout);
            ++s->version;
            json deltas = json::array();
            for (const auto& d : r.deltas) {
                deltas.push_back({{"id", d.id}, {"kind", to_string(d.kind)}, {"distance", d.distance}, {"turns", d.turns}});
            }
            send_scene(req, res, *s, 200, {{"deltas", deltas}, {"report", report_json(r.repair)}});
        } catch (...) {
            send_exception(res);
        }
    });

    srv.Post(R"(/sessions/([A-Za-z0-9_-]+)/undo)", [this, send_scene](const httplib::Request& req, httplib::Response& res) {
        const auto s = find(req.matches[1]);
        if (!s) return send_error(res, 404, "server.UnknownSession", "no session " + std::string(req.matches[1]));
        std::lock_guard lock(s->mu);
        if (s->history.empty()) return send_error(res, 409, "server.NothingToUndo", "no earlier snapshot");
        s->layout = std::move(s->history.back());
        s->history.pop_back();
        ++s->version;
        send_scene(req, res, *s, 200);
    });

    if (!cfg_.static_dir.empty()) {
        if (!srv.set_mount_point("/", cfg_.static_dir)) throw IoError("static directory not found: " + cfg_.static_dir);
    } else {
        srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<!doctype html><title>hilayout</title><p>No UI bundle mounted; see /healthz.</p>\n",
                            "text/html");
        });
    }
}

}  // namespace hilayout
