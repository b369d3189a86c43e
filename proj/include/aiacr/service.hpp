#pragma once

// HTTP revision service. Sessions live in memory; each session serialises its
// own requests while different sessions run concurrently against a shared,
// read-only model that can be swapped between requests.
//
//   POST /sessions              {"v":1,"image":{"shape":[H,W],"data":[...]},
//                                "mask":<rle>,"window":{"level":L,"width":W}}
//   POST /sessions/{id}/clicks  {"v":1,"row":r,"col":c}
//   POST /sessions/{id}/undo
//   GET  /sessions/{id}
//   GET  /healthz

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "aiacr/network.hpp"

namespace httplib {
class Server;
}

namespace aiacr {

/// Boundary pixels grouped into 8-connected chains. Each chain starts at its
/// row-major-first pixel and steps to an unvisited neighbour (4-neighbours
/// before diagonals) until stuck; every contour pixel appears exactly once.
std::vector<std::vector<Point>> ordered_contours(const BinaryMask& mask);

struct ServiceConfig {
    std::chrono::seconds session_ttl{3600};
    std::size_t max_body_bytes = 8u << 20;
};

class RevisionService {
public:
    struct Response {
        int status = 200;
        nlohmann::json body;
    };

    RevisionService(std::shared_ptr<const RevisionNetwork> model, ServiceConfig config = {});

    /// Takes effect for requests that start after the call.
    void swap_model(std::shared_ptr<const RevisionNetwork> model);
    std::shared_ptr<const RevisionNetwork> model() const;

    Response create_session(const std::string& body);
    Response apply_click(const std::string& id, const std::string& body);
    Response undo(const std::string& id);
    Response get_session(const std::string& id);
    Response health() const;

    /// Drops sessions idle for longer than the TTL; returns how many.
    std::size_t evict_expired(std::chrono::steady_clock::time_point now);
    std::size_t session_count() const;

    /// Click map the model saw on the session's latest revision.
    std::optional<ClickMap> last_click_map(const std::string& id) const;

    void mount(httplib::Server& server);
    const ServiceConfig& config() const { return config_; }

private:
    struct Session {
        std::mutex mutex;
        std::string id;
        Grid<double> image;
        nlohmann::json window;
        BinaryMask current;
        std::vector<Click> clicks;
        std::vector<BinaryMask> history;  ///< mask before each applied click
        ClickMap last_click_map;
        std::int64_t created_ms = 0;
        std::int64_t updated_ms = 0;
        std::chrono::steady_clock::time_point touched;
    };

    std::shared_ptr<Session> find(const std::string& id);
    nlohmann::json revision_body(const Session& s) const;

    ServiceConfig config_;
    mutable std::mutex model_mutex_;
    std::shared_ptr<const RevisionNetwork> model_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace aiacr
