#include "aiacr/service.hpp"

#include <httplib.h>

#include <random>

#include "aiacr/serialization.hpp"

namespace aiacr {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<std::vector<Point>> ordered_contours(const BinaryMask& mask) {
    const ContourPointSet contour = extract_contour(mask);
    Grid<std::uint8_t> pending(mask.shape(), 0);
    for (const Point& p : contour.points()) pending(p.row, p.col) = 1;
    static constexpr int kSteps[8][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}, {1, 1}, {1, -1}, {-1, -1}, {-1, 1}};
    std::vector<std::vector<Point>> chains;
    for (const Point& start : contour.points()) {
        if (!pending(start.row, start.col)) continue;
        std::vector<Point> chain{start};
        pending(start.row, start.col) = 0;
        Point at = start;
        for (bool moved = true; moved;) {
            moved = false;
            for (const auto& s : kSteps) {
                const Point next{at.row + s[0], at.col + s[1]};
                if (mask.shape().contains(next.row, next.col) && pending(next.row, next.col)) {
                    pending(next.row, next.col) = 0;
                    chain.push_back(next);
                    at = next;
                    moved = true;
                    break;
                }
            }
        }
        chains.push_back(std::move(chain));
    }
    return chains;
}

namespace {

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string new_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    return buf;
}

RevisionService::Response error(int status, ErrorCode code, const std::string& message) {
    return {status, {{"v", 1}, {"error", to_string(code)}, {"message", message}}};
}

json contours_json(const BinaryMask& mask) {
    json out = json::array();
    for (const auto& chain : ordered_contours(mask)) {
        json pts = json::array();
        for (const Point& p : chain) pts.push_back({p.row, p.col});
        out.push_back(pts);
    }
    return out;
}

json parse_body(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
    if (j.value("v", 0) != 1) fail(ErrorCode::UnsupportedFormat, "requests must carry \"v\": 1");
    return j;
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::OutOfBounds: return 422;
        case ErrorCode::UnsupportedFormat:
        case ErrorCode::ShapeMismatch:
        case ErrorCode::InvalidArgument:
        case ErrorCode::OutOfRange:
        case ErrorCode::CorruptHeader: return 400;
        default: return 500;
    }
}

template <class F>
RevisionService::Response guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return error(status_for(e.code()), e.code(), e.what());
    } catch (const json::exception& e) {
        return error(400, ErrorCode::InvalidArgument, e.what());
    }
}

}  // namespace

RevisionService::RevisionService(std::shared_ptr<const RevisionNetwork> model, ServiceConfig config)
    : config_(config), model_(std::move(model)) {
    if (!model_) fail(ErrorCode::InvalidArgument, "the service needs a model");
}

void RevisionService::swap_model(std::shared_ptr<const RevisionNetwork> model) {
    if (!model) fail(ErrorCode::InvalidArgument, "cannot swap in an empty model");
    std::lock_guard lock(model_mutex_);
    model_ = std::move(model);
}

std::shared_ptr<const RevisionNetwork> RevisionService::model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
}

std::shared_ptr<RevisionService::Session> RevisionService::find(const std::string& id) {
    evict_expired(Clock::now());
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

json RevisionService::revision_body(const Session& s) const {
    json clicks = json::array();
    for (const Click& c : s.clicks) clicks.push_back(to_json(c));
    return {{"v", 1},
            {"session_id", s.id},
            {"contours", contours_json(s.current)},
            {"mask", to_json(encode_rle(s.current))},
            {"empty_mask", s.current.empty()},
            {"clicks", clicks}};
}

RevisionService::Response RevisionService::create_session(const std::string& body) {
    if (body.size() > config_.max_body_bytes) return error(413, ErrorCode::InvalidArgument, "payload too large");
    return guarded([&]() -> Response {
        const json j = parse_body(body);
        const json& img = j.at("image");
        const Shape shape{img.at("shape").at(0).get<int>(), img.at("shape").at(1).get<int>()};
        const int size = model()->config().input_size;
        if (shape != Shape{size, size}) {
            fail(ErrorCode::ShapeMismatch, "image must be " + std::to_string(size) + "x" + std::to_string(size));
        }
        const auto& data = img.at("data");
        if (!data.is_array() || data.size() != shape.area()) fail(ErrorCode::ShapeMismatch, "image data length differs from its shape");
        auto s = std::make_shared<Session>();
        s->image = Grid<double>(shape);
        for (std::size_t i = 0; i < shape.area(); ++i) {
            const double v = data[i].get<double>();
            if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRange, "image values must lie in [0, 1]");
            s->image.values()[i] = v;
        }
        s->current = j.contains("mask") ? decode_rle(rle_from_json(j.at("mask"))) : BinaryMask(shape);
        if (s->current.shape() != shape) fail(ErrorCode::ShapeMismatch, "mask shape differs from the image");
        s->window = j.value("window", json::object());
        s->id = new_id();
        s->created_ms = s->updated_ms = wall_ms();
        s->touched = Clock::now();
        json out = revision_body(*s);
        {
            std::lock_guard lock(sessions_mutex_);
            sessions_[s->id] = s;
        }
        return {201, out};
    });
}

RevisionService::Response RevisionService::apply_click(const std::string& id, const std::string& body) {
    const auto total_start = Clock::now();
    const auto s = find(id);
    if (!s) return error(404, ErrorCode::InvalidArgument, "unknown session");
    return guarded([&]() -> Response {
        const json j = parse_body(body);
        const int row = j.at("row").get<int>();
        const int col = j.at("col").get<int>();
        std::lock_guard lock(s->mutex);
        if (!s->image.shape().contains(row, col)) fail(ErrorCode::OutOfBounds, "click lies outside the image");
        const auto model_ref = model();
        std::vector<Click> clicks = s->clicks;
        clicks.push_back({row, col, static_cast<int>(clicks.size()) + 1});
        ClickMap map = encode_clicks(clicks, s->image.shape());
        const RevisionInput input = make_revision_input(s->image, s->current, map);
        const auto model_start = Clock::now();
        const ProbabilityMap p = model_ref->forward(input);
        const double model_ms = std::chrono::duration<double, std::milli>(Clock::now() - model_start).count();

        s->history.push_back(s->current);
        s->current = to_mask(p);
        s->clicks = std::move(clicks);
        s->last_click_map = std::move(map);
        s->updated_ms = wall_ms();
        s->touched = Clock::now();
        json out = revision_body(*s);
        out["latency"] = {{"model_ms", model_ms},
                          {"total_ms", std::chrono::duration<double, std::milli>(Clock::now() - total_start).count()}};
        return {200, out};
    });
}

RevisionService::Response RevisionService::undo(const std::string& id) {
    const auto s = find(id);
    if (!s) return error(404, ErrorCode::InvalidArgument, "unknown session");
    std::lock_guard lock(s->mutex);
    if (s->history.empty()) return error(409, ErrorCode::InvalidArgument, "nothing to undo");
    s->current = std::move(s->history.back());
    s->history.pop_back();
    s->clicks.pop_back();
    s->last_click_map = s->clicks.empty() ? ClickMap() : encode_clicks(s->clicks, s->image.shape());
    s->updated_ms = wall_ms();
    s->touched = Clock::now();
    return {200, revision_body(*s)};
}

RevisionService::Response RevisionService::get_session(const std::string& id) {
    const auto s = find(id);
    if (!s) return error(404, ErrorCode::InvalidArgument, "unknown session");
    std::lock_guard lock(s->mutex);
    json out = revision_body(*s);
    json history = json::array();
    for (const auto& m : s->history) history.push_back(to_json(encode_rle(m)));
    out["shape"] = {s->image.height(), s->image.width()};
    out["window"] = s->window;
    out["history"] = history;
    out["created_ms"] = s->created_ms;
    out["updated_ms"] = s->updated_ms;
    return {200, out};
}

RevisionService::Response RevisionService::health() const {
    const auto m = model();
    return {200,
            {{"v", 1},
             {"status", "ok"},
             {"sessions", session_count()},
             {"model", {{"input_size", m->config().input_size}, {"parameters", m->parameter_count()}}}}};
}

std::size_t RevisionService::evict_expired(Clock::time_point now) {
    std::lock_guard lock(sessions_mutex_);
    std::size_t n = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
        // A session busy with a request is in use, not idle.
        if (session_lock.owns_lock() && now - it->second->touched > config_.session_ttl) {
            session_lock.unlock();
            it = sessions_.erase(it);
            ++n;
        } else {
            ++it;
        }
    }
    return n;
}

std::size_t RevisionService::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

std::optional<ClickMap> RevisionService::last_click_map(const std::string& id) const {
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(sessions_mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) return std::nullopt;
        s = it->second;
    }
    std::lock_guard lock(s->mutex);
    if (s->clicks.empty()) return std::nullopt;
    return s->last_click_map;
}

void RevisionService::mount(httplib::Server& server) {
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.set_payload_max_length(config_.max_body_bytes);
    server.Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, create_session(req.body));
    });
    server.Post(R"(/sessions/([0-9a-f]+)/clicks)", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, apply_click(req.matches[1], req.body));
    });
    server.Post(R"(/sessions/([0-9a-f]+)/undo)", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, undo(req.matches[1]));
    });
    server.Get(R"(/sessions/([0-9a-f]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, get_session(req.matches[1]));
    });
    server.Get("/healthz", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        const ErrorCode code = ErrorCode::InvalidArgument;
        const char* message = res.status == 413 ? "payload too large" : "no such endpoint";
        res.set_content(json{{"v", 1}, {"error", to_string(code)}, {"message", message}}.dump(), "application/json");
    });
}

}  // namespace aiacr
