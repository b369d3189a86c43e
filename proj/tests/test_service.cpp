#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <random>
#include <set>
#include <thread>

#include "aiacr/checkpoint.hpp"
#include "aiacr/serialization.hpp"
#include "aiacr/service.hpp"
#include "oracles.hpp"

using namespace aiacr;
using nlohmann::json;

namespace {

NetworkConfig toy_config() {
    NetworkConfig c;
    c.base_features = 2;
    c.max_features = 4;
    return c;
}

// Round trip through a checkpoint file so the service runs what a deployment would load.
std::shared_ptr<const RevisionNetwork> toy_model() {
    const RevisionNetwork net(toy_config(), 11);
    Checkpoint ck;
    ck.network = net.config();
    ck.parameters.assign(net.parameters().begin(), net.parameters().end());
    const auto path = std::filesystem::temp_directory_path() / "aiacr_service_toy.ckpt";
    save_checkpoint(path, ck);
    auto loaded = std::make_shared<const RevisionNetwork>(load_network(path));
    std::filesystem::remove(path);
    return loaded;
}

BinaryMask disc(Shape s, int r0, int c0, int radius) {
    BinaryMask m(s);
    for (int r = 0; r < s.height; ++r) {
        for (int c = 0; c < s.width; ++c) m.set(r, c, (r - r0) * (r - r0) + (c - c0) * (c - c0) <= radius * radius);
    }
    return m;
}

json create_body(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    json data = json::array();
    for (int i = 0; i < size * size; ++i) data.push_back(u(rng));
    return {{"v", 1},
            {"image", {{"shape", {size, size}}, {"data", data}}},
            {"mask", to_json(encode_rle(disc({size, size}, size / 2, size / 2, size / 5)))},
            {"window", {{"level", 40}, {"width", 400}}}};
}

json click_body(int row, int col) { return {{"v", 1}, {"row", row}, {"col", col}}; }

BinaryMask mask_of(const json& response) { return decode_rle(rle_from_json(response.at("mask"))); }

struct Harness {
    std::shared_ptr<RevisionService> service;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit Harness(ServiceConfig config = {}) : service(std::make_shared<RevisionService>(toy_model(), config)) {
        service->mount(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~Harness() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(120, 0);
        return c;
    }
};

std::string post_session(httplib::Client& c, const json& body) {
    const auto res = c.Post("/sessions", body.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    return json::parse(res->body).at("session_id").get<std::string>();
}

}  // namespace

TEST_CASE("ordered_contours covers the contour exactly with 8-adjacent steps") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
        const BinaryMask m = oracle::random_mask(rng, {24, 24});
        const auto chains = ordered_contours(m);
        std::set<std::pair<int, int>> seen;
        for (const auto& chain : chains) {
            REQUIRE_FALSE(chain.empty());
            for (std::size_t i = 0; i < chain.size(); ++i) {
                CHECK(seen.insert({chain[i].row, chain[i].col}).second);
                if (i > 0) {
                    CHECK(std::abs(chain[i].row - chain[i - 1].row) <= 1);
                    CHECK(std::abs(chain[i].col - chain[i - 1].col) <= 1);
                }
            }
        }
        std::set<std::pair<int, int>> expected;
        for (const Point& p : oracle::contour(m)) expected.insert({p.row, p.col});
        CHECK(seen == expected);
    }
}

TEST_CASE("session lifecycle over HTTP") {
    Harness h;
    auto c = h.client();
    const json body = create_body(256, 1);
    const BinaryMask initial = mask_of(body);

    const auto created = c.Post("/sessions", body.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const json cj = json::parse(created->body);
    CHECK(cj.at("v") == 1);
    CHECK(cj.at("empty_mask") == false);
    CHECK(mask_of(cj) == initial);
    const std::string id = cj.at("session_id");

    const auto clicked = c.Post("/sessions/" + id + "/clicks", click_body(100, 140).dump(), "application/json");
    REQUIRE(clicked);
    CHECK(clicked->status == 200);
    const json kj = json::parse(clicked->body);
    CHECK(kj.at("latency").at("model_ms").get<double>() > 0.0);
    CHECK(kj.at("latency").at("total_ms").get<double>() >= kj.at("latency").at("model_ms").get<double>());
    CHECK(kj.at("clicks").size() == 1);

    // Returned contour points lie on the boundary of the returned mask.
    const BinaryMask revised = mask_of(kj);
    std::set<std::pair<int, int>> boundary;
    for (const Point& p : oracle::contour(revised)) boundary.insert({p.row, p.col});
    std::size_t n = 0;
    for (const auto& chain : kj.at("contours")) {
        for (const auto& p : chain) {
            CHECK(boundary.count({p[0].get<int>(), p[1].get<int>()}) == 1);
            ++n;
        }
    }
    CHECK(n == boundary.size());

    // The click channel the model saw matches the reference encoding.
    const auto map = h.service->last_click_map(id);
    REQUIRE(map);
    const ClickMap expected = oracle::click_map({{100, 140, 1}}, {256, 256});
    double worst = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) worst = std::max(worst, std::abs(map->values()[i] - expected.values()[i]));
    CHECK(worst < 1e-12);

    const auto snapshot = c.Get("/sessions/" + id);
    REQUIRE(snapshot);
    CHECK(snapshot->status == 200);
    const json sj = json::parse(snapshot->body);
    CHECK(sj.at("history").size() == 1);
    CHECK(sj.at("window").at("level") == 40);
    CHECK(mask_of(sj) == revised);

    const auto undone = c.Post("/sessions/" + id + "/undo", "", "application/json");
    REQUIRE(undone);
    CHECK(undone->status == 200);
    CHECK(mask_of(json::parse(undone->body)) == initial);
    CHECK(json::parse(undone->body).at("clicks").empty());
    CHECK_FALSE(h.service->last_click_map(id));

    const auto again = c.Post("/sessions/" + id + "/undo", "", "application/json");
    REQUIRE(again);
    CHECK(again->status == 409);

    const auto health = c.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body).at("sessions") == 1);
}

TEST_CASE("error statuses") {
    ServiceConfig config;
    config.max_body_bytes = 2u << 20;
    Harness h(config);
    auto c = h.client();
    const std::string id = post_session(c, create_body(256, 2));

    auto status = [](const httplib::Result& r) { return r ? r->status : -1; };
    CHECK(status(c.Post("/sessions/0123abcd/clicks", click_body(1, 1).dump(), "application/json")) == 404);
    CHECK(status(c.Get("/sessions/0123abcd")) == 404);
    CHECK(status(c.Post("/sessions/" + id + "/clicks", click_body(256, 3).dump(), "application/json")) == 422);
    CHECK(status(c.Post("/sessions/" + id + "/clicks", click_body(-1, 3).dump(), "application/json")) == 422);
    CHECK(status(c.Post("/sessions/" + id + "/clicks", "{not json", "application/json")) == 400);
    CHECK(status(c.Post("/sessions", create_body(300, 3).dump(), "application/json")) == 400);
    json no_version = create_body(256, 4);
    no_version.erase("v");
    CHECK(status(c.Post("/sessions", no_version.dump(), "application/json")) == 400);
    json bad_mask = create_body(256, 5);
    bad_mask["mask"] = to_json(encode_rle(BinaryMask({8, 8})));
    CHECK(status(c.Post("/sessions", bad_mask.dump(), "application/json")) == 400);
    CHECK(status(c.Post("/sessions", std::string(3u << 20, ' '), "application/json")) == 413);

    const auto bad = c.Post("/sessions/" + id + "/clicks", click_body(999, 0).dump(), "application/json");
    REQUIRE(bad);
    const json ej = json::parse(bad->body);
    CHECK(ej.at("v") == 1);
    CHECK(ej.at("error") == "OutOfBounds");

    // Failed requests leave the session untouched.
    const json sj = json::parse(c.Get("/sessions/" + id)->body);
    CHECK(sj.at("clicks").empty());
    CHECK(sj.at("history").empty());
}

TEST_CASE("replaying a click sequence reproduces every mask") {
    Harness h;
    auto c = h.client();
    const json body = create_body(256, 6);
    const std::vector<std::pair<int, int>> seq{{120, 128}, {60, 200}, {180, 90}};
    std::vector<std::vector<BinaryMask>> runs(2);
    for (auto& run : runs) {
        const std::string id = post_session(c, body);
        for (const auto& [r, col] : seq) {
            const auto res = c.Post("/sessions/" + id + "/clicks", click_body(r, col).dump(), "application/json");
            REQUIRE(res);
            REQUIRE(res->status == 200);
            run.push_back(mask_of(json::parse(res->body)));
        }
    }
    CHECK(runs[0] == runs[1]);
}

TEST_CASE("concurrent clicks on one session are serialised") {
    Harness h;
    const std::string id = [&] {
        auto c = h.client();
        return post_session(c, create_body(256, 7));
    }();
    std::vector<std::thread> workers;
    std::atomic<int> ok{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&, t] {
            auto c = h.client();
            const auto res = c.Post("/sessions/" + id + "/clicks", click_body(40 + 30 * t, 50).dump(), "application/json");
            if (res && res->status == 200) ++ok;
        });
    }
    for (auto& w : workers) w.join();
    CHECK(ok == 4);
    auto c = h.client();
    const json sj = json::parse(c.Get("/sessions/" + id)->body);
    REQUIRE(sj.at("clicks").size() == 4);
    CHECK(sj.at("history").size() == 4);
    std::set<int> rows;
    for (int i = 0; i < 4; ++i) {
        CHECK(sj.at("clicks")[i].at("ordinal") == i + 1);
        rows.insert(sj.at("clicks")[i].at("row").get<int>());
    }
    CHECK(rows == std::set<int>{40, 70, 100, 130});
}

TEST_CASE("idle sessions expire and the model can be swapped") {
    ServiceConfig config;
    config.session_ttl = std::chrono::seconds(5);
    RevisionService service(toy_model(), config);
    const auto created = service.create_session(create_body(256, 8).dump());
    REQUIRE(created.status == 201);
    const std::string id = created.body.at("session_id");
    CHECK(service.evict_expired(std::chrono::steady_clock::now()) == 0);
    CHECK(service.session_count() == 1);
    CHECK(service.evict_expired(std::chrono::steady_clock::now() + std::chrono::seconds(6)) == 1);
    CHECK(service.get_session(id).status == 404);

    const auto before = service.model();
    service.swap_model(std::make_shared<const RevisionNetwork>(toy_config(), 12));
    CHECK(service.model() != before);
    CHECK_THROWS_AS(service.swap_model(nullptr), Error);
}
